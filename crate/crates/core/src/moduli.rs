//! Normalized triangle parameter space.
//!
//! A triangle is represented by its apex `(p, q)` over the fixed base
//! `(0,0)-(1,0)`. After scaling the longest side to the base and quotienting
//! by reflections every triangle has an apex with `p ≥ 1/2`, `q > 0` and
//! `p² + q² ≤ 1`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::{Point2, Real};

/// Apex coordinate of a normalized triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuliPoint<T> {
    pub p: T,
    pub q: T,
}

impl<T: Real> ModuliPoint<T> {
    pub fn new(p: T, q: T) -> Self {
        Self { p, q }
    }

    pub fn equilateral() -> Self {
        Self::new(T::lit(0.5), T::sqrt3() / T::lit(2.0))
    }

    /// Vertices `(0,0), (1,0), (p,q)`.
    pub fn triangle(&self) -> [Point2<T>; 3] {
        [[T::zero(), T::zero()], [T::one(), T::zero()], [self.p, self.q]]
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.q.is_finite()
    }
}

/// The part of parameter space that has to be checked numerically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec<T> {
    pub q_min: T,
    pub q_max: T,
    pub p_min: T,
    pub p_max: T,
    pub excision_radius: T,
    pub excision_center: Point2<T>,
    /// Enforce `p² + q² ≤ 1`.
    pub unit_disk: bool,
}

impl<T: Real> Default for RegionSpec<T> {
    fn default() -> Self {
        Self {
            q_min: T::lit(0.156),
            q_max: T::one(),
            p_min: T::lit(0.5),
            p_max: T::one(),
            excision_radius: T::lit(0.0022),
            excision_center: [T::lit(0.5), T::sqrt3() / T::lit(2.0)],
            unit_disk: true,
        }
    }
}

/// Which of the region constraints a point violates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Violations {
    pub unit_disk: bool,
    pub p_range: bool,
    pub q_range: bool,
    pub excision: bool,
}

impl Violations {
    pub fn none(&self) -> bool {
        !(self.unit_disk || self.p_range || self.q_range || self.excision)
    }

    /// True when the excision disk is the only violated constraint.
    pub fn only_excision(&self) -> bool {
        self.excision && !(self.unit_disk || self.p_range || self.q_range)
    }
}

impl<T: Real> RegionSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.q_min, self.q_max, self.p_min, self.p_max, self.excision_radius]
            .iter()
            .chain(self.excision_center.iter())
            .all(|v| v.is_finite());
        if !finite {
            return invalid("region bounds must be finite");
        }
        if self.q_min <= T::zero() {
            return invalid("q_min must be positive");
        }
        if self.excision_radius <= T::zero() {
            return invalid("excision radius must be positive");
        }
        if self.p_min >= self.p_max {
            return invalid("p_min must be below p_max");
        }
        if self.q_min >= self.q_max {
            return invalid("q_min must be below q_max");
        }
        Ok(())
    }

    /// Euclidean distance from the excision center.
    pub fn excision_distance(&self, pt: ModuliPoint<T>) -> T {
        (pt.p - self.excision_center[0]).hypot(pt.q - self.excision_center[1])
    }

    pub fn violations(&self, pt: ModuliPoint<T>) -> Violations {
        let (p, q) = (pt.p, pt.q);
        Violations {
            unit_disk: self.unit_disk && p * p + q * q > T::one(),
            p_range: !(p >= self.p_min && p <= self.p_max),
            q_range: !(q >= self.q_min && q <= self.q_max),
            excision: !(self.excision_distance(pt) > self.excision_radius),
        }
    }
}

/// True iff `pt` satisfies every region constraint.
pub fn in_region<T: Real>(pt: ModuliPoint<T>, spec: &RegionSpec<T>) -> bool {
    spec.violations(pt).none()
}

/// Analytic upper bound on the ratio of a triangle with apex height `q`,
/// valid for degenerating triangles.
pub fn degenerate_ratio_bound<T: Real>(q: T) -> Result<T> {
    if !(q > T::zero()) || !q.is_finite() {
        return invalid(format!("degenerate bound needs q > 0, got {q}"));
    }
    let four = T::lit(4.0);
    let cube = T::one() + (four * q * q).cbrt();
    Ok(cube * cube * cube / ((q + T::one()) * (q + T::one())))
}

/// Abscissa where the horizontal line at height `q` leaves the excision disk
/// on the right.
///
/// The returned point lies on the excision circle to machine precision and is
/// itself excluded from the region: it is the largest `p` (stepping down ulp
/// by ulp from the closed-form value) that still fails the excision test.
pub fn reentry_p<T: Real>(q: T, spec: &RegionSpec<T>) -> Result<T> {
    let r = spec.excision_radius;
    let dq = q - spec.excision_center[1];
    let radicand = r * r - dq * dq;
    if !(dq.abs() <= r) || radicand < T::zero() {
        return invalid(format!("q = {q} is outside the excision band"));
    }
    let mut p = spec.excision_center[0] + radicand.sqrt();
    let mut guard = 0;
    while spec.excision_distance(ModuliPoint::new(p, q)) > r && guard < 64 {
        p = p.round_down();
        guard += 1;
    }
    Ok(p)
}
