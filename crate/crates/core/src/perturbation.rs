//! First-order eigenvalue responses at the equilateral triangle and the
//! square, their local upper bounds, and a finite-difference harness that
//! measures the same slopes from certified brackets.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bounds::{certified_ratio_mesh, BracketOptions};
use crate::error::{invalid, Result};
use crate::mesher::{refine_quadrilateral_with, refine_triangle, QuadSplit};
use crate::scalar::{Point2, Real};

/// Unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction2<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> Direction2<T> {
    pub fn new(a: T, b: T) -> Result<Self> {
        if !((a * a + b * b - T::one()).abs() <= T::lit(1e-12)) {
            return invalid(format!("({a}, {b}) is not a unit vector"));
        }
        Ok(Self { a, b })
    }

    pub fn from_angle(theta: T) -> Self {
        Self { a: theta.cos(), b: theta.sin() }
    }
}

/// First-order responses for one perturbation direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport<T> {
    pub nu1: T,
    pub nu2: T,
    /// Larger eigenvalue of the same 2 × 2 block as `nu2`.
    pub nu3: T,
    pub ratio_slope: T,
    /// Radius below which the local upper bound stays under the unperturbed ratio.
    pub local_radius: T,
}

fn pi<T: Real>() -> T {
    T::PI()
}

/// Slope magnitude of the triangle's local bound, `6561√3/(1600π²)`.
pub fn tri_slope_magnitude<T: Real>() -> T {
    T::lit(6561.0) * T::sqrt3() / (T::lit(1600.0) * pi::<T>() * pi::<T>())
}

/// Second-order constant of the triangle's local bound on t ∈ [0, 1/2].
pub const TRI_SECOND_ORDER: f64 = 295.0;

/// Slope magnitude and second-order constant of the square's local bound.
pub const QUAD_SLOPE_MIN: f64 = 0.509475;
pub const QUAD_SLOPE_MAX: f64 = 1.060661;
pub const QUAD_SECOND_ORDER: f64 = 336.972;

/// Responses at the equilateral triangle with the apex moved by `t(a, b)`.
pub fn tri_first_order<T: Real>(dir: Direction2<T>) -> PerturbationReport<T> {
    let p2 = pi::<T>() * pi::<T>();
    let scale = T::lit(4.0) * T::sqrt3() / T::lit(3.0);
    let lam1 = T::lit(16.0) * p2 / T::lit(3.0);
    let lam2 = T::lit(112.0) * p2 / T::lit(9.0);
    let shear = T::lit(22400.0) * dir.b * p2;
    let nu1 = scale * dir.b * (-T::lit(8.0) * p2 / T::lit(3.0));
    let nu2 = scale * (-T::lit(59049.0) - shear) / T::lit(3600.0);
    let nu3 = scale * (T::lit(59049.0) - shear) / T::lit(3600.0);
    let ratio_slope = (nu2 * lam1 - nu1 * lam2) / (lam1 * lam1);
    PerturbationReport {
        nu1,
        nu2,
        nu3,
        ratio_slope,
        local_radius: tri_slope_magnitude::<T>() / T::lit(TRI_SECOND_ORDER),
    }
}

/// `7/3 − (6561√3/(1600π²)) t + 295 t²`, valid for t ∈ [0, 1/2].
pub fn tri_local_upper<T: Real>(t: T) -> Result<T> {
    if !(t >= T::zero() && t <= T::lit(0.5)) {
        return invalid(format!("t = {t} outside [0, 1/2]"));
    }
    Ok(T::lit(7.0) / T::lit(3.0) - tri_slope_magnitude::<T>() * t + T::lit(TRI_SECOND_ORDER) * t * t)
}

/// Responses of the square for corner (1,1) moved by `t(a, b)` and corner
/// (0,1) moved by `s(c, −d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadReport<T> {
    pub t: PerturbationReport<T>,
    pub s: PerturbationReport<T>,
}

/// `√(16384(a+b)² + 729(a−b)²π⁴)`
fn quad_split<T: Real>(dir: Direction2<T>) -> T {
    let p4 = pi::<T>().powi(4);
    let sum = dir.a + dir.b;
    let diff = dir.a - dir.b;
    (T::lit(16384.0) * sum * sum + T::lit(729.0) * diff * diff * p4).sqrt()
}

pub fn quad_first_order<T: Real>(dir_t: Direction2<T>, dir_s: Direction2<T>) -> QuadReport<T> {
    let p2 = pi::<T>() * pi::<T>();
    let lam1 = T::lit(2.0) * p2;
    let lam2 = T::lit(5.0) * p2;
    let half_gap = |d: Direction2<T>| quad_split(d) / T::lit(18.0);
    let radius = T::lit(QUAD_SLOPE_MIN) / T::lit(QUAD_SECOND_ORDER);
    let report = |nu1: T, mean: T, gap: T| {
        let nu2 = mean - gap;
        PerturbationReport {
            nu1,
            nu2,
            nu3: mean + gap,
            ratio_slope: (nu2 * lam1 - nu1 * lam2) / (lam1 * lam1),
            local_radius: radius,
        }
    };
    let five_halves = T::lit(2.5);
    QuadReport {
        t: report(-p2 * (dir_t.a + dir_t.b), -five_halves * (dir_t.a + dir_t.b) * p2, half_gap(dir_t)),
        s: report(p2 * (dir_s.a + dir_s.b), five_halves * (dir_s.a + dir_s.b) * p2, half_gap(dir_s)),
    }
}

/// Closed-form ratio slope `−√(16384(a+b)² + 729(a−b)²π⁴)/(36π²)`.
pub fn quad_ratio_slope<T: Real>(dir: Direction2<T>) -> T {
    -quad_split(dir) / (T::lit(36.0) * pi::<T>() * pi::<T>())
}

/// `5/2 − 0.509475(t+s) + 336.972(t² + s²)` for t, s ∈ [0, 1/4].
pub fn quad_local_upper<T: Real>(t: T, s: T) -> Result<T> {
    let quarter = T::lit(0.25);
    if !(t >= T::zero() && t <= quarter && s >= T::zero() && s <= quarter) {
        return invalid(format!("(t, s) = ({t}, {s}) outside [0, 1/4]²"));
    }
    Ok(T::lit(2.5) - T::lit(QUAD_SLOPE_MIN) * (t + s) + T::lit(QUAD_SECOND_ORDER) * (t * t + s * s))
}

/// Shape probed by the finite-difference harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Equilateral,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdOptions {
    pub levels: u32,
    pub tol: f64,
    /// Uncertainty above this fraction of |slope| marks the fit inconclusive.
    pub relative_threshold: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self { levels: 7, tol: 1e-10, relative_threshold: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdSample {
    pub t: f64,
    pub xi_low: f64,
    pub xi_high: f64,
}

impl FdSample {
    pub fn mid(&self) -> f64 {
        (self.xi_low + self.xi_high) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdSlope {
    pub slope: f64,
    pub uncertainty: f64,
    pub inconclusive: bool,
    pub closed_form: f64,
    pub samples: Vec<FdSample>,
}

impl FdSlope {
    /// Whether the measurement agrees with the closed form to `rel`.
    pub fn agrees(&self, rel: f64) -> bool {
        !self.inconclusive && (self.slope - self.closed_form).abs() <= rel * self.closed_form.abs()
    }
}

/// Least-squares fit `y = c0 + c1 t + c2 t²`, returns `(c1, residual standard error of c1)`.
fn quadratic_fit(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    // fit in u = t / max t to keep the normal equations well conditioned
    let scale = ts.iter().fold(0.0f64, |m, &t| m.max(t.abs()));
    let mut n = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for (&t, &y) in ts.iter().zip(ys) {
        let u = t / scale;
        let basis = [1.0, u, u * u];
        for i in 0..3 {
            r[i] += basis[i] * y;
            for j in 0..3 {
                n[i][j] += basis[i] * basis[j];
            }
        }
    }
    let inv = invert3(n);
    let c: Vec<f64> = (0..3).map(|i| (0..3).map(|j| inv[i][j] * r[j]).sum()).collect();
    let dof = ts.len() as f64 - 3.0;
    let se = if dof > 0.0 {
        let sse: f64 = ts
            .iter()
            .zip(ys)
            .map(|(&t, &y)| {
                let u = t / scale;
                (y - c[0] - c[1] * u - c[2] * u * u).powi(2)
            })
            .sum();
        (sse / dof * inv[1][1]).sqrt()
    } else {
        0.0
    };
    (c[1] / scale, se / scale)
}

fn invert3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            out[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    out
}

fn equilateral_apex() -> Point2<f64> {
    [0.5, 3f64.sqrt() / 2.0]
}

fn sample(
    shape: Shape,
    dir: Direction2<f64>,
    dir_s: Direction2<f64>,
    t: f64,
    s: f64,
    opts: &FdOptions,
) -> Result<FdSample> {
    let bracket = BracketOptions { levels: opts.levels, eps: 0.0, tol: opts.tol, inertia_check: false };
    let mesh = match shape {
        Shape::Equilateral => {
            let apex = equilateral_apex();
            refine_triangle([[0.0, 0.0], [1.0, 0.0], [apex[0] + t * dir.a, apex[1] + t * dir.b]], opts.levels)?
        }
        Shape::Square => refine_quadrilateral_with(
            [[0.0, 0.0], [1.0, 0.0], [1.0 + t * dir.a, 1.0 + t * dir.b], [s * dir_s.a, 1.0 - s * dir_s.b]],
            opts.levels,
            QuadSplit::Centroid,
        )?,
    };
    let b = certified_ratio_mesh(&mesh, opts.levels, &bracket)?;
    Ok(FdSample { t: t.max(s), xi_low: b.xi_low, xi_high: b.xi_h })
}

/// Measures the one-sided ratio slope at `shape` in direction `dir` from
/// certified brackets at `t = 0` and at each sample. For the square, `dir`
/// moves corner (1,1) and `dir_s` (when given) moves corner (0,1) instead.
pub fn fd_slope_measure(
    shape: Shape,
    dir: Direction2<f64>,
    dir_s: Option<Direction2<f64>>,
    t_samples: &[f64],
    opts: &FdOptions,
) -> Result<FdSlope> {
    if t_samples.is_empty() {
        return invalid("at least one sample is needed");
    }
    if t_samples.len() < 2 {
        return invalid("a quadratic fit through t = 0 needs at least two samples");
    }
    if t_samples.iter().any(|&t| !(t > 0.0 && t <= 0.01)) {
        return invalid("samples must lie in (0, 0.01]");
    }
    let (move_t, move_s) = match (shape, dir_s) {
        (Shape::Square, Some(_)) => (false, true),
        _ => (true, false),
    };
    let ds = dir_s.unwrap_or(dir);
    let closed_form = match shape {
        Shape::Equilateral => tri_first_order(dir).ratio_slope,
        Shape::Square => quad_ratio_slope(if move_s { ds } else { dir }),
    };
    let mut samples = vec![sample(shape, dir, ds, 0.0, 0.0, opts)?];
    for &t in t_samples {
        let (tt, ss) = (if move_t { t } else { 0.0 }, if move_s { t } else { 0.0 });
        samples.push(sample(shape, dir, ds, tt, ss, opts)?);
    }
    let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let mids: Vec<f64> = samples.iter().map(FdSample::mid).collect();
    let highs: Vec<f64> = samples.iter().map(|s| s.xi_high).collect();
    let lows: Vec<f64> = samples.iter().map(|s| s.xi_low).collect();
    let (slope, se) = quadratic_fit(&ts, &mids);
    let (up, _) = quadratic_fit(&ts, &highs);
    let (lo, _) = quadratic_fit(&ts, &lows);
    let uncertainty = (up - lo).abs() / 2.0 + se;
    let inconclusive = !(uncertainty <= opts.relative_threshold * slope.abs());
    Ok(FdSlope { slope, uncertainty, inconclusive, closed_form, samples })
}

/// Pure closed-form ratio slope at the equilateral triangle, as an `f64`.
pub fn tri_ratio_slope() -> f64 {
    -(4.0 * 3f64.sqrt() / 3.0) * 19683.0 / (6400.0 * PI * PI)
}
