//! Continuity of the ratio under apex displacement and the certified step.
//!
//! Moving the apex of the triangle (0,0), (1,0), (p,q) by (dx, dy) is the
//! linear map `A = [[1, dx/q], [0, 1 + dy/q]]`. Pulling the Rayleigh quotient
//! back through `A` changes the energy by the metric `B = A⁻¹A⁻ᵀ` and leaves
//! the mass untouched, so `γ₋ λᵢ ≤ λᵢ' ≤ γ₊ λᵢ` with `γ±` the eigenvalues of
//! `B`.
//!
//! Two step rules are provided. [`t_star`] is the published quadratic, built
//! on [`ratio_deviation_bound`]. [`sandwich_t_star`] uses the sandwich
//! directly, `ξ' ≤ ξ γ₊/γ₋`, maximized over the whole square swept by the
//! step. Only the second one is sound: see [`ContinuityEstimate`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// λ₂/λ₁ of the equilateral triangle.
pub fn equilateral_ratio<T: Real>() -> T {
    T::lit(7.0) / T::lit(3.0)
}

/// Apex displacement of size `t` in the unit direction `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShearStep<T> {
    pub q: T,
    pub t: T,
    pub a: T,
    pub b: T,
}

impl<T: Real> ShearStep<T> {
    pub fn new(q: T, t: T, a: T, b: T) -> Result<Self> {
        if !(q > T::zero()) || !(t >= T::zero()) {
            return invalid("shear step needs q > 0 and t ≥ 0");
        }
        if !((a * a + b * b - T::one()).abs() <= T::lit(1e-12)) {
            return invalid("shear direction must be a unit vector");
        }
        if !(q + t * b > T::zero()) {
            return invalid("shear step flattens the triangle");
        }
        Ok(Self { q, t, a, b })
    }

    /// Eigenvalues `(γ₋, γ₊)` of `A⁻¹A⁻ᵀ`.
    pub fn metric_eigenvalues(&self) -> (T, T) {
        metric_eigenvalues(self.q, self.t * self.a, self.t * self.b)
    }
}

/// Eigenvalues `(γ₋, γ₊)` of the pulled-back metric for the displacement
/// `(dx, dy)` of an apex at height `q`.
pub fn metric_eigenvalues<T: Real>(q: T, dx: T, dy: T) -> (T, T) {
    let alpha = dx / q;
    let delta = dy / q;
    let beta = T::one() + delta;
    // singular values of A satisfy σ₊σ₋ = β and σ₊/σ₋ + σ₋/σ₊ = 2 + e
    let e = (alpha * alpha + delta * delta) / beta;
    let rho = condition_from_excess(e);
    let s_minus = (beta / rho).sqrt();
    let s_plus = (beta * rho).sqrt();
    (T::one() / (s_plus * s_plus), T::one() / (s_minus * s_minus))
}

/// Solves `ρ + 1/ρ = 2 + e` for `ρ ≥ 1`.
fn condition_from_excess<T: Real>(e: T) -> T {
    let e = e.max(T::zero());
    (T::lit(2.0) + e + (e * (T::lit(4.0) + e)).sqrt()) / T::lit(2.0)
}

/// `γ₊ − γ₋ = t √(4q(q+tb) + t²) / (q+tb)²`
pub fn metric_gap<T: Real>(step: &ShearStep<T>) -> T {
    let ShearStep { q, t, b, .. } = *step;
    let qb = q + t * b;
    t * (T::lit(4.0) * q * qb + t * t).sqrt() / (qb * qb)
}

/// Published estimate of `|ξ' − ξ|` for a step of length at most `t` with
/// `b ≥ 0`: `(1 + ξ) t √(4q(q+t) + t²) / (23 q²)`.
pub fn ratio_deviation_bound<T: Real>(xi: T, q: T, t: T) -> T {
    (T::one() + xi) * t * (T::lit(4.0) * q * (q + t) + t * t).sqrt() / (T::lit(23.0) * q * q)
}

/// Certified step from one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepResult<T> {
    pub t_root: T,
    pub t_star: T,
    pub safety: T,
}

fn check_step_inputs<T: Real>(xi_h: T, q: T, safety: T) -> Result<()> {
    if !(q > T::zero()) || !(safety > T::zero() && safety <= T::one()) || !xi_h.is_finite() || !(xi_h > T::zero()) {
        return invalid("step needs xi_h > 0, q > 0 and 0 < safety ≤ 1");
    }
    if !(xi_h < equilateral_ratio()) {
        return Err(Error::CannotCertify { xi_h: xi_h.as_f64() });
    }
    Ok(())
}

/// Positive root of `a t² + b t + c` for `a, b > 0 > c`, without cancellation.
pub fn positive_root<T: Real>(a: T, b: T, c: T) -> T {
    let disc = b * b - T::lit(4.0) * a * c;
    T::lit(2.0) * (-c) / (b + disc.sqrt())
}

/// Step from the published quadratic
/// `((1+ξ)/(23q²)) t² + (2(1+ξ)/(23q)) t + (ξ − 7/3) = 0`, scaled by the
/// inscribed-square factor √2/2 and by `safety`.
pub fn t_star<T: Real>(xi_h: T, q: T, safety: T) -> Result<StepResult<T>> {
    check_step_inputs(xi_h, q, safety)?;
    let k = (T::one() + xi_h) / T::lit(23.0);
    let t_root = positive_root(k / (q * q), T::lit(2.0) * k / q, xi_h - equilateral_ratio());
    Ok(StepResult { t_root, t_star: t_root * T::SQRT_2() / T::lit(2.0) * safety, safety })
}

/// Largest condition number `γ₊/γ₋` over every apex in the square
/// `[p, p + side] × [q, q + side]`.
pub fn sandwich_square_kappa<T: Real>(q: T, side: T) -> T {
    let tau = side / q;
    // the excess is convex in the vertical offset, so the maximum sits at an end
    let e_top = T::lit(2.0) * tau * tau / (T::one() + tau);
    let e_bottom = tau * tau;
    let rho = condition_from_excess(e_top.max(e_bottom));
    rho * rho
}

/// `γ₊/γ₋` for a single displacement.
pub fn sandwich_kappa<T: Real>(q: T, dx: T, dy: T) -> T {
    let (lo, hi) = metric_eigenvalues(q, dx, dy);
    hi / lo
}

/// Sound bound on `|ξ' − ξ|` for the displacement `(dx, dy)`, where `ξ` is
/// the ratio at the undisplaced apex: `ξ (γ₊/γ₋ − 1)`.
pub fn sandwich_deviation_bound<T: Real>(xi: T, q: T, dx: T, dy: T) -> T {
    xi * (sandwich_kappa(q, dx, dy) - T::one())
}

/// Step from the sandwich: the largest side `t_root` with
/// `ξ_h · sandwich_square_kappa(q, t_root) = 7/3`, scaled by `safety`. No
/// inscribed-square factor is needed because the bound already covers the
/// whole square.
pub fn sandwich_t_star<T: Real>(xi_h: T, q: T, safety: T) -> Result<StepResult<T>> {
    check_step_inputs(xi_h, q, safety)?;
    let target = equilateral_ratio::<T>();
    let r = (target / xi_h).sqrt();
    // m = (R − 1)²/R with R − 1 = (R² − 1)/(R + 1) to keep digits near ξ_h ≈ 7/3
    let r_minus_one = ((target - xi_h) / xi_h) / (r + T::one());
    let m = r_minus_one * r_minus_one / r;
    let tau_top = (m + (m * m + T::lit(8.0) * m).sqrt()) / T::lit(4.0);
    let tau = tau_top.min(m.sqrt());
    // relative slack of 1e-9 keeps ξ_h κ below 7/3 after rounding whenever
    // 7/3 − ξ_h exceeds about 1e-6
    let t_root = q * tau * (T::one() - T::lit(1e-9));
    Ok(StepResult { t_root, t_star: t_root * safety, safety })
}

/// Which continuity estimate drives the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuityEstimate {
    /// `ξ' ≤ ξ γ₊/γ₋` over the certified square.
    #[default]
    Sandwich,
    /// The published quadratic. It divides an eigenvalue difference by the
    /// crude floor λ₁' ≥ 23 where the sandwich forces a division by λ₁
    /// itself, which makes it too optimistic by a factor of roughly
    /// `2ξλ₁/(23(1 + ξ))`. From (1/2, √3/2 − 0.01) it certifies a square
    /// that contains the equilateral apex.
    Published,
}

impl ContinuityEstimate {
    pub fn step<T: Real>(self, xi_h: T, q: T, safety: T) -> Result<StepResult<T>> {
        match self {
            Self::Sandwich => sandwich_t_star(xi_h, q, safety),
            Self::Published => t_star(xi_h, q, safety),
        }
    }
}
