//! Certified two-sided eigenvalue data from the discrete solves.
//!
//! λ₁ is bounded below by Liu's estimate applied to a verified lower bound of
//! the Crouzeix–Raviart eigenvalue. λ₁ + λ₂ is bounded above by the
//! Rayleigh–Poincaré principle on two conforming P1 trial functions, and
//! λ₂ ≤ (λ₁ + λ₂)_upper − λ₁_lower.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fem::sparse::norm2;
use crate::fem::{
    assemble, eigenvalues_exceed, smallest_eigenpairs, DiscreteSystem, EigenPair, ElementKind, SolverOptions,
};
use crate::mesher::{mesh_size, refine_triangle, TriMesh};
use crate::scalar::{Point2, Real};

/// Liu's constant for the Crouzeix–Raviart interpolation error.
pub const LIU_CONSTANT: f64 = 0.1893;

/// Threshold on the normalized Gram determinant of the trial pair.
pub const GRAM_DETERMINANT_FLOOR: f64 = 1e-12;

/// Largest tolerated `‖VᵀMV − I‖_max` after re-orthonormalization.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-12;

/// `λ_h / (1 + (0.1893 h)² λ_h) − ε`
pub fn liu_lower<T: Real>(lam_h: T, h: T, eps: T) -> Result<T> {
    if !(lam_h >= T::zero()) || !(h > T::zero()) || !(eps >= T::zero()) {
        return invalid("liu_lower needs lam_h ≥ 0, h > 0 and eps ≥ 0");
    }
    let ch = T::lit(LIU_CONSTANT) * h;
    Ok(lam_h / (T::one() + ch * ch * lam_h) - eps)
}

/// Outcome of the Rayleigh–Poincaré step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayleighSum<T> {
    /// Padded upper bound on λ₁ + λ₂.
    pub value: T,
    /// Energy sum of the re-orthonormalized pair, before padding.
    pub energy: T,
    pub gram_determinant: T,
    pub orthonormality_defect: T,
}

/// Upper bound on λ₁ + λ₂ from two conforming trial vectors.
///
/// The vectors are Gram–Schmidt orthonormalized in the mass inner product.
/// The returned bound is the larger of the energy sum and `tr(G⁻¹A)` of the
/// re-orthonormalized pair, so residual non-orthonormality only weakens it.
pub fn rayleigh_sum_upper<T: Real>(
    pairs: &[EigenPair<T>],
    system: &DiscreteSystem<T>,
    eps: T,
) -> Result<RayleighSum<T>> {
    if system.element_kind != ElementKind::P1 {
        return invalid("Rayleigh–Poincaré bound needs conforming trial functions");
    }
    if pairs.len() != 2 {
        return invalid("Rayleigh–Poincaré bound takes exactly two trial vectors");
    }
    let m = &system.mass;
    let k = &system.stiffness;
    let (x1, x2) = (&pairs[0].vector, &pairs[1].vector);
    let g11 = m.bilinear(x1, x1);
    let g12 = m.bilinear(x1, x2);
    let g22 = m.bilinear(x2, x2);
    let gram_determinant = (g11 * g22 - g12 * g12) / (g11 * g22);
    if !(gram_determinant >= T::lit(GRAM_DETERMINANT_FLOOR)) {
        return Err(Error::DependentTrialFunctions(gram_determinant.as_f64()));
    }
    let v1: Vec<T> = x1.iter().map(|&v| v / g11.sqrt()).collect();
    let c = m.bilinear(&v1, x2);
    let w: Vec<T> = x2.iter().zip(&v1).map(|(&a, &b)| a - c * b).collect();
    let wn = m.bilinear(&w, &w).sqrt();
    let v2: Vec<T> = w.iter().map(|&v| v / wn).collect();

    let b11 = m.bilinear(&v1, &v1);
    let b12 = m.bilinear(&v1, &v2);
    let b22 = m.bilinear(&v2, &v2);
    let defect = (b11 - T::one()).abs().max(b12.abs()).max((b22 - T::one()).abs());
    if !(defect <= T::lit(ORTHONORMALITY_TOLERANCE)) {
        return Err(Error::OrthonormalityDefect(defect.as_f64()));
    }
    let a11 = k.bilinear(&v1, &v1);
    let a12 = k.bilinear(&v1, &v2);
    let a22 = k.bilinear(&v2, &v2);
    let energy = a11 + a22;
    let det = b11 * b22 - b12 * b12;
    let trace = (a11 * b22 - T::lit(2.0) * a12 * b12 + a22 * b11) / det;
    Ok(RayleighSum {
        value: energy.max(trace).round_up() + eps,
        energy,
        gram_determinant,
        orthonormality_defect: defect,
    })
}

/// Crude lower bound λ₁ ≥ 23 for every triangle of the swept region, by
/// domain monotonicity against the enclosing 1 × √3/2 rectangle.
pub fn enclosure_lambda1_floor<T: Real>() -> T {
    T::lit(23.0)
}

/// Settings shared by every certified evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketOptions {
    pub levels: u32,
    pub eps: f64,
    pub tol: f64,
    /// Confirm the discrete λ₁ floor by factoring `K − σM`.
    pub inertia_check: bool,
}

impl Default for BracketOptions {
    fn default() -> Self {
        Self { levels: 6, eps: 1e-9, tol: 1e-10, inertia_check: true }
    }
}

/// Certified eigenvalue data for one domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBracket<T> {
    /// Certified lower bound on λ₁.
    pub lam1_low: T,
    /// Crouzeix–Raviart Ritz value for λ₁.
    pub lam1_h: T,
    /// Verified lower bound on the discrete Crouzeix–Raviart λ₁ fed to Liu's bound.
    pub lam1_h_floor: T,
    /// Certified upper bound on λ₁ from the conforming Ritz value.
    pub lam1_up: T,
    /// Crouzeix–Raviart Ritz value for λ₂.
    pub lam2_h: T,
    /// Lower estimate of λ₂ from Liu's bound on the residual-corrected CR value.
    pub lam2_low: T,
    /// Certified upper bound on λ₁ + λ₂.
    pub rayleigh_sum: T,
    /// Certified upper bound on λ₂.
    pub lam2_up: T,
    /// Certified upper bound on λ₂/λ₁.
    pub xi_h: T,
    /// Lower estimate of λ₂/λ₁.
    pub xi_low: T,
    pub h: T,
    pub eps: T,
    pub levels: u32,
    pub dofs_cr: usize,
    pub dofs_p1: usize,
    pub orthonormality_defect: T,
}

impl<T: Real> SpectralBracket<T> {
    /// Certified-side midpoint of the ratio bracket.
    pub fn xi_mid(&self) -> T {
        (self.xi_h + self.xi_low) / T::lit(2.0)
    }

    pub fn xi_width(&self) -> T {
        self.xi_h - self.xi_low
    }
}

/// Certified bracket for the triangle with the given vertices.
pub fn certified_ratio<T: Real>(tri: [Point2<T>; 3], levels: u32, eps: T) -> Result<SpectralBracket<T>> {
    let opts = BracketOptions { levels, eps: eps.as_f64(), ..BracketOptions::default() };
    certified_ratio_with(tri, &opts)
}

pub fn certified_ratio_with<T: Real>(tri: [Point2<T>; 3], opts: &BracketOptions) -> Result<SpectralBracket<T>> {
    let mesh = refine_triangle(tri, opts.levels)?;
    certified_ratio_mesh(&mesh, opts.levels, opts)
}

/// Certified bracket on an already refined mesh of any polygon.
pub fn certified_ratio_mesh<T: Real>(
    mesh: &TriMesh<T>,
    levels: u32,
    opts: &BracketOptions,
) -> Result<SpectralBracket<T>> {
    let eps = T::lit(opts.eps);
    if !(eps >= T::zero()) {
        return invalid("eps must be non-negative");
    }
    let solver = SolverOptions::with_tol(opts.tol);
    let (cr, p1) = std::thread::scope(|s| {
        let cr = s.spawn(|| lower_side(mesh, &solver, opts.inertia_check));
        let p1 = upper_side(mesh, &solver, eps);
        (cr.join().expect("CR task panicked"), p1)
    });
    let cr = cr?;
    let (p1_pairs, sum, dofs_p1) = p1?;
    let h = mesh_size(mesh);

    let lam1_low = liu_lower(cr.lam1_floor, h, eps)?;
    let lam2_low = liu_lower(cr.lam2_floor.max(T::zero()), h, eps)?;
    let lam1_up = p1_pairs[0].value.round_up() + eps;
    if !(lam1_low > T::zero()) {
        return Err(Error::Degenerate(format!("non-positive λ₁ lower bound {lam1_low}")));
    }
    let lam2_up = (sum.value - lam1_low).round_up();
    let xi_h = ((lam2_up + eps) / (lam1_low - eps)).round_up();
    let xi_low = (lam2_low / lam1_up).round_down();
    Ok(SpectralBracket {
        lam1_low,
        lam1_h: cr.pairs[0].value,
        lam1_h_floor: cr.lam1_floor,
        lam1_up,
        lam2_h: cr.pairs[1].value,
        lam2_low,
        rayleigh_sum: sum.value,
        lam2_up,
        xi_h,
        xi_low,
        h,
        eps,
        levels,
        dofs_cr: cr.dofs,
        dofs_p1,
        orthonormality_defect: sum.orthonormality_defect,
    })
}

struct LowerSide<T> {
    pairs: Vec<EigenPair<T>>,
    lam1_floor: T,
    lam2_floor: T,
    dofs: usize,
}

/// `‖K x − θ M x‖_{M⁻¹}` for M-normalized `x`, an eigenvalue inclusion radius
/// when `M` is diagonal.
fn residual_radius<T: Real>(system: &DiscreteSystem<T>, pair: &EigenPair<T>) -> T {
    let kx = system.stiffness.apply(&pair.vector);
    let mx = system.mass.apply(&pair.vector);
    let diag = system.mass.diagonal();
    let r: Vec<T> = kx.iter().zip(&mx).zip(&diag).map(|((&a, &b), &d)| (a - pair.value * b) / d.sqrt()).collect();
    norm2(&r)
}

fn lower_side<T: Real>(mesh: &TriMesh<T>, solver: &SolverOptions, check: bool) -> Result<LowerSide<T>> {
    let system = assemble(mesh, ElementKind::CrouzeixRaviart)?;
    let pairs = smallest_eigenpairs(&system, 2, solver)?;
    debug_assert!(system.mass.is_diagonal());
    let margin = T::lit(1e-8);
    let floor = |pair: &EigenPair<T>| {
        let eta = residual_radius(&system, pair);
        (pair.value - eta.round_up() - margin * pair.value).round_down()
    };
    let lam1_floor = floor(&pairs[0]);
    let lam2_floor = floor(&pairs[1]);
    if check && !eigenvalues_exceed(&system, lam1_floor) {
        return Err(Error::InertiaCheckFailed { floor: lam1_floor.as_f64() });
    }
    Ok(LowerSide { pairs, lam1_floor, lam2_floor, dofs: system.dofs() })
}

fn upper_side<T: Real>(
    mesh: &TriMesh<T>,
    solver: &SolverOptions,
    eps: T,
) -> Result<(Vec<EigenPair<T>>, RayleighSum<T>, usize)> {
    let system = assemble(mesh, ElementKind::P1)?;
    let pairs = smallest_eigenpairs(&system, 2, solver)?;
    let sum = rayleigh_sum_upper(&pairs, &system, eps)?;
    Ok((pairs, sum, system.dofs()))
}
