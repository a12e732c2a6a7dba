//! Smallest eigenpairs of `K x = λ M x` by shift-invert block subspace
//! iteration with Rayleigh–Ritz projection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cholesky::Cholesky;
use super::dense::{generalized_eigen, Dense};
use super::sparse::{dot, norm2, CsrMatrix};
use super::DiscreteSystem;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Systems at most this large are solved densely.
const DENSE_LIMIT: usize = 64;

#[derive(Debug, Clone)]
pub struct EigenPair<T> {
    pub value: T,
    /// M-normalized coefficients over the system's dofs.
    pub vector: Vec<T>,
    /// `‖K x − λ M x‖ / ‖K x‖`
    pub residual: T,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Block size beyond the requested count.
    pub guard_vectors: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iterations: 400, guard_vectors: 6, seed: 0x5eed }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// The `k` smallest eigenpairs in nondecreasing order.
pub fn smallest_eigenpairs<T: Real>(
    system: &DiscreteSystem<T>,
    k: usize,
    opts: &SolverOptions,
) -> Result<Vec<EigenPair<T>>> {
    let n = system.dofs();
    if k == 0 || !(opts.tol > 0.0) {
        return crate::error::invalid("need k ≥ 1 and tol > 0");
    }
    if k >= n {
        return Err(Error::TooFewDofs { requested: k, dofs: n });
    }
    let (k_mat, m_mat) = (&system.stiffness, &system.mass);
    let p = (k + opts.guard_vectors).min(n);
    if n <= DENSE_LIMIT.max(2 * p) {
        return dense_pairs(k_mat, m_mat, k, opts.tol);
    }
    let chol = Cholesky::new(k_mat, &system.dof_coords)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<T>> = (0..p).map(|_| (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect()).collect();
    let mut work = Vec::with_capacity(n);
    let mut last_residual = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        // Y = K⁻¹ M X
        let y: Vec<Vec<T>> = x
            .iter()
            .map(|xi| {
                let mut v = m_mat.apply(xi);
                chol.solve_in_place(&mut v, &mut work);
                v
            })
            .collect();
        let ky: Vec<Vec<T>> = y.iter().map(|v| k_mat.apply(v)).collect();
        let my: Vec<Vec<T>> = y.iter().map(|v| m_mat.apply(v)).collect();
        let a = Dense::from_fn(p, |i, j| dot(&y[i], &ky[j]));
        let b = Dense::from_fn(p, |i, j| dot(&y[i], &my[j]));
        let (theta, q) = generalized_eigen(&a, &b)?;
        x = combine_columns(&y, &q);
        let kx = combine_columns(&ky, &q);
        let mx = combine_columns(&my, &q);
        let residuals: Vec<T> = (0..k).map(|i| relative_residual(&kx[i], &mx[i], theta[i])).collect();
        let worst = residuals.iter().fold(T::zero(), |m, &r| m.max(r)).as_f64();
        last_residual = worst;
        if worst <= opts.tol {
            return Ok((0..k)
                .map(|i| EigenPair { value: theta[i], vector: x[i].clone(), residual: residuals[i] })
                .collect());
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, residual: last_residual })
}

fn combine_columns<T: Real>(basis: &[Vec<T>], q: &Dense<T>) -> Vec<Vec<T>> {
    let n = basis[0].len();
    let p = basis.len();
    (0..p)
        .map(|c| {
            let mut out = vec![T::zero(); n];
            for (r, col) in basis.iter().enumerate() {
                let w = q[(r, c)];
                for (o, &v) in out.iter_mut().zip(col) {
                    *o = *o + w * v;
                }
            }
            out
        })
        .collect()
}

fn relative_residual<T: Real>(kx: &[T], mx: &[T], theta: T) -> T {
    let r: Vec<T> = kx.iter().zip(mx).map(|(&a, &b)| a - theta * b).collect();
    norm2(&r) / norm2(kx)
}

fn dense_pairs<T: Real>(k_mat: &CsrMatrix<T>, m_mat: &CsrMatrix<T>, k: usize, tol: f64) -> Result<Vec<EigenPair<T>>> {
    let n = k_mat.n();
    let a = Dense::from_fn(n, |i, j| k_mat.get(i, j));
    let b = Dense::from_fn(n, |i, j| m_mat.get(i, j));
    let (theta, q) = generalized_eigen(&a, &b)?;
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let x: Vec<T> = (0..n).map(|r| q[(r, i)]).collect();
        let kx = k_mat.apply(&x);
        let mx = m_mat.apply(&x);
        let residual = relative_residual(&kx, &mx, theta[i]);
        if residual.as_f64() > tol {
            return Err(Error::NoConvergence { iterations: 0, residual: residual.as_f64() });
        }
        out.push(EigenPair { value: theta[i], vector: x, residual });
    }
    Ok(out)
}

/// True when `K − σM` is positive definite, which proves every discrete
/// eigenvalue exceeds `σ`.
pub fn eigenvalues_exceed<T: Real>(system: &DiscreteSystem<T>, sigma: T) -> bool {
    let shifted = system.stiffness.combine(T::one(), &system.mass, -sigma);
    Cholesky::new(&shifted, &system.dof_coords).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, ElementKind};
    use crate::mesher::{refine_quadrilateral, refine_triangle};
    use std::f64::consts::PI;

    fn unit_square(levels: u32) -> crate::mesher::TriMesh<f64> {
        refine_quadrilateral([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], levels).unwrap()
    }

    #[test]
    fn square_p1_matches_exact_spectrum() {
        let sys = assemble(&unit_square(5), ElementKind::P1).unwrap();
        let pairs = smallest_eigenpairs(&sys, 3, &SolverOptions::default()).unwrap();
        let exact = [2.0 * PI * PI, 5.0 * PI * PI, 5.0 * PI * PI];
        for (pair, e) in pairs.iter().zip(exact) {
            assert!(pair.value >= e, "conforming value below exact");
            assert!((pair.value - e) / e < 0.01);
            assert!(pair.residual <= 1e-10);
            assert!((sys.mass.bilinear(&pair.vector, &pair.vector) - 1.0).abs() < 1e-12);
        }
        assert!(sys.mass.bilinear(&pairs[1].vector, &pairs[2].vector).abs() < 1e-10);
    }

    #[test]
    fn dense_and_iterative_paths_agree() {
        let sys = assemble(&unit_square(3), ElementKind::CrouzeixRaviart).unwrap();
        let iterative = smallest_eigenpairs(&sys, 2, &SolverOptions::default()).unwrap();
        let dense = dense_pairs(&sys.stiffness, &sys.mass, 2, 1e-10).unwrap();
        for (a, b) in iterative.iter().zip(&dense) {
            assert!((a.value - b.value).abs() < 1e-9 * a.value);
        }
    }

    #[test]
    fn inertia_check_brackets_first_eigenvalue() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]];
        let sys = assemble(&refine_triangle(tri, 4).unwrap(), ElementKind::CrouzeixRaviart).unwrap();
        let lam = smallest_eigenpairs(&sys, 1, &SolverOptions::default()).unwrap()[0].value;
        assert!(eigenvalues_exceed(&sys, lam * (1.0 - 1e-9)));
        assert!(!eigenvalues_exceed(&sys, lam * (1.0 + 1e-9)));
    }

    #[test]
    fn too_many_requested_eigenpairs() {
        let sys = assemble(&unit_square(1), ElementKind::P1).unwrap();
        assert!(matches!(
            smallest_eigenpairs(&sys, sys.dofs(), &SolverOptions::default()),
            Err(Error::TooFewDofs { .. })
        ));
    }
}
