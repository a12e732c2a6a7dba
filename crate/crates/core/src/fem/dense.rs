//! Small dense kernels for the projected Rayleigh–Ritz problems.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in i + 1..self.n {
                let avg = (self[(i, j)] + self[(j, i)]) / T::lit(2.0);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Dense<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Dense<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// Lower-triangular `L` with `A = L Lᵀ`.
pub fn cholesky<T: Real>(a: &Dense<T>) -> Result<Dense<T>> {
    let n = a.n;
    let mut l = Dense::zeros(n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d.as_f64() });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
/// eigenvalues in ascending order and the matching orthonormal eigenvectors
/// as the columns of the second result.
pub fn symmetric_eigen<T: Real>(a: &Dense<T>) -> (Vec<T>, Dense<T>) {
    let n = a.n;
    let mut m = a.clone();
    m.symmetrize();
    let mut v = Dense::identity(n);
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let diag: T = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap());
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Dense::from_fn(n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Solves `A q = θ B q` with `B` positive definite. The eigenvector columns
/// are `B`-orthonormal.
pub fn generalized_eigen<T: Real>(a: &Dense<T>, b: &Dense<T>) -> Result<(Vec<T>, Dense<T>)> {
    let n = a.n;
    let l = cholesky(b)?;
    // C = L⁻¹ A L⁻ᵀ
    let mut w = Dense::zeros(n);
    for col in 0..n {
        for i in 0..n {
            let mut s = a[(i, col)];
            for k in 0..i {
                s = s - l[(i, k)] * w[(k, col)];
            }
            w[(i, col)] = s / l[(i, i)];
        }
    }
    let mut c = Dense::zeros(n);
    for row in 0..n {
        for i in 0..n {
            let mut s = w[(row, i)];
            for k in 0..i {
                s = s - l[(i, k)] * c[(row, k)];
            }
            c[(row, i)] = s / l[(i, i)];
        }
    }
    let (values, y) = symmetric_eigen(&c);
    // q = L⁻ᵀ y
    let mut q = Dense::zeros(n);
    for col in 0..n {
        for i in (0..n).rev() {
            let mut s = y[(i, col)];
            for k in i + 1..n {
                s = s - l[(k, i)] * q[(k, col)];
            }
            q[(i, col)] = s / l[(i, i)];
        }
    }
    Ok((values, q))
}
