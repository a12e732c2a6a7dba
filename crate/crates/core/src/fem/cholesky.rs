//! Sparse Cholesky factorization `P A Pᵀ = L Lᵀ` for symmetric
//! positive-definite matrices.
//!
//! The fill-reducing permutation is a geometric nested dissection driven by
//! the coordinates attached to each unknown; the numeric phase is the
//! classic up-looking row-by-row algorithm over the elimination tree.

use crate::error::{Error, Result};
use crate::fem::sparse::CsrMatrix;
use crate::scalar::{Point2, Real};

const NONE: usize = usize::MAX;
const LEAF_SIZE: usize = 16;

/// Fill-reducing ordering: `perm[new] = old`.
pub fn nested_dissection<T: Real>(a: &CsrMatrix<T>, coords: &[Point2<T>]) -> Vec<usize> {
    assert_eq!(a.n(), coords.len());
    let n = a.n();
    let mut out = Vec::with_capacity(n);
    let mut stamp = vec![0usize; n];
    let mut counter = 0usize;
    let nodes: Vec<usize> = (0..n).collect();
    dissect(a, coords, nodes, &mut out, &mut stamp, &mut counter);
    debug_assert_eq!(out.len(), n);
    out
}

fn dissect<T: Real>(
    a: &CsrMatrix<T>,
    coords: &[Point2<T>],
    mut nodes: Vec<usize>,
    out: &mut Vec<usize>,
    stamp: &mut [usize],
    counter: &mut usize,
) {
    if nodes.len() <= LEAF_SIZE {
        out.extend(nodes);
        return;
    }
    let (mut lo, mut hi) = ([T::infinity(); 2], [T::neg_infinity(); 2]);
    for &v in &nodes {
        for d in 0..2 {
            lo[d] = lo[d].min(coords[v][d]);
            hi[d] = hi[d].max(coords[v][d]);
        }
    }
    let axis = usize::from(hi[1] - lo[1] > hi[0] - lo[0]);
    nodes.sort_by(|&u, &v| coords[u][axis].partial_cmp(&coords[v][axis]).unwrap().then(u.cmp(&v)));
    let right = nodes.split_off(nodes.len() / 2);
    *counter += 1;
    let tag = *counter;
    for &v in &right {
        stamp[v] = tag;
    }
    let (separator, left): (Vec<usize>, Vec<usize>) =
        nodes.into_iter().partition(|&v| a.row_cols(v).iter().any(|&w| stamp[w] == tag));
    dissect(a, coords, left, out, stamp, counter);
    dissect(a, coords, right, out, stamp, counter);
    out.extend(separator);
}

/// Ordering and elimination-tree data that only depend on the sparsity
/// pattern.
#[derive(Debug, Clone)]
pub struct Symbolic {
    n: usize,
    perm: Vec<usize>,
    iperm: Vec<usize>,
    parent: Vec<usize>,
    col_ptr: Vec<usize>,
}

impl Symbolic {
    pub fn analyze<T: Real>(a: &CsrMatrix<T>, perm: Vec<usize>) -> Self {
        let n = a.n();
        assert_eq!(perm.len(), n);
        let mut iperm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        // elimination tree of the permuted matrix
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for &j in a.row_cols(perm[k]) {
                let mut i = iperm[j];
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        parent[i] = k;
                    }
                    i = next;
                }
            }
        }
        // column counts from the row subtrees
        let mut counts = vec![1usize; n];
        let mut flag = vec![NONE; n];
        for k in 0..n {
            flag[k] = k;
            for &j in a.row_cols(perm[k]) {
                let mut i = iperm[j];
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    counts[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        for c in counts {
            col_ptr.push(col_ptr.last().unwrap() + c);
        }
        Self { n, perm, iperm, parent, col_ptr }
    }

    pub fn nnz(&self) -> usize {
        self.col_ptr[self.n]
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }
}

/// Numeric Cholesky factor, stored by columns with the diagonal first.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    symbolic: Symbolic,
    row_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    /// Orders with nested dissection and factors.
    pub fn new(a: &CsrMatrix<T>, coords: &[Point2<T>]) -> Result<Self> {
        let symbolic = Symbolic::analyze(a, nested_dissection(a, coords));
        Self::factor(a, symbolic)
    }

    /// Factors `a` with a previously computed symbolic analysis. The pattern
    /// of `a` must be contained in the analyzed pattern.
    pub fn factor(a: &CsrMatrix<T>, symbolic: Symbolic) -> Result<Self> {
        let n = symbolic.n;
        assert_eq!(a.n(), n);
        let nnz = symbolic.nnz();
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![T::zero(); nnz];
        let mut next = symbolic.col_ptr[..n].to_vec();
        let mut x = vec![T::zero(); n];
        let mut flag = vec![NONE; n];
        let mut stack = vec![0usize; n];
        let mut path = Vec::with_capacity(64);
        for k in 0..n {
            // pattern of row k of L, in topological order, kept in stack[top..]
            let mut top = n;
            flag[k] = k;
            for (j, v) in a.row(symbolic.perm[k]) {
                let mut i = symbolic.iperm[j];
                if i > k {
                    continue;
                }
                x[i] = x[i] + v;
                path.clear();
                while flag[i] != k {
                    path.push(i);
                    flag[i] = k;
                    i = symbolic.parent[i];
                    if i == NONE {
                        break;
                    }
                }
                for &node in path.iter().rev() {
                    top -= 1;
                    stack[top] = node;
                }
            }
            let mut d = x[k];
            x[k] = T::zero();
            for &i in &stack[top..n] {
                let start = symbolic.col_ptr[i];
                let lki = x[i] / values[start];
                x[i] = T::zero();
                for p in start + 1..next[i] {
                    x[row_idx[p]] = x[row_idx[p]] - values[p] * lki;
                }
                d = d - lki * lki;
                let slot = next[i];
                row_idx[slot] = k;
                values[slot] = lki;
                next[i] += 1;
            }
            if !(d > T::zero()) {
                return Err(Error::NotPositiveDefinite { pivot: k, value: d.as_f64() });
            }
            let slot = next[k];
            debug_assert_eq!(slot, symbolic.col_ptr[k]);
            row_idx[slot] = k;
            values[slot] = d.sqrt();
            next[k] += 1;
        }
        Ok(Self { symbolic, row_idx, values })
    }

    pub fn symbolic(&self) -> &Symbolic {
        &self.symbolic
    }

    pub fn n(&self) -> usize {
        self.symbolic.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T], work: &mut Vec<T>) {
        let s = &self.symbolic;
        let n = s.n;
        work.clear();
        work.extend(s.perm.iter().map(|&old| b[old]));
        let y = work.as_mut_slice();
        for j in 0..n {
            let start = s.col_ptr[j];
            let yj = y[j] / self.values[start];
            y[j] = yj;
            for p in start + 1..s.col_ptr[j + 1] {
                y[self.row_idx[p]] = y[self.row_idx[p]] - self.values[p] * yj;
            }
        }
        for j in (0..n).rev() {
            let start = s.col_ptr[j];
            let mut acc = y[j];
            for p in start + 1..s.col_ptr[j + 1] {
                acc = acc - self.values[p] * y[self.row_idx[p]];
            }
            y[j] = acc / self.values[start];
        }
        for (new, &old) in s.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        let mut work = Vec::with_capacity(b.len());
        self.solve_in_place(&mut x, &mut work);
        x
    }
}
