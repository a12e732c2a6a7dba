//! Crouzeix–Raviart and P1 discretizations of the Dirichlet Laplacian.

pub mod cholesky;
pub mod dense;
mod eigen;
pub mod sparse;

pub use eigen::{eigenvalues_exceed, smallest_eigenpairs, EigenPair, SolverOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesher::TriMesh;
use crate::scalar::{dot, sub, Point2, Real};
use sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    /// Nonconforming, one dof per interior edge midpoint.
    #[serde(rename = "CR")]
    CrouzeixRaviart,
    /// Conforming hat functions, one dof per interior vertex.
    #[serde(rename = "P1")]
    P1,
}

/// Stiffness and mass matrices with Dirichlet dofs eliminated.
#[derive(Debug, Clone)]
pub struct DiscreteSystem<T> {
    pub stiffness: CsrMatrix<T>,
    pub mass: CsrMatrix<T>,
    /// Mesh entity per dof: an edge index for CR, a vertex index for P1.
    pub dof_map: Vec<usize>,
    /// Location of each dof, used for the fill-reducing ordering.
    pub dof_coords: Vec<Point2<T>>,
    pub element_kind: ElementKind,
}

impl<T: Real> DiscreteSystem<T> {
    pub fn dofs(&self) -> usize {
        self.dof_map.len()
    }
}

/// Assembles the system for `kind` on `mesh`. All element integrals are
/// exact.
pub fn assemble<T: Real>(mesh: &TriMesh<T>, kind: ElementKind) -> Result<DiscreteSystem<T>> {
    match kind {
        ElementKind::CrouzeixRaviart => assemble_cr(mesh),
        ElementKind::P1 => assemble_p1(mesh),
    }
}

/// Edge vectors opposite each local vertex, and the element area.
fn local_geometry<T: Real>(x: [Point2<T>; 3]) -> ([Point2<T>; 3], T) {
    let e = [sub(x[2], x[1]), sub(x[0], x[2]), sub(x[1], x[0])];
    let area = crate::scalar::cross(e[2], sub(x[2], x[0])) / T::lit(2.0);
    (e, area)
}

fn assemble_cr<T: Real>(mesh: &TriMesh<T>) -> Result<DiscreteSystem<T>> {
    let mut index = vec![usize::MAX; mesh.edges().len()];
    let mut dof_map = Vec::new();
    let mut dof_coords = Vec::new();
    for (k, edge) in mesh.edges().iter().enumerate() {
        if !edge.boundary {
            index[k] = dof_map.len();
            dof_map.push(k);
            let [a, b] = edge.vertices.map(|v| mesh.vertices()[v]);
            dof_coords.push([(a[0] + b[0]) / T::lit(2.0), (a[1] + b[1]) / T::lit(2.0)]);
        }
    }
    if dof_map.is_empty() {
        return Err(Error::TooCoarse);
    }
    let mut k_trip = Vec::with_capacity(9 * mesh.elements().len());
    let mut m_trip = Vec::with_capacity(3 * mesh.elements().len());
    for el in 0..mesh.elements().len() {
        let (e, area) = local_geometry(mesh.element_vertices(el));
        let dofs = mesh.element_edges()[el].map(|k| index[k]);
        // ψ_i = 1 − 2λ_i, so ∇ψ_i·∇ψ_j = 4∇λ_i·∇λ_j = e_i·e_j / |T|²
        for i in 0..3 {
            if dofs[i] == usize::MAX {
                continue;
            }
            m_trip.push((dofs[i], dofs[i], area / T::lit(3.0)));
            for j in 0..3 {
                if dofs[j] != usize::MAX {
                    k_trip.push((dofs[i], dofs[j], dot(e[i], e[j]) / area));
                }
            }
        }
    }
    let n = dof_map.len();
    Ok(DiscreteSystem {
        stiffness: CsrMatrix::from_triplets(n, &k_trip),
        mass: CsrMatrix::from_triplets(n, &m_trip),
        dof_map,
        dof_coords,
        element_kind: ElementKind::CrouzeixRaviart,
    })
}

fn assemble_p1<T: Real>(mesh: &TriMesh<T>) -> Result<DiscreteSystem<T>> {
    let boundary = mesh.boundary_vertices();
    let mut index = vec![usize::MAX; mesh.vertices().len()];
    let mut dof_map = Vec::new();
    for (v, &on_boundary) in boundary.iter().enumerate() {
        if !on_boundary {
            index[v] = dof_map.len();
            dof_map.push(v);
        }
    }
    if dof_map.is_empty() {
        return Err(Error::TooCoarse);
    }
    let dof_coords = dof_map.iter().map(|&v| mesh.vertices()[v]).collect();
    let mut k_trip = Vec::with_capacity(9 * mesh.elements().len());
    let mut m_trip = Vec::with_capacity(9 * mesh.elements().len());
    for (el, tri) in mesh.elements().iter().enumerate() {
        let (e, area) = local_geometry(mesh.element_vertices(el));
        let dofs = tri.map(|v| index[v]);
        for i in 0..3 {
            if dofs[i] == usize::MAX {
                continue;
            }
            for j in 0..3 {
                if dofs[j] == usize::MAX {
                    continue;
                }
                k_trip.push((dofs[i], dofs[j], dot(e[i], e[j]) / (T::lit(4.0) * area)));
                let m = if i == j { area / T::lit(6.0) } else { area / T::lit(12.0) };
                m_trip.push((dofs[i], dofs[j], m));
            }
        }
    }
    let n = dof_map.len();
    Ok(DiscreteSystem {
        stiffness: CsrMatrix::from_triplets(n, &k_trip),
        mass: CsrMatrix::from_triplets(n, &m_trip),
        dof_map,
        dof_coords,
        element_kind: ElementKind::P1,
    })
}
