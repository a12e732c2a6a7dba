//! Uniformly red-refined triangulations of triangles and convex quadrilaterals.

use std::collections::HashMap;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::scalar::{cross, norm, sub, Point2, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub boundary: bool,
}

/// Conforming simplicial mesh of a polygon.
#[derive(Debug, Clone)]
pub struct TriMesh<T> {
    vertices: Vec<Point2<T>>,
    elements: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// For element `e`, the edge opposite each local vertex.
    element_edges: Vec<[usize; 3]>,
    h: T,
}

fn signed_area<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> T {
    cross(sub(b, a), sub(c, a)) / T::lit(2.0)
}

impl<T: Real> TriMesh<T> {
    /// Builds the edge structure and checks orientation and manifoldness.
    pub fn new(vertices: Vec<Point2<T>>, elements: Vec<[usize; 3]>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Degenerate("mesh has no elements".into()));
        }
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::with_capacity(elements.len() * 2);
        let mut edges: Vec<Edge> = Vec::with_capacity(elements.len() * 2);
        let mut uses: Vec<u8> = Vec::with_capacity(elements.len() * 2);
        let mut element_edges = Vec::with_capacity(elements.len());
        for (e, tri) in elements.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Degenerate(format!("element {e} references a missing vertex")));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let area = signed_area(a, b, c);
            if !(area > T::zero()) {
                return Err(Error::Degenerate(format!("element {e} has non-positive area {area}")));
            }
            let mut local = [0usize; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let u = tri[(i + 1) % 3];
                let v = tri[(i + 2) % 3];
                let key = (u.min(v), u.max(v));
                let idx = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(Edge { vertices: [key.0, key.1], boundary: true });
                    uses.push(0);
                    edges.len() - 1
                });
                uses[idx] += 1;
                if uses[idx] > 2 {
                    return Err(Error::Degenerate(format!("edge {key:?} is shared by more than two elements")));
                }
                *slot = idx;
            }
            element_edges.push(local);
        }
        for (edge, &n) in edges.iter_mut().zip(&uses) {
            edge.boundary = n == 1;
        }
        let mut mesh = Self { vertices, elements, edges, element_edges, h: T::zero() };
        mesh.h = mesh.recompute_h();
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point2<T>] {
        &self.vertices
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn element_edges(&self) -> &[[usize; 3]] {
        &self.element_edges
    }

    /// Mesh size: an upper bound on the longest element edge.
    pub fn h(&self) -> T {
        self.h
    }

    pub fn element_vertices(&self, e: usize) -> [Point2<T>; 3] {
        self.elements[e].map(|v| self.vertices[v])
    }

    pub fn element_area(&self, e: usize) -> T {
        let [a, b, c] = self.element_vertices(e);
        signed_area(a, b, c)
    }

    pub fn area(&self) -> T {
        (0..self.elements.len()).map(|e| self.element_area(e)).sum()
    }

    /// Vertices that lie on at least one boundary edge.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut on = vec![false; self.vertices.len()];
        for edge in self.edges.iter().filter(|e| e.boundary) {
            on[edge.vertices[0]] = true;
            on[edge.vertices[1]] = true;
        }
        on
    }

    fn recompute_h(&self) -> T {
        let longest = self
            .edges
            .iter()
            .map(|e| norm(sub(self.vertices[e.vertices[1]], self.vertices[e.vertices[0]])))
            .fold(T::zero(), T::max);
        longest.round_up()
    }

    /// One level of red refinement: each triangle is split into four by its
    /// edge midpoints.
    pub fn refine(&self) -> Result<Self> {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.edges.iter().map(|e| {
            let [a, b] = e.vertices.map(|v| self.vertices[v]);
            [(a[0] + b[0]) / T::lit(2.0), (a[1] + b[1]) / T::lit(2.0)]
        }));
        let mut elements = Vec::with_capacity(self.elements.len() * 4);
        for (tri, local) in self.elements.iter().zip(&self.element_edges) {
            let [a, b, c] = *tri;
            // midpoints opposite a, b, c
            let [ma, mb, mc] = local.map(|e| nv + e);
            elements.push([a, mc, mb]);
            elements.push([mc, b, ma]);
            elements.push([mb, ma, c]);
            elements.push([mc, ma, mb]);
        }
        Self::new(vertices, elements)
    }

    pub fn refined(&self, levels: u32) -> Result<Self> {
        let mut mesh = self.clone();
        for _ in 0..levels {
            mesh = mesh.refine()?;
        }
        Ok(mesh)
    }

    /// Plain-text dump: `v x y` and `t a b c` records, one per line.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "# vertices {} elements {} h {:.16e}",
            self.vertices.len(),
            self.elements.len(),
            self.h.as_f64()
        )?;
        for v in &self.vertices {
            writeln!(out, "v {:.16e} {:.16e}", v[0].as_f64(), v[1].as_f64())?;
        }
        for t in &self.elements {
            writeln!(out, "t {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Exact mesh size of `mesh`, rounded up by at least one ulp.
pub fn mesh_size<T: Real>(mesh: &TriMesh<T>) -> T {
    mesh.h()
}

fn oriented<T: Real>(mut tri: [Point2<T>; 3]) -> Result<[Point2<T>; 3]> {
    let area = signed_area(tri[0], tri[1], tri[2]);
    let scale = tri.iter().flat_map(|p| p.iter()).fold(T::zero(), |m, v| m.max(v.abs())).max(T::one());
    if !area.is_finite() || area.abs() <= T::epsilon() * scale * scale {
        return Err(Error::Degenerate("triangle vertices are collinear".into()));
    }
    if area < T::zero() {
        tri.swap(1, 2);
    }
    Ok(tri)
}

/// Red refinement of a single triangle applied `levels` times.
pub fn refine_triangle<T: Real>(vertices: [Point2<T>; 3], levels: u32) -> Result<TriMesh<T>> {
    let tri = oriented(vertices)?;
    TriMesh::new(tri.to_vec(), vec![[0, 1, 2]])?.refined(levels)
}

/// How a quadrilateral is cut into root triangles before refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadSplit {
    /// Two triangles sharing the diagonal from vertex 0 to vertex 2.
    #[default]
    Diagonal,
    /// Four triangles fanned around the vertex average. Keeps every symmetry
    /// of the quadrilateral in the mesh.
    Centroid,
}

/// Red refinement of a strictly convex quadrilateral split along the
/// diagonal from vertex 0 to vertex 2.
pub fn refine_quadrilateral<T: Real>(vertices: [Point2<T>; 4], levels: u32) -> Result<TriMesh<T>> {
    refine_quadrilateral_with(vertices, levels, QuadSplit::Diagonal)
}

pub fn refine_quadrilateral_with<T: Real>(
    vertices: [Point2<T>; 4],
    levels: u32,
    split: QuadSplit,
) -> Result<TriMesh<T>> {
    let mut quad = vertices;
    let turn = |q: &[Point2<T>; 4], i: usize| cross(sub(q[(i + 1) % 4], q[i]), sub(q[(i + 2) % 4], q[(i + 1) % 4]));
    if (0..4).map(|i| turn(&quad, i)).sum::<T>() < T::zero() {
        quad.reverse();
    }
    if (0..4).any(|i| !(turn(&quad, i) > T::zero())) {
        return Err(Error::Degenerate("quadrilateral is not strictly convex".into()));
    }
    let root = match split {
        QuadSplit::Diagonal => TriMesh::new(quad.to_vec(), vec![[0, 1, 2], [0, 2, 3]])?,
        QuadSplit::Centroid => {
            let four = T::lit(4.0);
            let c = [quad.iter().map(|v| v[0]).sum::<T>() / four, quad.iter().map(|v| v[1]).sum::<T>() / four];
            let mut vertices = quad.to_vec();
            vertices.push(c);
            TriMesh::new(vertices, vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])?
        }
    };
    root.refined(levels)
}
