//! Certified bounds on the Dirichlet eigenvalue ratio λ₂/λ₁ of triangles and
//! quadrilaterals.

// `!(x > 0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod bounds;
pub mod certificate;
pub mod continuity;
mod error;
pub mod fem;
pub mod grid;
pub mod mesher;
pub mod moduli;
pub mod perturbation;
mod scalar;
pub mod sweep;

pub use error::{Error, Result};
pub use scalar::{Point2, Real};

/// Double-precision instances of the generic types.
pub type TriMesh64 = mesher::TriMesh<f64>;
pub type ModuliPoint64 = moduli::ModuliPoint<f64>;
pub type RegionSpec64 = moduli::RegionSpec<f64>;
pub type SpectralBracket64 = bounds::SpectralBracket<f64>;
pub type ShearStep64 = continuity::ShearStep<f64>;
pub type StepResult64 = continuity::StepResult<f64>;
pub type DiscreteSystem64 = fem::DiscreteSystem<f64>;
