//! Numerical laboratory for two-dimensional geodesic flows that admit a
//! homogeneous polynomial first integral in the momenta.
//!
//! The pipeline runs from the Poisson-bracket condition `{f, H} = 0` through
//! the quasi-linear system on the coefficients, its evolutionary
//! hydrodynamic-type form in semi-geodesic coordinates, Riemann invariants and
//! conservation laws, back to reconstructed metrics whose geodesic flows are
//! integrated directly to check that `H` and `f` are conserved.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix `f64`.

pub mod bridge;
pub mod error;
pub mod fields;
pub mod geodesic;
pub mod hydro;
pub mod integrability;
pub mod momenta;
pub mod pipeline;
pub mod riemann;
pub mod roots;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Grid1 = fields::Grid1D<f64>;
pub type Grid2 = fields::Grid2D<f64>;
pub type Field1 = fields::ScalarField1D<f64>;
pub type Field2 = fields::ScalarField2D<f64>;
pub type Polynomial = momenta::MomentaPolynomial<f64>;
pub type Hamiltonian = momenta::HamiltonianForm<f64>;
