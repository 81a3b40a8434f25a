//! Legendre-Gauss-Lobatto spectral collocation of the linear elasticity
//! system on the cube `(-1, 1)^d`.
//!
//! The crate covers the 1-D LGL machinery ([`legendre`]), tensor grids
//! and discrete inner products ([`grid`]), the Lamé operator and its
//! boundary operators ([`fields`]), time integration and the discrete
//! energy ([`dynamics`]), boundary observability measurements
//! ([`observability`]), HUM boundary control synthesis ([`control`]), and
//! the experiment drivers behind the `elasto` binary ([`experiments`]).

pub mod control;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod grid;
pub mod legendre;
pub mod observability;

pub use dynamics::{BoundaryForcing, ElasticState, ElasticSystem, Integrator, Scheme, TimeGridSpec};
pub use error::{Error, Result};
pub use fields::{Material, VectorField, FaceTrace};
pub use grid::{ScalarGridFn, TensorGrid};
pub use legendre::LglRule;
