//! Numerical tools for conformally flat, asymptotically flat manifolds:
//! ADM mass, variational capacity, spherical symmetrization and an
//! end-to-end check of the volumetric Penrose inequality.

pub mod capacity;
pub mod error;
pub mod fields;
pub mod geom;
pub mod harness;
pub mod mass;
pub mod quadrature;
pub mod symmetrize;

pub use error::{Error, Result};
pub use fields::{CellTag, DomainSpec, Grid3, GridField, RadialProfile};
pub use geom::{ConformalFactor, Dimension, SchwarzschildData};
