//! Discrete representations: rectilinear cell grids, radial profiles,
//! domain descriptions and the measurements taken on them.

mod domain;
mod grid;
pub mod io;
mod measure;
mod radial;

pub use domain::{BoundarySample, DomainSpec, LevelSetDomain};
pub(crate) use grid::domain_mask;
pub use grid::{Axis, CellTag, Grid3, GridField};
pub use measure::{
    boundary_area_in_g, boundary_mean_curvature, dirichlet_energy, euclidean_volume, gradient, grid_around,
    Estimate,
};
pub use radial::RadialProfile;
