//! Lowest-order (k = 1) virtual element method for two-dimensional linear
//! elasticity on arbitrary polygonal meshes.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: polygon kernel (area, centroid, diameter, edge normals)
//! * [`material`]: plane stress / plane strain moduli in Voigt form
//! * [`polybasis`]: the six scaled vector monomials spanning `[P1]^2`
//! * [`element`]: projectors, consistency and stability stiffness, strain
//!   and stress recovery for a single polygon
//! * [`mesh`]: mesh data model, validation and generators
//! * [`problem`]: the line-oriented problem file
//! * [`assembly`]: global stiffness, loads, constraints and the sparse solve
//! * [`postproc`]: field recovery, scalar metrics and VTK/CSV export
//! * [`cli`]: the `vem2d` command-line driver

pub mod assembly;
pub mod cli;
pub mod element;
pub mod geometry;
pub mod material;
pub mod mesh;
pub mod polybasis;
pub mod postproc;
pub mod problem;

mod error;

pub use error::{Error, Result};
