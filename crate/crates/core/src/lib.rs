//! Discontinuous Galerkin discretization of elliptic equations in
//! first-order flux form, with a generalized internal-penalty numerical flux,
//! hp-nonconforming mortars and matrix-free solvers.

pub mod analysis;
pub mod background;
pub mod basis;
pub mod error;
pub mod mesh;
pub mod mortars;
pub mod operators;
pub mod solver;
pub mod systems;
pub mod tensor;

pub use error::{DgError, Result};
