//! Serendipity discrete de Rham (SDDR) discretisation of the curl–curl form
//! of the incompressible Navier–Stokes equations on polyhedral meshes.

pub mod ddr;
pub mod linalg;
pub mod mesh;
pub mod ns;
pub mod num;
pub mod polyspaces;
pub mod quadrature;
pub mod verify;

pub use num::Real;

/// Double-precision mesh, the type used by the discrete operators and solver.
pub type Mesh = mesh::Mesh<f64>;
