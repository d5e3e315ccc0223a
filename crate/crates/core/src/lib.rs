//! Upwind HDG discretization of 2D convection-diffusion/transport on
//! structured quadrilateral meshes, with multilevel (ML) and enriched
//! multilevel (EML) solvers/preconditioners for the trace system.

pub mod basis;
pub mod benchmarks;
pub mod complexity;
pub mod error;
pub mod hdg;
pub mod krylov;
pub mod linalg;
pub mod mesh;
pub mod projection;
pub mod run;
pub mod solver;

pub use error::HdgError;
