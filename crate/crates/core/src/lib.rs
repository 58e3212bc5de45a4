//! Two-phase volume-of-fluid advection with consistent staggered momentum
//! transport on a uniform 2D MAC mesh.
//!
//! The layers build on each other:
//! [`mesh`] (fields and operators) -> [`geom`] (polygon clipping) ->
//! [`plic`] (interface reconstruction) -> [`donating`] (donating regions and
//! partial fluxes) -> [`transport`] (volume fraction, mass and momentum
//! updates) -> [`harness`] (test cases, diagnostics and CSV output).

pub mod donating;
pub mod geom;
pub mod harness;
pub mod mesh;
pub mod plic;
pub mod transport;

pub use geom::Vec2;
pub use mesh::{Axis, CenteredField, FaceField, Mesh, StagFaceField};

#[derive(Debug, thiserror::Error)]
pub enum VofError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("step {step}: CFL {kappa:.6} exceeds limit {limit}")]
    Cfl { step: usize, kappa: f64, limit: f64 },
    #[error("step {step}: non-finite value in {what}")]
    NonFinite { step: usize, what: &'static str },
    #[error("step {step}: {what} violated at {location} by {excess:.3e}")]
    Invariant { step: usize, what: &'static str, location: String, excess: f64 },
    #[error("pressure solve stalled at relative residual {residual:.3e} after {iterations} iterations")]
    SolverStalled { iterations: usize, residual: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
