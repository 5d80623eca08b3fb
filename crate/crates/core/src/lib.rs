//! Decentralized sharing of primary frequency-control reserves between asynchronous AC areas
//! through a multi-terminal HVDC grid.
//!
//! Each converter runs a local proportional law on its own frequency and DC voltage. The crate
//! simulates the resulting closed loop, certifies its stability with a quadratic Lyapunov
//! function, and evaluates closed-form bounds on the steady-state sharing, voltage and
//! frequency errors.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! it to `f64`, which is what the scenario files and CLI use.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod io;
pub mod plant;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type GridTopology = grid::GridTopology<f64>;
pub type LaplacianBundle = grid::LaplacianBundle<f64>;
pub type SystemParams = plant::SystemParams<f64>;
pub type SystemState = plant::SystemState<f64>;
pub type Disturbance = plant::Disturbance<f64>;
pub type ClosedLoopMatrices = plant::ClosedLoopMatrices<f64>;
pub type Scenario = sim::Scenario<f64>;
pub type Trajectory = sim::Trajectory<f64>;
pub type EquilibriumResult = analysis::EquilibriumResult<f64>;
pub type CertificateReport = analysis::CertificateReport<f64>;
pub type BoundsReport = analysis::BoundsReport<f64>;

pub type GridTopologyF32 = grid::GridTopology<f32>;
pub type SystemParamsF32 = plant::SystemParams<f32>;
pub type ScenarioF32 = sim::Scenario<f32>;
