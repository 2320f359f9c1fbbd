//! Simulation and analysis of coupled evolutionary-game/resource dynamics
//! under tax-reward and tax-punishment incentives.
//!
//! - [`model`]: parameters, payoff kernels and vector fields
//! - [`dynamics`]: fixed-step RK4 integration and outcome detection
//! - [`equilibria`]: fixed points, Jacobians and stability classes
//! - [`cycles`]: limit-cycle detection and basin-of-attraction maps
//! - [`abm`]: agent-based Monte Carlo counterpart of the mean-field model
//! - [`presets`], [`config`], [`sweep`], [`io`]: experiment plumbing

pub mod abm;
pub mod config;
pub mod cycles;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod io;
pub mod model;
pub mod parallel;
pub mod presets;
pub mod sweep;

pub use error::{LabError, Result};
pub use model::{IncentiveKind, ModelParams, SystemState};
