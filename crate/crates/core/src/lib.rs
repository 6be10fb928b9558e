//! Koopman-lifted surrogate models for a three-robot utility-maximization problem.
//!
//! The crate lifts the double-integrator state of three disk robots into a
//! 30-dimensional Koopman vector whose second block holds six nonlinear
//! utility components per robot. A linear (36-term), bilinear (901-term) or
//! decentralized bilinear (109-term per robot) regressor is identified online
//! with normalized recursive least squares, and the identified model is used
//! to pick the utility-maximizing acceleration inside a box.
//!
//! Module map:
//!
//! * [`dynamics`]: discrete double-integrator kinematics and surface distances.
//! * [`utility`]: the six utility components and weighted utilities.
//! * [`koopman`]: lifted vectors, regressors and one-step prediction.
//! * [`estimation`]: normalized RLS with gain reset, normalized gradient, batch oracle, checkpoints.
//! * [`control`]: objective linearization and the analytic box maximizer.
//! * [`harness`]: identification / feedback-control phases and metrics.
//! * [`config`] and [`io`]: run configuration and result bundles.

pub mod config;
pub mod control;
pub mod dynamics;
mod error;
pub mod estimation;
pub mod harness;
pub mod io;
pub mod koopman;
pub mod utility;

pub use error::{Error, Result};

/// Number of robots in the centralized model.
pub const NUM_ROBOTS: usize = 3;
/// Utility components per robot.
pub const COMPONENTS: usize = 6;
