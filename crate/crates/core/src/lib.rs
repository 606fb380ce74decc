//! Transmit-power minimization for RIS-assisted visible-light-communication
//! UAV networks: channel model, phase, deployment and association solvers,
//! and the alternating outer loop that ties them together.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod association;
pub mod channel;
pub mod cones;
pub mod deployment;
pub mod error;
pub mod model;
pub mod oracle;
pub mod orchestrator;
pub mod phases;

pub use error::{Error, Result};
pub use model::{Association, Position, Scenario, ScenarioConfig, Solution, VlcParams};
pub use phases::PhaseMatrix;
