//! Simulation of a dual-rate PID loop closed over a lossy, delayed network.
//!
//! The slow PI runs on a remote node at the sensor period; the fast PD runs
//! next to the actuator. A predictor on the remote side ships future PI
//! actions with each control packet so the local node can keep acting
//! through packet losses.

pub mod controllers;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod network;
pub mod plant;
pub mod predictor;
pub mod reference;
pub mod scenario;
pub mod schedule;
pub mod trace;

pub use engine::{run, run_comparison, run_with_channels};
pub use error::{Error, Result};
pub use scenario::{ControllerVariant, ScenarioConfig};
