//! Dynamic mode adaptive control (DMAC).
//!
//! Identifies a low-order linear model `xi_{k+1} = A xi_k + B u_k` online
//! with a matrix recursive least squares estimator, synthesizes a
//! full-state-feedback-plus-integrator tracking controller from the
//! identified model at every sample, and closes the loop around a
//! continuous-time plant under zero-order hold.

pub mod controller;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod lqr;
pub mod plants;
pub mod presets;

pub use controller::{Controller, ControllerConfig, SynthesisStatus};
pub use error::{Error, Result};
pub use estimator::{Estimator, EstimatorConfig, SnapshotBatch};
pub use harness::{run_experiment, run_sweep, summarize, ExperimentSpec, RunLog, SweepSpec};
pub use lqr::{AugmentedModel, DareOptions, GainPair, LqrWeights};
pub use plants::{PlantModel, IntegratorConfig};
