//! Closed-loop simulator for battery-aware execution management of
//! edge-assisted XR clients.

// Negated comparisons below are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config_space;
pub mod dqn;
pub mod energy;
pub mod env;
pub mod error;
pub mod harness;
pub mod latency;
pub mod network;
pub mod policy;

pub use config_space::{ActionId, ExecutionConfig, ExecutionMode, ImuRate, QualityLevel, NUM_ACTIONS};
pub use env::{EnvConfig, XrEnv};
pub use error::{Result, XrError};
pub use harness::{ProfileSpec, ScenarioSpec};
pub use policy::PolicyKind;
