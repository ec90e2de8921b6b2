//! Two-vehicle leader/follower simulator in which a surface vehicle and an
//! underwater vehicle avoid obstacles together while linked only by mutual
//! camera observation: no messages and no follower self-localisation.

// `!(x > 0.0)` is how validation rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod config;
pub mod control;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod paradigm;
pub mod perception;
pub mod plot;
pub mod scenarios;
pub mod trace;
pub mod world;

pub use control::Side;
pub use engine::{run, Mode, SimOutcome, Status, TraceRecord};
pub use error::ConfigError;
pub use scenarios::{builtin, metrics, BuiltinName, RunMetrics, ScenarioDef};
