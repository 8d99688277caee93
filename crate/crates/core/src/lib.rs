//! Deterministic simulator of a hybrid access network: a GEO satellite TDMA
//! access point and aerial 5G NR access points serving mobile UEs on a
//! square grid.
//!
//! Start with [`scenario::builtin`] or [`scenario::parse_scenario`], then
//! hand the scenario to [`engine::run`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alloc;
pub mod cac;
pub mod channel;
pub mod engine;
pub mod geometry;
pub mod ids;
pub mod interference;
pub mod mobility;
pub mod registry;
pub mod scenario;
pub mod units;

pub use engine::{run, EngineError, MetricsFrame, RunOutput, RunSummary, Simulation};
pub use ids::{ApId, UeId};
pub use scenario::{builtin, parse_scenario, Scenario, ScenarioError};
