//! Deterministic simulator and library for Byzantine-robust federated
//! learning over a ring-all-reduce topology.
//!
//! The crate provides:
//! - vector primitives: sign quantization, sign sums, and the threshold
//!   consensus mapping ([`vector`]);
//! - chunked ring schedules and lock-step protocol execution with bit-exact
//!   communication ledgers ([`ring`]);
//! - server-client gradient aggregation rules used as baselines and test
//!   oracles ([`aggregators`]);
//! - model-poisoning attack generators ([`adversary`]);
//! - synthetic learning tasks with known smoothness constants ([`tasks`]);
//! - a config-driven experiment harness with sweeps, a convergence-bound
//!   monitor, and deterministic reports ([`harness`]);
//! - self-contained verification checks behind the `verify` CLI command
//!   ([`verify`]).

pub mod adversary;
pub mod aggregators;
pub mod chunk;
pub mod error;
pub mod harness;
pub mod ring;
pub mod rng;
pub mod tasks;
pub mod vector;
pub mod verify;

pub use chunk::ChunkPlan;
pub use error::{Error, Result};
pub use vector::{consensus_map, sign_quantize, GradVec, HyperParams, SignVec, SumVec};
