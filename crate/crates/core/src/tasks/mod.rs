//! Synthetic learning problems: stochastic gradient oracles, non-IID data
//! partitioning, evaluation metrics, and the model update rule.

mod classify;
mod partition;
mod quadratic;

pub use classify::{ClassificationParams, ClassificationTask, Sample};
pub use partition::{partition_noniid, PartitionSpec};
pub use quadratic::{QuadraticParams, QuadraticTask};

use crate::aggregators::Aggregate;
use crate::error::{Error, Result};
use crate::vector::GradVec;
use rand_chacha::ChaCha8Rng;

/// A learning problem the harness can train on.
#[derive(Debug, Clone)]
pub enum Task {
    Quadratic(QuadraticTask),
    Classification(ClassificationTask),
}

impl Task {
    pub fn dim(&self) -> usize {
        match self {
            Task::Quadratic(t) => t.dim(),
            Task::Classification(t) => t.dim(),
        }
    }

    pub fn clients(&self) -> usize {
        match self {
            Task::Quadratic(t) => t.clients(),
            Task::Classification(t) => t.clients(),
        }
    }

    pub fn initial_model(&self) -> GradVec {
        match self {
            Task::Quadratic(t) => t.initial_model(),
            Task::Classification(t) => t.initial_model(),
        }
    }

    /// Unbiased estimator of the client gradient; exact when `full_batch`.
    pub fn stochastic_gradient(
        &self,
        client: usize,
        w: &GradVec,
        full_batch: bool,
        stream: &mut ChaCha8Rng,
    ) -> Result<GradVec> {
        match self {
            Task::Quadratic(t) => t.stochastic_gradient(client, w, full_batch, stream),
            Task::Classification(t) => t.stochastic_gradient(client, w, full_batch, stream),
        }
    }

    /// Global loss and exact full gradient in one pass.
    pub fn loss_and_full_gradient(&self, w: &GradVec) -> (f64, GradVec) {
        match self {
            Task::Quadratic(t) => (t.loss(w), t.full_gradient(w)),
            Task::Classification(t) => t.loss_and_full_gradient(w),
        }
    }

    /// Evaluation metric: held-out test error for classification,
    /// suboptimality f(w) - f* for the quadratic task.
    pub fn evaluate(&self, w: &GradVec) -> f64 {
        match self {
            Task::Quadratic(t) => t.suboptimality(w),
            Task::Classification(t) => t.test_error(w),
        }
    }

    /// What [`Task::evaluate`] measures; reports label their columns with it.
    pub fn metric_name(&self) -> &'static str {
        match self {
            Task::Quadratic(_) => "suboptimality",
            Task::Classification(_) => "test_error",
        }
    }

    /// Closed-form constants for the convergence monitor, available only on
    /// the quadratic task: (f*, L).
    pub fn monitor_constants(&self) -> Option<(f64, f64)> {
        match self {
            Task::Quadratic(t) => Some((t.f_star(), t.lipschitz())),
            Task::Classification(_) => None,
        }
    }
}

/// One model update: subtract eta times a value aggregate, move every
/// coordinate by ±eta for a sign aggregate, or subtract a pre-scaled step
/// as-is.
pub fn apply_update(w: &GradVec, aggregate: &Aggregate, eta: f64) -> Result<GradVec> {
    let step_dim = match aggregate {
        Aggregate::Values(v) => v.dim(),
        Aggregate::Signs(s) => s.dim(),
        Aggregate::Step(p) => p.dim(),
    };
    if step_dim != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            got: step_dim,
        });
    }
    let values = match aggregate {
        Aggregate::Values(v) => w
            .as_slice()
            .iter()
            .zip(v.as_slice())
            .map(|(&wk, &vk)| wk - eta * vk)
            .collect(),
        Aggregate::Signs(s) => w
            .as_slice()
            .iter()
            .zip(s.as_slice())
            .map(|(&wk, &sk)| wk - eta * f64::from(sk))
            .collect(),
        Aggregate::Step(p) => w
            .as_slice()
            .iter()
            .zip(p.as_slice())
            .map(|(&wk, &pk)| wk - pk)
            .collect(),
    };
    Ok(GradVec::from_raw(values))
}
