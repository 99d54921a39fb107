//! Synthetic multi-class classification with class-conditional Gaussian
//! features and a multinomial logistic model.
//!
//! The model is a C x p weight matrix flattened class-major, so the
//! exchanged gradient dimension is d = classes * features. Train and test
//! pools are disjoint; the train pool is split into per-client shards by the
//! non-IID partition.

use super::partition::{partition_noniid, PartitionSpec};
use crate::adversary::flip_label;
use crate::error::{Error, Result};
use crate::rng;
use crate::vector::GradVec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeSet;
use std::io::Write;

/// Construction parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationParams {
    pub classes: usize,
    pub features: usize,
    /// Train pool size is n * train_per_client before partitioning.
    pub train_per_client: usize,
    pub test_samples: usize,
    /// Scale of the class mean vectors; larger separates classes more.
    pub class_sep: f64,
    /// Stdev of the isotropic feature noise around the class mean.
    pub spread: f64,
    /// Stochastic batch size per client per round.
    pub batch_size: usize,
}

impl Default for ClassificationParams {
    fn default() -> Self {
        ClassificationParams {
            classes: 10,
            features: 20,
            train_per_client: 60,
            test_samples: 1000,
            class_sep: 3.0,
            spread: 1.0,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub label: usize,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ClassificationTask {
    classes: usize,
    features: usize,
    batch_size: usize,
    train: Vec<Sample>,
    test: Vec<Sample>,
    shards: Vec<Vec<usize>>,
}

fn gaussian_vec(d: usize, stream: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(stream)).collect()
}

impl ClassificationTask {
    pub fn new(n: usize, q: f64, params: &ClassificationParams, seed: u64) -> Result<Self> {
        if params.classes < 2 {
            return Err(Error::TooFewClasses { classes: params.classes });
        }
        if params.features == 0 || params.train_per_client == 0 || params.test_samples == 0 {
            return Err(Error::config(
                "task",
                "features, train_per_client and test_samples must be positive",
            ));
        }
        if params.batch_size == 0 {
            return Err(Error::config("task.batch_size", "batch size must be positive"));
        }
        if !(params.class_sep > 0.0) || !(params.spread > 0.0) {
            return Err(Error::config("task", "class_sep and spread must be positive"));
        }

        let mut stream = rng::stream(seed, "classify-task", 0, 0);
        let means: Vec<Vec<f64>> = (0..params.classes)
            .map(|_| {
                let v = gaussian_vec(params.features, &mut stream);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.into_iter().map(|x| params.class_sep * x / norm).collect()
            })
            .collect();

        let draw = |stream: &mut ChaCha8Rng| -> Sample {
            let label = stream.gen_range(0..params.classes);
            let features = means[label]
                .iter()
                .map(|&m| {
                    let noise: f64 = StandardNormal.sample(stream);
                    m + params.spread * noise
                })
                .collect();
            Sample { label, features }
        };

        let train: Vec<Sample> = (0..n * params.train_per_client).map(|_| draw(&mut stream)).collect();
        let test: Vec<Sample> = (0..params.test_samples).map(|_| draw(&mut stream)).collect();

        let labels: Vec<usize> = train.iter().map(|s| s.label).collect();
        let shards = partition_noniid(
            &labels,
            n,
            &PartitionSpec { q, groups: params.classes, seed: rng::derive_seed(seed, "shards", 0, 0) },
        )?;

        Ok(ClassificationTask {
            classes: params.classes,
            features: params.features,
            batch_size: params.batch_size,
            train,
            test,
            shards,
        })
    }

    /// Exchanged gradient dimension: classes x features, class-major.
    pub fn dim(&self) -> usize {
        self.classes * self.features
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn clients(&self) -> usize {
        self.shards.len()
    }

    pub fn shard(&self, client: usize) -> &[usize] {
        &self.shards[client]
    }

    pub fn initial_model(&self) -> GradVec {
        GradVec::zeros(self.dim())
    }

    fn scores(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                let row = &w[c * self.features..(c + 1) * self.features];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Per-sample softmax cross-entropy loss and gradient accumulation.
    fn accumulate_sample(&self, w: &[f64], sample: &Sample, grad: &mut [f64]) -> f64 {
        let mut z = self.scores(w, &sample.features);
        let zmax = z.iter().copied().fold(f64::MIN, f64::max);
        let mut total = 0.0;
        for v in &mut z {
            *v = (*v - zmax).exp();
            total += *v;
        }
        let loss = -(z[sample.label] / total).ln();
        for (c, &p_raw) in z.iter().enumerate() {
            let p = p_raw / total;
            let coeff = p - f64::from(u8::from(c == sample.label));
            let row = &mut grad[c * self.features..(c + 1) * self.features];
            for (g, &x) in row.iter_mut().zip(&sample.features) {
                *g += coeff * x;
            }
        }
        loss
    }

    fn mean_loss_and_gradient(&self, w: &GradVec, indices: &[usize]) -> (f64, GradVec) {
        let mut grad = vec![0.0; self.dim()];
        let mut loss = 0.0;
        for &idx in indices {
            loss += self.accumulate_sample(w.as_slice(), &self.train[idx], &mut grad);
        }
        let count = indices.len() as f64;
        for g in &mut grad {
            *g /= count;
        }
        (loss / count, GradVec::from_raw(grad))
    }

    /// Mean gradient over a uniformly sampled batch from the client's shard.
    pub fn stochastic_gradient(
        &self,
        client: usize,
        w: &GradVec,
        full_batch: bool,
        stream: &mut ChaCha8Rng,
    ) -> Result<GradVec> {
        let shard = &self.shards[client];
        if shard.is_empty() {
            return Err(Error::EmptyShard { client });
        }
        if full_batch || shard.len() <= self.batch_size {
            return Ok(self.mean_loss_and_gradient(w, shard).1);
        }
        let batch: Vec<usize> = (0..self.batch_size)
            .map(|_| shard[stream.gen_range(0..shard.len())])
            .collect();
        Ok(self.mean_loss_and_gradient(w, &batch).1)
    }

    /// Exact shard gradient, the full-batch reference.
    pub fn client_full_gradient(&self, client: usize, w: &GradVec) -> Result<GradVec> {
        let shard = &self.shards[client];
        if shard.is_empty() {
            return Err(Error::EmptyShard { client });
        }
        Ok(self.mean_loss_and_gradient(w, shard).1)
    }

    /// Loss and gradient over the whole train pool.
    pub fn loss_and_full_gradient(&self, w: &GradVec) -> (f64, GradVec) {
        let all: Vec<usize> = (0..self.train.len()).collect();
        self.mean_loss_and_gradient(w, &all)
    }

    pub fn loss(&self, w: &GradVec) -> f64 {
        self.loss_and_full_gradient(w).0
    }

    /// Fraction of held-out samples misclassified by argmax score.
    pub fn test_error(&self, w: &GradVec) -> f64 {
        let mut wrong = 0usize;
        for sample in &self.test {
            let z = self.scores(w.as_slice(), &sample.features);
            let mut best = 0usize;
            for (c, &v) in z.iter().enumerate() {
                if v > z[best] {
                    best = c;
                }
            }
            wrong += usize::from(best != sample.label);
        }
        wrong as f64 / self.test.len() as f64
    }

    /// Data poisoning: relabel every sample on the given clients' shards by
    /// l -> C-1-l. Shards are disjoint, so benign data is untouched.
    pub fn flip_labels_on(&mut self, malicious: &BTreeSet<usize>) -> Result<()> {
        for &client in malicious {
            if client >= self.shards.len() {
                return Err(Error::config(
                    "attack.malicious",
                    format!("client id {client} out of range"),
                ));
            }
            for &idx in &self.shards[client] {
                let flipped = flip_label(self.train[idx].label, self.classes)?;
                self.train[idx].label = flipped;
            }
        }
        Ok(())
    }

    /// Dump one client's shard as delimited text: label, then the feature
    /// values.
    pub fn export_shard(&self, client: usize, mut w: impl Write) -> Result<()> {
        for &idx in &self.shards[client] {
            let sample = &self.train[idx];
            write!(w, "{}", sample.label)?;
            for v in &sample.features {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
