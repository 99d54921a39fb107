//! Quadratic task with known curvature, minimizer, and optimum value.
//!
//! Client i's loss is 0.5 (w - b_i)' A (w - b_i) with a shared positive
//! diagonal A; the global loss is the client average. The minimizer is the
//! mean target and both f* and the gradient-Lipschitz constant (max diagonal
//! of A) are available in closed form, which makes this the substrate for
//! the convergence-bound monitor.

use crate::error::{Error, Result};
use crate::rng;
use crate::vector::GradVec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

/// Construction parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticParams {
    /// Client targets sit on a sphere of this radius around the center;
    /// larger radii mean more gradient-sign disagreement across clients.
    pub radius: f64,
    /// Diagonal curvature entries are drawn uniformly from this range.
    pub curvature_min: f64,
    pub curvature_max: f64,
    /// Stdev of the additive gradient noise for stochastic draws; 0 makes
    /// every draw exact.
    pub noise_std: f64,
    /// Initial model offset from the center, applied to every coordinate.
    pub init_offset: f64,
    /// Common center of the client targets, applied to every coordinate.
    pub center: f64,
}

impl Default for QuadraticParams {
    fn default() -> Self {
        QuadraticParams {
            radius: 0.5,
            curvature_min: 1.0,
            curvature_max: 1.0,
            noise_std: 0.0,
            init_offset: 10.0,
            center: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticTask {
    d: usize,
    n: usize,
    curvature: Vec<f64>,
    targets: Vec<GradVec>,
    /// Mean target: the global minimizer.
    minimizer: GradVec,
    f_star: f64,
    lipschitz: f64,
    noise_std: f64,
    initial: GradVec,
}

fn unit_sphere_sample(d: usize, stream: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(stream)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

impl QuadraticTask {
    pub fn new(d: usize, n: usize, params: &QuadraticParams, seed: u64) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::EmptyInput("quadratic task needs d >= 1 and n >= 1"));
        }
        if !(params.curvature_min > 0.0) || params.curvature_max < params.curvature_min {
            return Err(Error::config(
                "task.curvature",
                "need 0 < curvature_min <= curvature_max",
            ));
        }
        if params.radius < 0.0 || params.noise_std < 0.0 {
            return Err(Error::config("task", "radius and noise_std must be non-negative"));
        }
        let mut stream = rng::stream(seed, "quadratic-task", 0, 0);
        let curvature: Vec<f64> = (0..d)
            .map(|_| {
                if params.curvature_max > params.curvature_min {
                    stream.gen_range(params.curvature_min..=params.curvature_max)
                } else {
                    params.curvature_min
                }
            })
            .collect();
        let targets: Vec<GradVec> = (0..n)
            .map(|_| {
                let u = unit_sphere_sample(d, &mut stream);
                GradVec::from_raw(u.into_iter().map(|x| params.center + params.radius * x).collect())
            })
            .collect();
        let mut mean = vec![0.0; d];
        for t in &targets {
            for (m, &v) in mean.iter_mut().zip(t.as_slice()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let minimizer = GradVec::from_raw(mean);
        let lipschitz = curvature.iter().copied().fold(f64::MIN, f64::max);
        let initial =
            GradVec::from_raw(vec![params.center + params.init_offset; d]);

        let mut task = QuadraticTask {
            d,
            n,
            curvature,
            targets,
            minimizer,
            f_star: 0.0,
            lipschitz,
            noise_std: params.noise_std,
            initial,
        };
        task.f_star = task.loss_raw(&task.minimizer);
        Ok(task)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn clients(&self) -> usize {
        self.n
    }

    pub fn initial_model(&self) -> GradVec {
        self.initial.clone()
    }

    pub fn minimizer(&self) -> &GradVec {
        &self.minimizer
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    /// Lipschitz constant of the global gradient: the largest curvature.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn client_loss(&self, client: usize, w: &GradVec) -> f64 {
        let b = &self.targets[client];
        0.5 * w
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .zip(&self.curvature)
            .map(|((&wk, &bk), &a)| a * (wk - bk) * (wk - bk))
            .sum::<f64>()
    }

    fn loss_raw(&self, w: &GradVec) -> f64 {
        (0..self.n).map(|i| self.client_loss(i, w)).sum::<f64>() / self.n as f64
    }

    /// Global loss f(w), the client average.
    pub fn loss(&self, w: &GradVec) -> f64 {
        self.loss_raw(w)
    }

    /// Exact client gradient A (w - b_i).
    pub fn client_gradient(&self, client: usize, w: &GradVec) -> GradVec {
        let b = &self.targets[client];
        GradVec::from_raw(
            w.as_slice()
                .iter()
                .zip(b.as_slice())
                .zip(&self.curvature)
                .map(|((&wk, &bk), &a)| a * (wk - bk))
                .collect(),
        )
    }

    /// Unbiased stochastic gradient: the exact client gradient plus
    /// isotropic Gaussian noise (none for full-batch draws).
    pub fn stochastic_gradient(
        &self,
        client: usize,
        w: &GradVec,
        full_batch: bool,
        stream: &mut ChaCha8Rng,
    ) -> Result<GradVec> {
        let exact = self.client_gradient(client, w);
        if full_batch || self.noise_std == 0.0 {
            return Ok(exact);
        }
        let normal = Normal::new(0.0, self.noise_std).expect("validated noise_std");
        GradVec::new(
            exact
                .as_slice()
                .iter()
                .map(|&v| v + normal.sample(stream))
                .collect(),
        )
    }

    /// Exact global gradient A (w - mean(b)).
    pub fn full_gradient(&self, w: &GradVec) -> GradVec {
        GradVec::from_raw(
            w.as_slice()
                .iter()
                .zip(self.minimizer.as_slice())
                .zip(&self.curvature)
                .map(|((&wk, &bk), &a)| a * (wk - bk))
                .collect(),
        )
    }

    /// Suboptimality f(w) - f*; the task's evaluation metric.
    pub fn suboptimality(&self, w: &GradVec) -> f64 {
        self.loss(w) - self.f_star
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(d: usize, n: usize) -> QuadraticTask {
        QuadraticTask::new(d, n, &QuadraticParams::default(), 42).unwrap()
    }

    #[test]
    fn zero_gradient_at_client_target() {
        let t = task(4, 3);
        let b1 = t.targets[1].clone();
        let g = t.client_gradient(1, &b1);
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn suboptimality_vanishes_at_minimizer_and_is_nonnegative() {
        let t = task(6, 5);
        let w_star = t.minimizer().clone();
        assert!(t.suboptimality(&w_star).abs() < 1e-12);
        let mut stream = rng::stream(0, "probe", 0, 0);
        for _ in 0..50 {
            let w = GradVec::from_raw((0..6).map(|_| stream.gen_range(-5.0..5.0)).collect());
            assert!(t.suboptimality(&w) >= -1e-12);
        }
    }

    #[test]
    fn lipschitz_is_max_curvature() {
        let params = QuadraticParams {
            curvature_min: 0.5,
            curvature_max: 3.0,
            ..QuadraticParams::default()
        };
        let t = QuadraticTask::new(8, 4, &params, 7).unwrap();
        let max = t.curvature.iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(t.lipschitz(), max);
        assert!(max <= 3.0 && max >= 0.5);
    }

    #[test]
    fn stochastic_draws_are_unbiased() {
        let params = QuadraticParams { noise_std: 2.0, ..QuadraticParams::default() };
        let t = QuadraticTask::new(3, 2, &params, 9).unwrap();
        let w = GradVec::from_raw(vec![1.0, -2.0, 0.5]);
        let exact = t.client_gradient(0, &w);
        let draws = 10_000;
        let mut acc = vec![0.0; 3];
        let mut stream = rng::stream(1, "draws", 0, 0);
        for _ in 0..draws {
            let g = t.stochastic_gradient(0, &w, false, &mut stream).unwrap();
            for (a, &v) in acc.iter_mut().zip(g.as_slice()) {
                *a += v;
            }
        }
        let stderr = 2.0 / (draws as f64).sqrt();
        for (a, &e) in acc.iter().zip(exact.as_slice()) {
            let mean = a / draws as f64;
            assert!((mean - e).abs() < 3.0 * stderr, "mean {mean} vs exact {e}");
        }
    }

    #[test]
    fn full_batch_is_exact() {
        let params = QuadraticParams { noise_std: 5.0, ..QuadraticParams::default() };
        let t = QuadraticTask::new(3, 2, &params, 9).unwrap();
        let w = GradVec::from_raw(vec![0.0, 1.0, 2.0]);
        let mut stream = rng::stream(1, "draws", 0, 0);
        let g = t.stochastic_gradient(1, &w, true, &mut stream).unwrap();
        assert_eq!(g, t.client_gradient(1, &w));
    }

    #[test]
    fn targets_sit_on_the_configured_sphere() {
        let params = QuadraticParams { radius: 2.5, center: 1.0, ..QuadraticParams::default() };
        let t = QuadraticTask::new(5, 6, &params, 3).unwrap();
        for b in &t.targets {
            let dist = b
                .as_slice()
                .iter()
                .map(|&v| (v - 1.0) * (v - 1.0))
                .sum::<f64>()
                .sqrt();
            assert!((dist - 2.5).abs() < 1e-9);
        }
    }
}
