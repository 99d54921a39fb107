//! Seeded end-to-end training runs.
//!
//! One round: every client draws a stochastic gradient, the adversary
//! rewrites malicious submissions, the configured architecture aggregates
//! (server-client rules directly, ring architectures through the protocol
//! executor), and the identical update is applied at every simulated client.
//! Everything is deterministic per seed.

use super::config::{Architecture, ExperimentConfig, TaskChoice};
use super::monitor::{theorem1_monitor, BoundReport};
use crate::adversary::{apply_attack, AttackContext, AttackKind};
use crate::aggregators::{aggregate, Aggregate};
use crate::chunk::ChunkPlan;
use crate::error::{Error, Result};
use crate::ring::{run_brace_round, run_rar_round, sc_round_ledger};
use crate::rng;
use crate::tasks::{apply_update, ClassificationTask, QuadraticTask, Task};
use crate::vector::GradVec;

/// One training round's trace, with metrics taken at the pre-update model.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// Round index, starting at 1.
    pub round: usize,
    /// Global loss f(w^t).
    pub loss: f64,
    /// Euclidean norm of the exact full gradient at w^t (monitor input).
    pub grad_norm: f64,
    /// Task evaluation metric at w^t (test error or suboptimality).
    pub test_metric: f64,
    /// Bits placed on the wire this round.
    pub bits_total: u64,
    /// Checksum of the aggregate, for determinism probes.
    pub aggregate_checksum: u64,
    /// For sign aggregates: fraction of dimensions whose step opposes the
    /// sign of the full gradient. None for value aggregates.
    pub opposed_fraction: Option<f64>,
}

/// Complete result of one seed's run.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<RoundRecord>,
    /// Task metric at the final model w^{T+1}.
    pub final_metric: f64,
    pub final_loss: f64,
    pub final_model_checksum: u64,
    pub bits_per_round: u64,
    pub attack_notes: Vec<String>,
    /// Convergence-bound report; present for quadratic tasks trained with a
    /// sign aggregate.
    pub bound: Option<BoundReport>,
}

/// Multi-seed experiment result.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<SeedRun>,
    pub median_final_metric: f64,
    pub median_final_loss: f64,
}

/// Median with the even-count average convention.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite metric"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn build_task(config: &ExperimentConfig, seed: u64) -> Result<Task> {
    let task_seed = rng::derive_seed(seed, "task", 0, 0);
    let mut task = match &config.task {
        TaskChoice::Quadratic(params) => Task::Quadratic(QuadraticTask::new(
            config.params.d,
            config.params.n,
            params,
            task_seed,
        )?),
        TaskChoice::Classification(params) => Task::Classification(ClassificationTask::new(
            config.params.n,
            config.params.q,
            params,
            task_seed,
        )?),
    };
    // Label flipping poisons shards once, at setup.
    if config.attack.kind == AttackKind::LabelFlip {
        match &mut task {
            Task::Classification(t) => t.flip_labels_on(&config.attack.malicious)?,
            Task::Quadratic(_) => {
                return Err(Error::config(
                    "attack.kind",
                    "label-flip requires a classification task",
                ))
            }
        }
    }
    Ok(task)
}

fn aggregate_round(
    config: &ExperimentConfig,
    plan: Option<&ChunkPlan>,
    submissions: &[GradVec],
) -> Result<(Aggregate, u64)> {
    let p = &config.params;
    match &config.architecture {
        Architecture::ServerClient(gar) => {
            let agg = aggregate(gar, submissions, p.eta)?;
            let ledger = sc_round_ledger(p.n, p.d, p.m);
            Ok((agg, ledger.total_bits()))
        }
        Architecture::RarMean => {
            let plan = plan.expect("ring architectures carry a chunk plan");
            let (sum, ledger) = run_rar_round(submissions, plan, p.m)?;
            // Divide exactly as the server-client mean does, so the two
            // paths round identically.
            let n = p.n as f64;
            let mean = GradVec::from_raw(sum.as_slice().iter().map(|v| v / n).collect());
            Ok((Aggregate::Values(mean), ledger.total_bits()))
        }
        Architecture::Brace => {
            let plan = plan.expect("ring architectures carry a chunk plan");
            let (signs, ledger) = run_brace_round(submissions, plan, p.lambda, p.m)?;
            Ok((Aggregate::Signs(signs), ledger.total_bits()))
        }
    }
}

fn aggregate_checksum(agg: &Aggregate) -> u64 {
    match agg {
        Aggregate::Values(v) | Aggregate::Step(v) => rng::checksum_f64(v.as_slice()),
        Aggregate::Signs(s) => rng::checksum_i8(s.as_slice()),
    }
}

fn opposed_fraction(agg: &Aggregate, full_gradient: &GradVec) -> Option<f64> {
    let signs = match agg {
        Aggregate::Signs(s) => s,
        _ => return None,
    };
    let d = signs.dim();
    let opposed = signs
        .as_slice()
        .iter()
        .zip(full_gradient.as_slice())
        .filter(|(&s, &g)| f64::from(s) * g < 0.0)
        .count();
    Some(opposed as f64 / d as f64)
}

/// Execute all T rounds for one seed.
pub fn run_single_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let p = &config.params;
    let task = build_task(config, seed)?;
    debug_assert_eq!(task.dim(), p.d);
    debug_assert_eq!(task.clients(), p.n);

    let plan = match config.architecture {
        Architecture::ServerClient(_) => None,
        Architecture::RarMean | Architecture::Brace => Some(ChunkPlan::new(p.d, p.n)?),
    };

    let mut w = task.initial_model();
    let mut records = Vec::with_capacity(p.rounds);
    let mut attack_notes: Vec<String> = Vec::new();
    let mut bits_per_round = 0u64;

    for round in 1..=p.rounds {
        // The adversary's per-round gradient transform is the identity for
        // data poisoning, so honest gradients double as submissions there.
        let honest: Vec<GradVec> = (0..p.n)
            .map(|client| {
                let mut stream = rng::stream(seed, "grad", round as u64, client as u64);
                task.stochastic_gradient(client, &w, config.full_batch, &mut stream)
            })
            .collect::<Result<_>>()?;
        let ctx = AttackContext {
            honest: &honest,
            model: &w,
            seed: rng::derive_seed(seed, "attack", round as u64, 0),
        };
        let outcome = apply_attack(&config.attack, &ctx)?;
        if let Some(note) = outcome.note {
            if !attack_notes.contains(&note) {
                attack_notes.push(note);
            }
        }

        let (agg, bits) = aggregate_round(config, plan.as_ref(), &outcome.submissions)?;
        if round == 1 {
            bits_per_round = bits;
        }
        debug_assert_eq!(bits, bits_per_round, "ledger totals drift across rounds");

        let (loss, full_gradient) = task.loss_and_full_gradient(&w);
        records.push(RoundRecord {
            round,
            loss,
            grad_norm: full_gradient.norm2(),
            test_metric: task.evaluate(&w),
            bits_total: bits,
            aggregate_checksum: aggregate_checksum(&agg),
            opposed_fraction: opposed_fraction(&agg, &full_gradient),
        });

        w = apply_update(&w, &agg, p.eta)?;
    }

    let bound = match (&task, records.last()) {
        (Task::Quadratic(_), Some(_)) => {
            let (f_star, lipschitz) = task.monitor_constants().expect("quadratic constants");
            let sign_steps = records.iter().all(|r| r.opposed_fraction.is_some());
            if sign_steps {
                Some(theorem1_monitor(
                    &records,
                    lipschitz,
                    p.eta,
                    f_star,
                    records[0].loss,
                    p.d,
                )?)
            } else {
                None
            }
        }
        _ => None,
    };

    Ok(SeedRun {
        seed,
        final_metric: task.evaluate(&w),
        final_loss: task.loss_and_full_gradient(&w).0,
        final_model_checksum: rng::checksum_f64(w.as_slice()),
        bits_per_round,
        attack_notes,
        records,
        bound,
    })
}

/// Run every configured seed and aggregate medians.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let mut runs = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        runs.push(run_single_seed(config, seed)?);
    }
    let finals: Vec<f64> = runs.iter().map(|r| r.final_metric).collect();
    let losses: Vec<f64> = runs.iter().map(|r| r.final_loss).collect();
    Ok(ExperimentResult {
        median_final_metric: median(&finals),
        median_final_loss: median(&losses),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::AttackSpec;
    use crate::aggregators::GarSpec;
    use crate::tasks::QuadraticParams;
    use std::path::PathBuf;

    fn quad_config(arch: Architecture, rounds: usize) -> ExperimentConfig {
        ExperimentConfig {
            params: crate::vector::HyperParams {
                n: 5,
                f: 0,
                d: 8,
                m: 32,
                lambda: 0,
                eta: 0.0625,
                rounds,
                q: 0.5,
            },
            architecture: arch,
            attack: AttackSpec::none(),
            task: TaskChoice::Quadratic(QuadraticParams {
                radius: 0.5,
                init_offset: 2.0,
                ..QuadraticParams::default()
            }),
            full_batch: true,
            seeds: vec![1],
            output_dir: PathBuf::from("runs/test"),
        }
    }

    #[test]
    fn brace_single_round_matches_hand_stepped_oracle() {
        let config = quad_config(Architecture::Brace, 1);
        let run = run_single_seed(&config, 1).unwrap();
        // Replay by hand: same task, same gradients, centralized consensus.
        let task = build_task(&config, 1).unwrap();
        let w1 = task.initial_model();
        let honest: Vec<GradVec> = (0..5)
            .map(|c| {
                let mut stream = rng::stream(1, "grad", 1, c as u64);
                task.stochastic_gradient(c as usize, &w1, true, &mut stream).unwrap()
            })
            .collect();
        let consensus = crate::aggregators::gar_brace_oracle(&honest, 0).unwrap();
        let expected = apply_update(&w1, &Aggregate::Signs(consensus), 0.0625).unwrap();
        let expected_metric = match &task {
            Task::Quadratic(t) => t.suboptimality(&expected),
            _ => unreachable!(),
        };
        assert_eq!(run.final_metric, expected_metric);
        assert_eq!(run.final_model_checksum, rng::checksum_f64(expected.as_slice()));
    }

    #[test]
    fn saturated_threshold_moves_every_coordinate_up() {
        // f=0 with the threshold at +n: no sum can exceed it, the consensus
        // outputs all -1, and w gains eta per coordinate each round.
        let mut config = quad_config(Architecture::Brace, 1);
        config.params.lambda = config.params.n as i32;
        let run = run_single_seed(&config, 3).unwrap();
        let task = build_task(&config, 3).unwrap();
        let w1 = task.initial_model();
        assert_eq!(run.records.len(), 1);
        let expected: Vec<f64> = w1.as_slice().iter().map(|v| v + 0.0625).collect();
        assert_eq!(run.final_model_checksum, rng::checksum_f64(&expected));
    }

    #[test]
    fn same_seed_is_byte_identical_and_seeds_differ() {
        let mut config = quad_config(Architecture::RarMean, 5);
        config.task = TaskChoice::Quadratic(QuadraticParams {
            noise_std: 1.0,
            ..QuadraticParams::default()
        });
        config.full_batch = false;
        let a = run_single_seed(&config, 42).unwrap();
        let b = run_single_seed(&config, 42).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.final_model_checksum, b.final_model_checksum);
        let c = run_single_seed(&config, 43).unwrap();
        assert_ne!(a.final_model_checksum, c.final_model_checksum);
    }

    #[test]
    fn brace_ring_equals_sc_oracle_path_exactly() {
        // The ring is pure transport for the same integer math, so iterates
        // agree bitwise for any config.
        let ring = quad_config(Architecture::Brace, 6);
        let sc = {
            let mut c = ring.clone();
            c.architecture =
                Architecture::ServerClient(GarSpec::BraceOracle { lambda: 0 });
            c
        };
        let a = run_single_seed(&ring, 9).unwrap();
        let b = run_single_seed(&sc, 9).unwrap();
        assert_eq!(a.final_model_checksum, b.final_model_checksum);
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.aggregate_checksum, rb.aggregate_checksum);
            assert_eq!(ra.loss, rb.loss);
        }
        // Ledgers differ: ring bits vs upload bits.
        assert_ne!(a.bits_per_round, b.bits_per_round);
    }

    #[test]
    fn rar_mean_equals_sc_mean_exactly() {
        // n=2: each chunk folds exactly two contributions, and two-term
        // addition is commutative, so the ring sum is bitwise the plain sum
        // for arbitrary real gradients.
        let mut ring = quad_config(Architecture::RarMean, 8);
        ring.params.n = 2;
        ring.params.f = 0;
        ring.task = TaskChoice::Quadratic(QuadraticParams {
            radius: 0.7,
            init_offset: 2.0,
            ..QuadraticParams::default()
        });
        let sc = {
            let mut c = ring.clone();
            c.architecture = Architecture::ServerClient(GarSpec::Mean);
            c
        };
        let a = run_single_seed(&ring, 4).unwrap();
        let b = run_single_seed(&sc, 4).unwrap();
        assert_eq!(a.final_model_checksum, b.final_model_checksum);
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.loss, rb.loss);
            assert_eq!(ra.grad_norm, rb.grad_norm);
        }

        // n=5 with identical client gradients (radius 0): every fold order
        // visits equal summands, so the rotation is immaterial.
        let mut ring = quad_config(Architecture::RarMean, 6);
        ring.task = TaskChoice::Quadratic(QuadraticParams {
            radius: 0.0,
            init_offset: 2.0,
            ..QuadraticParams::default()
        });
        let sc = {
            let mut c = ring.clone();
            c.architecture = Architecture::ServerClient(GarSpec::Mean);
            c
        };
        let a = run_single_seed(&ring, 4).unwrap();
        let b = run_single_seed(&sc, 4).unwrap();
        assert_eq!(a.final_model_checksum, b.final_model_checksum);
    }

    #[test]
    fn median_convention() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[7.0]), 7.0);
    }
}
