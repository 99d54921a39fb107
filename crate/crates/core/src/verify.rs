//! Self-contained verification suite: independent oracles for the
//! aggregation rules, randomized protocol-equivalence checks, exhaustive
//! flip-resistance enumeration, gradient cross-checks, the convergence-bound
//! monitor runs, and a determinism probe.
//!
//! Everything here is deliberately implemented on separate code paths from
//! the modules it checks. The `verify` CLI command runs [`run_all_checks`]
//! and writes a deterministic report.

use crate::adversary::{AttackKind, AttackSpec, Knowledge};
use crate::aggregators::{gar_brace_oracle, gar_median, gar_trimmed_mean, krum_select};
use crate::chunk::ChunkPlan;
use crate::error::{Error, Result};
use crate::harness::{
    round_csv, run_experiment, run_single_seed, summary_text, Architecture, BoundReport,
    ExperimentConfig, TaskChoice,
};
use crate::ring::{
    ledger_matches_prediction, min_entry_width, run_brace_round, run_brace_round_detailed,
    run_rar_round_detailed, sc_round_ledger, Arch,
};
use crate::rng;
use crate::tasks::{ClassificationParams, ClassificationTask, QuadraticParams, QuadraticTask};
use crate::vector::{GradVec, HyperParams};
use rand::Rng;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Result of one verification check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn pass(name: &'static str, detail: String) -> Self {
        CheckOutcome { name, passed: true, detail }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        CheckOutcome { name, passed: false, detail }
    }
}

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

/// Exhaustive-scoring Krum on a separate code path: distances recomputed
/// per candidate, nearest set chosen by repeated minimum extraction.
pub fn brute_krum_select(gradients: &[GradVec], f: usize) -> Result<usize> {
    let n = gradients.len();
    if n < f + 3 {
        return Err(Error::KrumTooFewClients { n, f });
    }
    let keep = n - f - 2;
    let mut best_index = 0usize;
    let mut best_score = f64::INFINITY;
    for i in 0..n {
        let mut pool: Vec<f64> = Vec::with_capacity(n - 1);
        for j in 0..n {
            if j == i {
                continue;
            }
            let mut d2 = 0.0;
            for k in 0..gradients[i].dim() {
                let diff = gradients[i].get(k) - gradients[j].get(k);
                d2 += diff * diff;
            }
            pool.push(d2);
        }
        let mut score = 0.0;
        for _ in 0..keep {
            let (arg, _) = pool
                .iter()
                .enumerate()
                .fold((0usize, f64::INFINITY), |acc, (idx, &v)| {
                    if v < acc.1 {
                        (idx, v)
                    } else {
                        acc
                    }
                });
            score += pool.swap_remove(arg);
        }
        if score < best_score {
            best_score = score;
            best_index = i;
        }
    }
    Ok(best_index)
}

/// Coordinate-wise median by repeated minimum extraction.
pub fn brute_median(gradients: &[GradVec]) -> Result<GradVec> {
    let n = gradients.len();
    if n == 0 {
        return Err(Error::EmptyInput("median oracle needs gradients"));
    }
    let d = gradients[0].dim();
    let mut out = vec![0.0; d];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut column: Vec<f64> = gradients.iter().map(|g| g.get(k)).collect();
        let mut ordered = Vec::with_capacity(n);
        while !column.is_empty() {
            let (arg, _) = column
                .iter()
                .enumerate()
                .fold((0usize, f64::INFINITY), |acc, (idx, &v)| {
                    if v < acc.1 {
                        (idx, v)
                    } else {
                        acc
                    }
                });
            ordered.push(column.swap_remove(arg));
        }
        *slot = if n % 2 == 1 {
            ordered[n / 2]
        } else {
            (ordered[n / 2 - 1] + ordered[n / 2]) / 2.0
        };
    }
    GradVec::new(out)
}

/// Coordinate-wise trimmed mean by peeling k minima and k maxima.
pub fn brute_trimmed_mean(gradients: &[GradVec], trim: usize) -> Result<GradVec> {
    let n = gradients.len();
    if n <= 2 * trim {
        return Err(Error::TrimTooAggressive { n, k: trim });
    }
    let d = gradients.first().map(GradVec::dim).unwrap_or(0);
    let mut out = vec![0.0; d];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut column: Vec<f64> = gradients.iter().map(|g| g.get(k)).collect();
        for _ in 0..trim {
            let (arg_min, _) = column
                .iter()
                .enumerate()
                .fold((0usize, f64::INFINITY), |acc, (idx, &v)| {
                    if v < acc.1 {
                        (idx, v)
                    } else {
                        acc
                    }
                });
            column.swap_remove(arg_min);
            let (arg_max, _) = column
                .iter()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |acc, (idx, &v)| {
                    if v > acc.1 {
                        (idx, v)
                    } else {
                        acc
                    }
                });
            column.swap_remove(arg_max);
        }
        // Ascending-order sum; exact on the integer instances this oracle
        // is used with.
        let mut rest = column;
        let mut total = 0.0;
        let count = rest.len();
        while !rest.is_empty() {
            let (arg, _) = rest
                .iter()
                .enumerate()
                .fold((0usize, f64::INFINITY), |acc, (idx, &v)| {
                    if v < acc.1 {
                        (idx, v)
                    } else {
                        acc
                    }
                });
            total += rest.swap_remove(arg);
        }
        *slot = total / count as f64;
    }
    GradVec::new(out)
}

/// Central finite differences of a scalar field.
pub fn finite_difference_gradient(f: &dyn Fn(&GradVec) -> f64, w: &GradVec, h: f64) -> GradVec {
    let d = w.dim();
    let mut out = vec![0.0; d];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut plus = w.as_slice().to_vec();
        plus[k] += h;
        let mut minus = w.as_slice().to_vec();
        minus[k] -= h;
        *slot = (f(&GradVec::new(plus).expect("finite probe"))
            - f(&GradVec::new(minus).expect("finite probe")))
            / (2.0 * h);
    }
    GradVec::new(out).expect("finite gradient")
}

// ---------------------------------------------------------------------------
// Protocol equivalence checks
// ---------------------------------------------------------------------------

fn integer_gradients(n: usize, d: usize, stream: &mut rand_chacha::ChaCha8Rng) -> Vec<GradVec> {
    (0..n)
        .map(|_| {
            GradVec::new((0..d).map(|_| f64::from(stream.gen_range(-100i32..=100))).collect())
                .expect("integers are finite")
        })
        .collect()
}

/// Randomized all-reduce equivalence: the distributed sum must equal both
/// the fold-order reference and (on integer inputs) the plain index-order
/// sum, with all client buffers identical. Includes the three-client worked
/// instance and its poisoned variant.
pub fn check_rar_equivalence(rounds: usize, seed: u64) -> CheckOutcome {
    const NAME: &str = "rar-oracle-equivalence";
    let fig_gradients: Vec<GradVec> = [
        vec![5.0, 2.0, -10.0],
        vec![8.0, -4.0, 7.0],
        vec![9.0, 3.0, 8.0],
    ]
    .iter()
    .map(|v| GradVec::new(v.clone()).unwrap())
    .collect();
    let plan3 = ChunkPlan::new(3, 3).expect("3x3 plan");
    match run_rar_round_detailed(&fig_gradients, &plan3, 32, None) {
        Ok(out) if out.aggregate.as_slice() == [22.0, 1.0, 5.0] => {}
        Ok(out) => {
            return CheckOutcome::fail(
                NAME,
                format!("worked instance aggregated to {:?}", out.aggregate.as_slice()),
            )
        }
        Err(e) => return CheckOutcome::fail(NAME, format!("worked instance failed: {e}")),
    }
    let mut poisoned = fig_gradients.clone();
    poisoned[0] = GradVec::new(vec![5.0, 2.0, -200.0]).unwrap();
    match run_rar_round_detailed(&poisoned, &plan3, 32, None) {
        Ok(out) if out.aggregate.as_slice() == [22.0, 1.0, -185.0] => {}
        Ok(out) => {
            return CheckOutcome::fail(
                NAME,
                format!("poisoned instance aggregated to {:?}", out.aggregate.as_slice()),
            )
        }
        Err(e) => return CheckOutcome::fail(NAME, format!("poisoned instance failed: {e}")),
    }

    let mut stream = rng::stream(seed, "verify-rar", 0, 0);
    for round in 0..rounds {
        let n = stream.gen_range(1..=12usize);
        let d = stream.gen_range(n..=64usize);
        let gradients = integer_gradients(n, d, &mut stream);
        let plan = match ChunkPlan::new(d, n) {
            Ok(p) => p,
            Err(e) => return CheckOutcome::fail(NAME, format!("plan {n}x{d}: {e}")),
        };
        let out = match run_rar_round_detailed(&gradients, &plan, 32, None) {
            Ok(o) => o,
            Err(e) => return CheckOutcome::fail(NAME, format!("round {round}: {e}")),
        };
        // Index-order sum; exact for integer inputs.
        let mut plain = vec![0.0; d];
        for g in &gradients {
            for (p, &v) in plain.iter_mut().zip(g.as_slice()) {
                *p += v;
            }
        }
        let reference = crate::ring::reference_ring_sum(&gradients, &plan).expect("reference");
        if out.aggregate.as_slice() != reference.as_slice()
            || out.aggregate.as_slice() != plain.as_slice()
        {
            return CheckOutcome::fail(
                NAME,
                format!("round {round} (n={n}, d={d}): distributed sum diverged"),
            );
        }
        if out.per_client.iter().any(|b| b.as_slice() != out.aggregate.as_slice()) {
            return CheckOutcome::fail(
                NAME,
                format!("round {round} (n={n}, d={d}): client buffers differ"),
            );
        }
        if !out.ledger.is_conserved() {
            return CheckOutcome::fail(NAME, format!("round {round}: ledger not conserved"));
        }
    }
    CheckOutcome::pass(
        NAME,
        format!("{rounds} randomized rounds plus the worked and poisoned instances"),
    )
}

/// Randomized consensus-round equivalence against the centralized rule,
/// over real-valued gradients and random lambda in [-n, n], including the
/// worked three-client instance at lambda = 2.
pub fn check_brace_equivalence(rounds: usize, seed: u64) -> CheckOutcome {
    const NAME: &str = "brace-oracle-equivalence";
    let fig_gradients: Vec<GradVec> = [
        vec![5.0, 2.0, -10.0],
        vec![8.0, -4.0, 7.0],
        vec![9.0, 3.0, 8.0],
    ]
    .iter()
    .map(|v| GradVec::new(v.clone()).unwrap())
    .collect();
    let plan3 = ChunkPlan::new(3, 3).expect("3x3 plan");
    match run_brace_round(&fig_gradients, &plan3, 2, 32) {
        Ok((out, _)) if out.as_slice() == [1, -1, -1] => {}
        Ok((out, _)) => {
            return CheckOutcome::fail(
                NAME,
                format!("worked instance mapped to {:?}", out.as_slice()),
            )
        }
        Err(e) => return CheckOutcome::fail(NAME, format!("worked instance failed: {e}")),
    }

    let mut stream = rng::stream(seed, "verify-brace", 0, 0);
    for round in 0..rounds {
        let n = stream.gen_range(1..=12usize);
        let d = stream.gen_range(n..=64usize);
        let lambda = stream.gen_range(-(n as i32)..=n as i32);
        let gradients: Vec<GradVec> = (0..n)
            .map(|_| {
                GradVec::new((0..d).map(|_| stream.gen_range(-10.0..10.0)).collect()).unwrap()
            })
            .collect();
        let plan = ChunkPlan::new(d, n).expect("d >= n");
        let out = match run_brace_round_detailed(&gradients, &plan, lambda, 32, None) {
            Ok(o) => o,
            Err(e) => return CheckOutcome::fail(NAME, format!("round {round}: {e}")),
        };
        let oracle = gar_brace_oracle(&gradients, lambda).expect("oracle");
        if out.aggregate != oracle {
            return CheckOutcome::fail(
                NAME,
                format!("round {round} (n={n}, d={d}, lambda={lambda}): ring != oracle"),
            );
        }
        if out.per_client.iter().any(|b| b != &oracle) {
            return CheckOutcome::fail(
                NAME,
                format!("round {round} (n={n}, d={d}): client outputs differ"),
            );
        }
    }
    CheckOutcome::pass(
        NAME,
        format!("{rounds} randomized rounds plus the worked instance at lambda=2"),
    )
}

/// Bit accounting on the uniform grids (exact match required) and unequal
/// chunk cases (chunk-exact totals plus quantified deviation). The
/// consensus round is exercised only where the entry width can hold its
/// sign sums; narrower widths must be rejected.
pub fn check_bit_accounting() -> CheckOutcome {
    const NAME: &str = "bit-accounting";
    let mut checked = 0usize;
    let mut rejected = 0usize;
    for &n in &[2usize, 4, 10, 100] {
        let d = 20 * n;
        for &m in &[1u32, 8, 32] {
            let gradients: Vec<GradVec> = (0..n)
                .map(|i| {
                    GradVec::new((0..d).map(|k| ((i + k) % 7) as f64 - 3.0).collect()).unwrap()
                })
                .collect();
            let plan = ChunkPlan::new(d, n).expect("uniform plan");

            let ledger = sc_round_ledger(n, d, m);
            match ledger_matches_prediction(&ledger, Arch::Sc, n, d, m) {
                Ok(r) if r.matched => checked += 1,
                Ok(r) => return CheckOutcome::fail(NAME, format!("SC mismatch: {r}")),
                Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
            }

            let (_, ledger) = match crate::ring::run_rar_round(&gradients, &plan, m) {
                Ok(x) => x,
                Err(e) => return CheckOutcome::fail(NAME, format!("RAR n={n} m={m}: {e}")),
            };
            match ledger_matches_prediction(&ledger, Arch::Rar, n, d, m) {
                Ok(r) if r.matched => checked += 1,
                Ok(r) => return CheckOutcome::fail(NAME, format!("RAR mismatch: {r}")),
                Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
            }

            if m < min_entry_width(n) {
                match run_brace_round(&gradients, &plan, 0, m) {
                    Err(Error::EntryWidthTooSmall { .. }) => rejected += 1,
                    Err(e) => {
                        return CheckOutcome::fail(
                            NAME,
                            format!("BRACE n={n} m={m}: wrong error {e}"),
                        )
                    }
                    Ok(_) => {
                        return CheckOutcome::fail(
                            NAME,
                            format!("BRACE n={n} m={m}: accepted an unrepresentable width"),
                        )
                    }
                }
                continue;
            }
            let (_, ledger) = match run_brace_round(&gradients, &plan, 0, m) {
                Ok(x) => x,
                Err(e) => return CheckOutcome::fail(NAME, format!("BRACE n={n} m={m}: {e}")),
            };
            match ledger_matches_prediction(&ledger, Arch::Brace, n, d, m) {
                Ok(r) if r.matched => checked += 1,
                Ok(r) => return CheckOutcome::fail(NAME, format!("BRACE mismatch: {r}")),
                Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
            }
        }
    }

    // Unequal chunks: totals must equal the chunk-exact sum and the report
    // must quantify the per-client deviation.
    for &(n, d, m) in &[(3usize, 4usize, 8u32), (7, 30, 16), (10, 64, 8)] {
        let gradients: Vec<GradVec> = (0..n)
            .map(|i| GradVec::new((0..d).map(|k| ((i * k) % 5) as f64 - 2.0).collect()).unwrap())
            .collect();
        let plan = ChunkPlan::new(d, n).expect("plan");
        let (_, ledger) = crate::ring::run_rar_round(&gradients, &plan, m).expect("rar");
        match ledger_matches_prediction(&ledger, Arch::Rar, n, d, m) {
            Ok(r) if r.matched && !r.uniform_chunks && r.max_client_deviation > 0.0 => checked += 1,
            Ok(r) => return CheckOutcome::fail(NAME, format!("RAR n={n} d={d}: {r}")),
            Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
        }
        let (_, ledger) = run_brace_round(&gradients, &plan, 0, m).expect("brace");
        match ledger_matches_prediction(&ledger, Arch::Brace, n, d, m) {
            Ok(r) if r.matched && !r.uniform_chunks && r.max_client_deviation > 0.0 => checked += 1,
            Ok(r) => return CheckOutcome::fail(NAME, format!("BRACE n={n} d={d}: {r}")),
            Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
        }
    }
    CheckOutcome::pass(
        NAME,
        format!("{checked} ledger reconciliations exact; {rejected} narrow widths rejected"),
    )
}

/// Exhaustive per-dimension flip-resistance for n <= `max_n`, f <= 5:
/// every (benign sum, malicious pattern, lambda) combination runs through
/// the real ring, packed one combination per dimension. Also confirms the
/// adaptive attack flips a +1 benign outcome exactly when f >= S_b - lambda.
pub fn check_flip_resistance(max_n: usize) -> CheckOutcome {
    const NAME: &str = "flip-resistance";
    let mut combos_checked = 0usize;
    for n in 1..=max_n {
        let f_cap = if n >= 3 { ((n - 1) / 2).min(5) } else { 0 };
        for f in 0..=f_cap {
            let benign = n - f;
            // One dimension per (benign +1 count, malicious vote pattern).
            let mut dims: Vec<(usize, u32)> = Vec::new();
            for plus in 0..=benign {
                for pattern in 0..(1u32 << f) {
                    dims.push((plus, pattern));
                }
            }
            let d = dims.len();
            if d < n {
                return CheckOutcome::fail(NAME, format!("packing too small for n={n}, f={f}"));
            }
            // Benign clients first, malicious last.
            let mut values: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
            for (dim, &(plus, pattern)) in dims.iter().enumerate() {
                for b in 0..benign {
                    values[b][dim] = if b < plus { 1.0 } else { -1.0 };
                }
                for r in 0..f {
                    values[benign + r][dim] = if pattern & (1 << r) != 0 { 1.0 } else { -1.0 };
                }
            }
            let gradients: Vec<GradVec> =
                values.into_iter().map(|v| GradVec::new(v).unwrap()).collect();
            let plan = ChunkPlan::new(d, n).expect("packed plan");

            for lambda in -(n as i32)..=n as i32 {
                let out = match run_brace_round_detailed(&gradients, &plan, lambda, 8, None) {
                    Ok(o) => o,
                    Err(e) => {
                        return CheckOutcome::fail(
                            NAME,
                            format!("n={n} f={f} lambda={lambda}: {e}"),
                        )
                    }
                };
                if out.per_client.iter().any(|b| b != &out.aggregate) {
                    return CheckOutcome::fail(
                        NAME,
                        format!("n={n} f={f} lambda={lambda}: clients disagree"),
                    );
                }
                for (dim, &(plus, pattern)) in dims.iter().enumerate() {
                    let s_b = 2 * plus as i32 - benign as i32;
                    let mal = 2 * pattern.count_ones() as i32 - f as i32;
                    let total = s_b + mal;
                    let expected = if total > lambda { 1 } else { -1 };
                    let got = out.aggregate.get(dim);
                    if got != expected {
                        return CheckOutcome::fail(
                            NAME,
                            format!("n={n} f={f} lambda={lambda} dim{dim}: got {got}"),
                        );
                    }
                    // Guarantee: outcome pinned regardless of the pattern.
                    if s_b - (f as i32) > lambda && got != 1 {
                        return CheckOutcome::fail(
                            NAME,
                            format!("n={n} f={f} lambda={lambda}: +1 guarantee broken"),
                        );
                    }
                    if s_b + (f as i32) <= lambda && got != -1 {
                        return CheckOutcome::fail(
                            NAME,
                            format!("n={n} f={f} lambda={lambda}: -1 guarantee broken"),
                        );
                    }
                    // Adaptive success boundary on the all-(-1) pattern
                    // against a +1 benign outcome.
                    if pattern == 0 && s_b > lambda {
                        let flipped = got == -1;
                        let predicted = f as i32 >= s_b - lambda;
                        if flipped != predicted {
                            return CheckOutcome::fail(
                                NAME,
                                format!(
                                    "n={n} f={f} lambda={lambda}: adaptive boundary wrong (S_b={s_b})"
                                ),
                            );
                        }
                    }
                    combos_checked += 1;
                }
            }
        }
    }
    CheckOutcome::pass(
        NAME,
        format!("{combos_checked} (n,f,S_b,pattern,lambda) combos through the ring"),
    )
}

/// Aggregator implementations against the independent brute-force oracles
/// on random small integer instances; exact equality required.
pub fn check_aggregator_oracles(instances: usize, seed: u64) -> CheckOutcome {
    const NAME: &str = "aggregator-oracles";
    let mut stream = rng::stream(seed, "verify-gar", 0, 0);
    let mut krum_checked = 0usize;
    for i in 0..instances {
        let n = stream.gen_range(1..=6usize);
        let d = stream.gen_range(1..=3usize);
        let gradients: Vec<GradVec> = (0..n)
            .map(|_| {
                GradVec::new((0..d).map(|_| f64::from(stream.gen_range(-5i32..=5))).collect())
                    .unwrap()
            })
            .collect();

        let median = gar_median(&gradients).expect("median");
        let oracle = brute_median(&gradients).expect("median oracle");
        if median != oracle {
            return CheckOutcome::fail(NAME, format!("instance {i}: median diverged"));
        }

        let max_k = (n - 1) / 2;
        let k = if max_k == 0 { 0 } else { stream.gen_range(0..=max_k) };
        let trimmed = gar_trimmed_mean(&gradients, k).expect("trimmed");
        let oracle = brute_trimmed_mean(&gradients, k).expect("trim oracle");
        if trimmed != oracle {
            return CheckOutcome::fail(
                NAME,
                format!("instance {i}: trimmed mean diverged (k={k})"),
            );
        }

        if n >= 3 {
            let f = stream.gen_range(0..=n - 3);
            let picked = krum_select(&gradients, f).expect("krum");
            let oracle = brute_krum_select(&gradients, f).expect("krum oracle");
            if picked != oracle {
                return CheckOutcome::fail(
                    NAME,
                    format!("instance {i}: krum picked {picked}, oracle {oracle} (f={f})"),
                );
            }
            krum_checked += 1;
        }
    }
    CheckOutcome::pass(
        NAME,
        format!("{instances} instances (krum on {krum_checked}), exact equality"),
    )
}

/// Analytic gradients against central finite differences on both tasks.
pub fn check_gradient_oracles(points: usize, seed: u64) -> CheckOutcome {
    const NAME: &str = "gradient-oracles";
    let h = 1e-5;
    let tol = 1e-5;

    let quad = QuadraticTask::new(
        5,
        4,
        &QuadraticParams {
            radius: 1.0,
            curvature_min: 0.5,
            curvature_max: 2.0,
            ..QuadraticParams::default()
        },
        77,
    )
    .expect("quadratic task");
    let class_params = ClassificationParams {
        classes: 4,
        features: 6,
        train_per_client: 40,
        test_samples: 100,
        ..ClassificationParams::default()
    };
    let class = ClassificationTask::new(6, 0.5, &class_params, 78).expect("classification task");

    let mut stream = rng::stream(seed, "verify-grad", 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let wq = GradVec::new((0..5).map(|_| stream.gen_range(-3.0..3.0)).collect()).unwrap();
        let analytic = quad.full_gradient(&wq);
        let fd = finite_difference_gradient(&|w| quad.loss(w), &wq, h);
        let rel = analytic.sub(&fd).norm2() / analytic.norm2().max(1e-9);
        worst = worst.max(rel);
        if rel > tol {
            return CheckOutcome::fail(NAME, format!("quadratic full gradient rel err {rel}"));
        }
        let client_fd = finite_difference_gradient(&|w| quad.client_loss(2, w), &wq, h);
        let client = quad.client_gradient(2, &wq);
        let rel = client.sub(&client_fd).norm2() / client.norm2().max(1e-9);
        worst = worst.max(rel);
        if rel > tol {
            return CheckOutcome::fail(NAME, format!("quadratic client gradient rel err {rel}"));
        }

        let wc = GradVec::new((0..class.dim()).map(|_| stream.gen_range(-0.4..0.4)).collect())
            .unwrap();
        let (_, analytic) = class.loss_and_full_gradient(&wc);
        let fd = finite_difference_gradient(&|w| class.loss(w), &wc, h);
        let rel = analytic.sub(&fd).norm2() / analytic.norm2().max(1e-9);
        worst = worst.max(rel);
        if rel > tol {
            return CheckOutcome::fail(NAME, format!("classification gradient rel err {rel}"));
        }
    }
    CheckOutcome::pass(NAME, format!("{points} points per surface, max rel err {worst:.3e}"))
}

// ---------------------------------------------------------------------------
// Monitor runs
// ---------------------------------------------------------------------------

/// Honest one-dimensional run: sign descent via the centralized consensus
/// rule (the ring needs n <= d, and its output is identical to the
/// centralized rule by the equivalence checks).
pub fn monitor_config_d1() -> ExperimentConfig {
    ExperimentConfig {
        params: HyperParams {
            n: 10,
            f: 0,
            d: 1,
            m: 32,
            lambda: 5,
            eta: 0.01,
            rounds: 1000,
            q: 0.5,
        },
        architecture: Architecture::ServerClient(crate::aggregators::GarSpec::BraceOracle {
            lambda: 5,
        }),
        attack: AttackSpec::none(),
        task: TaskChoice::Quadratic(QuadraticParams {
            radius: 0.5,
            init_offset: 12.0,
            ..QuadraticParams::default()
        }),
        full_batch: true,
        seeds: vec![1],
        output_dir: PathBuf::from("runs/monitor-d1"),
    }
}

/// 50-dimensional ring run with 20% adaptive attackers.
pub fn monitor_config_d50() -> ExperimentConfig {
    ExperimentConfig {
        params: HyperParams {
            n: 10,
            f: 2,
            d: 50,
            m: 32,
            lambda: 5,
            eta: 0.01,
            rounds: 300,
            q: 0.5,
        },
        architecture: Architecture::Brace,
        attack: AttackSpec {
            kind: AttackKind::AdaptiveBrace { lambda: 5 },
            malicious: [0usize, 1].into_iter().collect(),
            knowledge: Knowledge::Full,
        },
        task: TaskChoice::Quadratic(QuadraticParams {
            radius: 0.5,
            init_offset: 5.0,
            ..QuadraticParams::default()
        }),
        full_batch: true,
        seeds: vec![1],
        output_dir: PathBuf::from("runs/monitor-d50"),
    }
}

/// Run both monitor configurations and collect their bound reports.
pub fn monitor_reports() -> Result<Vec<(&'static str, BoundReport)>> {
    let mut out = Vec::new();
    for (label, config) in [
        ("d1-honest", monitor_config_d1()),
        ("d50-adaptive", monitor_config_d50()),
    ] {
        let run = run_single_seed(&config, config.seeds[0])?;
        let bound = run.bound.ok_or_else(|| {
            Error::config("monitor", format!("{label}: run produced no bound report"))
        })?;
        out.push((label, bound));
    }
    Ok(out)
}

/// Evaluate the two monitor runs: the honest d=1 case must satisfy the
/// stated bound, the adaptive d=50 case must satisfy the d-scaled bound
/// under a holding hypothesis.
pub fn check_monitor_bounds() -> (CheckOutcome, Vec<(&'static str, BoundReport)>) {
    const NAME: &str = "theorem-monitor";
    let reports = match monitor_reports() {
        Ok(r) => r,
        Err(e) => return (CheckOutcome::fail(NAME, e.to_string()), Vec::new()),
    };
    let mut detail = String::new();
    for (label, bound) in &reports {
        let _ = write!(
            detail,
            "{label}: lhs={:.6} stated={:.6} d_scaled={:.6} opposed={:.3}; ",
            bound.lhs_mean_grad_norm,
            bound.rhs_stated,
            bound.rhs_d_scaled,
            bound.max_opposed_fraction
        );
    }
    let d1 = &reports[0].1;
    let d50 = &reports[1].1;
    let ok = d1.hypothesis_holds
        && d1.stated_bound_holds
        && d1.asserted_ok()
        && d50.hypothesis_holds
        && d50.asserted_ok();
    if ok {
        (CheckOutcome::pass(NAME, detail), reports)
    } else {
        (CheckOutcome::fail(NAME, detail), reports)
    }
}

// ---------------------------------------------------------------------------
// Determinism
// ---------------------------------------------------------------------------

fn determinism_config() -> ExperimentConfig {
    ExperimentConfig {
        params: HyperParams {
            n: 8,
            f: 2,
            d: 24,
            m: 16,
            lambda: 2,
            eta: 0.05,
            rounds: 10,
            q: 0.5,
        },
        architecture: Architecture::Brace,
        attack: AttackSpec {
            kind: AttackKind::Trim { b: 2.0 },
            malicious: [0usize, 1].into_iter().collect(),
            knowledge: Knowledge::Full,
        },
        task: TaskChoice::Classification(ClassificationParams {
            classes: 4,
            features: 6,
            train_per_client: 20,
            test_samples: 100,
            batch_size: 8,
            ..ClassificationParams::default()
        }),
        full_batch: false,
        seeds: vec![11, 12],
        output_dir: PathBuf::from("runs/determinism"),
    }
}

/// Re-run a stochastic attacked experiment and require byte-identical
/// report content.
pub fn check_determinism() -> CheckOutcome {
    const NAME: &str = "determinism";
    let config = determinism_config();
    let a = match run_experiment(&config) {
        Ok(r) => r,
        Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
    };
    let b = match run_experiment(&config) {
        Ok(r) => r,
        Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
    };
    if summary_text(&config, &a) != summary_text(&config, &b) {
        return CheckOutcome::fail(NAME, "summaries differ between identical runs".to_string());
    }
    for (ra, rb) in a.runs.iter().zip(&b.runs) {
        if round_csv(&ra.records) != round_csv(&rb.records) {
            return CheckOutcome::fail(NAME, format!("seed {} CSV differs", ra.seed));
        }
    }
    CheckOutcome::pass(NAME, "re-running the config reproduced every report byte".to_string())
}

// ---------------------------------------------------------------------------
// Suite driver
// ---------------------------------------------------------------------------

/// Core worked examples re-checked end to end (cheap smoke pass).
pub fn check_core_examples() -> CheckOutcome {
    const NAME: &str = "core-examples";
    let g = GradVec::new(vec![5.0, 2.0, -10.0]).unwrap();
    let signs = crate::vector::sign_quantize(&g);
    if signs.as_slice() != [1, 1, -1] {
        return CheckOutcome::fail(NAME, "sign quantization example failed".to_string());
    }
    let plan = match ChunkPlan::new(10, 4) {
        Ok(p) => p,
        Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
    };
    if plan.boundaries() != [0, 3, 6, 8, 10] {
        return CheckOutcome::fail(NAME, "chunk plan example failed".to_string());
    }
    if ChunkPlan::new(3, 5).is_ok() {
        return CheckOutcome::fail(NAME, "n > d was not rejected".to_string());
    }
    let sums = crate::vector::SumVec::new(vec![3, 1, 1], 3).unwrap();
    if crate::vector::consensus_map(&sums, 2).as_slice() != [1, -1, -1] {
        return CheckOutcome::fail(NAME, "consensus example failed".to_string());
    }
    CheckOutcome::pass(NAME, "sign, chunk, and consensus worked examples".to_string())
}

/// Trim-attack sanity: the attacked trimmed mean moves toward the crafted
/// direction relative to the benign-only aggregate.
pub fn check_attack_effects() -> CheckOutcome {
    const NAME: &str = "attack-effects";
    let honest: Vec<GradVec> = (0..10)
        .map(|i| GradVec::new(vec![1.0 + 0.2 * i as f64, -1.0 - 0.15 * i as f64, 0.5]).unwrap())
        .collect();
    let model = GradVec::zeros(3);
    let malicious: BTreeSet<usize> = [7usize, 8, 9].into_iter().collect();
    let spec = AttackSpec {
        kind: AttackKind::Trim { b: 2.0 },
        malicious,
        knowledge: Knowledge::Full,
    };
    let ctx = crate::adversary::AttackContext { honest: &honest, model: &model, seed: 55 };
    let out = match crate::adversary::apply_attack(&spec, &ctx) {
        Ok(o) => o,
        Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
    };
    let attacked = gar_trimmed_mean(&out.submissions, 3).expect("trimmed");
    let benign: Vec<GradVec> = (0..7).map(|i| honest[i].clone()).collect();
    let baseline = gar_trimmed_mean(&benign, 3).expect("trimmed");
    if attacked.get(0) >= baseline.get(0) || attacked.get(1) <= baseline.get(1) {
        return CheckOutcome::fail(NAME, "trim attack failed to move the trimmed mean".to_string());
    }
    CheckOutcome::pass(NAME, "trim attack shifts the trimmed mean as constructed".to_string())
}

/// Run the full verification suite in a fixed order.
pub fn run_all_checks() -> (Vec<CheckOutcome>, Vec<(&'static str, BoundReport)>) {
    let mut outcomes = Vec::new();
    outcomes.push(check_core_examples());
    outcomes.push(check_rar_equivalence(1000, 101));
    outcomes.push(check_brace_equivalence(1000, 102));
    outcomes.push(check_bit_accounting());
    outcomes.push(check_flip_resistance(12));
    outcomes.push(check_aggregator_oracles(10_000, 103));
    outcomes.push(check_gradient_oracles(100, 104));
    outcomes.push(check_attack_effects());
    let (monitor, reports) = check_monitor_bounds();
    outcomes.push(monitor);
    outcomes.push(check_determinism());
    (outcomes, reports)
}

/// Write the deterministic verification report: one line per check plus the
/// monitor numbers. Returns the file path.
pub fn write_verify_report(
    dir: &Path,
    outcomes: &[CheckOutcome],
    reports: &[(&'static str, BoundReport)],
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut text = String::new();
    for outcome in outcomes {
        let _ = writeln!(
            text,
            "{} {}: {}",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.name,
            outcome.detail
        );
    }
    for (label, report) in reports {
        let _ = writeln!(text, "[monitor {label}]");
        text.push_str(&report.to_string());
    }
    let path = dir.join("verify_report.txt");
    std::fs::write(&path, text)?;
    Ok(path)
}
