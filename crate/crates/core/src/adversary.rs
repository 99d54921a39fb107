//! Byzantine attack generators.
//!
//! Attacks transform the set of honestly computed gradients into the set the
//! clients actually submit, before any aggregation runs. Only malicious
//! clients' submissions change; benign gradients pass through bit-identical.
//! All constructions are deterministic given (context, spec, seed).

use crate::aggregators::{gar_mean, krum_select};
use crate::error::{Error, Result};
use crate::rng;
use crate::vector::{sign_of, sign_quantize, GradVec};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::collections::BTreeSet;

/// How much the adversary can see when crafting submissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knowledge {
    /// The adversary reads every benign client's gradient.
    Full,
    /// No visibility into benign clients: statistics are estimated from the
    /// malicious coalition's own honest gradients.
    BenignOnly,
}

/// Attack family and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackKind {
    None,
    /// Submissions drawn entrywise from N(0, sigma^2).
    Gaussian { sigma: f64 },
    /// Data poisoning: labels l become C-1-l on malicious shards. Applied at
    /// task setup; the per-round gradient transform is the identity.
    LabelFlip,
    /// All malicious clients submit mean - lambda_a * sign(mean), with
    /// lambda_a maximized subject to Krum selecting the crafted vector.
    Krum,
    /// Per-dimension values placed just past the benign extreme opposite the
    /// benign mean sign, scattered within factor `b`.
    Trim { b: f64 },
    /// mean + gamma * p with the largest gamma keeping the crafted vector's
    /// max distance to benign gradients within the benign diameter.
    MinMax,
    /// As MinMax, bounding the sum of squared distances instead.
    MinSum,
    /// Sign votes chosen per dimension to drag the sign sum across the
    /// consensus threshold.
    AdaptiveBrace { lambda: i32 },
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::Gaussian { .. } => "gaussian",
            AttackKind::LabelFlip => "label-flip",
            AttackKind::Krum => "krum",
            AttackKind::Trim { .. } => "trim",
            AttackKind::MinMax => "min-max",
            AttackKind::MinSum => "min-sum",
            AttackKind::AdaptiveBrace { .. } => "adaptive-brace",
        }
    }
}

/// Complete attack description: family, malicious set, knowledge model.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub malicious: BTreeSet<usize>,
    pub knowledge: Knowledge,
}

impl AttackSpec {
    pub fn none() -> Self {
        AttackSpec {
            kind: AttackKind::None,
            malicious: BTreeSet::new(),
            knowledge: Knowledge::Full,
        }
    }

    pub fn f(&self) -> usize {
        self.malicious.len()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if 2 * self.malicious.len() >= n && !self.malicious.is_empty() {
            return Err(Error::config(
                "attack.malicious",
                format!("need |malicious| < n/2 (n={n}, got {})", self.malicious.len()),
            ));
        }
        if let Some(&id) = self.malicious.iter().next_back() {
            if id >= n {
                return Err(Error::config(
                    "attack.malicious",
                    format!("client id {id} out of range for n={n}"),
                ));
            }
        }
        match self.kind {
            AttackKind::Gaussian { sigma } => {
                if !(sigma > 0.0) {
                    return Err(Error::config("attack.sigma", "sigma must be positive"));
                }
            }
            AttackKind::Trim { b } => {
                if !(b > 1.0) {
                    return Err(Error::config("attack.b", "scatter factor must exceed 1"));
                }
            }
            AttackKind::AdaptiveBrace { lambda } => {
                let bound = n as i32;
                if lambda < -bound || lambda > bound {
                    return Err(Error::LambdaOutOfRange { lambda, n });
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Everything the adversary observes in one round.
#[derive(Debug, Clone, Copy)]
pub struct AttackContext<'a> {
    /// Honest gradients for every client, malicious ones included (malicious
    /// clients can always compute what they would have sent).
    pub honest: &'a [GradVec],
    /// Current model; part of the adversary's view.
    pub model: &'a GradVec,
    /// Seed for attack randomness this round.
    pub seed: u64,
}

/// Result of applying an attack: the full submission list plus an optional
/// note for the run report (e.g. a degenerate search).
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub submissions: Vec<GradVec>,
    pub note: Option<String>,
}

/// Iterations and relative tolerance for the scale searches below.
const SEARCH_ITERS: usize = 50;
const SEARCH_TOL: f64 = 1e-5;

/// Gradients the adversary may base statistics on.
fn adversary_view<'a>(ctx: &AttackContext<'a>, spec: &AttackSpec) -> Vec<&'a GradVec> {
    match spec.knowledge {
        Knowledge::Full => ctx
            .honest
            .iter()
            .enumerate()
            .filter(|(i, _)| !spec.malicious.contains(i))
            .map(|(_, g)| g)
            .collect(),
        Knowledge::BenignOnly => ctx
            .honest
            .iter()
            .enumerate()
            .filter(|(i, _)| spec.malicious.contains(i))
            .map(|(_, g)| g)
            .collect(),
    }
}

fn view_mean(view: &[&GradVec]) -> Result<GradVec> {
    let owned: Vec<GradVec> = view.iter().map(|&g| g.clone()).collect();
    gar_mean(&owned)
}

/// Apply `spec` to the honest gradient set, producing the submitted set.
pub fn apply_attack(spec: &AttackSpec, ctx: &AttackContext<'_>) -> Result<AttackOutcome> {
    spec.validate(ctx.honest.len())?;
    let mut submissions: Vec<GradVec> = ctx.honest.to_vec();
    if spec.malicious.is_empty() {
        return Ok(AttackOutcome { submissions, note: None });
    }
    let (crafted, note) = match spec.kind {
        // Label flipping poisons the data, not the submitted gradients.
        AttackKind::None | AttackKind::LabelFlip => (Vec::new(), None),
        AttackKind::Gaussian { sigma } => (attack_gaussian(ctx, spec, sigma)?, None),
        AttackKind::Krum => attack_krum(ctx, spec)?,
        AttackKind::Trim { b } => (attack_trim(ctx, spec, b)?, None),
        AttackKind::MinMax => (attack_minmax(ctx, spec)?, None),
        AttackKind::MinSum => (attack_minsum(ctx, spec)?, None),
        AttackKind::AdaptiveBrace { lambda } => (attack_adaptive_brace(ctx, spec, lambda)?, None),
    };
    if !crafted.is_empty() {
        debug_assert_eq!(crafted.len(), spec.malicious.len());
        for (slot, vector) in spec.malicious.iter().zip(crafted) {
            submissions[*slot] = vector;
        }
    }
    Ok(AttackOutcome { submissions, note })
}

/// Zero-mean Gaussian submissions with standard deviation sigma.
pub fn attack_gaussian(
    ctx: &AttackContext<'_>,
    spec: &AttackSpec,
    sigma: f64,
) -> Result<Vec<GradVec>> {
    let d = ctx.honest.first().map(GradVec::dim).unwrap_or(0);
    let normal = Normal::new(0.0, sigma)
        .map_err(|_| Error::config("attack.sigma", "sigma must be positive and finite"))?;
    let mut out = Vec::with_capacity(spec.malicious.len());
    for &client in &spec.malicious {
        let mut stream = rng::stream(ctx.seed, "attack-gaussian", client as u64, 0);
        let values: Vec<f64> = (0..d).map(|_| normal.sample(&mut stream)).collect();
        out.push(GradVec::new(values)?);
    }
    Ok(out)
}

/// Trim attack: per dimension, submissions sit just past the benign extreme
/// opposite the benign mean's sign, scattered uniformly within factor `b`.
pub fn attack_trim(ctx: &AttackContext<'_>, spec: &AttackSpec, b: f64) -> Result<Vec<GradVec>> {
    let view = adversary_view(ctx, spec);
    if view.is_empty() {
        return Err(Error::EmptyInput("trim attack needs a nonempty view"));
    }
    let mean = view_mean(&view)?;
    let d = mean.dim();

    // Interval per dimension, endpoints ordered.
    let mut intervals = Vec::with_capacity(d);
    for k in 0..d {
        let s = -f64::from(sign_of(mean.get(k)));
        let extreme = view
            .iter()
            .map(|g| g.get(k))
            .fold(if s > 0.0 { f64::NEG_INFINITY } else { f64::INFINITY }, |acc, v| {
                if s > 0.0 {
                    acc.max(v)
                } else {
                    acc.min(v)
                }
            });
        let other = if extreme == 0.0 {
            extreme + s
        } else if extreme * s > 0.0 {
            b * extreme
        } else {
            extreme / b
        };
        intervals.push((extreme.min(other), extreme.max(other)));
    }

    let mut out = Vec::with_capacity(spec.malicious.len());
    for &client in &spec.malicious {
        let mut stream = rng::stream(ctx.seed, "attack-trim", client as u64, 0);
        let values: Vec<f64> = intervals
            .iter()
            .map(|&(lo, hi)| if lo == hi { lo } else { stream.gen_range(lo..hi) })
            .collect();
        out.push(GradVec::new(values)?);
    }
    Ok(out)
}

/// Largest `x > 0` passing `feasible`, found by doubling then bisection to
/// relative tolerance [`SEARCH_TOL`]. Returns None when even tiny values
/// fail. The bracket keeps lo feasible and hi infeasible throughout,
/// relying on feasibility being monotone decreasing in x.
fn max_feasible_scale(feasible: impl Fn(f64) -> bool) -> Option<f64> {
    let mut lo = 1.0;
    if !feasible(lo) {
        let mut tries = 0;
        loop {
            lo /= 2.0;
            tries += 1;
            if feasible(lo) {
                break;
            }
            if tries >= SEARCH_ITERS {
                return None;
            }
        }
    }
    let mut hi = lo * 2.0;
    let mut grow = 0;
    while feasible(hi) {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow >= 60 {
            // Unbounded for practical purposes.
            return Some(lo);
        }
    }
    debug_assert!(lo < hi);
    for _ in 0..SEARCH_ITERS {
        if (hi - lo) <= SEARCH_TOL * lo {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        debug_assert!(lo < hi);
    }
    Some(lo)
}

/// Krum attack: all malicious clients submit mean - lambda_a * sign(mean)
/// with the largest lambda_a for which Krum still selects the crafted
/// vector. Falls back to the view mean when no scale is feasible, with a
/// note flagging the degenerate search.
pub fn attack_krum(
    ctx: &AttackContext<'_>,
    spec: &AttackSpec,
) -> Result<(Vec<GradVec>, Option<String>)> {
    let f = spec.malicious.len();
    if f == 0 {
        return Ok((Vec::new(), None));
    }
    let n = ctx.honest.len();
    if n < f + 3 {
        return Err(Error::KrumTooFewClients { n, f });
    }
    let view = adversary_view(ctx, spec);
    let mean = view_mean(&view)?;
    let direction: Vec<f64> = mean.as_slice().iter().map(|&v| f64::from(sign_of(v))).collect();

    let craft = |lambda_a: f64| -> GradVec {
        GradVec::from_raw(
            mean.as_slice()
                .iter()
                .zip(&direction)
                .map(|(&mu, &s)| mu - lambda_a * s)
                .collect(),
        )
    };
    let selected_is_crafted = |lambda_a: f64| -> bool {
        let candidate = craft(lambda_a);
        let mut submissions: Vec<GradVec> = ctx.honest.to_vec();
        for &slot in &spec.malicious {
            submissions[slot] = candidate.clone();
        }
        match krum_select(&submissions, f) {
            Ok(idx) => submissions[idx] == candidate,
            Err(_) => false,
        }
    };

    match max_feasible_scale(selected_is_crafted) {
        Some(lambda_a) => Ok((vec![craft(lambda_a); f], None)),
        None => {
            let note =
                "krum attack search found no feasible scale; submitting the view mean".to_string();
            Ok((vec![mean; f], Some(note)))
        }
    }
}

enum DistanceBound {
    /// max_j ||m - g_j|| <= max pairwise benign distance.
    MaxPairwise,
    /// sum_j ||m - g_j||^2 <= max_l sum_j ||g_l - g_j||^2.
    SumSquares,
}

/// Min-Max / Min-Sum attacks: m = mean + gamma * p with p the unit vector
/// opposite the mean's signs, and gamma the largest scale keeping m within
/// the benign distance envelope.
fn attack_min_distance(
    ctx: &AttackContext<'_>,
    spec: &AttackSpec,
    bound: DistanceBound,
) -> Result<Vec<GradVec>> {
    let f = spec.malicious.len();
    let view = adversary_view(ctx, spec);
    if view.is_empty() {
        return Err(Error::EmptyInput("distance attack needs a nonempty view"));
    }
    let mean = view_mean(&view)?;
    let d = mean.dim();
    let norm = (d as f64).sqrt();
    let perturb: Vec<f64> = mean
        .as_slice()
        .iter()
        .map(|&v| -f64::from(sign_of(v)) / norm)
        .collect();

    // Degenerate constraint: fewer than two reference points pin gamma to 0.
    if view.len() < 2 {
        return Ok(vec![mean; f]);
    }

    let craft = |gamma: f64| -> GradVec {
        GradVec::from_raw(
            mean.as_slice()
                .iter()
                .zip(&perturb)
                .map(|(&mu, &p)| mu + gamma * p)
                .collect(),
        )
    };
    let limit = match bound {
        DistanceBound::MaxPairwise => {
            let mut max = 0.0f64;
            for (i, a) in view.iter().enumerate() {
                for b in &view[i + 1..] {
                    max = max.max(a.dist2(b));
                }
            }
            max.sqrt()
        }
        DistanceBound::SumSquares => view
            .iter()
            .map(|l| view.iter().map(|j| l.dist2(j)).sum::<f64>())
            .fold(0.0, f64::max),
    };
    let feasible = |gamma: f64| -> bool {
        let m = craft(gamma);
        match bound {
            DistanceBound::MaxPairwise => {
                view.iter().map(|g| m.dist2(g).sqrt()).fold(0.0, f64::max) <= limit
            }
            DistanceBound::SumSquares => view.iter().map(|g| m.dist2(g)).sum::<f64>() <= limit,
        }
    };

    let gamma = max_feasible_scale(feasible).unwrap_or(0.0);
    Ok(vec![craft(gamma); f])
}

pub fn attack_minmax(ctx: &AttackContext<'_>, spec: &AttackSpec) -> Result<Vec<GradVec>> {
    attack_min_distance(ctx, spec, DistanceBound::MaxPairwise)
}

pub fn attack_minsum(ctx: &AttackContext<'_>, spec: &AttackSpec) -> Result<Vec<GradVec>> {
    attack_min_distance(ctx, spec, DistanceBound::SumSquares)
}

/// Adaptive attack on the consensus round: per dimension, every malicious
/// client votes -1 when the view's sign sum exceeds lambda (trying to drag
/// it to lambda or below) and +1 otherwise. Magnitudes are 1; quantization
/// erases them anyway.
pub fn attack_adaptive_brace(
    ctx: &AttackContext<'_>,
    spec: &AttackSpec,
    lambda: i32,
) -> Result<Vec<GradVec>> {
    let f = spec.malicious.len();
    let view = adversary_view(ctx, spec);
    if view.is_empty() {
        return Err(Error::EmptyInput("adaptive attack needs a nonempty view"));
    }
    let d = view[0].dim();
    let mut votes = vec![0.0f64; d];
    for (k, vote) in votes.iter_mut().enumerate() {
        let benign_sum: i32 = view.iter().map(|g| i32::from(sign_quantize(g).get(k))).sum();
        *vote = if benign_sum > lambda { -1.0 } else { 1.0 };
    }
    let vector = GradVec::from_raw(votes);
    Ok(vec![vector; f])
}

/// Label flip for C classes: label l becomes C - 1 - l.
pub fn flip_label(label: usize, classes: usize) -> Result<usize> {
    if classes < 2 {
        return Err(Error::TooFewClasses { classes });
    }
    debug_assert!(label < classes);
    Ok(classes - 1 - label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregators::{gar_brace_oracle, gar_trimmed_mean};

    fn gv(values: &[f64]) -> GradVec {
        GradVec::new(values.to_vec()).unwrap()
    }

    fn spec(kind: AttackKind, malicious: &[usize]) -> AttackSpec {
        AttackSpec {
            kind,
            malicious: malicious.iter().copied().collect(),
            knowledge: Knowledge::Full,
        }
    }

    fn ctx<'a>(honest: &'a [GradVec], model: &'a GradVec, seed: u64) -> AttackContext<'a> {
        AttackContext { honest, model, seed }
    }

    #[test]
    fn benign_pass_through_is_bit_identical() {
        let honest = vec![
            gv(&[1.0, -2.0]),
            gv(&[0.5, 0.25]),
            gv(&[3.0, 3.0]),
            gv(&[-1.0, 7.0]),
            gv(&[2.0, -9.0]),
        ];
        let model = GradVec::zeros(2);
        let s = spec(AttackKind::Gaussian { sigma: 10.0 }, &[1, 3]);
        let out = apply_attack(&s, &ctx(&honest, &model, 7)).unwrap();
        for i in [0usize, 2, 4] {
            assert_eq!(out.submissions[i], honest[i]);
        }
        for i in [1usize, 3] {
            assert_ne!(out.submissions[i], honest[i]);
        }
    }

    #[test]
    fn gaussian_is_deterministic_and_calibrated() {
        let honest = vec![gv(&vec![0.0; 50_000]); 3];
        let model = GradVec::zeros(50_000);
        let sigma = 200.0;
        let s = spec(AttackKind::Gaussian { sigma }, &[0]);
        let a = attack_gaussian(&ctx(&honest, &model, 99), &s, sigma).unwrap();
        let b = attack_gaussian(&ctx(&honest, &model, 99), &s, sigma).unwrap();
        assert_eq!(a, b);
        // Empirical stdev over 1e5 draws within 2% of sigma.
        let s2 = spec(AttackKind::Gaussian { sigma }, &[0, 1]);
        let draws = attack_gaussian(&ctx(&honest, &model, 99), &s2, sigma).unwrap();
        let all: Vec<f64> = draws.iter().flat_map(|g| g.as_slice().to_vec()).collect();
        assert_eq!(all.len(), 100_000);
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / all.len() as f64;
        let stdev = var.sqrt();
        assert!((stdev - sigma).abs() / sigma < 0.02, "stdev {stdev}");
    }

    #[test]
    fn gaussian_small_sigma_is_near_zero() {
        let honest = vec![gv(&[5.0; 8]); 3];
        let model = GradVec::zeros(8);
        let s = spec(AttackKind::Gaussian { sigma: 1e-9 }, &[2]);
        let out = attack_gaussian(&ctx(&honest, &model, 1), &s, 1e-9).unwrap();
        assert!(out[0].as_slice().iter().all(|v| v.abs() < 1e-7));
    }

    #[test]
    fn trim_attack_sits_past_the_benign_extreme() {
        // Benign all positive in dim 0 -> direction -1, values below the
        // benign min. Benign straddling zero with negative mean in dim 1 ->
        // direction +1, values above the benign max.
        let honest = vec![
            gv(&[3.0, -4.0]),
            gv(&[4.0, -1.0]),
            gv(&[5.0, 2.0]),
            gv(&[6.0, -3.0]),
        ];
        let model = GradVec::zeros(2);
        let s = spec(AttackKind::Trim { b: 2.0 }, &[3]);
        let out = attack_trim(&ctx(&honest, &model, 5), &s, 2.0).unwrap();
        let crafted = &out[0];
        // dim 0: benign min 3 (view excludes client 3), interval (1.5, 3).
        assert!(crafted.get(0) >= 1.5 && crafted.get(0) <= 3.0);
        // dim 1: view mean negative, direction +1, benign max 2,
        // interval (2, 4).
        assert!(crafted.get(1) >= 2.0 && crafted.get(1) <= 4.0);
    }

    #[test]
    fn trim_attack_zero_mean_convention() {
        // Mean exactly zero: sign(0)=+1 so the deviation direction is -1 and
        // values land in (-2, -1) below the benign min of -1.
        let honest = vec![gv(&[1.0]), gv(&[-1.0]), gv(&[0.0])];
        let model = GradVec::zeros(1);
        let s = spec(AttackKind::Trim { b: 2.0 }, &[2]);
        let out = attack_trim(&ctx(&honest, &model, 5), &s, 2.0).unwrap();
        let v = out[0].get(0);
        assert!((-2.0..=-1.0).contains(&v), "got {v}");
    }

    #[test]
    fn trim_attack_shifts_trimmed_mean_toward_direction() {
        let honest: Vec<GradVec> = (0..10)
            .map(|i| gv(&[1.0 + 0.3 * i as f64, -2.0 - 0.1 * i as f64]))
            .collect();
        let model = GradVec::zeros(2);
        let malicious = [7usize, 8, 9];
        let s = spec(AttackKind::Trim { b: 2.0 }, &malicious);
        let out = apply_attack(&s, &ctx(&honest, &model, 11)).unwrap();
        let benign_only: Vec<GradVec> = (0..7).map(|i| honest[i].clone()).collect();
        let attacked = gar_trimmed_mean(&out.submissions, 3).unwrap();
        let baseline = gar_trimmed_mean(&benign_only, 3).unwrap();
        // Benign dim-0 values are positive (direction -1), dim-1 negative
        // (direction +1).
        assert!(attacked.get(0) < baseline.get(0));
        assert!(attacked.get(1) > baseline.get(1));
    }

    #[test]
    fn krum_attack_beats_krum_on_a_tight_cluster() {
        let honest = vec![
            gv(&[1.00, 1.00]),
            gv(&[1.01, 0.99]),
            gv(&[0.99, 1.02]),
            gv(&[1.02, 0.98]),
            gv(&[50.0, 50.0]),
            gv(&[50.0, 50.0]),
        ];
        let model = GradVec::zeros(2);
        let malicious = [4usize, 5];
        let s = spec(AttackKind::Krum, &malicious);
        let (vectors, note) = attack_krum(&ctx(&honest, &model, 3), &s).unwrap();
        assert!(note.is_none());
        assert_eq!(vectors.len(), 2);
        assert_eq!(vectors[0], vectors[1]);
        // The crafted vector must actually win Krum.
        let mut submissions = honest.clone();
        submissions[4] = vectors[0].clone();
        submissions[5] = vectors[1].clone();
        let picked = krum_select(&submissions, 2).unwrap();
        assert_eq!(submissions[picked], vectors[0]);
    }

    #[test]
    fn krum_attack_no_malicious_is_empty() {
        let honest = vec![gv(&[1.0]); 5];
        let model = GradVec::zeros(1);
        let s = spec(AttackKind::Krum, &[]);
        let (vectors, _) = attack_krum(&ctx(&honest, &model, 3), &s).unwrap();
        assert!(vectors.is_empty());
    }

    #[test]
    fn krum_attack_feasibility_is_monotone_on_grid() {
        let honest = vec![
            gv(&[0.0, 0.0]),
            gv(&[0.1, -0.1]),
            gv(&[-0.1, 0.1]),
            gv(&[0.05, 0.05]),
            gv(&[9.0, 9.0]),
            gv(&[9.0, 9.0]),
        ];
        let model = GradVec::zeros(2);
        let s = spec(AttackKind::Krum, &[4, 5]);
        let context = ctx(&honest, &model, 3);
        let view = adversary_view(&context, &s);
        let mean = view_mean(&view).unwrap();
        let feasible = |lambda_a: f64| -> bool {
            let candidate = GradVec::from_raw(
                mean.as_slice()
                    .iter()
                    .map(|&mu| mu - lambda_a * f64::from(sign_of(mu)))
                    .collect(),
            );
            let mut submissions = honest.clone();
            submissions[4] = candidate.clone();
            submissions[5] = candidate.clone();
            krum_select(&submissions, 2)
                .map(|i| submissions[i] == candidate)
                .unwrap_or(false)
        };
        let mut last = true;
        for i in 0..60 {
            let lambda_a = 0.02 * f64::from(i + 1);
            let now = feasible(lambda_a);
            assert!(!(now && !last), "feasibility regained at {lambda_a}");
            last = now;
        }
    }

    #[test]
    fn minmax_identical_benign_pins_gamma_to_zero() {
        let honest = vec![gv(&[2.0, -1.0]); 4];
        let model = GradVec::zeros(2);
        let s = spec(AttackKind::MinMax, &[3]);
        let out = attack_minmax(&ctx(&honest, &model, 1), &s).unwrap();
        // Pairwise diameter is 0, so gamma collapses and m is the mean.
        let diff = out[0].sub(&gv(&[2.0, -1.0]));
        assert!(diff.norm2() < 1e-4, "residual {}", diff.norm2());
    }

    #[test]
    fn minmax_two_benign_matches_the_closed_form() {
        let a = gv(&[1.0, 0.0]);
        let b = gv(&[-1.0, 0.0]);
        let honest = vec![a.clone(), b.clone(), gv(&[0.0, 0.0])];
        let model = GradVec::zeros(2);
        let s = spec(AttackKind::MinMax, &[2]);
        let out = attack_minmax(&ctx(&honest, &model, 1), &s).unwrap();
        let m = &out[0];
        // mean = 0, p = (-1,-1)/sqrt(2), bound B = ||a-b|| = 2. Feasibility
        // per benign point j: gamma^2 + 2 gamma <p, mean-g_j> + ||mean-g_j||^2
        // <= B^2. The binding point is a (p points away from it):
        // gamma^2 + sqrt(2) gamma - 3 = 0 -> gamma = (sqrt(14)-sqrt(2))/2.
        let expected = (14.0f64.sqrt() - 2.0f64.sqrt()) / 2.0;
        let gamma = m.sub(&gar_mean(&[a, b]).unwrap()).norm2();
        assert!(
            (gamma - expected).abs() <= 1e-3 * expected,
            "gamma {gamma} vs {expected}"
        );
    }

    #[test]
    fn min_distance_constraints_hold_and_bind() {
        let honest = vec![
            gv(&[1.0, 2.0, -1.0]),
            gv(&[2.0, 1.0, 0.0]),
            gv(&[0.5, 2.5, 0.5]),
            gv(&[1.5, 1.5, -0.5]),
            gv(&[0.0, 0.0, 0.0]),
        ];
        let model = GradVec::zeros(3);
        let malicious = [4usize];
        let benign: Vec<GradVec> = (0..4).map(|i| honest[i].clone()).collect();
        let mean = gar_mean(&benign).unwrap();
        let p: Vec<f64> = mean
            .as_slice()
            .iter()
            .map(|&v| -f64::from(sign_of(v)) / (3.0f64).sqrt())
            .collect();

        // MinMax: constraint satisfied at gamma, violated at gamma*(1+10tol).
        let s = spec(AttackKind::MinMax, &malicious);
        let m = &attack_minmax(&ctx(&honest, &model, 1), &s).unwrap()[0];
        let gamma = m.sub(&mean).norm2();
        let mut diameter = 0.0f64;
        for (i, a) in benign.iter().enumerate() {
            for b in &benign[i + 1..] {
                diameter = diameter.max(a.dist2(b).sqrt());
            }
        }
        let maxdist = benign.iter().map(|g| m.dist2(g).sqrt()).fold(0.0, f64::max);
        assert!(maxdist <= diameter + 1e-4);
        let bumped = GradVec::from_raw(
            mean.as_slice()
                .iter()
                .zip(&p)
                .map(|(&mu, &pk)| mu + gamma * (1.0 + 10.0 * SEARCH_TOL) * pk)
                .collect(),
        );
        let bumped_max = benign.iter().map(|g| bumped.dist2(g).sqrt()).fold(0.0, f64::max);
        assert!(bumped_max > diameter);

        // MinSum: same at the sum-of-squares bound.
        let s = spec(AttackKind::MinSum, &malicious);
        let m = &attack_minsum(&ctx(&honest, &model, 1), &s).unwrap()[0];
        let gamma = m.sub(&mean).norm2();
        let limit = benign
            .iter()
            .map(|l| benign.iter().map(|j| l.dist2(j)).sum::<f64>())
            .fold(0.0, f64::max);
        let total: f64 = benign.iter().map(|g| m.dist2(g)).sum();
        assert!(total <= limit + 1e-4);
        let bumped = GradVec::from_raw(
            mean.as_slice()
                .iter()
                .zip(&p)
                .map(|(&mu, &pk)| mu + gamma * (1.0 + 10.0 * SEARCH_TOL) * pk)
                .collect(),
        );
        let bumped_total: f64 = benign.iter().map(|g| bumped.dist2(g)).sum();
        assert!(bumped_total > limit);
    }

    #[test]
    fn adaptive_votes_oppose_strong_agreement() {
        // n=5, f=2: benign sign sum 3 per dim, lambda=2 -> votes -1, total
        // drops to 1 <= lambda, flipping the consensus.
        let honest = vec![gv(&[1.0]), gv(&[1.0]), gv(&[1.0]), gv(&[0.5]), gv(&[0.5])];
        let model = GradVec::zeros(1);
        let s = spec(AttackKind::AdaptiveBrace { lambda: 2 }, &[3, 4]);
        let out = attack_adaptive_brace(&ctx(&honest, &model, 1), &s, 2).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].as_slice(), &[-1.0]);
        let submissions = apply_attack(&s, &ctx(&honest, &model, 1)).unwrap().submissions;
        let agg = gar_brace_oracle(&submissions, 2).unwrap();
        assert_eq!(agg.as_slice(), &[-1]);
        // Without the attack the outcome was +1 (sum 5 > 2).
        let clean = gar_brace_oracle(&honest, 2).unwrap();
        assert_eq!(clean.as_slice(), &[1]);
    }

    #[test]
    fn adaptive_is_inert_at_saturated_threshold() {
        // lambda = -n: short of a unanimous -1 vote, every sum exceeds the
        // threshold, so the output is all-ones and the attack cannot move it.
        let honest = vec![
            gv(&[-3.0, 2.0]),
            gv(&[-3.0, 2.0]),
            gv(&[-3.0, 2.0]),
            gv(&[-3.0, 2.0]),
            gv(&[1.0, 2.0]),
        ];
        let model = GradVec::zeros(2);
        let s = spec(AttackKind::AdaptiveBrace { lambda: -5 }, &[0, 1]);
        let submissions = apply_attack(&s, &ctx(&honest, &model, 1)).unwrap().submissions;
        let attacked = gar_brace_oracle(&submissions, -5).unwrap();
        assert_eq!(attacked.as_slice(), &[1, 1]);
        assert_eq!(attacked, gar_brace_oracle(&honest, -5).unwrap());
    }

    #[test]
    fn label_flip_formula() {
        assert_eq!(flip_label(0, 2).unwrap(), 1);
        assert_eq!(flip_label(1, 2).unwrap(), 0);
        assert_eq!(flip_label(3, 10).unwrap(), 6);
        assert!(flip_label(0, 1).is_err());
    }

    #[test]
    fn attack_spec_validation() {
        let mut s = spec(AttackKind::Gaussian { sigma: 1.0 }, &[0, 1, 2]);
        assert!(s.validate(6).is_err()); // 3 >= 6/2
        assert!(s.validate(7).is_ok());
        s.malicious = [9usize].into_iter().collect();
        assert!(s.validate(7).is_err()); // id out of range
    }
}
