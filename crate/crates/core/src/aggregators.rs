//! Server-client gradient aggregation rules behind one interface.
//!
//! Mean, Krum (Blanchard et al. 2017), coordinate-wise median and trimmed
//! mean (Yin et al. 2018), signSGD majority vote (Bernstein et al. 2018),
//! robust learning rate (Ozdayi et al. 2021), and the centralized reference
//! for the ring consensus round. All rules are pure functions over the
//! submitted gradient list.

use crate::error::{Error, Result};
use crate::vector::{consensus_map, sign_of, sign_quantize, sign_sum, GradVec, SignVec};

/// Aggregation rule selector with per-rule parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum GarSpec {
    Mean,
    /// Krum with an assumed Byzantine count `f`; requires n >= f + 3.
    Krum { f: usize },
    Median,
    /// Coordinate-wise trimmed mean dropping the `k` largest and `k`
    /// smallest values; requires n > 2k.
    TrimmedMean { k: usize },
    SignSgd,
    /// Robust learning rate with agreement threshold `theta`.
    Rlr { theta: f64 },
    /// Centralized threshold consensus over sign sums.
    BraceOracle { lambda: i32 },
}

impl GarSpec {
    pub fn name(&self) -> &'static str {
        match self {
            GarSpec::Mean => "mean",
            GarSpec::Krum { .. } => "krum",
            GarSpec::Median => "median",
            GarSpec::TrimmedMean { .. } => "trimmed-mean",
            GarSpec::SignSgd => "signsgd",
            GarSpec::Rlr { .. } => "rlr",
            GarSpec::BraceOracle { .. } => "brace-oracle",
        }
    }

    /// Cross-field validity for a given client count.
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            GarSpec::Krum { f } => {
                if n < f + 3 {
                    return Err(Error::KrumTooFewClients { n, f });
                }
            }
            GarSpec::TrimmedMean { k } => {
                if n <= 2 * k {
                    return Err(Error::TrimTooAggressive { n, k });
                }
            }
            GarSpec::Rlr { theta } => {
                if !(0.0..=n as f64).contains(&theta) {
                    return Err(Error::config(
                        "architecture.theta",
                        format!("threshold must lie in [0, {n}]"),
                    ));
                }
            }
            GarSpec::BraceOracle { lambda } => {
                let bound = n as i32;
                if lambda < -bound || lambda > bound {
                    return Err(Error::LambdaOutOfRange { lambda, n });
                }
            }
            GarSpec::Mean | GarSpec::Median | GarSpec::SignSgd => {}
        }
        Ok(())
    }
}

/// What an aggregation rule hands back to the model update.
#[derive(Debug, Clone, PartialEq)]
pub enum Aggregate {
    /// A value vector: the update subtracts eta times this.
    Values(GradVec),
    /// A sign vector: the update moves every coordinate by ±eta.
    Signs(SignVec),
    /// A pre-scaled step: the update subtracts this as-is.
    Step(GradVec),
}

fn check_same_dims(gradients: &[GradVec]) -> Result<usize> {
    let first = gradients
        .first()
        .ok_or(Error::EmptyInput("aggregation needs at least one gradient"))?;
    let d = first.dim();
    for g in gradients {
        if g.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: g.dim(),
            });
        }
    }
    Ok(d)
}

/// Entry-wise average of the submitted gradients, summed in client order.
pub fn gar_mean(gradients: &[GradVec]) -> Result<GradVec> {
    let d = check_same_dims(gradients)?;
    let n = gradients.len() as f64;
    let mut acc = vec![0.0; d];
    for g in gradients {
        for (a, &v) in acc.iter_mut().zip(g.as_slice()) {
            *a += v;
        }
    }
    for a in &mut acc {
        *a /= n;
    }
    Ok(GradVec::from_raw(acc))
}

/// Index selected by Krum: the candidate whose summed squared distance to
/// its n - f - 2 nearest other gradients is smallest, ties broken by lowest
/// client index.
pub fn krum_select(gradients: &[GradVec], f: usize) -> Result<usize> {
    let n = gradients.len();
    if n < f + 3 {
        return Err(Error::KrumTooFewClients { n, f });
    }
    check_same_dims(gradients)?;
    let closest = n - f - 2;
    let mut best: Option<(f64, usize)> = None;
    for i in 0..n {
        let mut dists: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| gradients[i].dist2(&gradients[j]))
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let score: f64 = dists[..closest].iter().sum();
        let better = match best {
            None => true,
            Some((s, _)) => score < s,
        };
        if better {
            best = Some((score, i));
        }
    }
    Ok(best.expect("nonempty candidate set").1)
}

/// Krum: returns the selected client's gradient.
pub fn gar_krum(gradients: &[GradVec], f: usize) -> Result<GradVec> {
    Ok(gradients[krum_select(gradients, f)?].clone())
}

/// Coordinate-wise median; for even n, the mean of the two middle order
/// statistics.
pub fn gar_median(gradients: &[GradVec]) -> Result<GradVec> {
    let d = check_same_dims(gradients)?;
    let n = gradients.len();
    let mut out = vec![0.0; d];
    let mut column = vec![0.0; n];
    for k in 0..d {
        for (c, g) in column.iter_mut().zip(gradients) {
            *c = g.get(k);
        }
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite entries"));
        out[k] = if n % 2 == 1 {
            column[n / 2]
        } else {
            (column[n / 2 - 1] + column[n / 2]) / 2.0
        };
    }
    Ok(GradVec::from_raw(out))
}

/// Coordinate-wise trimmed mean: drop the k largest and k smallest values,
/// average the remaining n - 2k.
pub fn gar_trimmed_mean(gradients: &[GradVec], k: usize) -> Result<GradVec> {
    let d = check_same_dims(gradients)?;
    let n = gradients.len();
    if n <= 2 * k {
        return Err(Error::TrimTooAggressive { n, k });
    }
    let keep = (n - 2 * k) as f64;
    let mut out = vec![0.0; d];
    let mut column = vec![0.0; n];
    for dim in 0..d {
        for (c, g) in column.iter_mut().zip(gradients) {
            *c = g.get(dim);
        }
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite entries"));
        out[dim] = column[k..n - k].iter().sum::<f64>() / keep;
    }
    Ok(GradVec::from_raw(out))
}

/// Majority vote: the sign of the per-dimension sign sum.
pub fn gar_signsgd(gradients: &[GradVec]) -> Result<SignVec> {
    check_same_dims(gradients)?;
    let signs: Vec<SignVec> = gradients.iter().map(sign_quantize).collect();
    let sums = sign_sum(&signs)?;
    Ok(SignVec::new(
        sums.as_slice().iter().map(|&s| sign_of(f64::from(s))).collect(),
    )
    .expect("signs in range"))
}

/// Robust learning rate: per dimension, the learning rate is +eta when the
/// absolute sign sum reaches `theta` and -eta otherwise; the returned step
/// is that signed rate times the mean gradient, to be subtracted from the
/// model.
pub fn gar_rlr(gradients: &[GradVec], theta: f64, eta: f64) -> Result<GradVec> {
    check_same_dims(gradients)?;
    let signs: Vec<SignVec> = gradients.iter().map(sign_quantize).collect();
    let sums = sign_sum(&signs)?;
    let mean = gar_mean(gradients)?;
    let step: Vec<f64> = sums
        .as_slice()
        .iter()
        .zip(mean.as_slice())
        .map(|(&s, &mu)| {
            let rate = if f64::from(s.abs()) >= theta { eta } else { -eta };
            rate * mu
        })
        .collect();
    Ok(GradVec::from_raw(step))
}

/// Centralized reference for the ring consensus: threshold map over the
/// per-dimension sign sums.
pub fn gar_brace_oracle(gradients: &[GradVec], lambda: i32) -> Result<SignVec> {
    check_same_dims(gradients)?;
    let signs: Vec<SignVec> = gradients.iter().map(sign_quantize).collect();
    let sums = sign_sum(&signs)?;
    Ok(consensus_map(&sums, lambda))
}

/// Dispatch a rule over the submitted gradients. `eta` is consumed only by
/// the robust-learning-rate rule, whose output is a pre-scaled step.
pub fn aggregate(spec: &GarSpec, gradients: &[GradVec], eta: f64) -> Result<Aggregate> {
    match *spec {
        GarSpec::Mean => Ok(Aggregate::Values(gar_mean(gradients)?)),
        GarSpec::Krum { f } => Ok(Aggregate::Values(gar_krum(gradients, f)?)),
        GarSpec::Median => Ok(Aggregate::Values(gar_median(gradients)?)),
        GarSpec::TrimmedMean { k } => Ok(Aggregate::Values(gar_trimmed_mean(gradients, k)?)),
        GarSpec::SignSgd => Ok(Aggregate::Signs(gar_signsgd(gradients)?)),
        GarSpec::Rlr { theta } => Ok(Aggregate::Step(gar_rlr(gradients, theta, eta)?)),
        GarSpec::BraceOracle { lambda } => {
            Ok(Aggregate::Signs(gar_brace_oracle(gradients, lambda)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gv(values: &[f64]) -> GradVec {
        GradVec::new(values.to_vec()).unwrap()
    }

    fn fig_gradients() -> Vec<GradVec> {
        vec![
            gv(&[5.0, 2.0, -10.0]),
            gv(&[8.0, -4.0, 7.0]),
            gv(&[9.0, 3.0, 8.0]),
        ]
    }

    #[test]
    fn mean_examples() {
        let mean = gar_mean(&fig_gradients()).unwrap();
        assert_eq!(mean.as_slice(), &[22.0 / 3.0, 1.0 / 3.0, 5.0 / 3.0]);
        // Single client: identity.
        let g = gv(&[1.5, -2.5]);
        assert_eq!(gar_mean(&[g.clone()]).unwrap(), g);
        // g and -g cancel.
        let zero = gar_mean(&[g.clone(), g.scale(-1.0)]).unwrap();
        assert_eq!(zero.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn krum_prefers_the_cluster() {
        // n=4, f=1: three clustered clients, one far away.
        let gradients = vec![gv(&[0.0]), gv(&[0.1]), gv(&[-0.1]), gv(&[100.0])];
        let picked = krum_select(&gradients, 1).unwrap();
        assert!(picked < 3, "outlier must never win, picked {picked}");
        // All-identical clients: any index works and the vector is that one.
        let same = vec![gv(&[2.0, 3.0]); 5];
        assert_eq!(gar_krum(&same, 1).unwrap(), gv(&[2.0, 3.0]));
    }

    #[test]
    fn krum_ties_break_to_lowest_index() {
        let same = vec![gv(&[1.0]); 4];
        assert_eq!(krum_select(&same, 1).unwrap(), 0);
    }

    #[test]
    fn krum_rejects_small_n() {
        let gradients = vec![gv(&[0.0]); 3];
        assert!(matches!(
            gar_krum(&gradients, 1),
            Err(Error::KrumTooFewClients { n: 3, f: 1 })
        ));
    }

    #[test]
    fn median_examples() {
        let median = gar_median(&fig_gradients()).unwrap();
        assert_eq!(median.as_slice(), &[8.0, 2.0, 7.0]);
        let single = gv(&[4.0, -4.0]);
        assert_eq!(gar_median(&[single.clone()]).unwrap(), single);
        // Even n: mean of the two middle values.
        let even = vec![gv(&[1.0]), gv(&[2.0]), gv(&[5.0]), gv(&[100.0])];
        assert_eq!(gar_median(&even).unwrap().as_slice(), &[3.5]);
    }

    #[test]
    fn median_bounds_one_outlier() {
        let mut gradients = vec![gv(&[1.0]), gv(&[2.0]), gv(&[3.0]), gv(&[4.0])];
        gradients.push(gv(&[1e6]));
        let median = gar_median(&gradients).unwrap();
        assert!(median.get(0) >= 1.0 && median.get(0) <= 4.0);
        gradients[4] = gv(&[-1e6]);
        let median = gar_median(&gradients).unwrap();
        assert!(median.get(0) >= 1.0 && median.get(0) <= 4.0);
    }

    #[test]
    fn trimmed_mean_examples() {
        // k=0 degenerates to the mean.
        let fig = fig_gradients();
        assert_eq!(gar_trimmed_mean(&fig, 0).unwrap(), gar_mean(&fig).unwrap());
        // k=1 on three clients keeps the middle value per coordinate.
        assert_eq!(gar_trimmed_mean(&fig, 1).unwrap().as_slice(), &[8.0, 2.0, 7.0]);
        // n=5, k=2: one survivor per coordinate, i.e. the median.
        let five = vec![gv(&[5.0]), gv(&[1.0]), gv(&[3.0]), gv(&[9.0]), gv(&[7.0])];
        assert_eq!(
            gar_trimmed_mean(&five, 2).unwrap(),
            gar_median(&five).unwrap()
        );
        assert!(gar_trimmed_mean(&fig, 2).is_err());
    }

    #[test]
    fn signsgd_examples() {
        // Sign sums [3,1,1] are all positive.
        assert_eq!(gar_signsgd(&fig_gradients()).unwrap().as_slice(), &[1, 1, 1]);
        // Single client: its own signs.
        let g = gv(&[-0.5, 3.0, 0.0]);
        assert_eq!(gar_signsgd(&[g.clone()]).unwrap(), sign_quantize(&g));
        // Two opposing clients tie at zero, resolved by the zero convention.
        let tie = gar_signsgd(&[gv(&[1.0]), gv(&[-1.0])]).unwrap();
        assert_eq!(tie.as_slice(), &[1]);
    }

    #[test]
    fn rlr_examples() {
        let eta = 0.1;
        // Unanimous positive signs with theta <= n: +eta * mean everywhere.
        let same = vec![gv(&[2.0, 4.0]); 3];
        let step = gar_rlr(&same, 2.0, eta).unwrap();
        assert_eq!(step.as_slice(), &[0.2, 0.4]);
        // Sign sums [3,1,1] with theta=2: rates are +eta, -eta, -eta.
        let fig = fig_gradients();
        let mean = gar_mean(&fig).unwrap();
        let step = gar_rlr(&fig, 2.0, eta).unwrap();
        assert_eq!(
            step.as_slice(),
            &[eta * mean.get(0), -eta * mean.get(1), -eta * mean.get(2)]
        );
        // theta=0: |sum| >= 0 always, so +eta everywhere.
        let step = gar_rlr(&fig, 0.0, eta).unwrap();
        assert_eq!(
            step.as_slice(),
            &[eta * mean.get(0), eta * mean.get(1), eta * mean.get(2)]
        );
    }

    #[test]
    fn brace_oracle_matches_consensus_examples() {
        let out = gar_brace_oracle(&fig_gradients(), 2).unwrap();
        assert_eq!(out.as_slice(), &[1, -1, -1]);
        // Unanimity clears any threshold below n.
        let same = vec![gv(&[1.0, 1.0]); 4];
        assert_eq!(gar_brace_oracle(&same, 3).unwrap().as_slice(), &[1, 1]);
    }

    #[test]
    fn rlr_brace_divergence_on_negative_agreement() {
        // Strong negative agreement: sign sum -n. With theta = lambda >= 0
        // RLR still applies +eta (|sum| >= theta) while the consensus
        // outputs -1. Positive agreement above lambda matches on +.
        let n = 5;
        let lambda = 2;
        let theta = lambda as f64;
        let eta = 0.1;
        let neg = vec![gv(&[-3.0]); n];
        let pos = vec![gv(&[3.0]); n];

        let brace_neg = gar_brace_oracle(&neg, lambda).unwrap();
        assert_eq!(brace_neg.as_slice(), &[-1]);
        let rlr_neg = gar_rlr(&neg, theta, eta).unwrap();
        // +eta rate on a negative mean: the applied step is negative, i.e.
        // RLR trusts the negative agreement rather than rejecting it.
        assert!(rlr_neg.get(0) < 0.0);
        assert_eq!(rlr_neg.get(0), eta * -3.0);

        let brace_pos = gar_brace_oracle(&pos, lambda).unwrap();
        assert_eq!(brace_pos.as_slice(), &[1]);
        let rlr_pos = gar_rlr(&pos, theta, eta).unwrap();
        assert!(rlr_pos.get(0) > 0.0);
    }

    #[test]
    fn permutation_invariance() {
        let gradients = vec![
            gv(&[3.0, -1.0, 2.0]),
            gv(&[-5.0, 0.5, 1.0]),
            gv(&[2.0, 2.0, 2.0]),
            gv(&[0.0, -3.0, 4.0]),
            gv(&[1.0, 1.0, -1.0]),
        ];
        let permuted: Vec<GradVec> = [4, 2, 0, 3, 1]
            .iter()
            .map(|&i| gradients[i].clone())
            .collect();
        // Entries are dyadic, so the mean is exact and order-free.
        assert_eq!(gar_mean(&gradients).unwrap(), gar_mean(&permuted).unwrap());
        assert_eq!(gar_median(&gradients).unwrap(), gar_median(&permuted).unwrap());
        assert_eq!(
            gar_trimmed_mean(&gradients, 1).unwrap(),
            gar_trimmed_mean(&permuted, 1).unwrap()
        );
        assert_eq!(
            gar_signsgd(&gradients).unwrap(),
            gar_signsgd(&permuted).unwrap()
        );
        assert_eq!(
            gar_brace_oracle(&gradients, 1).unwrap(),
            gar_brace_oracle(&permuted, 1).unwrap()
        );
        // Krum: the selected vector (not index) is permutation invariant up
        // to the tie rule; with distinct vectors the value must agree.
        assert_eq!(
            gar_krum(&gradients, 1).unwrap(),
            gar_krum(&permuted, 1).unwrap()
        );
    }
}
