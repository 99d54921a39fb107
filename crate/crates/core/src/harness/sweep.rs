//! Parameter sweeps over a base experiment configuration.

use super::config::{Architecture, ExperimentConfig};
use super::experiment::run_experiment;
use crate::adversary::AttackKind;
use crate::aggregators::GarSpec;
use crate::error::{Error, Result};
use std::collections::BTreeSet;
use std::fmt;

/// Sweepable configuration axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Fraction of malicious clients; f = round(value * n).
    MaliciousFraction,
    /// Non-IID degree q.
    NonIidDegree,
    /// Total client count n; the malicious fraction is preserved.
    ClientCount,
    /// Consensus threshold lambda; adaptive attacks and the consensus
    /// oracle follow it.
    Lambda,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "malicious-fraction" => Ok(SweepAxis::MaliciousFraction),
            "q" | "non-iid-degree" => Ok(SweepAxis::NonIidDegree),
            "n" | "client-count" => Ok(SweepAxis::ClientCount),
            "lambda" => Ok(SweepAxis::Lambda),
            other => Err(Error::config(
                "sweep.axis",
                format!(
                    "unknown axis \"{other}\"; expected malicious-fraction | q | n | lambda"
                ),
            )),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::MaliciousFraction => "malicious-fraction",
            SweepAxis::NonIidDegree => "q",
            SweepAxis::ClientCount => "n",
            SweepAxis::Lambda => "lambda",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One sweep cell's multi-seed summary, in long format.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub axis: SweepAxis,
    pub value: f64,
    pub defense: String,
    pub attack: String,
    pub seeds: usize,
    pub median_metric: f64,
    pub median_loss: f64,
    pub bits_per_round: u64,
}

/// Derive the cell configuration for one axis value.
pub fn config_for_value(
    base: &ExperimentConfig,
    axis: SweepAxis,
    value: f64,
) -> Result<ExperimentConfig> {
    let mut config = base.clone();
    match axis {
        SweepAxis::MaliciousFraction => {
            if !(0.0..0.5).contains(&value) {
                return Err(Error::config(
                    "sweep.values",
                    format!("malicious fraction {value} outside [0, 0.5)"),
                ));
            }
            let f = (value * config.params.n as f64).round() as usize;
            config.params.f = f;
            config.attack.malicious = (0..f).collect::<BTreeSet<usize>>();
        }
        SweepAxis::NonIidDegree => {
            config.params.q = value;
        }
        SweepAxis::ClientCount => {
            if value.fract() != 0.0 || value < 1.0 {
                return Err(Error::config(
                    "sweep.values",
                    format!("client count {value} must be a positive integer"),
                ));
            }
            let n = value as usize;
            // Preserve the base malicious fraction.
            let fraction = base.params.f as f64 / base.params.n as f64;
            let f = (fraction * n as f64).round() as usize;
            config.params.n = n;
            config.params.f = f;
            config.attack.malicious = (0..f).collect::<BTreeSet<usize>>();
        }
        SweepAxis::Lambda => {
            if value.fract() != 0.0 {
                return Err(Error::config(
                    "sweep.values",
                    format!("lambda {value} must be an integer"),
                ));
            }
            let lambda = value as i32;
            config.params.lambda = lambda;
            if let AttackKind::AdaptiveBrace { .. } = config.attack.kind {
                config.attack.kind = AttackKind::AdaptiveBrace { lambda };
            }
            if let Architecture::ServerClient(GarSpec::BraceOracle { .. }) = config.architecture {
                config.architecture =
                    Architecture::ServerClient(GarSpec::BraceOracle { lambda });
            }
        }
    }
    // When the sweep empties the malicious set, the attack becomes a no-op;
    // keep the spec's |malicious| = f linkage intact.
    config.validate().map_err(|e| {
        Error::config(
            "sweep",
            format!("cell {axis}={value} failed validation: {e}"),
        )
    })?;
    Ok(config)
}

/// Run one cell per axis value (all seeds each), reporting multi-seed
/// medians. Every cell is validated before any cell runs; a failure aborts
/// naming the offending cell.
pub fn sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<SweepCell>> {
    if values.is_empty() {
        return Err(Error::config("sweep.values", "need at least one value"));
    }
    let configs: Vec<(f64, ExperimentConfig)> = values
        .iter()
        .map(|&v| Ok((v, config_for_value(base, axis, v)?)))
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(configs.len());
    for (value, config) in configs {
        let result = run_experiment(&config)?;
        cells.push(SweepCell {
            axis,
            value,
            defense: config.architecture.name(),
            attack: config.attack.kind.name().to_string(),
            seeds: config.seeds.len(),
            median_metric: result.median_final_metric,
            median_loss: result.median_final_loss,
            bits_per_round: result.runs.first().map(|r| r.bits_per_round).unwrap_or(0),
        });
    }
    Ok(cells)
}

/// Long-format CSV: axis,value,defense,attack,seeds,median_metric,
/// median_loss,bits_per_round.
pub fn sweep_table_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("axis,value,defense,attack,seeds,median_metric,median_loss,bits_per_round\n");
    for cell in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            cell.axis,
            cell.value,
            cell.defense,
            cell.attack,
            cell.seeds,
            cell.median_metric,
            cell.median_loss,
            cell.bits_per_round
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::TaskChoice;
    use crate::tasks::QuadraticParams;
    use crate::vector::HyperParams;
    use crate::adversary::{AttackSpec, Knowledge};
    use std::path::PathBuf;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            params: HyperParams {
                n: 10,
                f: 2,
                d: 16,
                m: 32,
                lambda: 2,
                eta: 0.05,
                rounds: 2,
                q: 0.5,
            },
            architecture: Architecture::Brace,
            attack: AttackSpec {
                kind: AttackKind::AdaptiveBrace { lambda: 2 },
                malicious: [0usize, 1].into_iter().collect(),
                knowledge: Knowledge::Full,
            },
            task: TaskChoice::Quadratic(QuadraticParams::default()),
            full_batch: true,
            seeds: vec![1, 2, 3],
            output_dir: PathBuf::from("runs/test"),
        }
    }

    #[test]
    fn single_value_sweep_matches_run_experiment() {
        let base = base();
        let cells = sweep(&base, SweepAxis::NonIidDegree, &[0.5]).unwrap();
        assert_eq!(cells.len(), 1);
        let direct = run_experiment(&base).unwrap();
        assert_eq!(cells[0].median_metric, direct.median_final_metric);
        assert_eq!(cells[0].seeds, 3);
    }

    #[test]
    fn malicious_fraction_rescales_the_attack_set() {
        let base = base();
        let config = config_for_value(&base, SweepAxis::MaliciousFraction, 0.4).unwrap();
        assert_eq!(config.params.f, 4);
        assert_eq!(config.attack.malicious.len(), 4);
        let config = config_for_value(&base, SweepAxis::MaliciousFraction, 0.0).unwrap();
        assert_eq!(config.params.f, 0);
        assert!(config.attack.malicious.is_empty());
    }

    #[test]
    fn lambda_axis_updates_dependents() {
        let base = base();
        let config = config_for_value(&base, SweepAxis::Lambda, 4.0).unwrap();
        assert_eq!(config.params.lambda, 4);
        assert!(matches!(config.attack.kind, AttackKind::AdaptiveBrace { lambda: 4 }));
    }

    #[test]
    fn invalid_cell_is_named() {
        let base = base();
        let err = sweep(&base, SweepAxis::MaliciousFraction, &[0.2, 0.6]).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("0.6"), "{text}");
    }

    #[test]
    fn client_count_axis_preserves_fraction() {
        let base = base();
        let config = config_for_value(&base, SweepAxis::ClientCount, 15.0).unwrap();
        assert_eq!(config.params.n, 15);
        assert_eq!(config.params.f, 3);
        assert_eq!(config.attack.malicious.len(), 3);
    }

    #[test]
    fn table_is_long_format() {
        let base = base();
        let cells = sweep(&base, SweepAxis::Lambda, &[0.0, 2.0]).unwrap();
        let csv = sweep_table_csv(&cells);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("axis,value,defense,attack,seeds"));
        assert!(lines[1].starts_with("lambda,0,brace,adaptive-brace,3,"));
    }
}
