//! Experiment configuration: TOML schema, parsing, and cross-field
//! validation.
//!
//! The file format is structured key-value TOML. Unknown keys are errors,
//! as are keys that do not belong to the selected kind. The full schema:
//!
//! ```toml
//! seeds = [1, 2, 3, 4, 5]
//! output_dir = "runs/demo"      # overridden by $RINGFL_OUT when set
//!
//! [params]
//! n = 30          # clients
//! f = 6           # assumed Byzantine count, f < n/2
//! d = 200         # model dimension
//! m = 32          # bits per raw gradient entry on the wire
//! lambda = 5      # consensus threshold in [-n, n]
//! eta = 0.05      # learning rate
//! rounds = 500    # training rounds
//! q = 0.5         # non-IID degree in [0, 1]
//!
//! [architecture]
//! kind = "brace"  # "sc" | "rar-mean" | "brace"
//! gar = "mean"    # sc only: "mean" | "krum" | "median" | "trimmed-mean"
//!                 #          | "signsgd" | "rlr" | "brace-oracle"
//! krum_f = 6      # sc+krum only; default params.f
//! trim_k = 6      # sc+trimmed-mean only; default params.f
//! theta = 5.0     # sc+rlr only; default 5
//!
//! [attack]
//! kind = "none"   # "none" | "gaussian" | "label-flip" | "krum" | "trim"
//!                 # | "min-max" | "min-sum" | "adaptive-brace"
//! malicious = [0, 1]        # default: the first f client ids
//! knowledge = "full"        # "full" | "benign-only"
//! sigma = 200.0             # gaussian only
//! b = 2.0                   # trim only
//!
//! [task]
//! kind = "classification"   # "quadratic" | "classification"
//! full_batch = false
//! # classification:
//! classes = 10
//! features = 20             # model dimension is classes*features = params.d
//! train_per_client = 60
//! test_samples = 1000
//! class_sep = 3.0
//! spread = 1.0
//! batch_size = 32
//! # quadratic:
//! radius = 0.5
//! curvature_min = 1.0
//! curvature_max = 1.0
//! noise_std = 0.0
//! init_offset = 10.0
//! center = 0.0
//! ```

use crate::adversary::{AttackKind, AttackSpec, Knowledge};
use crate::aggregators::GarSpec;
use crate::error::{Error, Result};
use crate::tasks::{ClassificationParams, QuadraticParams};
use crate::vector::HyperParams;
use serde::Deserialize;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

/// Environment variable overriding `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "RINGFL_OUT";

/// How the per-round aggregate is computed.
#[derive(Debug, Clone, PartialEq)]
pub enum Architecture {
    /// Central server applying the given rule.
    ServerClient(GarSpec),
    /// Ring all-reduce followed by division by n.
    RarMean,
    /// Sign-consensus ring round.
    Brace,
}

impl Architecture {
    pub fn name(&self) -> String {
        match self {
            Architecture::ServerClient(gar) => format!("sc:{}", gar.name()),
            Architecture::RarMean => "rar-mean".to_string(),
            Architecture::Brace => "brace".to_string(),
        }
    }
}

/// Which task to build; parameters already validated.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskChoice {
    Quadratic(QuadraticParams),
    Classification(ClassificationParams),
}

impl TaskChoice {
    pub fn name(&self) -> &'static str {
        match self {
            TaskChoice::Quadratic(_) => "quadratic",
            TaskChoice::Classification(_) => "classification",
        }
    }
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: HyperParams,
    pub architecture: Architecture,
    pub attack: AttackSpec,
    pub task: TaskChoice,
    pub full_batch: bool,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seeds: Vec<u64>,
    output_dir: Option<String>,
    params: RawParams,
    architecture: RawArchitecture,
    attack: Option<RawAttack>,
    task: RawTask,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    n: usize,
    f: usize,
    d: usize,
    m: u32,
    lambda: i32,
    eta: f64,
    rounds: usize,
    q: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArchitecture {
    kind: String,
    gar: Option<String>,
    krum_f: Option<usize>,
    trim_k: Option<usize>,
    theta: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttack {
    kind: String,
    malicious: Option<Vec<usize>>,
    knowledge: Option<String>,
    sigma: Option<f64>,
    b: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    kind: String,
    full_batch: Option<bool>,
    // classification
    classes: Option<usize>,
    features: Option<usize>,
    train_per_client: Option<usize>,
    test_samples: Option<usize>,
    class_sep: Option<f64>,
    spread: Option<f64>,
    batch_size: Option<usize>,
    // quadratic
    radius: Option<f64>,
    curvature_min: Option<f64>,
    curvature_max: Option<f64>,
    noise_std: Option<f64>,
    init_offset: Option<f64>,
    center: Option<f64>,
}

fn reject_key<T>(value: &Option<T>, field: &str, kind: &str) -> Result<()> {
    if value.is_some() {
        return Err(Error::config(
            field,
            format!("key does not apply to kind \"{kind}\""),
        ));
    }
    Ok(())
}

fn build_architecture(raw: &RawArchitecture, params: &RawParams) -> Result<Architecture> {
    match raw.kind.as_str() {
        "sc" => {
            let gar_name = raw.gar.as_deref().ok_or_else(|| {
                Error::config("architecture.gar", "required when kind = \"sc\"")
            })?;
            let gar = match gar_name {
                "mean" => GarSpec::Mean,
                "krum" => GarSpec::Krum { f: raw.krum_f.unwrap_or(params.f) },
                "median" => GarSpec::Median,
                "trimmed-mean" => GarSpec::TrimmedMean { k: raw.trim_k.unwrap_or(params.f) },
                "signsgd" => GarSpec::SignSgd,
                "rlr" => GarSpec::Rlr { theta: raw.theta.unwrap_or(5.0) },
                "brace-oracle" => GarSpec::BraceOracle { lambda: params.lambda },
                other => {
                    return Err(Error::config(
                        "architecture.gar",
                        format!("unknown rule \"{other}\""),
                    ))
                }
            };
            match &gar {
                GarSpec::Krum { .. } => {
                    reject_key(&raw.trim_k, "architecture.trim_k", gar_name)?;
                    reject_key(&raw.theta, "architecture.theta", gar_name)?;
                }
                GarSpec::TrimmedMean { .. } => {
                    reject_key(&raw.krum_f, "architecture.krum_f", gar_name)?;
                    reject_key(&raw.theta, "architecture.theta", gar_name)?;
                }
                GarSpec::Rlr { .. } => {
                    reject_key(&raw.krum_f, "architecture.krum_f", gar_name)?;
                    reject_key(&raw.trim_k, "architecture.trim_k", gar_name)?;
                }
                _ => {
                    reject_key(&raw.krum_f, "architecture.krum_f", gar_name)?;
                    reject_key(&raw.trim_k, "architecture.trim_k", gar_name)?;
                    reject_key(&raw.theta, "architecture.theta", gar_name)?;
                }
            }
            Ok(Architecture::ServerClient(gar))
        }
        "rar-mean" | "brace" => {
            reject_key(&raw.gar, "architecture.gar", &raw.kind)?;
            reject_key(&raw.krum_f, "architecture.krum_f", &raw.kind)?;
            reject_key(&raw.trim_k, "architecture.trim_k", &raw.kind)?;
            reject_key(&raw.theta, "architecture.theta", &raw.kind)?;
            Ok(if raw.kind == "brace" {
                Architecture::Brace
            } else {
                Architecture::RarMean
            })
        }
        other => Err(Error::config(
            "architecture.kind",
            format!("unknown architecture \"{other}\""),
        )),
    }
}

fn build_attack(raw: Option<&RawAttack>, params: &RawParams) -> Result<AttackSpec> {
    let Some(raw) = raw else {
        return Ok(AttackSpec::none());
    };
    let knowledge = match raw.knowledge.as_deref() {
        None | Some("full") => Knowledge::Full,
        Some("benign-only") => Knowledge::BenignOnly,
        Some(other) => {
            return Err(Error::config(
                "attack.knowledge",
                format!("unknown knowledge model \"{other}\""),
            ))
        }
    };
    let default_malicious = || (0..params.f).collect::<Vec<usize>>();
    let kind = match raw.kind.as_str() {
        "none" => {
            reject_key(&raw.sigma, "attack.sigma", "none")?;
            reject_key(&raw.b, "attack.b", "none")?;
            if raw.malicious.as_ref().is_some_and(|m| !m.is_empty()) {
                return Err(Error::config(
                    "attack.malicious",
                    "must be empty for kind = \"none\"",
                ));
            }
            return Ok(AttackSpec::none());
        }
        "gaussian" => {
            reject_key(&raw.b, "attack.b", "gaussian")?;
            AttackKind::Gaussian { sigma: raw.sigma.unwrap_or(200.0) }
        }
        "label-flip" => {
            reject_key(&raw.sigma, "attack.sigma", "label-flip")?;
            reject_key(&raw.b, "attack.b", "label-flip")?;
            AttackKind::LabelFlip
        }
        "krum" => {
            reject_key(&raw.sigma, "attack.sigma", "krum")?;
            reject_key(&raw.b, "attack.b", "krum")?;
            AttackKind::Krum
        }
        "trim" => {
            reject_key(&raw.sigma, "attack.sigma", "trim")?;
            AttackKind::Trim { b: raw.b.unwrap_or(2.0) }
        }
        "min-max" => {
            reject_key(&raw.sigma, "attack.sigma", "min-max")?;
            reject_key(&raw.b, "attack.b", "min-max")?;
            AttackKind::MinMax
        }
        "min-sum" => {
            reject_key(&raw.sigma, "attack.sigma", "min-sum")?;
            reject_key(&raw.b, "attack.b", "min-sum")?;
            AttackKind::MinSum
        }
        "adaptive-brace" => {
            reject_key(&raw.sigma, "attack.sigma", "adaptive-brace")?;
            reject_key(&raw.b, "attack.b", "adaptive-brace")?;
            AttackKind::AdaptiveBrace { lambda: params.lambda }
        }
        other => {
            return Err(Error::config(
                "attack.kind",
                format!("unknown attack \"{other}\""),
            ))
        }
    };
    let malicious: BTreeSet<usize> = raw
        .malicious
        .clone()
        .unwrap_or_else(default_malicious)
        .into_iter()
        .collect();
    Ok(AttackSpec { kind, malicious, knowledge })
}

fn build_task(raw: &RawTask) -> Result<(TaskChoice, bool)> {
    let full_batch = raw.full_batch.unwrap_or(false);
    match raw.kind.as_str() {
        "quadratic" => {
            for (value, field) in [
                (raw.classes.map(|_| ()), "task.classes"),
                (raw.features.map(|_| ()), "task.features"),
                (raw.train_per_client.map(|_| ()), "task.train_per_client"),
                (raw.test_samples.map(|_| ()), "task.test_samples"),
                (raw.class_sep.map(|_| ()), "task.class_sep"),
                (raw.spread.map(|_| ()), "task.spread"),
                (raw.batch_size.map(|_| ()), "task.batch_size"),
            ] {
                reject_key(&value, field, "quadratic")?;
            }
            let defaults = QuadraticParams::default();
            Ok((
                TaskChoice::Quadratic(QuadraticParams {
                    radius: raw.radius.unwrap_or(defaults.radius),
                    curvature_min: raw.curvature_min.unwrap_or(defaults.curvature_min),
                    curvature_max: raw.curvature_max.unwrap_or(defaults.curvature_max),
                    noise_std: raw.noise_std.unwrap_or(defaults.noise_std),
                    init_offset: raw.init_offset.unwrap_or(defaults.init_offset),
                    center: raw.center.unwrap_or(defaults.center),
                }),
                full_batch,
            ))
        }
        "classification" => {
            for (value, field) in [
                (raw.radius.map(|_| ()), "task.radius"),
                (raw.curvature_min.map(|_| ()), "task.curvature_min"),
                (raw.curvature_max.map(|_| ()), "task.curvature_max"),
                (raw.noise_std.map(|_| ()), "task.noise_std"),
                (raw.init_offset.map(|_| ()), "task.init_offset"),
                (raw.center.map(|_| ()), "task.center"),
            ] {
                reject_key(&value, field, "classification")?;
            }
            let defaults = ClassificationParams::default();
            Ok((
                TaskChoice::Classification(ClassificationParams {
                    classes: raw.classes.unwrap_or(defaults.classes),
                    features: raw.features.unwrap_or(defaults.features),
                    train_per_client: raw.train_per_client.unwrap_or(defaults.train_per_client),
                    test_samples: raw.test_samples.unwrap_or(defaults.test_samples),
                    class_sep: raw.class_sep.unwrap_or(defaults.class_sep),
                    spread: raw.spread.unwrap_or(defaults.spread),
                    batch_size: raw.batch_size.unwrap_or(defaults.batch_size),
                }),
                full_batch,
            ))
        }
        other => Err(Error::config("task.kind", format!("unknown task \"{other}\""))),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        let params = HyperParams {
            n: raw.params.n,
            f: raw.params.f,
            d: raw.params.d,
            m: raw.params.m,
            lambda: raw.params.lambda,
            eta: raw.params.eta,
            rounds: raw.params.rounds,
            q: raw.params.q,
        };
        let architecture = build_architecture(&raw.architecture, &raw.params)?;
        let attack = build_attack(raw.attack.as_ref(), &raw.params)?;
        let (task, full_batch) = build_task(&raw.task)?;
        let config = ExperimentConfig {
            params,
            architecture,
            attack,
            task,
            full_batch,
            seeds: raw.seeds,
            output_dir: PathBuf::from(raw.output_dir.unwrap_or_else(|| "runs".to_string())),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Output directory after applying the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var(OUTPUT_DIR_ENV) {
            Ok(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }

    /// Cross-field validation with field-level messages.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        let n = self.params.n;

        match &self.architecture {
            Architecture::ServerClient(gar) => gar.validate(n)?,
            Architecture::RarMean | Architecture::Brace => {
                if n > self.params.d {
                    return Err(Error::config(
                        "params.n",
                        format!(
                            "ring architectures need n <= d (n={n}, d={})",
                            self.params.d
                        ),
                    ));
                }
            }
        }
        if let Architecture::Brace = self.architecture {
            let needed = crate::ring::min_entry_width(n);
            if self.params.m < needed {
                return Err(Error::config(
                    "params.m",
                    format!("sign sums for n={n} need at least {needed} bits"),
                ));
            }
        }

        self.attack.validate(n)?;
        if self.attack.kind != AttackKind::None && self.attack.malicious.len() != self.params.f {
            return Err(Error::config(
                "attack.malicious",
                format!(
                    "|malicious| must equal params.f ({} vs {})",
                    self.attack.malicious.len(),
                    self.params.f
                ),
            ));
        }
        if self.attack.kind == AttackKind::Krum && n < self.params.f + 3 {
            return Err(Error::config(
                "attack.kind",
                format!("krum attack needs n >= f + 3 (n={n}, f={})", self.params.f),
            ));
        }

        match &self.task {
            TaskChoice::Quadratic(_) => {
                if matches!(self.attack.kind, AttackKind::LabelFlip) {
                    return Err(Error::config(
                        "attack.kind",
                        "label-flip requires a classification task",
                    ));
                }
            }
            TaskChoice::Classification(p) => {
                if p.classes * p.features != self.params.d {
                    return Err(Error::config(
                        "task.features",
                        format!(
                            "model dimension classes*features = {} must equal params.d = {}",
                            p.classes * p.features,
                            self.params.d
                        ),
                    ));
                }
                if n < p.classes {
                    return Err(Error::config(
                        "params.n",
                        format!("non-IID grouping needs n >= classes (n={n}, C={})", p.classes),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Stable key=value echo of every field, for summaries and reports.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let p = &self.params;
        out.push_str(&format!(
            "params.n = {}\nparams.f = {}\nparams.d = {}\nparams.m = {}\nparams.lambda = {}\nparams.eta = {}\nparams.rounds = {}\nparams.q = {}\n",
            p.n, p.f, p.d, p.m, p.lambda, p.eta, p.rounds, p.q
        ));
        out.push_str(&format!("architecture = {}\n", self.architecture.name()));
        out.push_str(&format!("attack = {}\n", self.attack.kind.name()));
        let ids: Vec<String> = self.attack.malicious.iter().map(|i| i.to_string()).collect();
        out.push_str(&format!("attack.malicious = [{}]\n", ids.join(",")));
        out.push_str(&format!(
            "attack.knowledge = {}\n",
            match self.attack.knowledge {
                Knowledge::Full => "full",
                Knowledge::BenignOnly => "benign-only",
            }
        ));
        match &self.attack.kind {
            AttackKind::Gaussian { sigma } => out.push_str(&format!("attack.sigma = {sigma}\n")),
            AttackKind::Trim { b } => out.push_str(&format!("attack.b = {b}\n")),
            AttackKind::AdaptiveBrace { lambda } => {
                out.push_str(&format!("attack.lambda = {lambda}\n"))
            }
            _ => {}
        }
        out.push_str(&format!("task = {}\n", self.task.name()));
        match &self.task {
            TaskChoice::Quadratic(q) => out.push_str(&format!(
                "task.radius = {}\ntask.curvature = [{}, {}]\ntask.noise_std = {}\ntask.init_offset = {}\ntask.center = {}\n",
                q.radius, q.curvature_min, q.curvature_max, q.noise_std, q.init_offset, q.center
            )),
            TaskChoice::Classification(c) => out.push_str(&format!(
                "task.classes = {}\ntask.features = {}\ntask.train_per_client = {}\ntask.test_samples = {}\ntask.class_sep = {}\ntask.spread = {}\ntask.batch_size = {}\n",
                c.classes, c.features, c.train_per_client, c.test_samples, c.class_sep, c.spread, c.batch_size
            )),
        }
        out.push_str(&format!("full_batch = {}\n", self.full_batch));
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        out.push_str(&format!("seeds = [{}]\n", seeds.join(",")));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seeds = [1, 2]
output_dir = "runs/test"

[params]
n = 10
f = 2
d = 40
m = 32
lambda = 2
eta = 0.05
rounds = 3
q = 0.5

[architecture]
kind = "brace"

[attack]
kind = "adaptive-brace"

[task]
kind = "classification"
classes = 4
features = 10
train_per_client = 20
test_samples = 200
"#;

    #[test]
    fn parses_and_validates() {
        let config = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert_eq!(config.params.n, 10);
        assert_eq!(config.attack.malicious.len(), 2);
        assert!(matches!(config.attack.kind, AttackKind::AdaptiveBrace { lambda: 2 }));
        assert_eq!(config.architecture.name(), "brace");
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = BASE.replace("[task]", "mystery = 1\n\n[task]");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("mystery"), "{err}");
    }

    #[test]
    fn kind_mismatched_keys_are_errors() {
        let text = BASE.replace("kind = \"classification\"", "kind = \"classification\"\nradius = 2.0");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("task.radius"), "{err}");
    }

    #[test]
    fn field_level_validation_messages() {
        let text = BASE.replace("f = 2", "f = 5");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("params.f"), "{err}");

        let text = BASE.replace("lambda = 2", "lambda = 11");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("params.lambda"), "{err}");

        let text = BASE.replace("features = 10", "features = 11");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("task.features"), "{err}");
    }

    #[test]
    fn krum_needs_enough_clients() {
        let text = BASE
            .replace("kind = \"brace\"", "kind = \"sc\"\ngar = \"krum\"\nkrum_f = 8");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("krum"), "{err}");
    }

    #[test]
    fn echo_is_stable() {
        let a = ExperimentConfig::from_toml_str(BASE).unwrap().echo();
        let b = ExperimentConfig::from_toml_str(BASE).unwrap().echo();
        assert_eq!(a, b);
        assert!(a.contains("architecture = brace"));
    }
}
