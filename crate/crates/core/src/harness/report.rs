//! Deterministic report emission: per-round CSVs and run-level summaries.
//!
//! Report files never contain wall-clock times or other nondeterminism, so
//! byte-identical runs produce byte-identical files.

use super::config::ExperimentConfig;
use super::experiment::{ExperimentResult, RoundRecord, SeedRun};
use crate::error::Result;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Fixed column order of the per-round CSV.
pub const CSV_HEADER: &str = "round,loss,grad_norm,test_error,bits_total";

/// Render one run's records in the fixed column order.
pub fn round_csv(records: &[RoundRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 48 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.round, r.loss, r.grad_norm, r.test_metric, r.bits_total
        );
    }
    out
}

fn seed_summary(run: &SeedRun, metric_label: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[seed {}]", run.seed);
    let _ = writeln!(out, "final_{metric_label} = {}", run.final_metric);
    let _ = writeln!(out, "final_loss = {}", run.final_loss);
    let _ = writeln!(out, "final_model_checksum = {:016x}", run.final_model_checksum);
    let _ = writeln!(out, "bits_per_round = {}", run.bits_per_round);
    for note in &run.attack_notes {
        let _ = writeln!(out, "attack_note = {note}");
    }
    if let Some(bound) = &run.bound {
        for line in bound.to_string().lines() {
            let _ = writeln!(out, "bound.{line}");
        }
    }
    out
}

/// Run-level summary: config echo, per-seed finals, multi-seed medians.
pub fn summary_text(config: &ExperimentConfig, result: &ExperimentResult) -> String {
    let metric_label = match &config.task {
        super::config::TaskChoice::Quadratic(_) => "suboptimality",
        super::config::TaskChoice::Classification(_) => "test_error",
    };
    let mut out = String::new();
    out.push_str("[config]\n");
    out.push_str(&config.echo());
    out.push('\n');
    for run in &result.runs {
        out.push_str(&seed_summary(run, metric_label));
        out.push('\n');
    }
    out.push_str("[medians]\n");
    let _ = writeln!(out, "median_final_{metric_label} = {}", result.median_final_metric);
    let _ = writeln!(out, "median_final_loss = {}", result.median_final_loss);
    out
}

/// Write per-seed CSVs and the summary under `dir`. Returns the paths
/// written, summary first.
pub fn write_experiment_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    result: &ExperimentResult,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let summary_path = dir.join("summary.txt");
    fs::write(&summary_path, summary_text(config, result))?;
    paths.push(summary_path);
    for run in &result.runs {
        let path = dir.join(format!("run_seed{}.csv", run.seed));
        fs::write(&path, round_csv(&run.records))?;
        paths.push(path);
    }
    Ok(paths)
}
