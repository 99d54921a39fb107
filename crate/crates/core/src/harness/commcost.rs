//! Predicted vs measured per-round communication, across architectures.

use crate::chunk::ChunkPlan;
use crate::error::Result;
use crate::ring::{
    ledger_matches_prediction, min_entry_width, predicted_cost, run_brace_round, run_rar_round,
    sc_round_ledger, Arch,
};
use crate::vector::GradVec;

/// One (architecture, n) row of the cost table.
#[derive(Debug, Clone)]
pub struct CommCostRow {
    pub arch: Arch,
    pub n: usize,
    pub d: usize,
    pub m: u32,
    pub predicted_bits: f64,
    /// Measured figure in the architecture's units; None when the round is
    /// not runnable at this configuration.
    pub measured_bits: Option<f64>,
    pub matched: bool,
    pub note: String,
}

fn synthetic_gradients(n: usize, d: usize) -> Vec<GradVec> {
    (0..n)
        .map(|i| {
            GradVec::new(
                (0..d)
                    .map(|k| (((i * 37 + k * 11) % 19) as f64) - 9.0)
                    .collect(),
            )
            .expect("finite synthetic values")
        })
        .collect()
}

/// Execute one round per architecture per n, reconciling ledgers against the
/// closed forms. Mismatches are flagged in the row.
pub fn commcost_report(ns: &[usize], d: usize, m: u32) -> Result<Vec<CommCostRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        // Server-client: n uploads of m*d bits.
        let ledger = sc_round_ledger(n, d, m);
        let report = ledger_matches_prediction(&ledger, Arch::Sc, n, d, m)?;
        rows.push(CommCostRow {
            arch: Arch::Sc,
            n,
            d,
            m,
            predicted_bits: report.predicted_bits,
            measured_bits: Some(report.measured_bits),
            matched: report.matched,
            note: String::new(),
        });

        if n > d {
            for arch in [Arch::Rar, Arch::Brace] {
                rows.push(CommCostRow {
                    arch,
                    n,
                    d,
                    m,
                    predicted_bits: predicted_cost(arch, n, d, m),
                    measured_bits: None,
                    matched: false,
                    note: format!("not runnable: n={n} exceeds d={d}"),
                });
            }
            continue;
        }
        let plan = ChunkPlan::new(d, n)?;
        let gradients = synthetic_gradients(n, d);

        let (_, ledger) = run_rar_round(&gradients, &plan, m)?;
        let report = ledger_matches_prediction(&ledger, Arch::Rar, n, d, m)?;
        rows.push(CommCostRow {
            arch: Arch::Rar,
            n,
            d,
            m,
            predicted_bits: report.predicted_bits,
            measured_bits: Some(report.measured_bits),
            matched: report.matched,
            note: if report.uniform_chunks {
                String::new()
            } else {
                format!(
                    "unequal chunks: per-client bits in [{}, {}]",
                    report.per_client_min, report.per_client_max
                )
            },
        });

        // The consensus round cannot represent sign sums when m is too
        // narrow; that configuration is rejected, so only the prediction is
        // reported.
        let needed = min_entry_width(n);
        if m < needed {
            rows.push(CommCostRow {
                arch: Arch::Brace,
                n,
                d,
                m,
                predicted_bits: predicted_cost(Arch::Brace, n, d, m),
                measured_bits: None,
                matched: false,
                note: format!("not runnable: m={m} below the {needed}-bit sign-sum width"),
            });
        } else {
            let (_, ledger) = run_brace_round(&gradients, &plan, 0, m)?;
            let report = ledger_matches_prediction(&ledger, Arch::Brace, n, d, m)?;
            rows.push(CommCostRow {
                arch: Arch::Brace,
                n,
                d,
                m,
                predicted_bits: report.predicted_bits,
                measured_bits: Some(report.measured_bits),
                matched: report.matched,
                note: if report.uniform_chunks {
                    String::new()
                } else {
                    format!(
                        "unequal chunks: per-client bits in [{}, {}]",
                        report.per_client_min, report.per_client_max
                    )
                },
            });
        }
    }
    Ok(rows)
}

/// Plain-text table for terminal output.
pub fn commcost_table(rows: &[CommCostRow]) -> String {
    let mut out = String::from("arch        n       d    m    predicted        measured  match  note\n");
    for row in rows {
        let measured = row
            .measured_bits
            .map(|b| format!("{b}"))
            .unwrap_or_else(|| "-".to_string());
        out.push_str(&format!(
            "{:<6} {:>6} {:>7} {:>4} {:>12} {:>15}  {:<5}  {}\n",
            row.arch.as_str(),
            row.n,
            row.d,
            row.m,
            row.predicted_bits,
            measured,
            if row.measured_bits.is_none() {
                "n/a"
            } else if row.matched {
                "yes"
            } else {
                "NO"
            },
            row.note
        ));
    }
    out
}
