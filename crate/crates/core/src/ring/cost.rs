//! Closed-form per-round communication costs and reconciliation against
//! measured ledgers.
//!
//! Costs follow the conventional accounting for each architecture: the
//! server-client figure is the total traffic crossing the server (m·n·d),
//! while the ring figures are per-client traffic (2·m·d·(n-1)/n for the
//! plain all-reduce, d·(n-1)·(m+1)/n for the sign-consensus round). Ledgers
//! count every bit placed on the wire by every client, so ring ledgers are
//! normalized by n before comparison.

use super::{schedule_chunk, CommLedger, Phase};
use crate::chunk::ChunkPlan;
use crate::error::Result;
use std::fmt;

/// Aggregation architecture whose traffic is being modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    /// Server-client: every client uploads its full gradient.
    Sc,
    /// Plain ring-all-reduce.
    Rar,
    /// Sign-consensus ring round.
    Brace,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Sc => "SC",
            Arch::Rar => "RAR",
            Arch::Brace => "BRACE",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Minimum per-entry width (bits) able to hold sign sums in [-n, n]:
/// ceil(log2(2n+1)).
pub fn min_entry_width(n: usize) -> u32 {
    let states = 2 * (n as u64) + 1;
    64 - (states - 1).leading_zeros()
}

/// Exact rational cost in the architecture's own units (numerator,
/// denominator).
fn predicted_ratio(arch: Arch, n: u64, d: u64, m: u64) -> (u128, u128) {
    let (n, d, m) = (n as u128, d as u128, m as u128);
    match arch {
        Arch::Sc => (m * n * d, 1),
        Arch::Rar => (2 * m * d * (n - 1), n),
        Arch::Brace => (d * (n - 1) * (m + 1), n),
    }
}

/// Closed-form per-round cost in bits, evaluated as an exact rational and
/// returned as a real.
pub fn predicted_cost(arch: Arch, n: usize, d: usize, m: u32) -> f64 {
    let (num, den) = predicted_ratio(arch, n as u64, d as u64, u64::from(m));
    num as f64 / den as f64
}

/// Wire total recomputed independently from the chunk plan and schedule:
/// the sum over phases, steps, and clients of chunk size times the phase's
/// per-entry width.
pub fn chunk_exact_total(arch: Arch, plan: &ChunkPlan, m: u32) -> u64 {
    let n = plan.chunk_count();
    let d = plan.dim() as u64;
    match arch {
        Arch::Sc => u64::from(m) * n as u64 * d,
        Arch::Rar | Arch::Brace => {
            let widths = match arch {
                Arch::Rar => [(Phase::ShareReduce, m), (Phase::ShareOnly, m)],
                Arch::Brace => [(Phase::ShareReduce, m), (Phase::ShareOnly, 1)],
                Arch::Sc => unreachable!(),
            };
            let mut total = 0u64;
            for (phase, width) in widths {
                for step in 1..n {
                    for client in 0..n {
                        let chunk = schedule_chunk(client, step, phase, n).expect("valid step");
                        total += plan.size(chunk) as u64 * u64::from(width);
                    }
                }
            }
            total
        }
    }
}

/// Ledger for one server-client round: each client uploads `m` bits per
/// entry of its d-dimensional gradient.
pub fn sc_round_ledger(n: usize, d: usize, m: u32) -> CommLedger {
    let mut ledger = CommLedger::new(n);
    for client in 0..n {
        ledger.charge(client, Phase::Upload, u64::from(m) * d as u64);
    }
    ledger
}

/// Reconciliation of a measured ledger against the closed-form cost.
#[derive(Debug, Clone)]
pub struct CostReport {
    pub arch: Arch,
    pub n: usize,
    pub d: usize,
    pub m: u32,
    /// Closed-form cost in the architecture's units (SC: wire total; ring:
    /// per-client), as an exact real.
    pub predicted_bits: f64,
    /// Every bit the ledger recorded.
    pub measured_total_bits: u64,
    /// Measured value in the architecture's units (ring totals divided by n,
    /// exactly).
    pub measured_bits: f64,
    /// Independent schedule walk: sum of chunk size times phase width.
    pub chunk_exact_bits: u64,
    pub per_client_min: u64,
    pub per_client_max: u64,
    /// Whether n divides d (uniform chunks).
    pub uniform_chunks: bool,
    /// Largest per-client deviation from the idealized per-client figure, in
    /// bits; zero when chunks are uniform.
    pub max_client_deviation: f64,
    pub matched: bool,
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} n={} d={} m={}: predicted {} bits, measured {} bits (wire total {}, chunk-exact {}) -> {}",
            self.arch,
            self.n,
            self.d,
            self.m,
            self.predicted_bits,
            self.measured_bits,
            self.measured_total_bits,
            self.chunk_exact_bits,
            if self.matched { "match" } else { "MISMATCH" }
        )?;
        if !self.uniform_chunks {
            write!(
                f,
                "; unequal chunks (n does not divide d): per-client bits in [{}, {}], max deviation {} from the idealized per-client figure",
                self.per_client_min, self.per_client_max, self.max_client_deviation
            )?;
        }
        Ok(())
    }
}

/// Compare a completed round's ledger against the closed-form prediction.
///
/// With uniform chunks (n | d) the measured figure must equal the
/// prediction exactly, per client and in aggregate. With unequal chunks the
/// wire total must equal the independently recomputed chunk-exact total and
/// the report quantifies how far individual clients sit from the idealized
/// per-client figure.
pub fn ledger_matches_prediction(
    ledger: &CommLedger,
    arch: Arch,
    n: usize,
    d: usize,
    m: u32,
) -> Result<CostReport> {
    let plan_units = match arch {
        Arch::Sc => 1u128,
        Arch::Rar | Arch::Brace => n as u128,
    };
    let (pred_num, pred_den) = predicted_ratio(arch, n as u64, d as u64, u64::from(m));
    let measured_total = ledger.total_bits();
    // Measured value in the architecture's units, as the exact rational
    // total/plan_units.
    let measured_num = u128::from(measured_total);
    let rational_match = measured_num * pred_den == pred_num * plan_units;

    let chunk_exact = match arch {
        Arch::Sc => u64::from(m) * n as u64 * d as u64,
        Arch::Rar | Arch::Brace => chunk_exact_total(arch, &ChunkPlan::new(d, n)?, m),
    };

    let uniform = d % n == 0;
    let per_client = ledger.per_client_bits();
    let per_client_min = per_client.iter().copied().min().unwrap_or(0);
    let per_client_max = per_client.iter().copied().max().unwrap_or(0);

    // Idealized per-client figure as an exact rational.
    let (ideal_client_num, ideal_client_den): (u128, u128) = match arch {
        Arch::Sc => (u128::from(m) * d as u128, 1),
        Arch::Rar | Arch::Brace => (pred_num, pred_den),
    };

    let idealized_per_client = ideal_client_num as f64 / ideal_client_den as f64;
    let max_client_deviation = per_client
        .iter()
        .map(|&b| (b as f64 - idealized_per_client).abs())
        .fold(0.0, f64::max);

    let mut matched = ledger.is_conserved() && measured_total == chunk_exact && rational_match;
    if uniform {
        // Uniform chunks: every client must hit the idealized figure on the
        // nose (an integer number of bits in this case).
        matched = matched
            && per_client
                .iter()
                .all(|&b| u128::from(b) * ideal_client_den == ideal_client_num);
    }

    Ok(CostReport {
        arch,
        n,
        d,
        m,
        predicted_bits: pred_num as f64 / pred_den as f64,
        measured_total_bits: measured_total,
        measured_bits: measured_num as f64 / plan_units as f64,
        chunk_exact_bits: chunk_exact,
        per_client_min,
        per_client_max,
        uniform_chunks: uniform,
        max_client_deviation,
        matched,
    })
}
