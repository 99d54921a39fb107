//! Deterministic lock-step execution of ring collectives over n simulated
//! clients, with bit-exact communication accounting.
//!
//! Two protocols run on the same schedule:
//! - plain ring-all-reduce over real-valued gradients (Share-Reduce then
//!   Share-Only, `m` bits per entry in both phases), and
//! - the sign-consensus variant: clients quantize to {-1,+1}, Share-Reduce
//!   integer sign sums at `m` bits per entry, apply the threshold consensus
//!   locally to the chunk they fully own, then Share-Only the resulting
//!   one-bit entries.
//!
//! Transport is synchronous lock-step: all step-s messages are delivered
//! before step s+1 begins. There is no loss or reordering.

mod cost;

pub use cost::{
    chunk_exact_total, ledger_matches_prediction, min_entry_width, predicted_cost, sc_round_ledger,
    Arch, CostReport,
};

use crate::chunk::ChunkPlan;
use crate::error::{Error, Result};
use crate::vector::{consensus_map, sign_quantize, GradVec, SignVec, SumVec};
use std::collections::BTreeMap;
use std::io::Write;

/// Communication phase a message (or ledger bucket) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    /// Ring phase 1: reduce-as-you-forward.
    ShareReduce,
    /// Ring phase 2: forward fully-reduced chunks without arithmetic.
    ShareOnly,
    /// Server-client upload; never appears on the ring itself.
    Upload,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::ShareReduce => "share_reduce",
            Phase::ShareOnly => "share_only",
            Phase::Upload => "upload",
        }
    }
}

/// Payload of one ring message.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Real-valued chunk (plain all-reduce).
    Real(Vec<f64>),
    /// Partial sign sums (consensus protocol, Share-Reduce).
    Sum(Vec<i32>),
    /// One-bit signs (consensus protocol, Share-Only).
    Sign(Vec<i8>),
}

impl Payload {
    pub fn entries(&self) -> usize {
        match self {
            Payload::Real(v) => v.len(),
            Payload::Sum(v) => v.len(),
            Payload::Sign(v) => v.len(),
        }
    }
}

/// One point-to-point transfer between ring neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub from: usize,
    pub to: usize,
    pub phase: Phase,
    pub step: usize,
    pub chunk_id: usize,
    pub payload: Payload,
    /// Payload size on the wire: entries times the per-entry width declared
    /// for the phase.
    pub bits: u64,
}

/// Per-client and per-phase count of bits placed on the wire in one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommLedger {
    per_client_bits: Vec<u64>,
    per_phase_bits: BTreeMap<Phase, u64>,
    total_bits: u64,
}

impl CommLedger {
    pub fn new(n: usize) -> Self {
        CommLedger {
            per_client_bits: vec![0; n],
            per_phase_bits: BTreeMap::new(),
            total_bits: 0,
        }
    }

    pub(crate) fn charge(&mut self, client: usize, phase: Phase, bits: u64) {
        self.per_client_bits[client] += bits;
        *self.per_phase_bits.entry(phase).or_insert(0) += bits;
        self.total_bits += bits;
    }

    /// Bits sent by every client, summed over both phases.
    pub fn per_client_bits(&self) -> &[u64] {
        &self.per_client_bits
    }

    pub fn per_phase_bits(&self) -> &BTreeMap<Phase, u64> {
        &self.per_phase_bits
    }

    pub fn phase_bits(&self, phase: Phase) -> u64 {
        self.per_phase_bits.get(&phase).copied().unwrap_or(0)
    }

    /// All bits placed on the wire this round, by every client.
    pub fn total_bits(&self) -> u64 {
        self.total_bits
    }

    /// Conservation: the total equals both marginal sums.
    pub fn is_conserved(&self) -> bool {
        self.per_client_bits.iter().sum::<u64>() == self.total_bits
            && self.per_phase_bits.values().sum::<u64>() == self.total_bits
    }
}

/// Chunk sent by `client` at `step` of the given ring phase.
///
/// In Share-Reduce, client i first sends its own chunk i and thereafter
/// forwards the chunk it just reduced, so it sends chunk (i - step + 1) mod n
/// at step `step` and ends up owning the fully reduced chunk (i + 1) mod n.
/// In Share-Only it first sends that owned chunk and then forwards what it
/// received: chunk (i - step + 2) mod n.
pub fn schedule_chunk(client: usize, step: usize, phase: Phase, n: usize) -> Result<usize> {
    if n < 2 || step == 0 || step > n - 1 {
        return Err(Error::StepOutOfRange {
            step,
            max: n.saturating_sub(1),
        });
    }
    let offset = match phase {
        Phase::ShareReduce => 1,
        Phase::ShareOnly => 2,
        Phase::Upload => {
            return Err(Error::StepOutOfRange { step, max: 0 });
        }
    };
    // (client - step + offset) mod n, kept non-negative.
    Ok((client + n + n + offset - step) % n)
}

/// Observer for protocol traces. `None` skips message materialization.
pub type Trace<'a> = Option<&'a mut Vec<Message>>;

struct RingExec<'a, T: Copy> {
    plan: &'a ChunkPlan,
    buffers: Vec<Vec<T>>,
    ledger: CommLedger,
    messages: Vec<Message>,
    tracing: bool,
}

impl<'a, T: Copy> RingExec<'a, T> {
    fn new(plan: &'a ChunkPlan, buffers: Vec<Vec<T>>, tracing: bool) -> Self {
        let n = plan.chunk_count();
        RingExec {
            plan,
            buffers,
            ledger: CommLedger::new(n),
            messages: Vec::new(),
            tracing,
        }
    }

    /// Run one ring phase. `width` is the per-entry bit width charged to the
    /// sender; `fold` combines an incoming entry with the receiver's local
    /// entry (Share-Reduce) or replaces it (Share-Only).
    fn run_phase(
        &mut self,
        phase: Phase,
        width: u32,
        make_payload: impl Fn(&[T]) -> Payload,
        fold: impl Fn(T, T) -> T,
    ) {
        let n = self.plan.chunk_count();
        if n < 2 {
            return;
        }
        for step in 1..n {
            // Snapshot all sends before applying receives: lock-step delivery.
            let mut inflight: Vec<(usize, usize, Vec<T>)> = Vec::with_capacity(n);
            for from in 0..n {
                let chunk_id = schedule_chunk(from, step, phase, n).expect("step in range");
                let range = self.plan.range(chunk_id);
                let payload: Vec<T> = self.buffers[from][range].to_vec();
                inflight.push((from, chunk_id, payload));
            }
            for (from, chunk_id, payload) in inflight {
                let to = (from + 1) % n;
                let bits = payload.len() as u64 * u64::from(width);
                self.ledger.charge(from, phase, bits);
                if self.tracing {
                    self.messages.push(Message {
                        from,
                        to,
                        phase,
                        step,
                        chunk_id,
                        payload: make_payload(&payload),
                        bits,
                    });
                }
                let range = self.plan.range(chunk_id);
                for (local, incoming) in self.buffers[to][range].iter_mut().zip(payload) {
                    *local = fold(incoming, *local);
                }
            }
        }
    }
}

/// Output of a full ring round, retaining every client's final buffer.
#[derive(Debug, Clone)]
pub struct RingOutcome<V> {
    /// The common final value (client 0's buffer).
    pub aggregate: V,
    /// Every client's final buffer; the protocol guarantees these are
    /// pairwise identical.
    pub per_client: Vec<V>,
    pub ledger: CommLedger,
}

fn check_gradients(gradients: &[GradVec], plan: &ChunkPlan) -> Result<()> {
    if gradients.len() != plan.chunk_count() {
        return Err(Error::DimensionMismatch {
            expected: plan.chunk_count(),
            got: gradients.len(),
        });
    }
    for g in gradients {
        if g.dim() != plan.dim() {
            return Err(Error::DimensionMismatch {
                expected: plan.dim(),
                got: g.dim(),
            });
        }
    }
    Ok(())
}

/// Plain ring-all-reduce: every client ends with the exact sum of all
/// gradients, reduced in ring-arrival order. Both phases carry `m` bits per
/// entry.
pub fn run_rar_round(
    gradients: &[GradVec],
    plan: &ChunkPlan,
    m: u32,
) -> Result<(GradVec, CommLedger)> {
    let out = run_rar_round_detailed(gradients, plan, m, None)?;
    Ok((out.aggregate, out.ledger))
}

/// As [`run_rar_round`], returning per-client buffers and optionally the
/// message trace.
pub fn run_rar_round_detailed(
    gradients: &[GradVec],
    plan: &ChunkPlan,
    m: u32,
    trace: Trace<'_>,
) -> Result<RingOutcome<GradVec>> {
    check_gradients(gradients, plan)?;
    if m < 1 {
        return Err(Error::EntryWidthTooSmall {
            m,
            n: plan.chunk_count(),
            needed: 1,
        });
    }
    let buffers: Vec<Vec<f64>> = gradients.iter().map(|g| g.as_slice().to_vec()).collect();
    let mut exec = RingExec::new(plan, buffers, trace.is_some());
    exec.run_phase(Phase::ShareReduce, m, |p| Payload::Real(p.to_vec()), |incoming, own| {
        incoming + own
    });
    exec.run_phase(Phase::ShareOnly, m, |p| Payload::Real(p.to_vec()), |incoming, _own| incoming);
    if let Some(sink) = trace {
        sink.append(&mut exec.messages);
    }
    let per_client: Vec<GradVec> = exec.buffers.into_iter().map(GradVec::from_raw).collect();
    Ok(RingOutcome {
        aggregate: per_client[0].clone(),
        per_client,
        ledger: exec.ledger,
    })
}

/// Sign-consensus ring round: quantize, Share-Reduce integer sign sums at
/// `m` bits per entry, apply the threshold consensus to each client's fully
/// reduced chunk, then Share-Only the one-bit result. Every client ends with
/// the identical sign vector.
pub fn run_brace_round(
    gradients: &[GradVec],
    plan: &ChunkPlan,
    lambda: i32,
    m: u32,
) -> Result<(SignVec, CommLedger)> {
    let out = run_brace_round_detailed(gradients, plan, lambda, m, None)?;
    Ok((out.aggregate, out.ledger))
}

/// As [`run_brace_round`], returning per-client buffers and optionally the
/// message trace.
pub fn run_brace_round_detailed(
    gradients: &[GradVec],
    plan: &ChunkPlan,
    lambda: i32,
    m: u32,
    trace: Trace<'_>,
) -> Result<RingOutcome<SignVec>> {
    check_gradients(gradients, plan)?;
    let n = plan.chunk_count();
    let bound = n as i32;
    if lambda < -bound || lambda > bound {
        return Err(Error::LambdaOutOfRange { lambda, n });
    }
    let needed = min_entry_width(n);
    if m < needed {
        return Err(Error::EntryWidthTooSmall { m, n, needed });
    }

    // Phase I: local quantization, no traffic.
    let signs: Vec<SignVec> = gradients.iter().map(sign_quantize).collect();

    // Phase II: Share-Reduce over integer sign sums.
    let buffers: Vec<Vec<i32>> = signs
        .iter()
        .map(|s| s.as_slice().iter().map(|&v| i32::from(v)).collect())
        .collect();
    let mut exec = RingExec::new(plan, buffers, trace.is_some());
    exec.run_phase(Phase::ShareReduce, m, |p| Payload::Sum(p.to_vec()), |incoming, own| {
        incoming + own
    });

    // Phase III: each client maps only the chunk it fully owns; everything
    // else is filled in by Phase IV.
    let mut sign_buffers: Vec<Vec<i8>> = vec![vec![0i8; plan.dim()]; n];
    for (client, sums) in exec.buffers.iter().enumerate() {
        let owned = (client + 1) % n;
        let range = plan.range(owned);
        for k in range {
            sign_buffers[client][k] = if sums[k] > lambda { 1 } else { -1 };
        }
    }
    let ledger_so_far = exec.ledger;
    let mut reduce_messages = exec.messages;

    // Phase IV: Share-Only over one-bit entries.
    let mut share = RingExec::new(plan, sign_buffers, trace.is_some());
    share.ledger = ledger_so_far;
    share.run_phase(Phase::ShareOnly, 1, |p| Payload::Sign(p.to_vec()), |incoming, _own| incoming);
    if let Some(sink) = trace {
        sink.append(&mut reduce_messages);
        sink.append(&mut share.messages);
    }

    let per_client: Vec<SignVec> = share
        .buffers
        .into_iter()
        .map(|values| {
            debug_assert!(values.iter().all(|&v| v == 1 || v == -1));
            SignVec::from_raw(values)
        })
        .collect();
    Ok(RingOutcome {
        aggregate: per_client[0].clone(),
        per_client,
        ledger: share.ledger,
    })
}

/// Centralized reference for the ring sum: replays the exact per-chunk fold
/// order (chunk c accumulates clients c, c+1, ..., c+n-1), so the result is
/// bitwise identical to the distributed computation on any real inputs.
pub fn reference_ring_sum(gradients: &[GradVec], plan: &ChunkPlan) -> Result<GradVec> {
    check_gradients(gradients, plan)?;
    let n = plan.chunk_count();
    let mut out = vec![0.0; plan.dim()];
    for chunk in 0..n {
        for k in plan.range(chunk) {
            let mut acc = gradients[chunk].get(k);
            for t in 1..n {
                acc += gradients[(chunk + t) % n].get(k);
            }
            out[k] = acc;
        }
    }
    Ok(GradVec::from_raw(out))
}

/// Centralized reference for the consensus round: sign sums plus the
/// threshold map, no transport involved.
pub fn reference_consensus(gradients: &[GradVec], lambda: i32) -> Result<SignVec> {
    let signs: Vec<SignVec> = gradients.iter().map(sign_quantize).collect();
    let sums: SumVec = crate::vector::sign_sum(&signs)?;
    Ok(consensus_map(&sums, lambda))
}

/// Dump a message trace, one record per line, stable field order:
/// `from,to,phase,step,chunk_id,bits`.
pub fn write_trace(messages: &[Message], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "from,to,phase,step,chunk_id,bits")?;
    for msg in messages {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            msg.from,
            msg.to,
            msg.phase.as_str(),
            msg.step,
            msg.chunk_id,
            msg.bits
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gv(values: &[f64]) -> GradVec {
        GradVec::new(values.to_vec()).unwrap()
    }

    fn fig1_gradients() -> Vec<GradVec> {
        vec![
            gv(&[5.0, 2.0, -10.0]),
            gv(&[8.0, -4.0, 7.0]),
            gv(&[9.0, 3.0, 8.0]),
        ]
    }

    #[test]
    fn schedule_first_send_is_own_chunk() {
        // Client 0 opens Share-Reduce with its own sub-vector.
        assert_eq!(schedule_chunk(0, 1, Phase::ShareReduce, 3).unwrap(), 0);
        // (client=2, step=2, n=3) sends chunk (2-2+1) mod 3.
        assert_eq!(schedule_chunk(2, 2, Phase::ShareReduce, 3).unwrap(), 1);
        // Share-Only opens with the fully reduced chunk (i+1) mod n.
        assert_eq!(schedule_chunk(0, 1, Phase::ShareOnly, 3).unwrap(), 1);
    }

    #[test]
    fn schedule_rejects_bad_steps() {
        assert!(schedule_chunk(0, 0, Phase::ShareReduce, 3).is_err());
        assert!(schedule_chunk(0, 3, Phase::ShareReduce, 3).is_err());
        // Single client: no steps exist at all.
        assert!(schedule_chunk(0, 1, Phase::ShareReduce, 1).is_err());
    }

    #[test]
    fn rar_three_client_instance() {
        let plan = ChunkPlan::new(3, 3).unwrap();
        let (agg, ledger) = run_rar_round(&fig1_gradients(), &plan, 32).unwrap();
        assert_eq!(agg.as_slice(), &[22.0, 1.0, 5.0]);
        assert!(ledger.is_conserved());
        // 3 clients x 2 steps x 2 phases... each client sends 2 chunks of
        // one entry per phase: per-client 4 * 32 = 128 bits.
        assert_eq!(ledger.per_client_bits(), &[128, 128, 128]);
    }

    #[test]
    fn rar_poisoned_instance() {
        let mut gradients = fig1_gradients();
        gradients[0] = gv(&[5.0, 2.0, -200.0]);
        let plan = ChunkPlan::new(3, 3).unwrap();
        let (agg, _) = run_rar_round(&gradients, &plan, 32).unwrap();
        assert_eq!(agg.as_slice(), &[22.0, 1.0, -185.0]);
    }

    #[test]
    fn rar_mid_protocol_reduced_chunk() {
        // After Share-Reduce, client 0 owns fully reduced chunk 1 with value
        // 2 - 4 + 3 = 1. Observe it through the step-(n-1) Share-Reduce
        // trace: the last reduction lands at client 0.
        let plan = ChunkPlan::new(3, 3).unwrap();
        let mut trace = Vec::new();
        run_rar_round_detailed(&fig1_gradients(), &plan, 32, Some(&mut trace)).unwrap();
        let last_reduce: Vec<&Message> = trace
            .iter()
            .filter(|m| m.phase == Phase::ShareReduce && m.step == 2 && m.to == 0)
            .collect();
        assert_eq!(last_reduce.len(), 1);
        assert_eq!(last_reduce[0].chunk_id, 1);
        // Incoming partial is -4 + 3; client 0 then adds its own 2.
        assert_eq!(last_reduce[0].payload, Payload::Real(vec![-1.0]));
    }

    #[test]
    fn rar_single_client() {
        let plan = ChunkPlan::new(1, 1).unwrap();
        let (agg, ledger) = run_rar_round(&[gv(&[7.0])], &plan, 32).unwrap();
        assert_eq!(agg.as_slice(), &[7.0]);
        assert_eq!(ledger.total_bits(), 0);
    }

    #[test]
    fn rar_matches_reference_on_reals() {
        let gradients = vec![
            gv(&[0.1, 0.2, 0.3, 0.4, 0.5]),
            gv(&[-0.7, 1.3, 2.9, -3.3, 0.01]),
            gv(&[10.0, -20.0, 0.5, 0.25, -0.125]),
        ];
        let plan = ChunkPlan::new(5, 3).unwrap();
        let out = run_rar_round_detailed(&gradients, &plan, 32, None).unwrap();
        let reference = reference_ring_sum(&gradients, &plan).unwrap();
        for buf in &out.per_client {
            assert_eq!(buf.as_slice(), reference.as_slice());
        }
    }

    #[test]
    fn brace_three_client_instance() {
        let plan = ChunkPlan::new(3, 3).unwrap();
        let (agg, ledger) = run_brace_round(&fig1_gradients(), &plan, 2, 32).unwrap();
        assert_eq!(agg.as_slice(), &[1, -1, -1]);
        assert!(ledger.is_conserved());
        // Share-Reduce at 32 bits, Share-Only at 1 bit.
        assert_eq!(ledger.phase_bits(Phase::ShareReduce), 6 * 32);
        assert_eq!(ledger.phase_bits(Phase::ShareOnly), 6);
    }

    #[test]
    fn brace_all_clients_identical() {
        let gradients = vec![
            gv(&[0.3, -0.2, 4.0, 0.0, -9.0, 2.0, 2.0]),
            gv(&[1.0, 1.0, -1.0, 2.0, -2.0, 0.5, -0.5]),
            gv(&[-3.0, 0.1, 0.2, -0.3, 0.4, -0.5, 0.6]),
        ];
        let plan = ChunkPlan::new(7, 3).unwrap();
        for lambda in -3..=3 {
            let out = run_brace_round_detailed(&gradients, &plan, lambda, 8, None).unwrap();
            let reference = reference_consensus(&gradients, lambda).unwrap();
            for buf in &out.per_client {
                assert_eq!(buf, &reference);
            }
        }
    }

    #[test]
    fn brace_rejects_bad_lambda_and_width() {
        let plan = ChunkPlan::new(3, 3).unwrap();
        let gradients = fig1_gradients();
        assert!(matches!(
            run_brace_round(&gradients, &plan, 4, 32),
            Err(Error::LambdaOutOfRange { .. })
        ));
        // n=3 sign sums need ceil(log2(7)) = 3 bits.
        assert!(matches!(
            run_brace_round(&gradients, &plan, 0, 2),
            Err(Error::EntryWidthTooSmall { .. })
        ));
    }

    #[test]
    fn brace_negating_one_of_five_clients_cannot_flip_strong_agreement() {
        // Five clients agree; one flips sign. Sum per dim goes 5 -> 3,
        // still above lambda = 0.
        let base = gv(&[1.0, -2.0, 3.0, -4.0, 0.5]);
        let gradients: Vec<GradVec> = (0..5).map(|_| base.clone()).collect();
        let mut negated = gradients.clone();
        negated[2] = base.scale(-1.0);
        let plan = ChunkPlan::new(5, 5).unwrap();
        let (honest, _) = run_brace_round(&gradients, &plan, 0, 8).unwrap();
        let (attacked, _) = run_brace_round(&negated, &plan, 0, 8).unwrap();
        assert_eq!(honest, attacked);
    }

    #[test]
    fn message_bits_match_phase_width() {
        let gradients = vec![
            gv(&[0.5, -1.5, 2.5, -3.5]),
            gv(&[1.0, 2.0, 3.0, 4.0]),
            gv(&[-1.0, -2.0, -3.0, -4.0]),
        ];
        let plan = ChunkPlan::new(4, 3).unwrap();
        let mut trace = Vec::new();
        run_brace_round_detailed(&gradients, &plan, 0, 8, Some(&mut trace)).unwrap();
        for msg in &trace {
            let width = match msg.phase {
                Phase::ShareReduce => 8,
                Phase::ShareOnly => 1,
                Phase::Upload => unreachable!(),
            };
            assert_eq!(msg.bits, msg.payload.entries() as u64 * width);
            assert_eq!(msg.to, (msg.from + 1) % 3);
        }
    }

    #[test]
    fn trace_dump_has_stable_field_order() {
        let plan = ChunkPlan::new(3, 3).unwrap();
        let mut trace = Vec::new();
        run_rar_round_detailed(&fig1_gradients(), &plan, 16, Some(&mut trace)).unwrap();
        let mut out = Vec::new();
        write_trace(&trace, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "from,to,phase,step,chunk_id,bits");
        assert_eq!(lines.next().unwrap(), "0,1,share_reduce,1,0,16");
    }
}
