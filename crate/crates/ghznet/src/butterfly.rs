//! Full protocol rounds on an n-terminal higher-order butterfly network:
//! resource distribution, measurement schedule, classical exchange,
//! correction, and verification.
//!
//! Each of the n GHZ copies is simulated as its own (n+1)-qubit register
//! (input plus one resource qubit per terminal); copies never interact
//! quantum-mechanically, so the factored form is exact. The composite
//! register is available as a cross-check at n = 3.
//!
//! For n ≥ 4 a copy has bystander terminals that neither send, assist nor
//! receive on it. Their resource qubits are released before the protocol
//! measurements by an X measurement whose outcome is corrected immediately
//! with a conditional Z on the receiving qubit. The two outcomes produce the
//! identical post-correction state, so the release is a deterministic
//! channel: it adds no protocol branches, and the round keeps three
//! measured bits per terminal.

use crate::coding::{
    self, correction_for_terminal, encode_all, outcome_to_frame, CodingError, OutcomeRecord,
    ParityMessage, PauliFrame,
};
use crate::qsim::{
    BellOutcome, Pauli, QsimError, RandomSource, StateVector, XOutcome, MAX_QUBITS,
};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ButterflyError {
    #[error("terminal count {0} below minimum of 3")]
    TooFewTerminals(usize),
    #[error("expected {expected} inputs, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error(
        "exhaustive enumeration of {branches} branches exceeds the budget of {budget}; \
         partial enumeration is not performed"
    )]
    EnumerationOverBudget { branches: usize, budget: usize },
    #[error("composite register of {qubits} qubits exceeds the {MAX_QUBITS}-qubit cap")]
    CompositeOverCap { qubits: usize },
    #[error("routing is for {routing_n} terminals but instance has {instance_n}")]
    RoutingMismatch { routing_n: usize, instance_n: usize },
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Coding(#[from] CodingError),
}

pub type Result<T> = std::result::Result<T, ButterflyError>;

/// Largest branch count enumerate_branches will expand (n = 4).
pub const ENUMERATION_BUDGET: usize = 1 << 12;

/// Direction of the cyclic routing; the single toggle between the two
/// cross-transmission patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chirality {
    Clockwise,
    Counterclockwise,
}

impl Chirality {
    pub fn flipped(self) -> Self {
        match self {
            Chirality::Clockwise => Chirality::Counterclockwise,
            Chirality::Counterclockwise => Chirality::Clockwise,
        }
    }
}

impl std::fmt::Display for Chirality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Chirality::Clockwise => write!(f, "clockwise"),
            Chirality::Counterclockwise => write!(f, "counterclockwise"),
        }
    }
}

impl std::str::FromStr for Chirality {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "clockwise" => Ok(Chirality::Clockwise),
            "counterclockwise" => Ok(Chirality::Counterclockwise),
            other => Err(format!("unknown chirality `{other}`")),
        }
    }
}

/// Measurement routing for a round. Terminals and copies are numbered 1..=n.
///
/// Terminal t Bell-measures copy t against its input. Clockwise it
/// X-measures copy t+1 and holds copy t−1 (so copy c travels from sender c
/// to terminal c+1); counterclockwise is the mirror image.
#[derive(Debug, Clone)]
pub struct RoutingConfig {
    n: usize,
    chirality: Chirality,
    b_assignment: Vec<usize>,
}

impl RoutingConfig {
    pub fn new(n: usize, chirality: Chirality) -> Result<Self> {
        if n < 3 {
            return Err(ButterflyError::TooFewTerminals(n));
        }
        let offset = match chirality {
            Chirality::Clockwise => 1,
            Chirality::Counterclockwise => -1,
        };
        let b_assignment = (1..=n).map(|t| coding::cyclic(t, offset, n)).collect();
        Ok(Self {
            n,
            chirality,
            b_assignment,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn chirality(&self) -> Chirality {
        self.chirality
    }

    /// Copy that terminal t X-measures.
    pub fn x_copy_of(&self, t: usize) -> usize {
        self.b_assignment[t - 1]
    }

    /// Copy whose payload terminal t ends up holding.
    pub fn held_copy_of(&self, t: usize) -> usize {
        let offset = match self.chirality {
            Chirality::Clockwise => -1,
            Chirality::Counterclockwise => 1,
        };
        coding::cyclic(t, offset, self.n)
    }

    pub fn sender_of_copy(&self, c: usize) -> usize {
        c
    }

    /// Terminal whose X measurement sets copy c's phase bit.
    pub fn helper_of_copy(&self, c: usize) -> usize {
        let offset = match self.chirality {
            Chirality::Clockwise => -1,
            Chirality::Counterclockwise => 1,
        };
        coding::cyclic(c, offset, self.n)
    }

    /// Terminal that receives copy c's payload.
    pub fn receiver_of_copy(&self, c: usize) -> usize {
        let offset = match self.chirality {
            Chirality::Clockwise => 1,
            Chirality::Counterclockwise => -1,
        };
        coding::cyclic(c, offset, self.n)
    }

    /// Terminals with no role on copy c; their resource qubits are released
    /// before the protocol measurements.
    pub fn bystanders_of_copy(&self, c: usize) -> Vec<usize> {
        let sender = self.sender_of_copy(c);
        let helper = self.helper_of_copy(c);
        let receiver = self.receiver_of_copy(c);
        (1..=self.n)
            .filter(|&t| t != sender && t != helper && t != receiver)
            .collect()
    }

    /// Check the held/measured assignment: both maps are derangements, each
    /// terminal touches three distinct copies, and the maps follow the
    /// configured cyclic direction.
    pub fn validate(&self) -> bool {
        (1..=self.n).all(|t| {
            let x = self.x_copy_of(t);
            let held = self.held_copy_of(t);
            x != t && held != t && x != held
        })
    }
}

/// One protocol instance: n GHZ copies plus n prepared input states.
#[derive(Debug, Clone)]
pub struct ButterflyInstance {
    n: usize,
    inputs: Vec<(Complex64, Complex64)>,
    input_states: Vec<StateVector>,
    copies: Vec<StateVector>,
}

impl ButterflyInstance {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn inputs(&self) -> &[(Complex64, Complex64)] {
        &self.inputs
    }

    pub fn input_state(&self, j: usize) -> &StateVector {
        &self.input_states[j - 1]
    }

    pub fn copy_state(&self, c: usize) -> &StateVector {
        &self.copies[c - 1]
    }

    /// Replace a GHZ copy's resource state (fault injection).
    pub fn replace_copy(&mut self, c: usize, state: StateVector) {
        self.copies[c - 1] = state;
    }

    /// Width of the notional composite register (n² + n qubits).
    pub fn total_qubits(&self) -> usize {
        self.n * self.n + self.n
    }

    /// Materialize the composite register: inputs first (terminal order),
    /// then the copies in copy-major order. Errors above the register cap.
    pub fn composite_register(&self) -> Result<StateVector> {
        let qubits = self.total_qubits();
        if qubits > MAX_QUBITS {
            return Err(ButterflyError::CompositeOverCap { qubits });
        }
        let mut state = self.input_states[0].clone();
        for input in &self.input_states[1..] {
            state = state.tensor(input)?;
        }
        for copy in &self.copies {
            state = state.tensor(copy)?;
        }
        Ok(state)
    }
}

/// Set up an n-terminal instance: n GHZ copies of n qubits each plus the n
/// prepared inputs (kept factored per copy; see module docs).
pub fn build_instance(n: usize, inputs: &[(Complex64, Complex64)]) -> Result<ButterflyInstance> {
    if n < 3 {
        return Err(ButterflyError::TooFewTerminals(n));
    }
    if inputs.len() != n {
        return Err(ButterflyError::InputCount {
            expected: n,
            got: inputs.len(),
        });
    }
    let input_states: Vec<StateVector> = inputs
        .iter()
        .map(|&(a, b)| StateVector::prepare_arbitrary(a, b))
        .collect::<std::result::Result<_, _>>()?;
    let normalized = input_states
        .iter()
        .map(|s| (s.amplitudes()[0], s.amplitudes()[1]))
        .collect();
    let copies = (0..n)
        .map(|_| StateVector::prepare_ghz(n))
        .collect::<std::result::Result<_, _>>()?;
    Ok(ButterflyInstance {
        n,
        inputs: normalized,
        input_states,
        copies,
    })
}

/// Record of one full protocol round.
#[derive(Debug, Clone)]
pub struct ProtocolTranscript {
    pub n: usize,
    pub chirality: Chirality,
    pub inputs: Vec<(Complex64, Complex64)>,
    /// One record per terminal, in terminal order.
    pub outcomes: Vec<OutcomeRecord>,
    pub messages: Vec<ParityMessage>,
    /// Parity-derived correction frame per terminal, applied after that
    /// terminal's own-outcome frame.
    pub corrections: Vec<PauliFrame>,
    /// Fidelity of each terminal's held qubit against its routed sender's
    /// input, after correction.
    pub final_fidelities: Vec<f64>,
    /// Qubit relabeling and resource-release log, in execution order.
    pub relabel_log: Vec<String>,
    /// Probability of this measurement branch.
    pub branch_probability: f64,
}

impl ProtocolTranscript {
    /// Line-oriented ASCII export with sections INPUTS / OUTCOMES / MESSAGES
    /// / CORRECTIONS / FIDELITIES (and RELABELS when the log is nonempty).
    pub fn export(&self) -> String {
        let mut out = String::new();
        out.push_str("INPUTS\n");
        for (t, (a, b)) in self.inputs.iter().enumerate() {
            out.push_str(&format!(
                "{} {:.12} {:.12} {:.12} {:.12}\n",
                t + 1,
                a.re,
                a.im,
                b.re,
                b.im
            ));
        }
        out.push_str("OUTCOMES\n");
        for r in &self.outcomes {
            out.push_str(&format!(
                "{} {} {} {}\n",
                r.terminal,
                u8::from(r.a.b1),
                u8::from(r.a.b0),
                u8::from(r.b.bit)
            ));
        }
        out.push_str("MESSAGES\n");
        for m in &self.messages {
            out.push_str(&m.transcript_line());
            out.push('\n');
        }
        out.push_str("CORRECTIONS\n");
        for (t, f) in self.corrections.iter().enumerate() {
            out.push_str(&format!("{} {}\n", t + 1, f));
        }
        out.push_str("FIDELITIES\n");
        for (t, f) in self.final_fidelities.iter().enumerate() {
            out.push_str(&format!("{} {:.12}\n", t + 1, f));
        }
        if !self.relabel_log.is_empty() {
            out.push_str("RELABELS\n");
            for line in &self.relabel_log {
                out.push_str(line);
                out.push('\n');
            }
        }
        out
    }
}

/// Per-channel classical cost of a completed round.
#[derive(Debug, Clone)]
pub struct ChannelCost {
    pub per_channel: Vec<(coding::ChannelId, usize)>,
    pub total_bits: usize,
    /// Claimed per-channel width of two bits; the implemented payload is
    /// three (two Bell-parity bits plus one X-parity bit).
    pub claimed_bits_per_channel: usize,
    pub matches_claim: bool,
}

/// Bits sent per parity channel in a completed round.
pub fn classical_cost(transcript: &ProtocolTranscript) -> ChannelCost {
    let per_channel: Vec<(coding::ChannelId, usize)> = transcript
        .messages
        .iter()
        .map(|m| (m.channel, ParityMessage::BITS))
        .collect();
    let total_bits = per_channel.iter().map(|(_, b)| b).sum();
    ChannelCost {
        per_channel,
        total_bits,
        claimed_bits_per_channel: 2,
        matches_claim: ParityMessage::BITS == 2,
    }
}

/// Tracks current register indices of logical qubits across removals.
#[derive(Debug, Clone)]
pub(crate) struct PositionTracker {
    pos: Vec<Option<usize>>,
}

impl PositionTracker {
    pub(crate) fn new(count: usize) -> Self {
        Self {
            pos: (0..count).map(Some).collect(),
        }
    }

    pub(crate) fn get(&self, logical: usize) -> usize {
        self.pos[logical].expect("qubit already removed")
    }

    pub(crate) fn remove(&mut self, logical_removed: &[usize]) {
        let removed_idx: Vec<usize> = logical_removed.iter().map(|&l| self.get(l)).collect();
        for &l in logical_removed {
            self.pos[l] = None;
        }
        for p in self.pos.iter_mut().flatten() {
            *p -= removed_idx.iter().filter(|&&r| r < *p).count();
        }
    }
}

/// Pre-correction result of one copy's teleport for a fixed outcome pair.
#[derive(Debug, Clone)]
pub struct CopyBranch {
    pub bell: BellOutcome,
    pub x: XOutcome,
    pub probability: f64,
    /// Receiver's single-qubit state before any correction.
    pub delivered: StateVector,
    pub release_log: Vec<String>,
}

enum BranchMode<'a> {
    Forced(BellOutcome, XOutcome),
    Sampled(&'a mut RandomSource),
}

/// Run one copy's measurements. The register is input ⊗ GHZ with the
/// resource qubits in terminal order; bystander qubits are released first,
/// then the sender's Bell measurement and the helper's X measurement.
fn run_copy(
    instance: &ButterflyInstance,
    routing: &RoutingConfig,
    copy: usize,
    mode: BranchMode<'_>,
) -> Result<Option<CopyBranch>> {
    let n = instance.n;
    let sender = routing.sender_of_copy(copy);
    let helper = routing.helper_of_copy(copy);
    let receiver = routing.receiver_of_copy(copy);

    // Logical ids: 0 = input, t = terminal t's resource qubit.
    let mut state = instance
        .input_state(copy)
        .tensor(instance.copy_state(copy))?;
    let mut tracker = PositionTracker::new(n + 1);
    let mut log = Vec::new();

    let mut sampling = match mode {
        BranchMode::Forced(bell, x) => {
            let forced = Some((bell, x));
            (forced, None)
        }
        BranchMode::Sampled(rng) => (None, Some(rng)),
    };

    for t in routing.bystanders_of_copy(copy) {
        let q = tracker.get(t);
        let receiver_after = {
            let r = tracker.get(receiver);
            if q < r {
                r - 1
            } else {
                r
            }
        };
        let (outcome_bit, next) = match &mut sampling.1 {
            Some(rng) => {
                let (outcome, collapsed) = state.measure_x(q, rng)?;
                let corrected = if outcome.bit {
                    collapsed.apply_pauli(Pauli::Z, receiver_after)?
                } else {
                    collapsed
                };
                (outcome.bit, corrected)
            }
            None => (false, release_deterministic(&state, q, receiver_after)?),
        };
        state = next;
        tracker.remove(&[t]);
        log.push(format!(
            "copy {copy} release terminal {t} outcome {} corrected at terminal {receiver}",
            u8::from(outcome_bit)
        ));
    }

    let (bell, x, probability, delivered) = match sampling {
        (Some((bell, x)), None) => {
            let (p_bell, after_bell) = state.project_bell(tracker.get(0), tracker.get(sender), bell)?;
            let Some(after_bell) = after_bell else {
                return Ok(None);
            };
            tracker.remove(&[0, sender]);
            let (p_x, after_x) = after_bell.project_x(tracker.get(helper), x)?;
            let Some(after_x) = after_x else {
                return Ok(None);
            };
            tracker.remove(&[helper]);
            (bell, x, p_bell * p_x, after_x)
        }
        (None, Some(rng)) => {
            let probs = state.bell_probabilities(tracker.get(0), tracker.get(sender))?;
            let (bell, after_bell) = state.measure_bell(tracker.get(0), tracker.get(sender), rng)?;
            let p_bell = probs[bell.index()];
            tracker.remove(&[0, sender]);
            let helper_q = tracker.get(helper);
            let (p_plus, _) = after_bell.project_x(helper_q, XOutcome::new(false))?;
            let (x, after_x) = after_bell.measure_x(helper_q, rng)?;
            let p_x = if x.bit { 1.0 - p_plus } else { p_plus };
            tracker.remove(&[helper]);
            (bell, x, p_bell * p_x, after_x)
        }
        _ => unreachable!(),
    };
    debug_assert_eq!(delivered.num_qubits(), 1);
    log.push(format!(
        "copy {copy} bell at terminal {sender} x at terminal {helper} delivered to terminal {receiver}"
    ));

    Ok(Some(CopyBranch {
        bell,
        x,
        probability,
        delivered,
        release_log: log,
    }))
}

/// Deterministic bystander release: both X outcomes yield the same state
/// after the conditional Z, so the branch choice is immaterial.
pub(crate) fn release_deterministic(
    state: &StateVector,
    qubit: usize,
    correct_at: usize,
) -> Result<StateVector> {
    let (p0, s0) = state.project_x(qubit, XOutcome::new(false))?;
    let (_, s1) = state.project_x(qubit, XOutcome::new(true))?;
    match (s0, s1) {
        (Some(s0), Some(s1)) => {
            let s1 = s1.apply_pauli(Pauli::Z, correct_at)?;
            if s0.overlap_sq(&s1)? < 1.0 - 1e-9 {
                return Err(ButterflyError::Qsim(QsimError::Internal(
                    "bystander release is not outcome-independent for this resource".into(),
                )));
            }
            let _ = p0;
            Ok(s0)
        }
        (Some(s0), None) => Ok(s0),
        (None, Some(s1)) => Ok(s1.apply_pauli(Pauli::Z, correct_at)?),
        (None, None) => Err(ButterflyError::Qsim(QsimError::Internal(
            "bystander qubit has no X component".into(),
        ))),
    }
}

/// All eight (Bell, X) branches of one copy's teleport, pre-correction.
/// Zero-probability branches are omitted.
pub fn enumerate_copy_branches(
    instance: &ButterflyInstance,
    routing: &RoutingConfig,
    copy: usize,
) -> Result<Vec<CopyBranch>> {
    let mut branches = Vec::with_capacity(8);
    for bell in BellOutcome::all() {
        for xbit in [false, true] {
            if let Some(branch) = run_copy(
                instance,
                routing,
                copy,
                BranchMode::Forced(bell, XOutcome::new(xbit)),
            )? {
                branches.push(branch);
            }
        }
    }
    Ok(branches)
}

fn check_routing(instance: &ButterflyInstance, routing: &RoutingConfig) -> Result<()> {
    if routing.n() != instance.n {
        return Err(ButterflyError::RoutingMismatch {
            routing_n: routing.n(),
            instance_n: instance.n,
        });
    }
    Ok(())
}

type MessageFault<'a> = &'a dyn Fn(&mut Vec<ParityMessage>);

/// Assemble a transcript from per-copy branches, applying the two-step
/// correction (own-outcome frame, then the parity-derived residual) at each
/// terminal and scoring fidelities against the routed inputs.
fn assemble_transcript(
    instance: &ButterflyInstance,
    routing: &RoutingConfig,
    per_copy: &[CopyBranch],
    fault: Option<MessageFault<'_>>,
) -> Result<ProtocolTranscript> {
    let n = instance.n;
    let records: Vec<OutcomeRecord> = (1..=n)
        .map(|t| {
            // Terminal t's Bell outcome comes from copy t; its X outcome is
            // the one it performed on copy x_copy_of(t).
            let a = per_copy[t - 1].bell;
            let b = per_copy[routing.x_copy_of(t) - 1].x;
            OutcomeRecord::new(t, a, b)
        })
        .collect();
    let mut messages = encode_all(&records)?;
    if let Some(fault) = fault {
        fault(&mut messages);
    }

    let mut corrections = Vec::with_capacity(n);
    let mut fidelities = Vec::with_capacity(n);
    let mut log = Vec::new();
    let mut probability = 1.0;
    for branch in per_copy {
        probability *= branch.probability;
        log.extend(branch.release_log.iter().cloned());
    }
    for t in 1..=n {
        let own = &records[t - 1];
        let own_frame = outcome_to_frame(own.a, own.b);
        let residual = correction_for_terminal(t, own, &messages, routing)?;

        let held_copy = routing.held_copy_of(t);
        let delivered = per_copy[held_copy - 1].delivered.clone();
        let corrected = delivered
            .apply_pauli(own_frame.to_pauli(), 0)?
            .apply_pauli(residual.to_pauli(), 0)?;
        let fidelity = corrected.overlap_sq(instance.input_state(held_copy))?;
        corrections.push(residual);
        fidelities.push(fidelity);
    }

    Ok(ProtocolTranscript {
        n,
        chirality: routing.chirality(),
        inputs: instance.inputs.clone(),
        outcomes: records,
        messages,
        corrections,
        final_fidelities: fidelities,
        relabel_log: log,
        branch_probability: probability,
    })
}

/// Execute one sampled protocol round.
pub fn run_round(
    instance: &ButterflyInstance,
    routing: &RoutingConfig,
    rng: &mut RandomSource,
) -> Result<ProtocolTranscript> {
    run_round_with_message_fault(instance, routing, rng, |_| {})
}

/// Execute one sampled round, letting `fault` tamper with the parity
/// messages before terminals decode them (verification hook).
pub fn run_round_with_message_fault(
    instance: &ButterflyInstance,
    routing: &RoutingConfig,
    rng: &mut RandomSource,
    fault: impl Fn(&mut Vec<ParityMessage>),
) -> Result<ProtocolTranscript> {
    check_routing(instance, routing)?;
    let mut per_copy = Vec::with_capacity(instance.n);
    for copy in 1..=instance.n {
        let branch = run_copy(instance, routing, copy, BranchMode::Sampled(rng))?
            .expect("sampled branch has nonzero probability");
        per_copy.push(branch);
    }
    assemble_transcript(instance, routing, &per_copy, Some(&fault))
}

/// Deterministically force every measurement outcome combination by
/// post-selection and return all 2^(3n) transcripts, ordered by branch
/// index (terminal 1's bits most significant, Bell bits above the X bit).
pub fn enumerate_branches(
    instance: &ButterflyInstance,
    routing: &RoutingConfig,
) -> Result<Vec<ProtocolTranscript>> {
    check_routing(instance, routing)?;
    let n = instance.n;
    let branches = 1usize << (3 * n);
    if branches > ENUMERATION_BUDGET {
        return Err(ButterflyError::EnumerationOverBudget {
            branches,
            budget: ENUMERATION_BUDGET,
        });
    }

    // Eight forced teleports per copy, indexed by (bell, x).
    let mut copy_tables: Vec<Vec<Option<CopyBranch>>> = Vec::with_capacity(n);
    for copy in 1..=n {
        let mut table: Vec<Option<CopyBranch>> = vec![None; 8];
        for bell in BellOutcome::all() {
            for xbit in [false, true] {
                let idx = (bell.index() << 1) | usize::from(xbit);
                table[idx] = run_copy(
                    instance,
                    routing,
                    copy,
                    BranchMode::Forced(bell, XOutcome::new(xbit)),
                )?;
            }
        }
        copy_tables.push(table);
    }

    (0..branches)
        .into_par_iter()
        .map(|branch_idx| {
            // Per-terminal bits: (a1, a0, b) from most significant down.
            let mut per_copy: Vec<CopyBranch> = Vec::with_capacity(n);
            for copy in 1..=n {
                let sender_bits = (branch_idx >> (3 * (n - copy))) & 0b111;
                let bell = BellOutcome::from_index(sender_bits >> 1);
                let helper = routing.helper_of_copy(copy);
                let helper_bits = (branch_idx >> (3 * (n - helper))) & 0b111;
                let x = XOutcome::new(helper_bits & 1 != 0);
                let idx = (bell.index() << 1) | usize::from(x.bit);
                match &copy_tables[copy - 1][idx] {
                    Some(branch) => per_copy.push(branch.clone()),
                    None => {
                        return Err(ButterflyError::Qsim(QsimError::Internal(format!(
                            "branch {branch_idx} hits a zero-probability copy outcome"
                        ))))
                    }
                }
            }
            assemble_transcript(instance, routing, &per_copy, None)
        })
        .collect()
}

/// Verification result for one row of the measurement/correction truth
/// table: a (Bell, X) outcome pair, its correction frame, and the worst
/// overlap/fidelity seen across the sampled input states.
#[derive(Debug, Clone)]
pub struct TruthTableRow {
    pub bell: BellOutcome,
    pub x: XOutcome,
    pub frame: PauliFrame,
    /// Worst overlap of the post-Bell residual with the tabulated two-qubit
    /// form across trials.
    pub residual_overlap: f64,
    /// Worst fidelity of the corrected qubit against the input across
    /// trials.
    pub restored_fidelity: f64,
}

/// Check all eight truth-table rows against direct statevector simulation:
/// Bell-measure (input, first GHZ qubit), compare the residual with the
/// tabulated form, X-measure the next qubit, apply the row's correction,
/// and score the restored state against the input. `trials` random inputs.
pub fn truth_table_check(trials: usize, seed: u64) -> Result<Vec<TruthTableRow>> {
    let mut rng = RandomSource::from_seed(seed);
    let mut rows = Vec::with_capacity(8);
    for bell in BellOutcome::all() {
        for xbit in [false, true] {
            let x = XOutcome::new(xbit);
            let frame = outcome_to_frame(bell, x);
            let mut residual_overlap: f64 = 1.0;
            let mut restored_fidelity: f64 = 1.0;
            for _ in 0..trials {
                let alpha = Complex64::new(rng.next_unit() - 0.5, rng.next_unit() - 0.5);
                let beta = Complex64::new(rng.next_unit() - 0.5, rng.next_unit() - 0.5);
                let input = StateVector::prepare_arbitrary(alpha, beta)?;
                let joint = input.tensor(&StateVector::prepare_ghz(3)?)?;

                let (_, after_bell) = joint.project_bell(0, 1, bell)?;
                let after_bell = after_bell.ok_or_else(|| {
                    QsimError::Internal("bell projection of a GHZ resource vanished".into())
                })?;
                let residual = tabulated_residual(bell, &input)?;
                residual_overlap = residual_overlap.min(after_bell.overlap_sq(&residual)?);

                let (_, after_x) = after_bell.project_x(0, x)?;
                let after_x = after_x.ok_or_else(|| {
                    QsimError::Internal("x projection of a GHZ residual vanished".into())
                })?;
                let restored = after_x.apply_pauli(frame.to_pauli(), 0)?;
                restored_fidelity = restored_fidelity.min(restored.overlap_sq(&input)?);
            }
            rows.push(TruthTableRow {
                bell,
                x,
                frame,
                residual_overlap,
                restored_fidelity,
            });
        }
    }
    Ok(rows)
}

/// The tabulated two-qubit residual left on the unmeasured GHZ qubits:
/// (0,0) → α|00⟩+β|11⟩, (0,1) → α|00⟩−β|11⟩,
/// (1,0) → α|11⟩+β|00⟩, (1,1) → α|11⟩−β|00⟩.
fn tabulated_residual(bell: BellOutcome, input: &StateVector) -> Result<StateVector> {
    let alpha = input.amplitudes()[0];
    let beta = input.amplitudes()[1];
    let zero = Complex64::ZERO;
    let amps = match (bell.b1, bell.b0) {
        (false, false) => vec![alpha, zero, zero, beta],
        (false, true) => vec![alpha, zero, zero, -beta],
        (true, false) => vec![beta, zero, zero, alpha],
        (true, true) => vec![-beta, zero, zero, alpha],
    };
    Ok(StateVector::from_amplitudes(amps)?)
}

/// Run one forced branch on the composite n²+n-qubit register (n = 3 only,
/// by the register cap). Cross-checks the factored simulation.
pub fn run_branch_composite(
    instance: &ButterflyInstance,
    routing: &RoutingConfig,
    branch_idx: usize,
) -> Result<ProtocolTranscript> {
    check_routing(instance, routing)?;
    let n = instance.n;
    let mut state = instance.composite_register()?;

    // Logical ids: input t at t−1; copy c's qubit at terminal t at
    // n + (c−1)·n + (t−1).
    let input_id = |t: usize| t - 1;
    let ghz_id = |t: usize, c: usize| n + (c - 1) * n + (t - 1);
    let mut tracker = PositionTracker::new(n * n + n);
    let mut log = Vec::new();

    for copy in 1..=n {
        let receiver = routing.receiver_of_copy(copy);
        for t in routing.bystanders_of_copy(copy) {
            let q = tracker.get(ghz_id(t, copy));
            let r = tracker.get(ghz_id(receiver, copy));
            let receiver_after = if q < r { r - 1 } else { r };
            state = release_deterministic(&state, q, receiver_after)?;
            tracker.remove(&[ghz_id(t, copy)]);
            log.push(format!(
                "copy {copy} release terminal {t} outcome 0 corrected at terminal {receiver}"
            ));
        }
    }

    // All Bell measurements in terminal order, then all X measurements.
    let mut bells = Vec::with_capacity(n);
    let mut probability = 1.0;
    for t in 1..=n {
        let bits = (branch_idx >> (3 * (n - t))) & 0b111;
        let bell = BellOutcome::from_index(bits >> 1);
        let (p, next) = state.project_bell(
            tracker.get(input_id(t)),
            tracker.get(ghz_id(t, t)),
            bell,
        )?;
        state = next.ok_or_else(|| {
            ButterflyError::Qsim(QsimError::Internal("zero-probability bell branch".into()))
        })?;
        tracker.remove(&[input_id(t), ghz_id(t, t)]);
        probability *= p;
        bells.push(bell);
    }
    let mut xs = Vec::with_capacity(n);
    for t in 1..=n {
        let bits = (branch_idx >> (3 * (n - t))) & 0b111;
        let x = XOutcome::new(bits & 1 != 0);
        let copy = routing.x_copy_of(t);
        let (p, next) = state.project_x(tracker.get(ghz_id(t, copy)), x)?;
        state = next.ok_or_else(|| {
            ButterflyError::Qsim(QsimError::Internal("zero-probability x branch".into()))
        })?;
        tracker.remove(&[ghz_id(t, copy)]);
        probability *= p;
        xs.push(x);
    }

    let records: Vec<OutcomeRecord> = (1..=n)
        .map(|t| OutcomeRecord::new(t, bells[t - 1], xs[t - 1]))
        .collect();
    let messages = encode_all(&records)?;
    let mut corrections = Vec::with_capacity(n);
    let mut fidelities = Vec::with_capacity(n);
    for t in 1..=n {
        let own = &records[t - 1];
        let own_frame = outcome_to_frame(own.a, own.b);
        let residual = correction_for_terminal(t, own, &messages, routing)?;
        let held_copy = routing.held_copy_of(t);
        let q = tracker.get(ghz_id(t, held_copy));
        state = state
            .apply_pauli(own_frame.to_pauli(), q)?
            .apply_pauli(residual.to_pauli(), q)?;
        corrections.push(residual);
    }
    for t in 1..=n {
        let held_copy = routing.held_copy_of(t);
        let q = tracker.get(ghz_id(t, held_copy));
        fidelities.push(state.fidelity_with_pure(&[q], instance.input_state(held_copy))?);
    }

    Ok(ProtocolTranscript {
        n,
        chirality: routing.chirality(),
        inputs: instance.inputs.clone(),
        outcomes: records,
        messages,
        corrections,
        final_fidelities: fidelities,
        relabel_log: log,
        branch_probability: probability,
    })
}
