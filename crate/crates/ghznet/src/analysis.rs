//! Fidelity metrics: entanglement fidelity of single-qubit channels by exact
//! branch enumeration, the fidelity-sum bound, and the entanglement-free
//! measure-and-resend baseline demonstrating the resource separation.

use crate::butterfly::{self, ButterflyError, Chirality, RoutingConfig};
use crate::qsim::{BellOutcome, QsimError, StateVector, XOutcome};
use crate::coding::outcome_to_frame;
use thiserror::Error;

/// Coefficient of the fidelity-sum threshold: sums of per-channel
/// entanglement fidelities over d nodes are bounded by
/// `2.8512·d/(d+1)` without prior entanglement. Opaque constant, used as a
/// numeric threshold only.
pub const BOUND_COEFFICIENT: f64 = 2.8512;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("expected {expected} fidelities, got {got}")]
    CountMismatch { expected: usize, got: usize },
    #[error("fidelity {0} outside [0, 1]")]
    FidelityOutOfRange(f64),
    #[error("channel branch probabilities sum to {0}, expected 1")]
    BranchNormalization(f64),
    #[error("mixture weight {0} outside [0, 1]")]
    BadMixtureWeight(f64),
    #[error("terminal {terminal} out of range for {n} terminals")]
    BadTerminal { terminal: usize, n: usize },
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Butterfly(#[from] ButterflyError),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// One outcome branch of a channel acting on a register.
#[derive(Debug, Clone)]
pub struct ChannelBranch {
    pub probability: f64,
    pub state: StateVector,
    /// Register position of the channel's output qubit in `state`.
    pub output_qubit: usize,
}

/// A single-qubit state-in/state-out procedure, expanded into its exact
/// outcome branches so averages need no sampling.
///
/// Contract: the channel may consume `qubit` and append fresh qubits, but
/// must leave the relative order of the remaining original qubits intact.
pub trait QubitChannel {
    fn apply(&self, state: &StateVector, qubit: usize) -> Result<Vec<ChannelBranch>>;
}

/// The identity channel.
pub struct IdentityChannel;

impl QubitChannel for IdentityChannel {
    fn apply(&self, state: &StateVector, qubit: usize) -> Result<Vec<ChannelBranch>> {
        Ok(vec![ChannelBranch {
            probability: 1.0,
            state: state.clone(),
            output_qubit: qubit,
        }])
    }
}

/// Measure in the computational basis and forward the outcome as a fresh
/// basis state: the canonical entanglement-free strategy.
pub struct MeasureResendChannel;

impl QubitChannel for MeasureResendChannel {
    fn apply(&self, state: &StateVector, qubit: usize) -> Result<Vec<ChannelBranch>> {
        let mut branches = Vec::with_capacity(2);
        for bit in [false, true] {
            let (p, collapsed) = state.project_z(qubit, bit)?;
            let Some(collapsed) = collapsed else { continue };
            let resent = collapsed.tensor(&StateVector::basis_state(1, usize::from(bit))?)?;
            let output_qubit = resent.num_qubits() - 1;
            branches.push(ChannelBranch {
                probability: p,
                state: resent,
                output_qubit,
            });
        }
        Ok(branches)
    }
}

/// Discard the qubit and emit the maximally mixed state in its place.
pub struct ReplaceWithMixedChannel;

impl QubitChannel for ReplaceWithMixedChannel {
    fn apply(&self, state: &StateVector, qubit: usize) -> Result<Vec<ChannelBranch>> {
        let mut branches = Vec::with_capacity(4);
        for bit in [false, true] {
            let (p, collapsed) = state.project_z(qubit, bit)?;
            let Some(collapsed) = collapsed else { continue };
            for resend in [false, true] {
                let resent =
                    collapsed.tensor(&StateVector::basis_state(1, usize::from(resend))?)?;
                let output_qubit = resent.num_qubits() - 1;
                branches.push(ChannelBranch {
                    probability: 0.5 * p,
                    state: resent,
                    output_qubit,
                });
            }
        }
        Ok(branches)
    }
}

/// Probabilistic mixture of two channels.
pub struct MixtureChannel<A, B> {
    pub weight_a: f64,
    pub a: A,
    pub b: B,
}

impl<A: QubitChannel, B: QubitChannel> QubitChannel for MixtureChannel<A, B> {
    fn apply(&self, state: &StateVector, qubit: usize) -> Result<Vec<ChannelBranch>> {
        if !(0.0..=1.0).contains(&self.weight_a) {
            return Err(AnalysisError::BadMixtureWeight(self.weight_a));
        }
        let mut branches = Vec::new();
        for branch in self.a.apply(state, qubit)? {
            branches.push(ChannelBranch {
                probability: self.weight_a * branch.probability,
                ..branch
            });
        }
        for branch in self.b.apply(state, qubit)? {
            branches.push(ChannelBranch {
                probability: (1.0 - self.weight_a) * branch.probability,
                ..branch
            });
        }
        Ok(branches)
    }
}

/// One sender→receiver path of a protocol round, wrapped as a single-qubit
/// channel and averaged over all measurement branches exactly.
pub struct ProtocolChannel {
    routing: RoutingConfig,
    terminal: usize,
    resource_override: Option<StateVector>,
}

/// Channel delivering the routed sender's qubit to `terminal` on an
/// n-terminal network.
pub fn protocol_channel(n: usize, chirality: Chirality, terminal: usize) -> Result<ProtocolChannel> {
    let routing = RoutingConfig::new(n, chirality)?;
    if terminal == 0 || terminal > n {
        return Err(AnalysisError::BadTerminal { terminal, n });
    }
    Ok(ProtocolChannel {
        routing,
        terminal,
        resource_override: None,
    })
}

impl ProtocolChannel {
    /// Replace the copy's GHZ resource (fault injection).
    pub fn with_resource(mut self, resource: StateVector) -> Self {
        self.resource_override = Some(resource);
        self
    }
}

impl QubitChannel for ProtocolChannel {
    fn apply(&self, state: &StateVector, qubit: usize) -> Result<Vec<ChannelBranch>> {
        let n = self.routing.n();
        let copy = self.routing.held_copy_of(self.terminal);
        let sender = self.routing.sender_of_copy(copy);
        let helper = self.routing.helper_of_copy(copy);
        let receiver = self.routing.receiver_of_copy(copy);
        debug_assert_eq!(receiver, self.terminal);

        let resource = match &self.resource_override {
            Some(r) => r.clone(),
            None => StateVector::prepare_ghz(n)?,
        };
        let m = state.num_qubits();
        let base = state.tensor(&resource)?;
        // Logical ids: 0..m original qubits, m+t−1 for terminal t's resource.
        let rq = |t: usize| m + t - 1;

        let mut prepared = base;
        let mut tracker = butterfly::PositionTracker::new(m + n);
        for t in self.routing.bystanders_of_copy(copy) {
            let q = tracker.get(rq(t));
            let r = tracker.get(rq(receiver));
            let correct_at = if q < r { r - 1 } else { r };
            prepared = butterfly::release_deterministic(&prepared, q, correct_at)?;
            tracker.remove(&[rq(t)]);
        }

        let mut branches = Vec::with_capacity(8);
        for bell in BellOutcome::all() {
            for xbit in [false, true] {
                let mut t = tracker.clone();
                let (p_bell, after_bell) =
                    prepared.project_bell(t.get(qubit), t.get(rq(sender)), bell)?;
                let Some(after_bell) = after_bell else { continue };
                t.remove(&[qubit, rq(sender)]);
                let x = XOutcome::new(xbit);
                let (p_x, after_x) = after_bell.project_x(t.get(rq(helper)), x)?;
                let Some(after_x) = after_x else { continue };
                t.remove(&[rq(helper)]);
                let out = t.get(rq(receiver));
                let corrected = after_x.apply_pauli(outcome_to_frame(bell, x).to_pauli(), out)?;
                branches.push(ChannelBranch {
                    probability: p_bell * p_x,
                    state: corrected,
                    output_qubit: out,
                });
            }
        }
        Ok(branches)
    }
}

/// Entanglement fidelity: pass one half of a maximally entangled pair
/// through the channel (averaging its branches exactly) and return the
/// overlap of the joint output with the original pair.
pub fn entanglement_fidelity(channel: &dyn QubitChannel) -> Result<f64> {
    let pair = StateVector::prepare_ghz(2)?;
    let branches = channel.apply(&pair, 1)?;
    let mut total_probability = 0.0;
    let mut fidelity = 0.0;
    for branch in &branches {
        total_probability += branch.probability;
        fidelity += branch.probability
            * branch
                .state
                .fidelity_with_pure(&[0, branch.output_qubit], &pair)?;
    }
    if (total_probability - 1.0).abs() > 1e-9 {
        return Err(AnalysisError::BranchNormalization(total_probability));
    }
    Ok(fidelity)
}

/// Fidelity-sum check against the threshold `2.8512·d/(d+1)`.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub d: usize,
    pub fidelities: Vec<f64>,
    pub sum: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

pub fn threshold(d: usize) -> f64 {
    BOUND_COEFFICIENT * d as f64 / (d as f64 + 1.0)
}

pub fn check_bound(fidelities: &[f64], d: usize) -> Result<BoundReport> {
    if fidelities.len() != d {
        return Err(AnalysisError::CountMismatch {
            expected: d,
            got: fidelities.len(),
        });
    }
    for &f in fidelities {
        if !(-1e-12..=1.0 + 1e-12).contains(&f) {
            return Err(AnalysisError::FidelityOutOfRange(f));
        }
    }
    let sum: f64 = fidelities.iter().sum();
    let threshold = threshold(d);
    Ok(BoundReport {
        d,
        fidelities: fidelities.to_vec(),
        sum,
        threshold,
        satisfied: sum <= threshold + 1e-12,
    })
}

/// Run the routing with every GHZ resource replaced by measure-and-resend
/// on the quantum hop: per-terminal entanglement fidelities plus the bound
/// check, which the classical strategy must satisfy.
pub fn baseline_no_entanglement(n: usize) -> Result<BoundReport> {
    if n < 3 {
        return Err(AnalysisError::Butterfly(ButterflyError::TooFewTerminals(n)));
    }
    let fidelities: Vec<f64> = (1..=n)
        .map(|_| entanglement_fidelity(&MeasureResendChannel))
        .collect::<Result<_>>()?;
    check_bound(&fidelities, n)
}

/// Per-terminal entanglement fidelities of the entangled protocol and the
/// bound check, which the protocol must violate (the resource separation).
pub fn entangled_protocol_report(n: usize, chirality: Chirality) -> Result<BoundReport> {
    let fidelities: Vec<f64> = (1..=n)
        .map(|t| entanglement_fidelity(&protocol_channel(n, chirality, t)?))
        .collect::<Result<_>>()?;
    check_bound(&fidelities, n)
}
