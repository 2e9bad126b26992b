//! Simulator and verification toolkit for entanglement-assisted network
//! coding over higher-order butterfly networks with GHZ states, plus a
//! graph-state recovery scheme for multinode failure.
//!
//! Modules:
//! - [`qsim`]: dense statevector engine (gates, Bell/X/Z measurements,
//!   reduced-state fidelity).
//! - [`coding`]: outcome records, Pauli frames, XOR parity channels, and the
//!   per-terminal correction algebra.
//! - [`butterfly`]: full protocol rounds, exhaustive branch enumeration, and
//!   classical channel cost.
//! - [`recovery`]: graph-state networks tessellated into GHZ subnetworks,
//!   failure detection, parity-check broadcast, node excision and
//!   substitution, and criticality classification.
//! - [`analysis`]: entanglement fidelity of channels, the fidelity-sum bound,
//!   and the entanglement-free baseline.
//! - [`cli`]: scenario files, deterministic reports, and run dispatch.

pub mod analysis;
pub mod butterfly;
pub mod cli;
pub mod coding;
pub mod qsim;
pub mod recovery;

pub use butterfly::{
    build_instance, classical_cost, enumerate_branches, run_round, ButterflyInstance, Chirality,
    ProtocolTranscript, RoutingConfig,
};
pub use coding::{
    compose_frames, correction_for_terminal, encode_all, encode_e, encode_ej, outcome_to_frame,
    OutcomeRecord, ParityMessage, PauliFrame,
};
pub use qsim::{BellOutcome, Pauli, RandomSource, StateVector, XOutcome};
