//! Dense statevector engine: state preparation, Pauli/CPHASE gates, and
//! projective measurements in the Bell, X and Z bases.
//!
//! Qubit 0 is the most significant position in basis-label ordering, so the
//! basis index of |q0 q1 .. q{n-1}⟩ is the integer with q0 as its top bit.
//! Measured qubits are removed from the register; the collapsed state is
//! renormalized.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Hard cap on register width for dense simulation.
pub const MAX_QUBITS: usize = 24;

/// Tolerance for exactness claims (norms, single-shot projections).
pub const TOL_EXACT: f64 = 1e-12;

/// Tolerance for accumulated multi-step protocol checks.
pub const TOL_PROTOCOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum QsimError {
    #[error("degenerate state: both amplitudes are zero")]
    DegenerateState,
    #[error("invalid register size {0}")]
    InvalidSize(usize),
    #[error("register of {0} qubits exceeds the {MAX_QUBITS}-qubit cap")]
    RegisterCapExceeded(usize),
    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    IndexOutOfRange { index: usize, num_qubits: usize },
    #[error("invalid qubit pair ({0}, {1})")]
    InvalidPair(usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, QsimError>;

/// Single-qubit Pauli corrections used by the protocol (XZ applies Z first).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Z,
    XZ,
}

impl std::fmt::Display for Pauli {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Pauli::I => "I",
            Pauli::X => "X",
            Pauli::Z => "Z",
            Pauli::XZ => "XZ",
        };
        write!(f, "{s}")
    }
}

/// Outcome of a Bell-basis measurement, as the ordered bit pair (b1, b0).
///
/// b1 distinguishes the equal/flipped amplitude pairs, b0 the relative sign:
/// (0,0) projects onto (|00⟩+|11⟩)/√2, (0,1) onto (|00⟩−|11⟩)/√2,
/// (1,0) onto (|01⟩+|10⟩)/√2, (1,1) onto (|01⟩−|10⟩)/√2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BellOutcome {
    pub b1: bool,
    pub b0: bool,
}

impl BellOutcome {
    pub fn new(b1: bool, b0: bool) -> Self {
        Self { b1, b0 }
    }

    pub fn from_index(idx: usize) -> Self {
        Self {
            b1: idx & 0b10 != 0,
            b0: idx & 0b01 != 0,
        }
    }

    pub fn index(self) -> usize {
        (usize::from(self.b1) << 1) | usize::from(self.b0)
    }

    /// All four outcomes in index order.
    pub fn all() -> [BellOutcome; 4] {
        [0, 1, 2, 3].map(Self::from_index)
    }
}

/// Outcome of an X-basis measurement: 0 ↔ |+⟩ projection, 1 ↔ |−⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct XOutcome {
    pub bit: bool,
}

impl XOutcome {
    pub fn new(bit: bool) -> Self {
        Self { bit }
    }
}

/// Deterministic seeded randomness for measurement sampling.
///
/// Identical seeds yield identical outcome sequences. Independent streams
/// for parallel work are derived with [`RandomSource::derive`], which depends
/// only on the base seed and the label, never on consumption state.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform sample in [0, 1).
    pub fn next_unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn next_bool(&mut self, p: f64) -> bool {
        self.next_unit() < p
    }

    /// Derive an independent stream for parallel branches.
    pub fn derive(&self, label: u64) -> RandomSource {
        RandomSource::from_seed(splitmix64(
            self.seed ^ label.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        ))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Normalized complex amplitude array over an ordered qubit register.
#[derive(Debug, Clone)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Single-qubit state with amplitudes (alpha, beta), renormalized.
    pub fn prepare_arbitrary(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let norm_sq = alpha.norm_sqr() + beta.norm_sqr();
        if norm_sq < TOL_EXACT * TOL_EXACT {
            return Err(QsimError::DegenerateState);
        }
        let inv = 1.0 / norm_sq.sqrt();
        Ok(Self {
            num_qubits: 1,
            amps: vec![alpha * inv, beta * inv],
        })
    }

    /// n-qubit GHZ state (|0…0⟩ + |1…1⟩)/√2, n ≥ 2.
    pub fn prepare_ghz(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(QsimError::InvalidSize(n));
        }
        if n > MAX_QUBITS {
            return Err(QsimError::RegisterCapExceeded(n));
        }
        let dim = 1usize << n;
        let mut amps = vec![Complex64::ZERO; dim];
        let w = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amps[0] = w;
        amps[dim - 1] = w;
        Ok(Self {
            num_qubits: n,
            amps,
        })
    }

    /// |+⟩ = (|0⟩+|1⟩)/√2.
    pub fn plus_state() -> Self {
        let w = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self {
            num_qubits: 1,
            amps: vec![w, w],
        }
    }

    /// Computational basis state |index⟩ on n qubits.
    pub fn basis_state(n: usize, index: usize) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(QsimError::RegisterCapExceeded(n));
        }
        let dim = 1usize << n;
        if index >= dim {
            return Err(QsimError::IndexOutOfRange {
                index,
                num_qubits: n,
            });
        }
        let mut amps = vec![Complex64::ZERO; dim];
        amps[index] = Complex64::ONE;
        Ok(Self {
            num_qubits: n,
            amps,
        })
    }

    /// Build from raw amplitudes (length must be a power of two); renormalizes.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(QsimError::InvalidSize(amps.len()));
        }
        let n = amps.len().trailing_zeros() as usize;
        if n > MAX_QUBITS {
            return Err(QsimError::RegisterCapExceeded(n));
        }
        let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if norm_sq < TOL_EXACT * TOL_EXACT {
            return Err(QsimError::DegenerateState);
        }
        let inv = 1.0 / norm_sq.sqrt();
        Ok(Self {
            num_qubits: n,
            amps: amps.into_iter().map(|a| a * inv).collect(),
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Bit of `qubit` in basis index `i` (qubit 0 = most significant).
    #[inline]
    fn bit(&self, i: usize, qubit: usize) -> usize {
        (i >> (self.num_qubits - 1 - qubit)) & 1
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            return Err(QsimError::IndexOutOfRange {
                index: q,
                num_qubits: self.num_qubits,
            });
        }
        Ok(())
    }

    /// Tensor product; `self` occupies the more significant positions.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let n = self.num_qubits + other.num_qubits;
        if n > MAX_QUBITS {
            return Err(QsimError::RegisterCapExceeded(n));
        }
        let mut amps = Vec::with_capacity(1usize << n);
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(StateVector {
            num_qubits: n,
            amps,
        })
    }

    pub fn apply_pauli(mut self, which: Pauli, qubit: usize) -> Result<StateVector> {
        self.check_qubit(qubit)?;
        let shift = self.num_qubits - 1 - qubit;
        let mask = 1usize << shift;
        match which {
            Pauli::I => {}
            Pauli::X => {
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        self.amps.swap(i, i | mask);
                    }
                }
            }
            Pauli::Z => {
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & mask != 0 {
                        *a = -*a;
                    }
                }
            }
            Pauli::XZ => {
                // X·Z: |0⟩ → |1⟩, |1⟩ → −|0⟩.
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        let one = i | mask;
                        let a0 = self.amps[i];
                        let a1 = self.amps[one];
                        self.amps[i] = -a1;
                        self.amps[one] = a0;
                    }
                }
            }
        }
        Ok(self)
    }

    /// CPHASE (CZ): negate amplitudes where both qubits are 1.
    pub fn apply_cphase(mut self, i: usize, j: usize) -> Result<StateVector> {
        self.check_qubit(i)?;
        self.check_qubit(j)?;
        if i == j {
            return Err(QsimError::InvalidPair(i, j));
        }
        let mask = (1usize << (self.num_qubits - 1 - i)) | (1usize << (self.num_qubits - 1 - j));
        for (idx, a) in self.amps.iter_mut().enumerate() {
            if idx & mask == mask {
                *a = -*a;
            }
        }
        Ok(self)
    }

    /// Compact basis index over the qubits not in `removed` (sorted ascending).
    fn compact_index(&self, i: usize, removed: &[usize]) -> usize {
        let mut out = 0usize;
        for q in 0..self.num_qubits {
            if removed.contains(&q) {
                continue;
            }
            out = (out << 1) | self.bit(i, q);
        }
        out
    }

    /// Project qubits (q1, q2) onto the Bell vector for `outcome`, removing
    /// both from the register. Returns the projection probability and the
    /// renormalized residual (None when the probability vanishes).
    pub fn project_bell(
        &self,
        q1: usize,
        q2: usize,
        outcome: BellOutcome,
    ) -> Result<(f64, Option<StateVector>)> {
        self.check_qubit(q1)?;
        self.check_qubit(q2)?;
        if q1 == q2 {
            return Err(QsimError::InvalidPair(q1, q2));
        }
        if self.num_qubits < 2 {
            return Err(QsimError::InvalidSize(self.num_qubits));
        }
        let mut removed = [q1, q2];
        removed.sort_unstable();
        let dim = 1usize << (self.num_qubits - 2);
        let mut residual = vec![Complex64::ZERO; dim];
        let w = std::f64::consts::FRAC_1_SQRT_2;
        for (i, a) in self.amps.iter().enumerate() {
            let v1 = self.bit(i, q1);
            let v2 = self.bit(i, q2);
            if (v1 ^ v2) != usize::from(outcome.b1) {
                continue;
            }
            // ⟨bell|v1 v2⟩ = (−1)^{b0·v1} / √2
            let sign = if outcome.b0 && v1 == 1 { -w } else { w };
            residual[self.compact_index(i, &removed)] += sign * a;
        }
        finish_projection(residual, self.num_qubits - 2)
    }

    /// Project `qubit` onto |+⟩ (outcome 0) or |−⟩ (outcome 1) and remove it.
    pub fn project_x(&self, qubit: usize, outcome: XOutcome) -> Result<(f64, Option<StateVector>)> {
        self.check_qubit(qubit)?;
        let removed = [qubit];
        let dim = 1usize << (self.num_qubits - 1);
        let mut residual = vec![Complex64::ZERO; dim];
        let w = std::f64::consts::FRAC_1_SQRT_2;
        for (i, a) in self.amps.iter().enumerate() {
            let v = self.bit(i, qubit);
            let sign = if outcome.bit && v == 1 { -w } else { w };
            residual[self.compact_index(i, &removed)] += sign * a;
        }
        finish_projection(residual, self.num_qubits - 1)
    }

    /// Project `qubit` onto |outcome⟩ in the computational basis and remove it.
    pub fn project_z(&self, qubit: usize, outcome: bool) -> Result<(f64, Option<StateVector>)> {
        self.check_qubit(qubit)?;
        let removed = [qubit];
        let dim = 1usize << (self.num_qubits - 1);
        let mut residual = vec![Complex64::ZERO; dim];
        for (i, a) in self.amps.iter().enumerate() {
            if self.bit(i, qubit) == usize::from(outcome) {
                residual[self.compact_index(i, &removed)] += a;
            }
        }
        finish_projection(residual, self.num_qubits - 1)
    }

    /// Probabilities of the four Bell outcomes on (q1, q2), in index order.
    pub fn bell_probabilities(&self, q1: usize, q2: usize) -> Result<[f64; 4]> {
        let mut probs = [0.0; 4];
        for outcome in BellOutcome::all() {
            probs[outcome.index()] = self.project_bell(q1, q2, outcome)?.0;
        }
        Ok(probs)
    }

    /// Bell-basis measurement on (q1, q2), sampled by the Born rule.
    /// The collapsed state has both qubits removed.
    pub fn measure_bell(
        self,
        q1: usize,
        q2: usize,
        rng: &mut RandomSource,
    ) -> Result<(BellOutcome, StateVector)> {
        let probs = self.bell_probabilities(q1, q2)?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(QsimError::Internal(format!(
                "bell projection probabilities sum to {total}, expected 1"
            )));
        }
        let pick = sample_index(&probs, rng)?;
        let outcome = BellOutcome::from_index(pick);
        let (_, state) = self.project_bell(q1, q2, outcome)?;
        let state = state.ok_or_else(|| {
            QsimError::Internal("sampled a zero-probability bell outcome".into())
        })?;
        Ok((outcome, state))
    }

    /// X-basis measurement of `qubit`, sampled by the Born rule.
    pub fn measure_x(self, qubit: usize, rng: &mut RandomSource) -> Result<(XOutcome, StateVector)> {
        let (p_plus, plus) = self.project_x(qubit, XOutcome::new(false))?;
        if rng.next_unit() < p_plus {
            let state = plus
                .ok_or_else(|| QsimError::Internal("empty projection at nonzero prob".into()))?;
            Ok((XOutcome::new(false), state))
        } else {
            let (_, minus) = self.project_x(qubit, XOutcome::new(true))?;
            let state = minus.ok_or_else(|| {
                QsimError::Internal("sampled a zero-probability X outcome".into())
            })?;
            Ok((XOutcome::new(true), state))
        }
    }

    /// Computational-basis measurement of `qubit`, sampled by the Born rule.
    pub fn measure_z(self, qubit: usize, rng: &mut RandomSource) -> Result<(bool, StateVector)> {
        let (p_zero, zero) = self.project_z(qubit, false)?;
        if rng.next_unit() < p_zero {
            let state = zero
                .ok_or_else(|| QsimError::Internal("empty projection at nonzero prob".into()))?;
            Ok((false, state))
        } else {
            let (_, one) = self.project_z(qubit, true)?;
            let state = one.ok_or_else(|| {
                QsimError::Internal("sampled a zero-probability Z outcome".into())
            })?;
            Ok((true, state))
        }
    }

    /// ⟨target| ρ_kept |target⟩: overlap of the reduced state over
    /// `kept_qubits` (in the given order) with a pure target state.
    pub fn fidelity_with_pure(&self, kept_qubits: &[usize], target: &StateVector) -> Result<f64> {
        if kept_qubits.len() != target.num_qubits {
            return Err(QsimError::DimensionMismatch(format!(
                "kept {} qubits but target has {}",
                kept_qubits.len(),
                target.num_qubits
            )));
        }
        for &q in kept_qubits {
            self.check_qubit(q)?;
        }
        let mut sorted = kept_qubits.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != kept_qubits.len() {
            return Err(QsimError::DimensionMismatch(
                "kept qubit list contains duplicates".into(),
            ));
        }
        let env_qubits = self.num_qubits - kept_qubits.len();
        let mut acc = vec![Complex64::ZERO; 1usize << env_qubits];
        for (i, a) in self.amps.iter().enumerate() {
            let mut k = 0usize;
            for &q in kept_qubits {
                k = (k << 1) | self.bit(i, q);
            }
            let e = self.compact_index(i, &sorted);
            acc[e] += target.amps[k].conj() * a;
        }
        Ok(acc.iter().map(|c| c.norm_sqr()).sum())
    }

    /// ⟨self|other⟩ for equal-width registers.
    pub fn inner_product(&self, other: &StateVector) -> Result<Complex64> {
        if self.num_qubits != other.num_qubits {
            return Err(QsimError::DimensionMismatch(format!(
                "{} vs {} qubits",
                self.num_qubits, other.num_qubits
            )));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Phase-insensitive overlap |⟨self|other⟩|².
    pub fn overlap_sq(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner_product(other)?.norm_sqr())
    }
}

fn finish_projection(
    mut residual: Vec<Complex64>,
    num_qubits: usize,
) -> Result<(f64, Option<StateVector>)> {
    let prob: f64 = residual.iter().map(|a| a.norm_sqr()).sum();
    if prob < TOL_EXACT * TOL_EXACT {
        return Ok((0.0, None));
    }
    let inv = 1.0 / prob.sqrt();
    for a in &mut residual {
        *a *= inv;
    }
    Ok((
        prob,
        Some(StateVector {
            num_qubits,
            amps: residual,
        }),
    ))
}

fn sample_index(probs: &[f64], rng: &mut RandomSource) -> Result<usize> {
    let total: f64 = probs.iter().sum();
    if total < TOL_EXACT {
        return Err(QsimError::Internal(
            "all projection probabilities are zero".into(),
        ));
    }
    let r = rng.next_unit() * total;
    let mut cum = 0.0;
    let mut last_nonzero = None;
    for (idx, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_nonzero = Some(idx);
        }
        cum += p;
        if r < cum && p > 0.0 {
            return Ok(idx);
        }
    }
    last_nonzero.ok_or_else(|| QsimError::Internal("no selectable outcome".into()))
}
