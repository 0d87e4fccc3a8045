//! Dense statevector simulation of dynamic circuits.
//!
//! Circuits may contain mid-circuit measurements, classically conditioned
//! gates and resets.  Computational-basis indices put qubit 0 in the most
//! significant bit, matching the Pauli-string convention (qubit 0 leftmost).
//! Rotation gates use the half-angle convention, e.g.
//! `RY(θ) = exp(-i θ Y / 2)`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::pauli::{Hamiltonian, Pauli, PauliString};

/// A primitive gate.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub enum Gate {
    H,
    S,
    Sdg,
    X,
    Y,
    Z,
    RX(f64),
    RY(f64),
    RZ(f64),
    CZ,
    CX,
}

impl Gate {
    pub fn n_qubits(&self) -> usize {
        match self {
            Gate::CZ | Gate::CX => 2,
            _ => 1,
        }
    }

    /// 2x2 matrix of a single-qubit gate (row-major).
    fn matrix_1q(&self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        match *self {
            Gate::H => [[l * r, l * r], [l * r, -l * r]],
            Gate::S => [[l, o], [o, i]],
            Gate::Sdg => [[l, o], [o, -i]],
            Gate::X => [[o, l], [l, o]],
            Gate::Y => [[o, -i], [i, o]],
            Gate::Z => [[l, o], [o, -l]],
            Gate::RX(t) => {
                let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
                [[l * c, -i * s], [-i * s, l * c]]
            }
            Gate::RY(t) => {
                let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
                [[l * c, -l * s], [l * s, l * c]]
            }
            Gate::RZ(t) => {
                let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
                [[Complex64::new(c, -s), o], [o, Complex64::new(c, s)]]
            }
            Gate::CZ | Gate::CX => panic!("two-qubit gate has no 2x2 matrix"),
        }
    }
}

/// One circuit instruction.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub enum Instruction {
    /// Apply `gate` to `qubits`, optionally only when classical bit
    /// `cond.0` equals `cond.1`.
    Gate { gate: Gate, qubits: Vec<usize>, cond: Option<(usize, bool)> },
    /// Measure `qubit` in the computational basis into classical bit `cbit`.
    Measure { qubit: usize, cbit: usize },
    /// Reset `qubit` to |0>.
    Reset { qubit: usize },
}

/// A circuit over `n_qubits` qubits and `n_cbits` classical bits.
#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct DynamicCircuit {
    pub n_qubits: usize,
    pub n_cbits: usize,
    pub instructions: Vec<Instruction>,
}

impl DynamicCircuit {
    pub fn new(n_qubits: usize, n_cbits: usize) -> Self {
        DynamicCircuit { n_qubits, n_cbits, instructions: Vec::new() }
    }

    pub fn gate(&mut self, gate: Gate, qubits: &[usize]) -> &mut Self {
        assert_eq!(gate.n_qubits(), qubits.len());
        self.instructions.push(Instruction::Gate { gate, qubits: qubits.to_vec(), cond: None });
        self
    }

    pub fn gate_if(&mut self, gate: Gate, qubits: &[usize], cbit: usize, value: bool) -> &mut Self {
        assert_eq!(gate.n_qubits(), qubits.len());
        self.instructions.push(Instruction::Gate {
            gate,
            qubits: qubits.to_vec(),
            cond: Some((cbit, value)),
        });
        self
    }

    pub fn measure(&mut self, qubit: usize, cbit: usize) -> &mut Self {
        self.instructions.push(Instruction::Measure { qubit, cbit });
        self
    }

    pub fn reset(&mut self, qubit: usize) -> &mut Self {
        self.instructions.push(Instruction::Reset { qubit });
        self
    }

    /// Append all instructions of `other` (same register sizes assumed).
    pub fn extend(&mut self, other: &DynamicCircuit) -> &mut Self {
        assert!(other.n_qubits <= self.n_qubits && other.n_cbits <= self.n_cbits);
        self.instructions.extend(other.instructions.iter().cloned());
        self
    }

    /// Number of two-qubit gates (the entangling cost of the circuit).
    pub fn two_qubit_gate_count(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| matches!(i, Instruction::Gate { gate, .. } if gate.n_qubits() == 2))
            .count()
    }

    pub fn measurement_count(&self) -> usize {
        self.instructions.iter().filter(|i| matches!(i, Instruction::Measure { .. })).count()
    }
}

/// How mid-circuit measurement outcomes are chosen during exact simulation.
pub enum MeasurePolicy<'a, R: Rng> {
    /// Sample from the Born rule.
    Sample(&'a mut R),
    /// Force the listed outcomes in measurement order (error on a
    /// zero-probability branch).
    Forced(&'a [bool]),
    /// Deterministically take the more probable branch (ties pick 0).  For
    /// byproduct-corrected circuits every branch yields the same output
    /// state up to phase, so this gives exact, RNG-free expectations.
    Greedy,
}

/// Noise model: two-qubit depolarizing noise after every two-qubit gate and
/// independent per-qubit readout flips.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Depolarizing probability per two-qubit gate: with probability `p` one
    /// of the 15 non-identity two-qubit Paulis is applied uniformly.
    pub depol2: f64,
    /// Per-qubit readout flip probabilities `(P(read 1 | prepared 0),
    /// P(read 0 | prepared 1))`.
    pub readout: Vec<(f64, f64)>,
}

impl NoiseModel {
    pub fn uniform(n_qubits: usize, depol2: f64, p01: f64, p10: f64) -> Self {
        NoiseModel { depol2, readout: vec![(p01, p10); n_qubits] }
    }
}

/// A dense n-qubit state.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    pub n_qubits: usize,
    pub amps: Vec<Complex64>,
}

impl QuantumState {
    /// |0...0>.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        QuantumState { n_qubits, amps }
    }

    pub fn from_amps(amps: Vec<Complex64>) -> Self {
        let n = amps.len().trailing_zeros() as usize;
        assert_eq!(1 << n, amps.len(), "amplitude vector length must be a power of two");
        QuantumState { n_qubits: n, amps }
    }

    /// Basis state |bits>, qubit 0 being the first element.
    pub fn basis(bits: &[bool]) -> Self {
        let n = bits.len();
        let mut idx = 0usize;
        for (q, &b) in bits.iter().enumerate() {
            if b {
                idx |= 1 << (n - 1 - q);
            }
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[idx] = Complex64::new(1.0, 0.0);
        QuantumState { n_qubits: n, amps }
    }

    fn bit(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    pub fn apply_1q(&mut self, u: [[Complex64; 2]; 2], q: usize) {
        let b = self.bit(q);
        for i in 0..self.amps.len() {
            if i & b == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | b]);
                self.amps[i] = u[0][0] * a0 + u[0][1] * a1;
                self.amps[i | b] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
    }

    pub fn apply_gate(&mut self, gate: Gate, qubits: &[usize]) {
        match gate {
            Gate::CZ => {
                let (ba, bb) = (self.bit(qubits[0]), self.bit(qubits[1]));
                for i in 0..self.amps.len() {
                    if i & ba != 0 && i & bb != 0 {
                        self.amps[i] = -self.amps[i];
                    }
                }
            }
            Gate::CX => {
                let (bc, bt) = (self.bit(qubits[0]), self.bit(qubits[1]));
                for i in 0..self.amps.len() {
                    if i & bc != 0 && i & bt == 0 {
                        self.amps.swap(i, i | bt);
                    }
                }
            }
            g => self.apply_1q(g.matrix_1q(), qubits[0]),
        }
    }

    /// Apply a Pauli string (in place, including the `i` phases of Y).
    pub fn apply_pauli(&mut self, s: &PauliString) {
        assert_eq!(s.len(), self.n_qubits);
        for (q, &p) in s.0.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::X => self.apply_gate(Gate::X, &[q]),
                Pauli::Y => self.apply_gate(Gate::Y, &[q]),
                Pauli::Z => self.apply_gate(Gate::Z, &[q]),
            }
        }
    }

    /// Probability that measuring `q` yields 1.
    pub fn prob_one(&self, q: usize) -> f64 {
        let b = self.bit(q);
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & b != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Collapse qubit `q` to `outcome` and renormalize.  Errors on a branch
    /// of probability below 1e-12.
    pub fn collapse(&mut self, q: usize, outcome: bool) -> Result<(), Error> {
        let b = self.bit(q);
        let p1 = self.prob_one(q);
        let p = if outcome { p1 } else { 1.0 - p1 };
        if p < 1e-12 {
            return Err(Error::Simulation(format!(
                "forced zero-probability branch on qubit {q}"
            )));
        }
        let norm = p.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if (i & b != 0) != outcome {
                *a = Complex64::new(0.0, 0.0);
            } else {
                *a /= norm;
            }
        }
        Ok(())
    }

    /// <self|P|self> for a Pauli string.
    pub fn pauli_expectation(&self, s: &PauliString) -> f64 {
        let mut tmp = self.clone();
        tmp.apply_pauli(s);
        self.amps
            .iter()
            .zip(&tmp.amps)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// <self|H|self> for a Pauli-sum Hamiltonian.
    pub fn energy(&self, h: &Hamiltonian) -> f64 {
        h.constant + h.terms.iter().map(|t| t.coeff * self.pauli_expectation(&t.string)).sum::<f64>()
    }

    /// |<self|other>|^2.
    pub fn fidelity(&self, other: &QuantumState) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    /// Sample a computational-basis bitstring (qubit 0 first).
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<bool> {
        let mut r: f64 = rng.random();
        let mut idx = self.amps.len() - 1;
        for (i, a) in self.amps.iter().enumerate() {
            r -= a.norm_sqr();
            if r <= 0.0 {
                idx = i;
                break;
            }
        }
        (0..self.n_qubits).map(|q| idx & self.bit(q) != 0).collect()
    }
}

/// Result of exact simulation: final state and classical bits.
pub struct SimOutcome {
    pub state: QuantumState,
    pub cbits: Vec<bool>,
}

/// Exact (noiseless) simulation with a choice of measurement policy.
pub fn simulate<R: Rng>(
    circuit: &DynamicCircuit,
    initial: Option<QuantumState>,
    policy: MeasurePolicy<R>,
) -> Result<SimOutcome, Error> {
    let mut state = initial.unwrap_or_else(|| QuantumState::zero(circuit.n_qubits));
    assert_eq!(state.n_qubits, circuit.n_qubits);
    let mut cbits = vec![false; circuit.n_cbits];
    let mut policy = policy;
    let mut forced_pos = 0usize;
    for inst in &circuit.instructions {
        match inst {
            Instruction::Gate { gate, qubits, cond } => {
                let fire = cond.map_or(true, |(cb, v)| cbits[cb] == v);
                if fire {
                    state.apply_gate(*gate, qubits);
                }
            }
            Instruction::Measure { qubit, cbit } => {
                let p1 = state.prob_one(*qubit);
                let outcome = match &mut policy {
                    MeasurePolicy::Sample(rng) => rng.random::<f64>() < p1,
                    MeasurePolicy::Forced(v) => {
                        let o = *v.get(forced_pos).ok_or_else(|| {
                            Error::Simulation("not enough forced outcomes".into())
                        })?;
                        forced_pos += 1;
                        o
                    }
                    MeasurePolicy::Greedy => p1 > 0.5,
                };
                state.collapse(*qubit, outcome)?;
                cbits[*cbit] = outcome;
            }
            Instruction::Reset { qubit } => {
                let p1 = state.prob_one(*qubit);
                let outcome = p1 > 0.5;
                state.collapse(*qubit, outcome)?;
                if outcome {
                    state.apply_gate(Gate::X, &[*qubit]);
                }
            }
        }
    }
    Ok(SimOutcome { state, cbits })
}

/// Exact expectation of `h` on the output of `circuit` from |0...0>.
///
/// Uses the greedy measurement policy, which is exact whenever conditional
/// corrections make the output state branch-independent (as for all compiled
/// measurement patterns in this crate).
pub fn expectation_exact(circuit: &DynamicCircuit, h: &Hamiltonian) -> Result<f64, Error> {
    let out = simulate::<rand::rngs::ThreadRng>(circuit, None, MeasurePolicy::Greedy)?;
    Ok(out.state.energy(h))
}

/// Shot counts keyed by classical-bit string (cbit 0 leftmost).
pub type Counts = BTreeMap<String, usize>;

pub fn cbits_to_key(cbits: &[bool]) -> String {
    cbits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Run `circuit` for `shots` shots, returning counts over the classical
/// register.  `noise`, when given, inserts two-qubit depolarizing errors and
/// flips recorded measurement outcomes with the per-qubit readout
/// probabilities.
pub fn run_counts<R: Rng>(
    circuit: &DynamicCircuit,
    shots: usize,
    initial: Option<&QuantumState>,
    noise: Option<&NoiseModel>,
    rng: &mut R,
) -> Result<Counts, Error> {
    let mut counts = Counts::new();
    for _ in 0..shots {
        let cbits = run_single_shot(circuit, initial, noise, rng)?;
        *counts.entry(cbits_to_key(&cbits)).or_insert(0) += 1;
    }
    Ok(counts)
}

fn run_single_shot<R: Rng>(
    circuit: &DynamicCircuit,
    initial: Option<&QuantumState>,
    noise: Option<&NoiseModel>,
    rng: &mut R,
) -> Result<Vec<bool>, Error> {
    let mut state = initial.cloned().unwrap_or_else(|| QuantumState::zero(circuit.n_qubits));
    let mut cbits = vec![false; circuit.n_cbits];
    for inst in &circuit.instructions {
        match inst {
            Instruction::Gate { gate, qubits, cond } => {
                let fire = cond.map_or(true, |(cb, v)| cbits[cb] == v);
                if !fire {
                    continue;
                }
                state.apply_gate(*gate, qubits);
                if let Some(nm) = noise {
                    if gate.n_qubits() == 2 && rng.random::<f64>() < nm.depol2 {
                        // Uniform non-identity two-qubit Pauli.
                        let k = rng.random_range(1..16usize);
                        for (pos, &q) in qubits.iter().enumerate() {
                            match (k >> (2 * pos)) & 3 {
                                1 => state.apply_gate(Gate::X, &[q]),
                                2 => state.apply_gate(Gate::Y, &[q]),
                                3 => state.apply_gate(Gate::Z, &[q]),
                                _ => {}
                            }
                        }
                    }
                }
            }
            Instruction::Measure { qubit, cbit } => {
                let p1 = state.prob_one(*qubit);
                let outcome = rng.random::<f64>() < p1;
                state.collapse(*qubit, outcome)?;
                let recorded = match noise.and_then(|nm| nm.readout.get(*qubit)) {
                    Some(&(p01, p10)) => {
                        let flip_p = if outcome { p10 } else { p01 };
                        outcome ^ (rng.random::<f64>() < flip_p)
                    }
                    None => outcome,
                };
                cbits[*cbit] = recorded;
            }
            Instruction::Reset { qubit } => {
                let p1 = state.prob_one(*qubit);
                let outcome = rng.random::<f64>() < p1;
                state.collapse(*qubit, outcome)?;
                if outcome {
                    state.apply_gate(Gate::X, &[*qubit]);
                }
            }
        }
    }
    Ok(cbits)
}

/// Marginalize counts onto a subset of classical bits (kept in the given
/// order).
pub fn marginalize(counts: &Counts, keep: &[usize]) -> Counts {
    let mut out = Counts::new();
    for (key, &n) in counts {
        let bits: Vec<char> = key.chars().collect();
        let sub: String = keep.iter().map(|&i| bits[i]).collect();
        *out.entry(sub).or_insert(0) += n;
    }
    out
}
