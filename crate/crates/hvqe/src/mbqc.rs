//! Measurement-based pattern algebra.
//!
//! A pattern is a graph of qubits entangled by CZ edges, a measurement for
//! every non-output qubit, and classical corrections: byproduct Pauli sets
//! on the outputs and adaptivity sets that flip the sign of rotated
//! measurement angles.  Byproducts and adaptivity sets are never written by
//! hand — [`Pattern::derive_corrections`] reconstructs them by conjugating
//! resource-state stabilizers through the entangling layer and solving for
//! the group element that relates the two branches of each measurement.
//!
//! Semantics of [`simulate_pattern`] (in order):
//!
//! 1. inputs carry the supplied state, every other qubit starts in |+>;
//! 2. `pre_lc` words on input qubits, then CZ on every edge, then `lc`
//!    words (the local-Clifford part of the resource, e.g. the H of a
//!    rotation gadget's ancilla);
//! 3. measurements in `order`: `X`/`Y`/`Z`, or `R(θ)` in the equatorial
//!    basis `(|0> ± e^{iθ}|1>)/√2` with `θ -> θ·(-1)^{Σ adapt outcomes}`;
//! 4. byproducts `X^{Σ x-set} Z^{Σ z-set}` on each output, then `post_lc`
//!    words on the outputs.
//!
//! With the byproducts in place every measurement branch yields the same
//! output state up to global phase.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::pauli::Pauli;
use crate::statevector::{DynamicCircuit, Gate, MeasurePolicy, QuantumState};
use crate::tableau::{self, Basis, Clifford1, PauliRow, Tableau};

/// Measurement attached to a non-output pattern qubit.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub enum Measurement {
    /// Pauli-basis measurement.
    Pauli(Basis),
    /// Equatorial measurement in the basis `(|0> ± e^{iθ}|1>)/√2`, with the
    /// sign of `θ` flipped by the parity of the outcomes in `adapt`.
    Rotated { theta: f64, adapt: BTreeSet<usize> },
}

/// One pattern qubit.
#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct PatternQubit {
    pub input: bool,
    pub output: bool,
    /// Local Clifford word applied to an input before entangling.
    pub pre_lc: Vec<Clifford1>,
    /// Local Clifford word applied after entangling (part of the resource).
    pub lc: Vec<Clifford1>,
    /// Local Clifford word applied to an output after byproducts.
    pub post_lc: Vec<Clifford1>,
    /// Present exactly when the qubit is not an output.
    pub measurement: Option<Measurement>,
}

/// Byproduct exponent sets of one output qubit; entries are measured-qubit
/// indices whose outcomes contribute to the exponent.
#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct Byproduct {
    pub x: BTreeSet<usize>,
    pub z: BTreeSet<usize>,
}

/// A measurement pattern.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Pattern {
    pub qubits: Vec<PatternQubit>,
    pub edges: Vec<(usize, usize)>,
    /// Measurement order over the measured qubits.
    pub order: Vec<usize>,
    /// Byproducts keyed by output qubit.
    pub byproducts: BTreeMap<usize, Byproduct>,
}

impl Pattern {
    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    /// Input qubits in ascending index order.
    pub fn inputs(&self) -> Vec<usize> {
        (0..self.n_qubits()).filter(|&q| self.qubits[q].input).collect()
    }

    /// Output qubits in ascending index order.
    pub fn outputs(&self) -> Vec<usize> {
        (0..self.n_qubits()).filter(|&q| self.qubits[q].output).collect()
    }

    pub fn measured(&self) -> Vec<usize> {
        (0..self.n_qubits()).filter(|&q| self.qubits[q].measurement.is_some()).collect()
    }

    /// Structural validation; returns a description of the first violation.
    pub fn validate(&self) -> Result<(), Error> {
        let n = self.n_qubits();
        for &(a, b) in &self.edges {
            if a >= n || b >= n || a == b {
                return Err(Error::Pattern(format!("bad edge ({a},{b})")));
            }
        }
        for (q, pq) in self.qubits.iter().enumerate() {
            if pq.output != pq.measurement.is_none() {
                return Err(Error::Pattern(format!(
                    "qubit {q}: outputs and only outputs are unmeasured"
                )));
            }
            if !pq.input && !pq.pre_lc.is_empty() {
                return Err(Error::Pattern(format!("qubit {q}: pre_lc on a non-input")));
            }
            if !pq.output && !pq.post_lc.is_empty() {
                return Err(Error::Pattern(format!("qubit {q}: post_lc on a non-output")));
            }
        }
        let measured = self.measured();
        let mut seen = BTreeSet::new();
        for &q in &self.order {
            if self.qubits[q].measurement.is_none() || !seen.insert(q) {
                return Err(Error::Pattern(format!("bad measurement order entry {q}")));
            }
            if let Some(Measurement::Rotated { adapt, .. }) = &self.qubits[q].measurement {
                for &d in adapt {
                    if !seen.contains(&d) {
                        return Err(Error::Pattern(format!(
                            "qubit {q} adapts on {d} which is not measured before it"
                        )));
                    }
                }
            }
        }
        if seen.len() != measured.len() {
            return Err(Error::Pattern("measurement order does not cover all measured qubits".into()));
        }
        for (&o, bp) in &self.byproducts {
            if !self.qubits.get(o).map_or(false, |q| q.output) {
                return Err(Error::Pattern(format!("byproduct on non-output {o}")));
            }
            for &s in bp.x.iter().chain(&bp.z) {
                if self.qubits[s].measurement.is_none() {
                    return Err(Error::Pattern(format!("byproduct sourced from unmeasured {s}")));
                }
            }
        }
        Ok(())
    }

    /// Resource-state stabilizer generators available for correction
    /// derivation: the conjugation of X_m through the entangling layer and
    /// local Cliffords, for every non-input qubit m.  Keys are the qubit
    /// indices m.
    fn available_generators(&self) -> Result<BTreeMap<usize, PauliRow>, Error> {
        let n = self.n_qubits();
        let mut tab = Tableau::zero(n); // destabilizer rows are X_m
        for &(a, b) in &self.edges {
            tab.cz(a, b);
        }
        for q in 0..n {
            tab.apply_lc(q, &self.qubits[q].lc);
        }
        let mut out = BTreeMap::new();
        for m in 0..n {
            if !self.qubits[m].input {
                out.insert(m, tab.rows[m].clone());
            }
        }
        Ok(out)
    }

    /// Recompute the byproduct and adaptivity sets from the pattern
    /// structure, and normalize the measurement order (non-adaptive
    /// measurements keep their relative order and precede the rotated
    /// ones).
    ///
    /// For each measured qubit k we look for a resource stabilizer g that
    /// (i) flips the outcome of k (anticommutes with its measurement
    /// operator; `Z`-component for rotated measurements), (ii) leaves every
    /// other Pauli measurement untouched, and (iii) acts as identity or `X`
    /// on other rotated qubits.  Applying g maps the `s_k = 1` branch onto
    /// the `s_k = 0` branch, so g's `X`-components on rotated qubits are
    /// exactly the angle flips adapted on k and its components on the
    /// outputs are the byproducts sourced from k.  A pattern for which no
    /// such g exists is rejected as non-deterministic.
    pub fn derive_corrections(&mut self) -> Result<(), Error> {
        let generators = self.available_generators()?;
        let gen_ids: Vec<usize> = generators.keys().copied().collect();
        let measured = self.measured();
        let outputs = self.outputs();

        // Commutation of generator component at qubit j with a Pauli basis.
        let anticommutes = |row: &PauliRow, j: usize, b: Basis| -> bool {
            match b {
                Basis::X => row.z[j],
                Basis::Y => row.x[j] != row.z[j],
                Basis::Z => row.x[j],
            }
        };

        let mut byproducts: BTreeMap<usize, Byproduct> =
            outputs.iter().map(|&o| (o, Byproduct::default())).collect();
        let mut adapt: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();

        for &k in &measured {
            // Build the GF(2) system: columns are generators, one row per
            // constraint, last entry the target value.
            let mut system: Vec<(Vec<bool>, bool)> = Vec::new();
            for &j in &measured {
                match &self.qubits[j].measurement {
                    Some(Measurement::Pauli(b)) => {
                        let coeffs =
                            gen_ids.iter().map(|m| anticommutes(&generators[m], j, *b)).collect();
                        system.push((coeffs, j == k));
                    }
                    Some(Measurement::Rotated { .. }) => {
                        // Z-component flips the outcome: required for k,
                        // forbidden elsewhere.  X-components (angle flips)
                        // stay free and are read off the solution.
                        let coeffs = gen_ids.iter().map(|m| generators[&m].z[j]).collect();
                        system.push((coeffs, j == k));
                        if j == k {
                            let coeffs = gen_ids.iter().map(|m| generators[&m].x[j]).collect();
                            system.push((coeffs, false));
                        }
                    }
                    None => unreachable!(),
                }
            }
            let solution = solve_gf2(&mut system, gen_ids.len()).ok_or_else(|| {
                Error::Pattern(format!(
                    "no correction operator for the outcome of qubit {k}; pattern is not deterministic"
                ))
            })?;

            // Accumulate the product of the selected generators.
            let mut g = PauliRow::identity(self.n_qubits());
            for (pos, &m) in gen_ids.iter().enumerate() {
                if solution[pos] {
                    g.mul(&generators[&m]);
                }
            }
            for &o in &outputs {
                if g.x[o] {
                    byproducts.get_mut(&o).unwrap().x.insert(k);
                }
                if g.z[o] {
                    byproducts.get_mut(&o).unwrap().z.insert(k);
                }
            }
            for &j in &measured {
                if j != k && g.x[j] {
                    if let Some(Measurement::Rotated { .. }) = &self.qubits[j].measurement {
                        adapt.entry(j).or_default().insert(k);
                    }
                }
            }
        }

        for (&j, set) in &adapt {
            if let Some(Measurement::Rotated { adapt: a, .. }) =
                &mut self.qubits[j].measurement
            {
                *a = set.clone();
            }
        }
        // Clear stale adaptivity on rotated qubits that need none.
        for &j in &measured {
            if !adapt.contains_key(&j) {
                if let Some(Measurement::Rotated { adapt: a, .. }) =
                    &mut self.qubits[j].measurement
                {
                    a.clear();
                }
            }
        }
        self.byproducts = byproducts;

        // Non-adaptive measurements first, rotated ones after, both keeping
        // their relative order.
        let mut order: Vec<usize> = self
            .order
            .iter()
            .copied()
            .filter(|&q| matches!(self.qubits[q].measurement, Some(Measurement::Pauli(_))))
            .collect();
        order.extend(
            self.order
                .iter()
                .copied()
                .filter(|&q| matches!(self.qubits[q].measurement, Some(Measurement::Rotated { .. }))),
        );
        self.order = order;
        self.validate()
    }
}

/// Solve a GF(2) linear system given as `(coefficients, rhs)` rows.
/// Returns one solution or `None` if inconsistent.
fn solve_gf2(system: &mut [(Vec<bool>, bool)], n_vars: usize) -> Option<Vec<bool>> {
    let mut pivot_of_var = vec![usize::MAX; n_vars];
    let mut row = 0usize;
    for var in 0..n_vars {
        let Some(p) = (row..system.len()).find(|&r| system[r].0[var]) else { continue };
        system.swap(row, p);
        for r in 0..system.len() {
            if r != row && system[r].0[var] {
                let (head, tail) = if r < row {
                    let (a, b) = system.split_at_mut(row);
                    (&mut a[r], &b[0])
                } else {
                    let (a, b) = system.split_at_mut(r);
                    (&mut b[0], &a[row])
                };
                for v in 0..n_vars {
                    head.0[v] ^= tail.0[v];
                }
                head.1 ^= tail.1;
            }
        }
        pivot_of_var[var] = row;
        row += 1;
    }
    // Inconsistency: zero row with rhs 1.
    for (coeffs, rhs) in system[row..].iter() {
        if *rhs && coeffs.iter().all(|&c| !c) {
            return None;
        }
    }
    let mut sol = vec![false; n_vars];
    for var in 0..n_vars {
        if pivot_of_var[var] != usize::MAX {
            sol[var] = system[pivot_of_var[var]].1;
        }
    }
    Some(sol)
}

fn lc_gate(c: Clifford1) -> Gate {
    match c {
        Clifford1::H => Gate::H,
        Clifford1::S => Gate::S,
    }
}

/// Invert a local-Clifford word over {H, S}: reverse it and expand each
/// S into S³.
fn invert_lc(word: &[Clifford1]) -> Vec<Clifford1> {
    let mut out = Vec::new();
    for &g in word.iter().rev() {
        match g {
            Clifford1::H => out.push(Clifford1::H),
            Clifford1::S => out.extend([Clifford1::S; 3]),
        }
    }
    out
}

/// The identity pattern on `n` wires: every qubit is both input and output.
pub fn wire_pattern(n: usize) -> Pattern {
    Pattern {
        qubits: (0..n)
            .map(|_| PatternQubit { input: true, output: true, ..Default::default() })
            .collect(),
        edges: Vec::new(),
        order: Vec::new(),
        byproducts: BTreeMap::new(),
    }
}

/// Rotation-gadget pattern for `exp(-i θ/2 P^{⊗n})`: a star graph of CZ
/// edges from every body qubit to one ancilla carrying an H, with the
/// ancilla measured in the equatorial basis at angle `-θ` and a Z byproduct
/// on every body qubit.  Non-Z axes conjugate the body qubits with a
/// local-Clifford sandwich (H for X, S·H / inverse for Y).
pub fn gadget_pattern(n: usize, axis: Pauli, theta: f64) -> Result<Pattern, Error> {
    if n == 0 {
        return Err(Error::Pattern("gadget needs at least one body qubit".into()));
    }
    let (pre, post): (Vec<Clifford1>, Vec<Clifford1>) = match axis {
        Pauli::Z => (vec![], vec![]),
        // V Z V† = X for V = H.
        Pauli::X => (vec![Clifford1::H], vec![Clifford1::H]),
        // V Z V† = Y for V = S·H (apply H then S).
        Pauli::Y => (invert_lc(&[Clifford1::H, Clifford1::S]), vec![Clifford1::H, Clifford1::S]),
        Pauli::I => return Err(Error::Pattern("identity axis has no gadget".into())),
    };
    let anc = n;
    let mut qubits: Vec<PatternQubit> = (0..n)
        .map(|_| PatternQubit {
            input: true,
            output: true,
            pre_lc: pre.clone(),
            post_lc: post.clone(),
            ..Default::default()
        })
        .collect();
    qubits.push(PatternQubit {
        lc: vec![Clifford1::H],
        measurement: Some(Measurement::Rotated { theta: -theta, adapt: BTreeSet::new() }),
        ..Default::default()
    });
    let mut p = Pattern {
        qubits,
        edges: (0..n).map(|q| (q, anc)).collect(),
        order: vec![anc],
        byproducts: BTreeMap::new(),
    };
    p.derive_corrections()?;
    Ok(p)
}

/// CX pattern on `n` wires (control `c`, target `t`): the CZ-decomposition
/// `CX = (I⊗H)·CZ·(I⊗H)` with each H realized by a one-step wire, giving
/// two X-measured qubits and one fresh target output.
pub fn cx_pattern(n: usize, c: usize, t: usize) -> Result<Pattern, Error> {
    if c == t || c >= n || t >= n {
        return Err(Error::Pattern("invalid control/target".into()));
    }
    let m = n; // middle of the target chain
    let t_out = n + 1;
    let mut qubits: Vec<PatternQubit> = (0..n)
        .map(|_| PatternQubit { input: true, output: true, ..Default::default() })
        .collect();
    qubits[t] = PatternQubit {
        input: true,
        measurement: Some(Measurement::Pauli(Basis::X)),
        ..Default::default()
    };
    qubits.push(PatternQubit {
        measurement: Some(Measurement::Pauli(Basis::X)),
        ..Default::default()
    });
    qubits.push(PatternQubit { output: true, ..Default::default() });
    let mut p = Pattern {
        qubits,
        edges: vec![(t, m), (c, m), (m, t_out)],
        order: vec![t, m],
        byproducts: BTreeMap::new(),
    };
    p.derive_corrections()?;
    Ok(p)
}

/// RZ(θ) pattern on `n` wires acting on wire `t`: the chain `J(0)·J(θ)`
/// with `J(α) = H·RZ(α)`, i.e. a three-qubit line measured at angles `-θ`
/// and `0`.
pub fn rz_pattern(n: usize, t: usize, theta: f64) -> Result<Pattern, Error> {
    if t >= n {
        return Err(Error::Pattern("invalid target".into()));
    }
    let m = n;
    let t_out = n + 1;
    let mut qubits: Vec<PatternQubit> = (0..n)
        .map(|_| PatternQubit { input: true, output: true, ..Default::default() })
        .collect();
    qubits[t] = PatternQubit {
        input: true,
        measurement: Some(Measurement::Rotated { theta: -theta, adapt: BTreeSet::new() }),
        ..Default::default()
    };
    qubits.push(PatternQubit {
        measurement: Some(Measurement::Pauli(Basis::X)),
        ..Default::default()
    });
    qubits.push(PatternQubit { output: true, ..Default::default() });
    let mut p = Pattern {
        qubits,
        edges: vec![(t, m), (m, t_out)],
        order: vec![t, m],
        byproducts: BTreeMap::new(),
    };
    p.derive_corrections()?;
    Ok(p)
}

/// A 15-qubit reference pattern realizing `exp(-i θ/2 Z⊗Z⊗Z)` as the chain
/// `CX(0,1)·CX(1,2)·RZ_2(θ)·CX(1,2)·CX(0,1)` laid out on a fixed graph:
/// inputs 0–2, X-measured body 0–10, one equatorial measurement on qubit 11
/// and outputs 12–14.  [`reduce`] collapses it onto the three-body rotation
/// gadget, which is the motivating example for pattern reduction.
pub fn chain_pattern(theta: f64) -> Result<Pattern, Error> {
    let mut qubits: Vec<PatternQubit> = (0..15).map(|_| PatternQubit::default()).collect();
    for q in 0..3 {
        qubits[q].input = true;
    }
    for q in 0..11 {
        qubits[q].measurement = Some(Measurement::Pauli(Basis::X));
    }
    qubits[11].measurement =
        Some(Measurement::Rotated { theta: -theta, adapt: BTreeSet::new() });
    for q in 12..15 {
        qubits[q].output = true;
    }
    let edges = vec![
        (3, 4),
        (5, 6),
        (12, 7),
        (8, 3),
        (8, 11),
        (11, 4),
        (4, 13),
        (14, 9),
        (3, 10),
        (0, 10),
        (5, 4),
        (2, 6),
        (8, 5),
        (5, 9),
        (3, 7),
        (1, 8),
    ];
    let mut p = Pattern {
        qubits,
        edges,
        order: (0..12).collect(),
        byproducts: BTreeMap::new(),
    };
    p.derive_corrections()?;
    Ok(p)
}

/// Concatenate two patterns: the outputs of `p1` (ascending) are identified
/// with the inputs of `p2` (ascending) and all corrections are re-derived
/// over the merged graph.
pub fn concatenate(p1: &Pattern, p2: &Pattern) -> Result<Pattern, Error> {
    let outs = p1.outputs();
    let ins = p2.inputs();
    if outs.len() != ins.len() {
        return Err(Error::Pattern(format!(
            "cannot concatenate: {} outputs vs {} inputs",
            outs.len(),
            ins.len()
        )));
    }
    for &o in &outs {
        if !p1.qubits[o].lc.is_empty() || !p1.qubits[o].post_lc.is_empty() {
            return Err(Error::Pattern(
                "cannot concatenate: local Cliffords on an upstream output".into(),
            ));
        }
    }
    for &i in &ins {
        if !p2.qubits[i].pre_lc.is_empty() {
            return Err(Error::Pattern(
                "cannot concatenate: local Cliffords on a downstream input".into(),
            ));
        }
    }

    let n1 = p1.n_qubits();
    // Map p2 indices into the merged space.
    let mut map2 = vec![usize::MAX; p2.n_qubits()];
    for (pos, &i) in ins.iter().enumerate() {
        map2[i] = outs[pos];
    }
    let mut next = n1;
    for q in 0..p2.n_qubits() {
        if map2[q] == usize::MAX {
            map2[q] = next;
            next += 1;
        }
    }

    let mut qubits = p1.qubits.clone();
    qubits.resize(next, PatternQubit::default());
    for q in 0..p2.n_qubits() {
        let dst = map2[q];
        let src = &p2.qubits[q];
        if ins.contains(&q) {
            // Interface qubit: input-ness from p1, the rest from p2.
            qubits[dst].output = src.output;
            qubits[dst].measurement = src.measurement.clone();
            qubits[dst].lc = src.lc.clone();
            qubits[dst].post_lc = src.post_lc.clone();
        } else {
            qubits[dst] = src.clone();
            qubits[dst].input = false;
        }
    }

    let mut edges = p1.edges.clone();
    edges.extend(p2.edges.iter().map(|&(a, b)| (map2[a], map2[b])));
    let mut order = p1.order.clone();
    order.extend(p2.order.iter().map(|&q| map2[q]));

    // Remap surviving adaptivity references before re-derivation (they are
    // recomputed anyway, but keep the intermediate structure valid).
    let mut merged = Pattern { qubits, edges, order, byproducts: BTreeMap::new() };
    for q in 0..merged.n_qubits() {
        if let Some(Measurement::Rotated { adapt, .. }) = &mut merged.qubits[q].measurement {
            if q >= n1 || !adapt.is_empty() {
                let remapped: BTreeSet<usize> = adapt
                    .iter()
                    .map(|&d| if q >= n1 { *map2.get(d).unwrap_or(&d) } else { d })
                    .collect();
                *adapt = remapped;
            }
        }
    }
    merged.derive_corrections()?;
    Ok(merged)
}

/// Outcome of a pattern simulation.
pub struct PatternOutcome {
    /// State of the output qubits, ascending index order.
    pub state: QuantumState,
    /// Measurement outcomes keyed by qubit.
    pub outcomes: BTreeMap<usize, bool>,
}

/// Simulate a pattern on a dense input state (inputs in ascending index
/// order).
pub fn simulate_pattern<R: Rng>(
    pattern: &Pattern,
    input: &QuantumState,
    policy: MeasurePolicy<R>,
) -> Result<PatternOutcome, Error> {
    pattern.validate()?;
    let n = pattern.n_qubits();
    let inputs = pattern.inputs();
    if input.n_qubits != inputs.len() {
        return Err(Error::Pattern(format!(
            "input state has {} qubits, pattern expects {}",
            input.n_qubits,
            inputs.len()
        )));
    }

    // Embed the input state, |0> elsewhere, then rotate non-inputs to |+>.
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
    let in_bit: Vec<usize> = inputs.iter().map(|&q| n - 1 - q).collect();
    for (j, amp) in input.amps.iter().enumerate() {
        let mut idx = 0usize;
        for (pos, &b) in in_bit.iter().enumerate() {
            if j & (1 << (input.n_qubits - 1 - pos)) != 0 {
                idx |= 1 << b;
            }
        }
        amps[idx] = *amp;
    }
    let mut state = QuantumState { n_qubits: n, amps };
    for q in 0..n {
        if !pattern.qubits[q].input {
            state.apply_gate(Gate::H, &[q]);
        }
    }

    for q in &inputs {
        for &c in &pattern.qubits[*q].pre_lc {
            state.apply_gate(lc_gate(c), &[*q]);
        }
    }
    for &(a, b) in &pattern.edges {
        state.apply_gate(Gate::CZ, &[a, b]);
    }
    for q in 0..n {
        for &c in &pattern.qubits[q].lc {
            state.apply_gate(lc_gate(c), &[q]);
        }
    }

    // Measurements, lowered onto the computational basis.
    let mut outcomes: BTreeMap<usize, bool> = BTreeMap::new();
    let mut policy = policy;
    let mut forced_pos = 0usize;
    for &q in &pattern.order {
        match pattern.qubits[q].measurement.as_ref().unwrap() {
            Measurement::Pauli(Basis::Z) => {}
            Measurement::Pauli(Basis::X) => state.apply_gate(Gate::H, &[q]),
            Measurement::Pauli(Basis::Y) => {
                state.apply_gate(Gate::Sdg, &[q]);
                state.apply_gate(Gate::H, &[q]);
            }
            Measurement::Rotated { theta, adapt } => {
                let parity = adapt.iter().filter(|d| outcomes[d]).count() % 2;
                let eff = if parity == 1 { -*theta } else { *theta };
                state.apply_gate(Gate::RZ(-eff), &[q]);
                state.apply_gate(Gate::H, &[q]);
            }
        }
        let p1 = state.prob_one(q);
        let outcome = match &mut policy {
            MeasurePolicy::Sample(rng) => rng.random::<f64>() < p1,
            MeasurePolicy::Forced(v) => {
                let o = *v
                    .get(forced_pos)
                    .ok_or_else(|| Error::Pattern("not enough forced outcomes".into()))?;
                forced_pos += 1;
                o
            }
            MeasurePolicy::Greedy => p1 > 0.5,
        };
        state.collapse(q, outcome)?;
        outcomes.insert(q, outcome);
    }

    // Byproducts, then post-LC words.
    let outputs = pattern.outputs();
    for &o in &outputs {
        if let Some(bp) = pattern.byproducts.get(&o) {
            if bp.x.iter().filter(|s| outcomes[s]).count() % 2 == 1 {
                state.apply_gate(Gate::X, &[o]);
            }
            if bp.z.iter().filter(|s| outcomes[s]).count() % 2 == 1 {
                state.apply_gate(Gate::Z, &[o]);
            }
        }
        for &c in &pattern.qubits[o].post_lc {
            state.apply_gate(lc_gate(c), &[o]);
        }
    }

    // Project out the measured qubits (collapsed to |outcome> above).
    let n_out = outputs.len();
    let mut out_amps = vec![Complex64::new(0.0, 0.0); 1 << n_out];
    let mut fixed_mask = 0usize;
    let mut fixed_bits = 0usize;
    for (&q, &o) in &outcomes {
        fixed_mask |= 1 << (n - 1 - q);
        if o {
            fixed_bits |= 1 << (n - 1 - q);
        }
    }
    for (idx, amp) in state.amps.iter().enumerate() {
        if idx & fixed_mask != fixed_bits {
            continue;
        }
        let mut j = 0usize;
        for (pos, &q) in outputs.iter().enumerate() {
            if idx & (1 << (n - 1 - q)) != 0 {
                j |= 1 << (n_out - 1 - pos);
            }
        }
        out_amps[j] = *amp;
    }
    Ok(PatternOutcome { state: QuantumState { n_qubits: n_out, amps: out_amps }, outcomes })
}

/// Result of [`reduce`]: the reduced pattern and the Clifford prefix circuit
/// that prepares its resource (CZ edges followed by the local-Clifford
/// layer), in the reduced index space (former outputs first, then the
/// surviving rotated qubits).
pub struct Reduced {
    pub pattern: Pattern,
    pub clifford_prefix: DynamicCircuit,
}

/// Eliminate all Pauli-measured qubits of a pattern by simulating their
/// measurements (outcome 0) on a stabilizer tableau and extracting the
/// graph-state form of what remains.  The surviving qubits are the former
/// outputs (which become the in/out qubits of the reduced pattern) and the
/// rotated-measurement qubits.
pub fn reduce(pattern: &Pattern) -> Result<Reduced, Error> {
    pattern.validate()?;
    let n = pattern.n_qubits();

    // Resource tableau with inputs taken as |+> (reduction is verified
    // against the original pattern on arbitrary inputs by construction of
    // the patterns in scope, which have causal flow).
    let mut tab = Tableau::plus(n);
    for q in 0..n {
        tab.apply_lc(q, &pattern.qubits[q].pre_lc);
    }
    for &(a, b) in &pattern.edges {
        tab.cz(a, b);
    }
    for q in 0..n {
        tab.apply_lc(q, &pattern.qubits[q].lc);
    }

    for &q in &pattern.order {
        match pattern.qubits[q].measurement.as_ref().unwrap() {
            Measurement::Pauli(b) => {
                tab.measure(q, *b, None, || false)?;
            }
            Measurement::Rotated { .. } => {}
        }
    }

    let outputs = pattern.outputs();
    let rotated: Vec<usize> = pattern
        .measured()
        .into_iter()
        .filter(|&q| matches!(pattern.qubits[q].measurement, Some(Measurement::Rotated { .. })))
        .collect();
    let mut keep = outputs.clone();
    keep.extend(rotated.iter().copied());

    let rows = tableau::restrict(&tab.rows[n..], &keep)?;
    let graph = tableau::to_graph_state(&rows)?;

    // Rebuild a pattern over the reduced index space.  The extracted LC
    // maps the resource onto the graph state, so the pattern's resource LC
    // is its inverse.
    let k_out = outputs.len();
    let mut qubits: Vec<PatternQubit> = Vec::new();
    for new_q in 0..keep.len() {
        let lc = invert_lc(&graph.lc[new_q]);
        if new_q < k_out {
            // The LC stays in the resource layer; the byproducts below are
            // derived in the same conjugated frame, so the placement is
            // self-consistent.
            qubits.push(PatternQubit { input: true, output: true, lc, ..Default::default() });
        } else {
            let old = keep[new_q];
            let Some(Measurement::Rotated { theta, .. }) = &pattern.qubits[old].measurement
            else {
                unreachable!()
            };
            if !(lc.is_empty() || lc == vec![Clifford1::H]) {
                return Err(Error::Pattern(format!(
                    "reduction produced an unsupported local Clifford {lc:?} on rotated qubit {old}"
                )));
            }
            qubits.push(PatternQubit {
                lc,
                measurement: Some(Measurement::Rotated { theta: *theta, adapt: BTreeSet::new() }),
                ..Default::default()
            });
        }
    }

    let mut reduced = Pattern {
        qubits,
        edges: graph.edges.clone(),
        order: (k_out..keep.len()).collect(),
        byproducts: BTreeMap::new(),
    };
    reduced.derive_corrections()?;

    let mut prefix = DynamicCircuit::new(keep.len(), 0);
    for &(a, b) in &reduced.edges {
        prefix.gate(Gate::CZ, &[a, b]);
    }
    for (q, pq) in reduced.qubits.iter().enumerate() {
        for &c in &pq.lc {
            prefix.gate(lc_gate(c), &[q]);
        }
    }
    Ok(Reduced { pattern: reduced, clifford_prefix: prefix })
}

/// Lower a pattern to a dynamic circuit.
///
/// The circuit acts on `n_qubits` pattern qubits; the caller prepares the
/// input qubits (everything else is reset to |+> by the emitted H layer)
/// and reads the outputs off the same wires.  One classical bit per
/// measured qubit is allocated in measurement order.  Rotated measurements
/// lower to `RZ(-θ)·H` before a Z-measurement; adaptive sign flips become
/// classically controlled X conjugations around the RZ, and byproducts
/// become classically controlled X/Z on the outputs.
pub fn compile_to_circuit(pattern: &Pattern) -> Result<(DynamicCircuit, BTreeMap<usize, usize>), Error> {
    pattern.validate()?;
    let n = pattern.n_qubits();
    let cbit_of: BTreeMap<usize, usize> =
        pattern.order.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let mut c = DynamicCircuit::new(n, pattern.order.len());

    for q in 0..n {
        if !pattern.qubits[q].input {
            c.gate(Gate::H, &[q]);
        }
    }
    for q in 0..n {
        for &g in &pattern.qubits[q].pre_lc {
            c.gate(lc_gate(g), &[q]);
        }
    }
    for &(a, b) in &pattern.edges {
        c.gate(Gate::CZ, &[a, b]);
    }
    for q in 0..n {
        for &g in &pattern.qubits[q].lc {
            c.gate(lc_gate(g), &[q]);
        }
    }
    for &q in &pattern.order {
        match pattern.qubits[q].measurement.as_ref().unwrap() {
            Measurement::Pauli(Basis::Z) => {}
            Measurement::Pauli(Basis::X) => {
                c.gate(Gate::H, &[q]);
            }
            Measurement::Pauli(Basis::Y) => {
                c.gate(Gate::Sdg, &[q]);
                c.gate(Gate::H, &[q]);
            }
            Measurement::Rotated { theta, adapt } => {
                // X^{parity} RZ(-θ) X^{parity} = RZ(-θ·(-1)^{parity}).
                for d in adapt {
                    c.gate_if(Gate::X, &[q], cbit_of[d], true);
                }
                c.gate(Gate::RZ(-theta), &[q]);
                for d in adapt {
                    c.gate_if(Gate::X, &[q], cbit_of[d], true);
                }
                c.gate(Gate::H, &[q]);
            }
        }
        c.measure(q, cbit_of[&q]);
    }
    for &o in &pattern.outputs() {
        if let Some(bp) = pattern.byproducts.get(&o) {
            for s in &bp.x {
                c.gate_if(Gate::X, &[o], cbit_of[s], true);
            }
            for s in &bp.z {
                c.gate_if(Gate::Z, &[o], cbit_of[s], true);
            }
        }
        for &g in &pattern.qubits[o].post_lc {
            c.gate(lc_gate(g), &[o]);
        }
    }
    Ok((c, cbit_of))
}

impl Pattern {
    /// Render the pattern in its line-oriented text format.
    ///
    /// Every line starts with a keyword: `QUBITS n`, `INPUT q`, `OUTPUT q`,
    /// `EDGE a b`, `PRELC q <word>`, `LC q <word>`, `POSTLC q <word>`,
    /// `MEASURE q X|Y|Z` or `MEASURE q R <angle> [ADAPT q...]`,
    /// `BYPRODUCT out X|Z q...`, `ORDER q...`.  `#` starts a comment.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let word = |w: &[Clifford1]| -> String {
            w.iter()
                .map(|c| match c {
                    Clifford1::H => "H",
                    Clifford1::S => "S",
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        let ints = |s: &BTreeSet<usize>| -> String {
            s.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(" ")
        };
        let mut out = String::new();
        writeln!(out, "QUBITS {}", self.n_qubits()).unwrap();
        for q in self.inputs() {
            writeln!(out, "INPUT {q}").unwrap();
        }
        for q in self.outputs() {
            writeln!(out, "OUTPUT {q}").unwrap();
        }
        for &(a, b) in &self.edges {
            writeln!(out, "EDGE {a} {b}").unwrap();
        }
        for (q, pq) in self.qubits.iter().enumerate() {
            if !pq.pre_lc.is_empty() {
                writeln!(out, "PRELC {q} {}", word(&pq.pre_lc)).unwrap();
            }
            if !pq.lc.is_empty() {
                writeln!(out, "LC {q} {}", word(&pq.lc)).unwrap();
            }
            if !pq.post_lc.is_empty() {
                writeln!(out, "POSTLC {q} {}", word(&pq.post_lc)).unwrap();
            }
        }
        for (q, pq) in self.qubits.iter().enumerate() {
            match &pq.measurement {
                Some(Measurement::Pauli(b)) => writeln!(out, "MEASURE {q} {b:?}").unwrap(),
                Some(Measurement::Rotated { theta, adapt }) => {
                    if adapt.is_empty() {
                        writeln!(out, "MEASURE {q} R {theta:.17}").unwrap();
                    } else {
                        writeln!(out, "MEASURE {q} R {theta:.17} ADAPT {}", ints(adapt)).unwrap();
                    }
                }
                None => {}
            }
        }
        for (o, bp) in &self.byproducts {
            if !bp.x.is_empty() {
                writeln!(out, "BYPRODUCT {o} X {}", ints(&bp.x)).unwrap();
            }
            if !bp.z.is_empty() {
                writeln!(out, "BYPRODUCT {o} Z {}", ints(&bp.z)).unwrap();
            }
        }
        if !self.order.is_empty() {
            let order: Vec<String> = self.order.iter().map(|q| q.to_string()).collect();
            writeln!(out, "ORDER {}", order.join(" ")).unwrap();
        }
        out
    }

    /// Parse the text format produced by [`Pattern::to_text`].
    pub fn from_text(text: &str) -> Result<Self, Error> {
        let bad = |line: &str| Error::Parse(format!("bad pattern line: {line}"));
        let parse_q = |tok: Option<&str>, line: &str| -> Result<usize, Error> {
            tok.ok_or_else(|| bad(line))?.parse().map_err(|_| bad(line))
        };
        let parse_word = |toks: &[&str], line: &str| -> Result<Vec<Clifford1>, Error> {
            toks.iter()
                .map(|t| match *t {
                    "H" => Ok(Clifford1::H),
                    "S" => Ok(Clifford1::S),
                    _ => Err(bad(line)),
                })
                .collect()
        };

        let mut pattern: Option<Pattern> = None;
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks[0] == "QUBITS" {
                let n = parse_q(toks.get(1).copied(), line)?;
                pattern = Some(Pattern {
                    qubits: vec![PatternQubit::default(); n],
                    edges: Vec::new(),
                    order: Vec::new(),
                    byproducts: BTreeMap::new(),
                });
                continue;
            }
            let p = pattern
                .as_mut()
                .ok_or_else(|| Error::Parse("pattern must start with a QUBITS line".into()))?;
            let q_count = p.qubits.len();
            let check = |q: usize| -> Result<usize, Error> {
                if q < q_count {
                    Ok(q)
                } else {
                    Err(Error::Parse(format!("qubit {q} out of range")))
                }
            };
            match toks[0] {
                "INPUT" => p.qubits[check(parse_q(toks.get(1).copied(), line)?)?].input = true,
                "OUTPUT" => p.qubits[check(parse_q(toks.get(1).copied(), line)?)?].output = true,
                "EDGE" => {
                    let a = check(parse_q(toks.get(1).copied(), line)?)?;
                    let b = check(parse_q(toks.get(2).copied(), line)?)?;
                    p.edges.push((a, b));
                }
                "PRELC" | "LC" | "POSTLC" => {
                    let q = check(parse_q(toks.get(1).copied(), line)?)?;
                    let word = parse_word(&toks[2..], line)?;
                    match toks[0] {
                        "PRELC" => p.qubits[q].pre_lc = word,
                        "LC" => p.qubits[q].lc = word,
                        _ => p.qubits[q].post_lc = word,
                    }
                }
                "MEASURE" => {
                    let q = check(parse_q(toks.get(1).copied(), line)?)?;
                    let m = match toks.get(2).copied() {
                        Some("X") => Measurement::Pauli(Basis::X),
                        Some("Y") => Measurement::Pauli(Basis::Y),
                        Some("Z") => Measurement::Pauli(Basis::Z),
                        Some("R") => {
                            let theta: f64 =
                                toks.get(3).ok_or_else(|| bad(line))?.parse().map_err(|_| bad(line))?;
                            let adapt = match toks.get(4) {
                                Some(&"ADAPT") => toks[5..]
                                    .iter()
                                    .map(|t| t.parse().map_err(|_| bad(line)))
                                    .collect::<Result<BTreeSet<usize>, Error>>()?,
                                Some(_) => return Err(bad(line)),
                                None => BTreeSet::new(),
                            };
                            Measurement::Rotated { theta, adapt }
                        }
                        _ => return Err(bad(line)),
                    };
                    p.qubits[q].measurement = Some(m);
                }
                "BYPRODUCT" => {
                    let o = check(parse_q(toks.get(1).copied(), line)?)?;
                    let sources = toks[3..]
                        .iter()
                        .map(|t| t.parse().map_err(|_| bad(line)))
                        .collect::<Result<BTreeSet<usize>, Error>>()?;
                    let bp = p.byproducts.entry(o).or_default();
                    match toks.get(2).copied() {
                        Some("X") => bp.x = sources,
                        Some("Z") => bp.z = sources,
                        _ => return Err(bad(line)),
                    }
                }
                "ORDER" => {
                    p.order = toks[1..]
                        .iter()
                        .map(|t| t.parse().map_err(|_| bad(line)))
                        .collect::<Result<Vec<usize>, Error>>()?;
                }
                _ => return Err(bad(line)),
            }
        }
        let p = pattern.ok_or_else(|| Error::Parse("empty pattern".into()))?;
        p.validate()?;
        Ok(p)
    }
}
