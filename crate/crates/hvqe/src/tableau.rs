//! Stabilizer tableau simulation and graph-state extraction.
//!
//! Rows represent Paulis as `i^r · Π_q X_q^{x_q} Z_q^{z_q}` with `r` tracked
//! mod 4.  The tableau keeps `n` destabilizer rows followed by `n`
//! stabilizer rows (Aaronson–Gottesman layout), so Pauli conjugation through
//! a Clifford circuit can be read off the destabilizer rows and measurements
//! run in the standard way.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::pauli::{Pauli, PauliString};

/// Single-qubit Clifford generators used for local-Clifford words.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Clifford1 {
    H,
    S,
}

/// Measurement basis for single-qubit Pauli measurements.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

/// One Pauli row: `i^r · Π X^x Z^z`.
#[derive(Clone, PartialEq, Debug)]
pub struct PauliRow {
    pub x: Vec<bool>,
    pub z: Vec<bool>,
    pub r: u8,
}

impl PauliRow {
    pub fn identity(n: usize) -> Self {
        PauliRow { x: vec![false; n], z: vec![false; n], r: 0 }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Multiply `self` by `other` on the right.
    pub fn mul(&mut self, other: &PauliRow) {
        let mut extra = 0u8;
        for q in 0..self.n() {
            if self.z[q] && other.x[q] {
                extra = (extra + 2) % 4;
            }
            self.x[q] ^= other.x[q];
            self.z[q] ^= other.z[q];
        }
        self.r = (self.r + other.r + extra) % 4;
    }

    /// Express as `(sign, PauliString)`; errors if the phase is imaginary.
    pub fn to_pauli(&self) -> Result<(f64, PauliString), Error> {
        let mut n_y = 0u8;
        let mut ps = Vec::with_capacity(self.n());
        for q in 0..self.n() {
            ps.push(match (self.x[q], self.z[q]) {
                (false, false) => Pauli::I,
                (true, false) => Pauli::X,
                (false, true) => Pauli::Z,
                (true, true) => {
                    n_y += 1;
                    Pauli::Y
                }
            });
        }
        // X·Z = -i·Y, so the operator is i^(r - n_y) times the plain string.
        match (self.r + 4 - n_y % 4) % 4 {
            0 => Ok((1.0, PauliString(ps))),
            2 => Ok((-1.0, PauliString(ps))),
            _ => Err(Error::Simulation("row with imaginary phase".into())),
        }
    }

    pub fn from_pauli(sign: f64, s: &PauliString) -> Self {
        let n = s.len();
        let mut row = PauliRow::identity(n);
        let mut n_y = 0u8;
        for q in 0..n {
            match s.0[q] {
                Pauli::I => {}
                Pauli::X => row.x[q] = true,
                Pauli::Z => row.z[q] = true,
                Pauli::Y => {
                    row.x[q] = true;
                    row.z[q] = true;
                    n_y += 1;
                }
            }
        }
        row.r = ((if sign < 0.0 { 2u8 } else { 0 }) + n_y % 4) % 4;
        row
    }

    pub fn commutes_with(&self, other: &PauliRow) -> bool {
        let mut anti = false;
        for q in 0..self.n() {
            anti ^= (self.x[q] && other.z[q]) ^ (self.z[q] && other.x[q]);
        }
        !anti
    }

    fn is_identity_on(&self, q: usize) -> bool {
        !self.x[q] && !self.z[q]
    }

    // Single-qubit Clifford conjugation rules.
    fn conj_h(&mut self, q: usize) {
        if self.x[q] && self.z[q] {
            self.r = (self.r + 2) % 4;
        }
        std::mem::swap(&mut self.x[q], &mut self.z[q]);
    }

    fn conj_s(&mut self, q: usize) {
        if self.x[q] {
            self.r = (self.r + 1) % 4;
            self.z[q] ^= true;
        }
    }

    fn conj_x(&mut self, q: usize) {
        if self.z[q] {
            self.r = (self.r + 2) % 4;
        }
    }

    fn conj_z(&mut self, q: usize) {
        if self.x[q] {
            self.r = (self.r + 2) % 4;
        }
    }

    fn conj_cx(&mut self, c: usize, t: usize) {
        // In the i^r X^x Z^z representation the map X_c -> X_c X_t,
        // Z_t -> Z_c Z_t needs no phase correction (all moved factors
        // commute past everything they cross).
        self.x[t] ^= self.x[c];
        self.z[c] ^= self.z[t];
    }
}

/// Aaronson–Gottesman tableau with destabilizers.
#[derive(Clone, Debug)]
pub struct Tableau {
    pub n: usize,
    /// `2n` rows: destabilizers `0..n`, stabilizers `n..2n`.
    pub rows: Vec<PauliRow>,
}

impl Tableau {
    /// Tableau of |0...0>: stabilizers Z_i, destabilizers X_i.
    pub fn zero(n: usize) -> Self {
        let mut rows = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut row = PauliRow::identity(n);
            row.x[i] = true;
            rows.push(row);
        }
        for i in 0..n {
            let mut row = PauliRow::identity(n);
            row.z[i] = true;
            rows.push(row);
        }
        Tableau { n, rows }
    }

    /// Tableau of |+...+>.
    pub fn plus(n: usize) -> Self {
        let mut t = Tableau::zero(n);
        for q in 0..n {
            t.h(q);
        }
        t
    }

    pub fn h(&mut self, q: usize) {
        for row in &mut self.rows {
            row.conj_h(q);
        }
    }

    pub fn s(&mut self, q: usize) {
        for row in &mut self.rows {
            row.conj_s(q);
        }
    }

    pub fn sdg(&mut self, q: usize) {
        self.s(q);
        self.s(q);
        self.s(q);
    }

    pub fn x(&mut self, q: usize) {
        for row in &mut self.rows {
            row.conj_x(q);
        }
    }

    pub fn z(&mut self, q: usize) {
        for row in &mut self.rows {
            row.conj_z(q);
        }
    }

    pub fn cx(&mut self, c: usize, t: usize) {
        for row in &mut self.rows {
            row.conj_cx(c, t);
        }
    }

    pub fn cz(&mut self, a: usize, b: usize) {
        self.h(b);
        self.cx(a, b);
        self.h(b);
    }

    pub fn apply_lc(&mut self, q: usize, word: &[Clifford1]) {
        for &g in word {
            match g {
                Clifford1::H => self.h(q),
                Clifford1::S => self.s(q),
            }
        }
    }

    fn rowsum(&mut self, h: usize, i: usize) {
        let other = self.rows[i].clone();
        self.rows[h].mul(&other);
    }

    /// Measure qubit `q` in `basis`.  Returns `(outcome, was_random)`.
    /// `forced` fixes the outcome of a random measurement and must agree
    /// with a deterministic one.
    pub fn measure(
        &mut self,
        q: usize,
        basis: Basis,
        forced: Option<bool>,
        mut random_bit: impl FnMut() -> bool,
    ) -> Result<(bool, bool), Error> {
        // Rotate the basis onto Z, measure, rotate back.
        match basis {
            Basis::Z => {}
            Basis::X => self.h(q),
            Basis::Y => {
                // V = H S† maps Y -> Z (V Y V† = Z).
                self.sdg(q);
                self.h(q);
            }
        }
        let result = self.measure_z(q, forced, &mut random_bit);
        match basis {
            Basis::Z => {}
            Basis::X => self.h(q),
            Basis::Y => {
                self.h(q);
                self.s(q);
            }
        }
        result
    }

    fn measure_z(
        &mut self,
        q: usize,
        forced: Option<bool>,
        random_bit: &mut impl FnMut() -> bool,
    ) -> Result<(bool, bool), Error> {
        let n = self.n;
        let p = (n..2 * n).find(|&i| self.rows[i].x[q]);
        if let Some(p) = p {
            // Random outcome.
            let outcome = forced.unwrap_or_else(random_bit);
            for i in 0..2 * n {
                if i != p && i != p - n && self.rows[i].x[q] {
                    self.rowsum(i, p);
                }
            }
            self.rows[p - n] = self.rows[p].clone();
            let mut new = PauliRow::identity(n);
            new.z[q] = true;
            new.r = if outcome { 2 } else { 0 };
            self.rows[p] = new;
            Ok((outcome, true))
        } else {
            // Deterministic outcome.
            let mut scratch = PauliRow::identity(n);
            for i in 0..n {
                if self.rows[i].x[q] {
                    let stab = self.rows[i + n].clone();
                    scratch.mul(&stab);
                }
            }
            let (sign, s) = scratch.to_pauli()?;
            debug_assert_eq!(s.weight(), 1);
            let outcome = sign < 0.0;
            if let Some(f) = forced {
                if f != outcome {
                    return Err(Error::Simulation(format!(
                        "forced outcome {} contradicts deterministic measurement on qubit {q}",
                        f as u8
                    )));
                }
            }
            Ok((outcome, false))
        }
    }

    /// Stabilizer rows as `(sign, PauliString)` pairs.
    pub fn stabilizers(&self) -> Result<Vec<(f64, PauliString)>, Error> {
        self.rows[self.n..].iter().map(|r| r.to_pauli()).collect()
    }

    /// Destabilizer rows as `(sign, PauliString)` pairs.
    pub fn destabilizers(&self) -> Result<Vec<(f64, PauliString)>, Error> {
        self.rows[..self.n].iter().map(|r| r.to_pauli()).collect()
    }
}

impl fmt::Display for Tableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (sign, s) in self.stabilizers().map_err(|_| fmt::Error)? {
            writeln!(f, "{}{}", if sign < 0.0 { '-' } else { '+' }, s)?;
        }
        Ok(())
    }
}

/// Canonical (row-echelon) form of a stabilizer row list: X-block pivots
/// first, then pure-Z rows, each pivot cleared from all other rows.  The
/// result is a basis of the same group, independent of the generating set.
pub fn canonicalize(rows: &[PauliRow]) -> Vec<PauliRow> {
    let mut rows: Vec<PauliRow> = rows.to_vec();
    let n = match rows.first() {
        Some(r) => r.n(),
        None => return rows,
    };
    let mut pivot = 0usize;
    // Stage 1: X-block echelon (a qubit's X/Y entries), stage 2: Z-block.
    for stage in 0..2 {
        for q in 0..n {
            let hit = |row: &PauliRow| if stage == 0 { row.x[q] } else { !row.x[q] && row.z[q] };
            if let Some(j) = (pivot..rows.len()).find(|&j| hit(&rows[j])) {
                rows.swap(pivot, j);
                for i in 0..rows.len() {
                    let clear = if stage == 0 { rows[i].x[q] } else { rows[i].z[q] && !rows[i].x[q] };
                    if i != pivot && clear {
                        let p = rows[pivot].clone();
                        rows[i].mul(&p);
                    }
                }
                pivot += 1;
            }
        }
    }
    rows
}

/// Restrict a full set of stabilizer rows to the qubits in `keep`, assuming
/// the state is a product between `keep` and the rest (e.g. after measuring
/// out the other qubits).  Returns `keep.len()` rows over the kept qubits.
pub fn restrict(rows: &[PauliRow], keep: &[usize]) -> Result<Vec<PauliRow>, Error> {
    let n = rows.first().map(|r| r.n()).unwrap_or(0);
    let drop: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let mut rows: Vec<PauliRow> = rows.to_vec();
    let mut used = vec![false; rows.len()];
    for &d in &drop {
        for x_part in [true, false] {
            let hit = |row: &PauliRow| if x_part { row.x[d] } else { row.z[d] };
            if let Some(p) = (0..rows.len()).find(|&i| !used[i] && hit(&rows[i])) {
                for i in 0..rows.len() {
                    if i != p && !used[i] && hit(&rows[i]) {
                        let pr = rows[p].clone();
                        rows[i].mul(&pr);
                    }
                }
                used[p] = true;
            }
        }
    }
    let mut out = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if used[i] {
            continue;
        }
        if drop.iter().any(|&d| !row.is_identity_on(d)) {
            return Err(Error::Simulation(
                "residual support on dropped qubits; state is not a product".into(),
            ));
        }
        let mut new = PauliRow::identity(keep.len());
        for (new_q, &old_q) in keep.iter().enumerate() {
            new.x[new_q] = row.x[old_q];
            new.z[new_q] = row.z[old_q];
        }
        new.r = row.r;
        out.push(new);
    }
    if out.len() != keep.len() {
        return Err(Error::Simulation(format!(
            "restriction produced {} rows for {} kept qubits",
            out.len(),
            keep.len()
        )));
    }
    Ok(out)
}

/// A stabilizer state expressed as a graph state plus local Cliffords:
/// applying `lc[q]` (in order) to the original state on each qubit yields
/// the graph state with the given edges.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphStateForm {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub lc: Vec<Vec<Clifford1>>,
}

impl GraphStateForm {
    pub fn neighbors(&self, q: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == q {
                    Some(b)
                } else if b == q {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }
}

/// Extract a graph-state form from a full set of stabilizer rows.
///
/// Standard procedure: make the X-block invertible with H conjugations,
/// Gauss–Jordan it to the identity, clear the Z-diagonal with S and fix
/// negative signs with Z (= S·S).  The recorded per-qubit words map the
/// state onto the plain graph state.
pub fn to_graph_state(rows: &[PauliRow]) -> Result<GraphStateForm, Error> {
    let n = rows.first().map(|r| r.n()).unwrap_or(0);
    if rows.len() != n {
        return Err(Error::Simulation("graph extraction needs n stabilizer rows".into()));
    }
    let mut rows: Vec<PauliRow> = rows.to_vec();
    let mut lc: Vec<Vec<Clifford1>> = vec![Vec::new(); n];

    // Stage 1: X-block to full rank.
    let mut guard = 0;
    loop {
        let mut work = rows.clone();
        let mut rank = 0usize;
        for q in 0..n {
            if let Some(j) = (rank..n).find(|&j| work[j].x[q]) {
                work.swap(rank, j);
                for i in 0..n {
                    if i != rank && work[i].x[q] {
                        let p = work[rank].clone();
                        work[i].mul(&p);
                    }
                }
                rank += 1;
            }
        }
        if rank == n {
            rows = work;
            break;
        }
        // Some eliminated row is pure-Z; hit one of its support qubits with H.
        let zrow = work[rank..]
            .iter()
            .find(|r| r.x.iter().all(|&b| !b))
            .ok_or_else(|| Error::Simulation("inconsistent rank in graph extraction".into()))?;
        // Prefer the highest-index support qubit: callers order ancilla-like
        // qubits after wire qubits, and a basis change sits more naturally on
        // an ancilla than on a wire carrying data.
        let q = (0..n)
            .rev()
            .find(|&q| zrow.z[q])
            .ok_or_else(|| Error::Simulation("identity stabilizer row".into()))?;
        for row in &mut rows {
            row.conj_h(q);
        }
        lc[q].push(Clifford1::H);
        guard += 1;
        if guard > 2 * n + 4 {
            return Err(Error::Simulation("graph extraction did not converge".into()));
        }
    }

    // Stage 2: X-block is the identity (up to row order after Gauss–Jordan);
    // sort rows so row q has X on qubit q.
    rows.sort_by_key(|r| (0..n).find(|&q| r.x[q]).unwrap_or(n));

    // Stage 3: clear the Z diagonal with S conjugations.
    for q in 0..n {
        if rows[q].z[q] {
            for row in &mut rows {
                row.conj_s(q);
            }
            lc[q].push(Clifford1::S);
        }
    }

    // Stage 4: fix signs with Z = S·S conjugations.
    for q in 0..n {
        let (sign, _) = rows[q].to_pauli()?;
        if sign < 0.0 {
            for row in &mut rows {
                row.conj_z(q);
            }
            lc[q].push(Clifford1::S);
            lc[q].push(Clifford1::S);
        }
    }

    // Read off the adjacency and sanity-check the graph form.
    let mut edges = Vec::new();
    for q in 0..n {
        let (sign, s) = rows[q].to_pauli()?;
        if sign < 0.0 || s.0[q] != Pauli::X {
            return Err(Error::Simulation("graph extraction failed to normalize".into()));
        }
        for p in 0..n {
            if p != q && rows[q].z[p] {
                if rows[p].z[q] != rows[q].z[p] {
                    return Err(Error::Simulation("asymmetric adjacency".into()));
                }
                if p > q {
                    edges.push((q, p));
                }
            }
        }
    }
    Ok(GraphStateForm { n, edges, lc: lc.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::{DynamicCircuit, Gate, MeasurePolicy, QuantumState, simulate};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// Apply a random Clifford circuit to a tableau and a statevector in
    /// lockstep, returning both plus the gate list.
    fn random_clifford(
        n: usize,
        depth: usize,
        rng: &mut ChaCha12Rng,
    ) -> (Tableau, QuantumState) {
        let mut tab = Tableau::zero(n);
        let mut circ = DynamicCircuit::new(n, 0);
        for _ in 0..depth {
            match rng.random_range(0..4) {
                0 => {
                    let q = rng.random_range(0..n);
                    tab.h(q);
                    circ.gate(Gate::H, &[q]);
                }
                1 => {
                    let q = rng.random_range(0..n);
                    tab.s(q);
                    circ.gate(Gate::S, &[q]);
                }
                2 => {
                    let a = rng.random_range(0..n);
                    let b = (a + 1 + rng.random_range(0..n - 1)) % n;
                    tab.cz(a, b);
                    circ.gate(Gate::CZ, &[a, b]);
                }
                _ => {
                    let a = rng.random_range(0..n);
                    let b = (a + 1 + rng.random_range(0..n - 1)) % n;
                    tab.cx(a, b);
                    circ.gate(Gate::CX, &[a, b]);
                }
            }
        }
        let state = simulate::<ChaCha12Rng>(&circ, None, MeasurePolicy::Greedy).unwrap().state;
        (tab, state)
    }

    /// Check that every stabilizer row fixes the state: sign·P|ψ> = |ψ>.
    fn assert_stabilizes(tab: &Tableau, state: &QuantumState) {
        for (sign, s) in tab.stabilizers().unwrap() {
            let mut t = state.clone();
            t.apply_pauli(&s);
            let overlap: f64 = state
                .amps
                .iter()
                .zip(&t.amps)
                .map(|(a, b)| (a.conj() * b).re)
                .sum();
            assert!((overlap - sign).abs() < 1e-10, "{sign} {s} -> {overlap}");
        }
    }

    #[test]
    fn tableau_tracks_random_circuits() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (tab, state) = random_clifford(4, 30, &mut rng);
            assert_stabilizes(&tab, &state);
        }
    }

    #[test]
    fn measurements_agree_with_statevector() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for trial in 0..100 {
            let (mut tab, mut state) = random_clifford(3, 20, &mut rng);
            let q = rng.random_range(0..3);
            let p1 = state.prob_one(q);
            let (outcome, was_random) =
                tab.measure(q, Basis::Z, None, || rng.random()).unwrap();
            if was_random {
                assert!((p1 - 0.5).abs() < 1e-10, "trial {trial}: p1={p1}");
                state.collapse(q, outcome).unwrap();
            } else {
                assert!(p1 < 1e-10 || p1 > 1.0 - 1e-10, "trial {trial}: p1={p1}");
                assert_eq!(outcome, p1 > 0.5);
                state.collapse(q, outcome).unwrap();
            }
            assert_stabilizes(&tab, &state);
        }
    }

    #[test]
    fn forced_deterministic_mismatch_errors() {
        let mut tab = Tableau::zero(1);
        let err = tab.measure(0, Basis::Z, Some(true), || false);
        assert!(err.is_err());
    }

    #[test]
    fn canonical_form_is_generating_set_independent() {
        // Same group from different generators: {ZZ, XX} vs {ZZ, -YY}.
        let a = vec![
            PauliRow::from_pauli(1.0, &"ZZ".parse().unwrap()),
            PauliRow::from_pauli(1.0, &"XX".parse().unwrap()),
        ];
        let mut second = PauliRow::from_pauli(1.0, &"ZZ".parse().unwrap());
        second.mul(&PauliRow::from_pauli(1.0, &"XX".parse().unwrap()));
        let b = vec![PauliRow::from_pauli(1.0, &"XX".parse().unwrap()), second];
        let ca: Vec<_> = canonicalize(&a).iter().map(|r| r.to_pauli().unwrap()).collect();
        let cb: Vec<_> = canonicalize(&b).iter().map(|r| r.to_pauli().unwrap()).collect();
        assert_eq!(ca, cb);
    }

    #[test]
    fn graph_extraction_round_trips_on_random_states() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = 4;
            let (tab, state) = random_clifford(n, 25, &mut rng);
            let g = to_graph_state(&tab.rows[n..]).unwrap();

            // Apply the recorded LC words to the statevector.
            let mut c = DynamicCircuit::new(n, 0);
            for q in 0..n {
                for &op in &g.lc[q] {
                    c.gate(if op == Clifford1::H { Gate::H } else { Gate::S }, &[q]);
                }
            }
            let mut mapped = state.clone();
            for inst in &c.instructions {
                if let crate::statevector::Instruction::Gate { gate, qubits, .. } = inst {
                    mapped.apply_gate(*gate, qubits);
                }
            }

            // Build the reference graph state.
            let mut gc = DynamicCircuit::new(n, 0);
            for q in 0..n {
                gc.gate(Gate::H, &[q]);
            }
            for &(a, b) in &g.edges {
                gc.gate(Gate::CZ, &[a, b]);
            }
            let graph = simulate::<ChaCha12Rng>(&gc, None, MeasurePolicy::Greedy).unwrap().state;
            assert!(mapped.fidelity(&graph) > 1.0 - 1e-10);
        }
    }

    #[test]
    fn restrict_after_measuring_out_a_qubit() {
        // GHZ on 3 qubits, measure qubit 0 in X (forced 0): remaining pair is
        // a Bell-like stabilizer state on {1,2}.
        let mut tab = Tableau::zero(3);
        tab.h(0);
        tab.cx(0, 1);
        tab.cx(0, 2);
        tab.measure(0, Basis::X, Some(false), || false).unwrap();
        let rows = restrict(&tab.rows[3..], &[1, 2]).unwrap();
        let canon = canonicalize(&rows);
        let paulis: Vec<String> = canon
            .iter()
            .map(|r| {
                let (s, p) = r.to_pauli().unwrap();
                format!("{}{}", if s < 0.0 { '-' } else { '+' }, p)
            })
            .collect();
        assert_eq!(paulis, vec!["+XX", "+ZZ"]);
    }
}
