//! Pauli strings, weighted Pauli-sum Hamiltonians and qubit-wise commuting
//! measurement groups.
//!
//! Conventions used throughout the crate:
//!
//! * qubit 0 is the *leftmost* character of a Pauli string and the most
//!   significant bit of a computational-basis index, so `to_matrix` builds
//!   `P_0 ⊗ P_1 ⊗ … ⊗ P_{n-1}`;
//! * the identity part of a Hamiltonian is kept as a separate constant and
//!   never enters measurement grouping.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A single-qubit Pauli operator.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// 2x2 matrix of the operator.
    pub fn matrix(self) -> DMatrix<Complex64> {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::I => DMatrix::from_row_slice(2, 2, &[l, o, o, l]),
            Pauli::X => DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
            Pauli::Y => DMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
            Pauli::Z => DMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
        }
    }

    /// Single-qubit product `self * other` as `(phase exponent, result)`,
    /// where the phase is `i^k`.
    fn mul(self, other: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) => (0, p),
            (p, I) => (0, p),
            (X, X) | (Y, Y) | (Z, Z) => (0, I),
            (X, Y) => (1, Z),
            (Y, X) => (3, Z),
            (Y, Z) => (1, X),
            (Z, Y) => (3, X),
            (Z, X) => (1, Y),
            (X, Z) => (3, Y),
        }
    }

    fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn from_char(c: char) -> Result<Pauli, Error> {
        match c {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            _ => Err(Error::Parse(format!("invalid Pauli character '{c}'"))),
        }
    }
}

/// An n-qubit tensor product of single-qubit Paulis (no phase).
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    /// The all-identity string on `n` qubits.
    pub fn identity(n: usize) -> Self {
        PauliString(vec![Pauli::I; n])
    }

    /// A string with `p` on the given qubits and identity elsewhere.
    pub fn embed(n: usize, qubits: &[usize], p: Pauli) -> Self {
        let mut s = vec![Pauli::I; n];
        for &q in qubits {
            s[q] = p;
        }
        PauliString(s)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }

    /// Qubits on which the string acts non-trivially.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&q| self.0[q] != Pauli::I).collect()
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&p| p != Pauli::I).count()
    }

    /// Product `self * other` as a phase `i^k` and a new string.
    pub fn multiply(&self, other: &PauliString) -> (Complex64, PauliString) {
        assert_eq!(self.len(), other.len(), "length mismatch in Pauli product");
        let mut k: u8 = 0;
        let mut out = Vec::with_capacity(self.len());
        for (&a, &b) in self.0.iter().zip(&other.0) {
            let (dk, p) = a.mul(b);
            k = (k + dk) % 4;
            out.push(p);
        }
        let phase = match k {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        (phase, PauliString(out))
    }

    /// Whether the two strings commute as operators.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let anti = self
            .0
            .iter()
            .zip(&other.0)
            .filter(|(&a, &b)| a != Pauli::I && b != Pauli::I && a != b)
            .count();
        anti % 2 == 0
    }

    /// Qubit-wise compatibility: on every qubit the factors are equal or one
    /// is the identity.  Compatible strings can be measured from the same
    /// single-basis measurement.
    pub fn qubitwise_compatible(&self, other: &PauliString) -> bool {
        self.0
            .iter()
            .zip(&other.0)
            .all(|(&a, &b)| a == Pauli::I || b == Pauli::I || a == b)
    }

    /// Dense matrix with qubit 0 as the most significant tensor factor.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for &p in &self.0 {
            m = m.kronecker(&p.matrix());
        }
        m
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &p in &self.0 {
            write!(f, "{}", p.to_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        s.chars().map(Pauli::from_char).collect::<Result<_, _>>().map(PauliString)
    }
}

/// One weighted term of a Pauli-sum Hamiltonian.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub string: PauliString,
}

/// A Hermitian operator `constant + Σ_j c_j P_j` on `n_qubits` qubits.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Hamiltonian {
    pub n_qubits: usize,
    pub constant: f64,
    pub terms: Vec<PauliTerm>,
}

impl Hamiltonian {
    pub fn new(n_qubits: usize) -> Self {
        Hamiltonian { n_qubits, constant: 0.0, terms: Vec::new() }
    }

    /// Add `coeff * string`, folding identity strings into the constant and
    /// merging duplicate strings.
    pub fn add(&mut self, coeff: f64, string: PauliString) {
        assert_eq!(string.len(), self.n_qubits, "term length mismatch");
        if string.is_identity() {
            self.constant += coeff;
            return;
        }
        if let Some(t) = self.terms.iter_mut().find(|t| t.string == string) {
            t.coeff += coeff;
        } else {
            self.terms.push(PauliTerm { coeff, string });
        }
    }

    /// Convenience: add `coeff * p` on the given qubits.
    pub fn add_on(&mut self, coeff: f64, qubits: &[usize], p: Pauli) {
        self.add(coeff, PauliString::embed(self.n_qubits, qubits, p));
    }

    /// Dense matrix representation (qubit 0 = most significant factor).
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for i in 0..dim {
            m[(i, i)] += Complex64::new(self.constant, 0.0);
        }
        for t in &self.terms {
            m += t.string.to_matrix() * Complex64::new(t.coeff, 0.0);
        }
        m
    }

    /// Text serialization: one `coeff pauli_string` per line, the constant as
    /// a pure-identity line.  `#` starts a comment.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.constant != 0.0 {
            out.push_str(&format!(
                "{:+.16e} {}\n",
                self.constant,
                PauliString::identity(self.n_qubits)
            ));
        }
        for t in &self.terms {
            out.push_str(&format!("{:+.16e} {}\n", t.coeff, t.string));
        }
        out
    }

    /// Parse the text format produced by [`Hamiltonian::to_text`].
    pub fn from_text(text: &str) -> Result<Self, Error> {
        let mut terms: Vec<(f64, PauliString)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (coeff, string) = match (parts.next(), parts.next(), parts.next()) {
                (Some(c), Some(s), None) => {
                    let coeff: f64 = c.parse().map_err(|_| {
                        Error::Parse(format!("line {}: bad coefficient '{c}'", lineno + 1))
                    })?;
                    (coeff, s.parse::<PauliString>()?)
                }
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected 'coeff pauli_string'",
                        lineno + 1
                    )))
                }
            };
            terms.push((coeff, string));
        }
        let n = terms
            .first()
            .map(|(_, s)| s.len())
            .ok_or_else(|| Error::Parse("empty Hamiltonian".into()))?;
        let mut h = Hamiltonian::new(n);
        for (coeff, string) in terms {
            if string.len() != n {
                return Err(Error::Parse("inconsistent Pauli string lengths".into()));
            }
            h.add(coeff, string);
        }
        Ok(h)
    }
}

/// A set of mutually qubit-wise compatible terms measured from one basis.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasurementGroup {
    /// Union basis: on every qubit the common non-identity factor of the
    /// group members (identity where no member acts).
    pub basis: PauliString,
    /// Indices into `Hamiltonian::terms` of the members of this group.
    pub members: Vec<usize>,
}

/// Greedy qubit-wise commuting grouping.
///
/// Terms are visited in order of decreasing `|coeff|` and placed into the
/// first group whose basis they are compatible with (first-fit); a term that
/// fits no existing group opens a new one.  In a second pass every term is
/// additionally attached to *every* group whose final basis it is compatible
/// with, so a term may belong to several groups and its measurement records
/// can be shared between them.
pub fn group_commuting(h: &Hamiltonian) -> Vec<MeasurementGroup> {
    let mut order: Vec<usize> = (0..h.terms.len()).collect();
    order.sort_by(|&a, &b| {
        h.terms[b]
            .coeff
            .abs()
            .partial_cmp(&h.terms[a].coeff.abs())
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut bases: Vec<PauliString> = Vec::new();
    for &ti in &order {
        let s = &h.terms[ti].string;
        let mut placed = false;
        for basis in bases.iter_mut() {
            if basis.qubitwise_compatible(s) {
                // Extend the basis with this term's factors.
                for q in 0..basis.len() {
                    if basis.0[q] == Pauli::I {
                        basis.0[q] = s.0[q];
                    }
                }
                placed = true;
                break;
            }
        }
        if !placed {
            bases.push(s.clone());
        }
    }

    bases
        .into_iter()
        .map(|basis| {
            let members = (0..h.terms.len())
                .filter(|&ti| basis.qubitwise_compatible(&h.terms[ti].string))
                .collect();
            MeasurementGroup { basis, members }
        })
        .collect()
}

/// For every term, the list of groups containing it and the shot-overlap
/// ratios `R_k = N_k / Σ_l N_l` over those groups, given per-group shot
/// counts `shots[k]`.
pub fn overlap_ratios(
    groups: &[MeasurementGroup],
    n_terms: usize,
    shots: &[usize],
) -> Vec<BTreeMap<usize, f64>> {
    assert_eq!(groups.len(), shots.len());
    let mut out = vec![BTreeMap::new(); n_terms];
    for ti in 0..n_terms {
        let total: usize = groups
            .iter()
            .zip(shots)
            .filter(|(g, _)| g.members.contains(&ti))
            .map(|(_, &n)| n)
            .sum();
        if total == 0 {
            continue;
        }
        for (k, (g, &n)) in groups.iter().zip(shots).enumerate() {
            if g.members.contains(&ti) {
                out[ti].insert(k, n as f64 / total as f64);
            }
        }
    }
    out
}
