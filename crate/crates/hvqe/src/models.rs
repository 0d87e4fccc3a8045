//! Benchmark Hamiltonians and exact references.
//!
//! Four families are provided:
//!
//! * the perturbed planar code on an `M×N` open-boundary plaquette grid,
//!   `H = -Σ_p P_p - Σ_s S_s + ξ Σ_i Z_i` with plaquette operators
//!   `P_p = Π X` and star operators `S_s = Π Z`;
//! * an SU(3) lattice gauge theory unit cell in the zero-baryon sector,
//!   `H = -1/2 (XZZ + ZXZ + ZZX) + m̃(3 - ΣZ) + 1/(6x)(3 - ΣZZ)`;
//! * a single-plaquette Z₂ gauge theory, `H = λ X⊗4 + (1/λ) ΣZ`, with the
//!   closed-form ground energy `E₀ = -√(16/λ² + λ²)`;
//! * a 4-qubit LiH molecular Hamiltonian (100 embedded Pauli terms,
//!   interatomic distance 1.6 Å).
//!
//! Besides construction, the module houses the dense diagonalization
//! oracle, second-order perturbative planar-code energies computed from
//! the unperturbed spectrum, and the graph-ansatz descriptions (ground
//!-state graph, local Cliffords and symmetry classes) used by the
//! gate-modified variational circuits.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::error::Error;
use crate::pauli::{Hamiltonian, Pauli, PauliString};
use crate::statevector::QuantumState;

/// Exact spectral data of a small Hamiltonian.
#[derive(Clone, Debug)]
pub struct Spectrum {
    /// All eigenvalues, ascending.
    pub energies: Vec<f64>,
    pub ground_state: QuantumState,
    /// `E₁ - E₀` flagged as near-degenerate below 1e-6.
    pub near_degenerate: bool,
}

impl Spectrum {
    pub fn e0(&self) -> f64 {
        self.energies[0]
    }
    pub fn e1(&self) -> f64 {
        self.energies[1]
    }
    pub fn e2(&self) -> f64 {
        self.energies[2]
    }
    /// First spectral gap `E₁ - E₀`.
    pub fn gap(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }
}

/// Dense Hermitian diagonalization (n ≤ 14).
pub fn exact_diagonalize(h: &Hamiltonian) -> Result<Spectrum, Error> {
    if h.n_qubits > 14 {
        return Err(Error::Simulation(format!(
            "refusing dense diagonalization of {} qubits",
            h.n_qubits
        )));
    }
    let dim = 1usize << h.n_qubits;
    let eig = SymmetricEigen::new(h.to_matrix());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let gs_col = eig.eigenvectors.column(order[0]);
    let ground_state = QuantumState {
        n_qubits: h.n_qubits,
        amps: gs_col.iter().copied().collect(),
    };
    let near_degenerate = dim > 1 && energies[1] - energies[0] < 1e-6;
    Ok(Spectrum { energies, ground_state, near_degenerate })
}

/// Perturbed planar-code Hamiltonian for the supported lattices
/// `(M,N) ∈ {(1,1),(2,1),(1,2),(2,2)}`; qubit labels follow the explicit
/// per-lattice term lists (0-based).
pub fn planar_code_hamiltonian(m: usize, n: usize, xi: f64) -> Result<Hamiltonian, Error> {
    use Pauli::{X, Z};
    // (stabilizer support, X-type?) lists per lattice, 0-based qubits.
    let (n_q, terms): (usize, Vec<(Vec<usize>, bool)>) = match (m, n) {
        (1, 1) => (
            4,
            vec![
                (vec![0, 1, 2, 3], true),
                (vec![0, 1], false),
                (vec![0, 2], false),
                (vec![1, 3], false),
                (vec![2, 3], false),
            ],
        ),
        (2, 1) => (
            7,
            vec![
                (vec![0, 1, 2, 3], true),
                (vec![3, 4, 5, 6], true),
                (vec![1, 3, 4], false),
                (vec![2, 3, 5], false),
                (vec![0, 1], false),
                (vec![0, 2], false),
                (vec![4, 6], false),
                (vec![5, 6], false),
            ],
        ),
        (1, 2) => (
            7,
            vec![
                (vec![0, 2, 3, 5], true),
                (vec![1, 3, 4, 6], true),
                (vec![0, 1, 3], false),
                (vec![3, 5, 6], false),
                (vec![0, 2], false),
                (vec![2, 5], false),
                (vec![1, 4], false),
                (vec![4, 6], false),
            ],
        ),
        (2, 2) => (
            12,
            vec![
                (vec![0, 2, 3, 5], true),
                (vec![1, 3, 4, 6], true),
                (vec![5, 7, 8, 10], true),
                (vec![6, 8, 9, 11], true),
                (vec![3, 5, 6, 8], false),
                (vec![2, 5, 7], false),
                (vec![4, 6, 9], false),
                (vec![0, 1, 3], false),
                (vec![8, 10, 11], false),
                (vec![0, 2], false),
                (vec![1, 4], false),
                (vec![7, 10], false),
                (vec![9, 11], false),
            ],
        ),
        _ => return Err(Error::Config(format!("unsupported planar-code lattice ({m},{n})"))),
    };
    let mut h = Hamiltonian::new(n_q);
    for (support, is_x) in terms {
        h.add_on(-1.0, &support, if is_x { X } else { Z });
    }
    for q in 0..n_q {
        h.add_on(xi, &[q], Z);
    }
    Ok(h)
}

/// Unperturbed planar-code ground energy: one `-1` per stabilizer operator.
pub fn pc_unperturbed_energy(m: usize, n: usize) -> f64 {
    -((m * n + (m - 1) * (n - 1) + 2 * (m + n - 2) + 4) as f64)
}

/// Second-order perturbative planar-code ground energy
/// `E₀⁽⁰⁾ + ξ² Σ_n |⟨n|ΣZ|0⟩|² / (E₀⁽⁰⁾ - E_n⁽⁰⁾)`, evaluated with the
/// dense spectrum of the unperturbed Hamiltonian.
pub fn pc_perturbative_energy(m: usize, n: usize, xi: f64) -> Result<f64, Error> {
    let h0 = planar_code_hamiltonian(m, n, 0.0)?;
    let dim = 1usize << h0.n_qubits;
    let eig = SymmetricEigen::new(h0.to_matrix());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let e0 = eig.eigenvalues[order[0]];
    if eig.eigenvalues[order[1]] - e0 < 1e-9 {
        return Err(Error::Simulation("degenerate unperturbed ground state".into()));
    }
    // v = (ΣZ)|0⟩ expressed in the computational basis (diagonal operator).
    let gs = eig.eigenvectors.column(order[0]);
    let nq = h0.n_qubits;
    let v: Vec<Complex64> = (0..dim)
        .map(|idx| {
            let z_sum = (0..nq)
                .map(|q| if idx >> (nq - 1 - q) & 1 == 1 { -1.0 } else { 1.0 })
                .sum::<f64>();
            gs[idx] * z_sum
        })
        .collect();
    let mut e2 = 0.0;
    for &k in &order[1..] {
        let amp: Complex64 = eig
            .eigenvectors
            .column(k)
            .iter()
            .zip(&v)
            .map(|(a, b)| a.conj() * b)
            .sum();
        e2 += amp.norm_sqr() / (e0 - eig.eigenvalues[k]);
    }
    Ok(e0 + xi * xi * e2)
}

/// Z₂ gauge-theory Hamiltonian `λ X⊗4 + (1/λ) ΣZ` on one plaquette.
pub fn z2_hamiltonian(lambda: f64) -> Result<Hamiltonian, Error> {
    if lambda <= 0.0 {
        return Err(Error::Config("Z2 coupling must be positive".into()));
    }
    let mut h = Hamiltonian::new(4);
    h.add(lambda, PauliString(vec![Pauli::X; 4]));
    for q in 0..4 {
        h.add_on(1.0 / lambda, &[q], Pauli::Z);
    }
    Ok(h)
}

/// Plaquette observable `X⊗4` of the Z₂ model.
pub fn z2_plaquette_op() -> Hamiltonian {
    let mut h = Hamiltonian::new(4);
    h.add(1.0, PauliString(vec![Pauli::X; 4]));
    h
}

/// Electric-field observable `ΣZ` of the Z₂ model.
pub fn z2_efield_op() -> Hamiltonian {
    let mut h = Hamiltonian::new(4);
    for q in 0..4 {
        h.add_on(1.0, &[q], Pauli::Z);
    }
    h
}

/// Closed-form Z₂ ground state and energy:
/// `E₀ = -√(16/λ² + λ²)` with the two-amplitude state in the `{|0000⟩,
/// |1111⟩}` parity sector.
pub fn z2_exact_gs(lambda: f64) -> Result<(f64, QuantumState), Error> {
    if lambda <= 0.0 {
        return Err(Error::Config("Z2 coupling must be positive".into()));
    }
    let e0 = -(16.0 / (lambda * lambda) + lambda * lambda).sqrt();
    let root = (16.0 + lambda.powi(4)).sqrt();
    let norm = (0.5 + 2.0 / root).sqrt();
    let a = norm * (4.0 - root) / (lambda * lambda);
    let b = norm;
    let mut amps = vec![Complex64::new(0.0, 0.0); 16];
    amps[0] = Complex64::new(a, 0.0);
    amps[15] = Complex64::new(b, 0.0);
    Ok((e0, QuantumState { n_qubits: 4, amps }))
}

/// SU(3) unit-cell Hamiltonian in the zero-baryon sector.
pub fn su3_hamiltonian(m_tilde: f64, x: f64) -> Result<Hamiltonian, Error> {
    use Pauli::{X, Z};
    if x <= 0.0 {
        return Err(Error::Config("SU(3) coupling x must be positive".into()));
    }
    let mut h = Hamiltonian::new(3);
    h.constant += 3.0 * m_tilde + 1.0 / (2.0 * x);
    for i in 0..3 {
        let mut kin = vec![Z; 3];
        kin[i] = X;
        h.add(-0.5, PauliString(kin));
        h.add_on(-m_tilde, &[i], Z);
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        h.add_on(-1.0 / (6.0 * x), &[i, j], Z);
    }
    Ok(h)
}

/// SU(3) occupation-number observable `N = 3 - ΣZ`.
pub fn su3_number_op() -> Hamiltonian {
    let mut h = Hamiltonian::new(3);
    h.constant = 3.0;
    for q in 0..3 {
        h.add_on(-1.0, &[q], Pauli::Z);
    }
    h
}

/// Consistency-check observable `N' = (1/3) Σ_{i<j} (1-Z_i)(1-Z_j)`.
pub fn su3_number_op_prime() -> Hamiltonian {
    use Pauli::Z;
    let mut h = Hamiltonian::new(3);
    h.constant = 1.0;
    for q in 0..3 {
        h.add_on(-2.0 / 3.0, &[q], Z);
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        h.add_on(1.0 / 3.0, &[i, j], Z);
    }
    h
}

/// 4-qubit LiH Hamiltonian at 1.6 Å: 100 Pauli terms with the identity
/// folded into the constant.  The ground state is dominated by the
/// two-amplitude reference `0.9877|0011⟩ - 0.1154|1100⟩`.
pub fn lih_hamiltonian() -> Result<Hamiltonian, Error> {
    let mut h = Hamiltonian::new(4);
    let mut count = 0usize;
    for line in LIH_TABLE.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (name, coeff) = line
            .split_once(' ')
            .ok_or_else(|| Error::Parse(format!("bad LiH table line: {line}")))?;
        let s: PauliString = name.parse()?;
        let c: f64 = coeff.parse().map_err(|_| Error::Parse(format!("bad LiH coeff: {line}")))?;
        h.add(c, s);
        count += 1;
    }
    if count != 100 || (h.constant - -7.012).abs() > 1e-12 {
        return Err(Error::Parse("LiH table failed its embedded checksum".into()));
    }
    Ok(h)
}

const LIH_TABLE: &str = "
IIIZ -0.0938
IIZX -0.00318
IIIX 0.00318
IIXX -0.00125
IIYY 0.00125
IIZZ -0.212
IIXZ 0.0192
IIXI 0.0192
IIZI 0.358
IZII 0.0938
ZXII 0.00318
IXII 0.00318
XXII -0.00125
YYII 0.00125
ZZII -0.212
XZII -0.0192
XIII 0.0192
ZIII -0.358
IZIZ -0.122
IZZX 0.0121
IZIX -0.0121
IZXX 0.0317
IZYY -0.0317
IXIZ 0.0121
ZXIZ 0.0121
IXZX -0.00327
ZXZX -0.00327
IXIX 0.00327
ZXIX 0.00327
IXXX -0.00865
ZXXX -0.00865
IXYY 0.00865
ZXYY 0.00865
YYIZ 0.0317
XXIZ -0.0317
YYZX -0.00865
XXZX 0.00865
YYIX 0.00865
XXIX -0.00865
YYXX -0.031
XXXX 0.031
YYYY 0.031
XXYY -0.031
ZZIZ 0.0559
ZZZX 0.00187
ZZIX -0.00187
ZZXX 0.0031
ZZYY -0.0031
XIIZ 0.0128
XZIZ -0.0128
XIZX -0.00235
XZZX 0.00235
XIIX 0.00235
XZIX -0.00235
XIXX -0.00798
XZXX 0.00797
XIYY 0.00797
XZYY -0.00797
ZIIZ 0.113
ZIZX -0.0108
ZIIX 0.0108
ZIXX -0.0336
ZIYY 0.0336
IZZZ -0.0559
IZXZ -0.0128
IZXI -0.0128
IXZZ -0.00187
ZXZZ -0.00187
IXXZ 0.00235
ZXXZ 0.00235
IXXI 0.00235
ZXXI 0.00235
YYZZ -0.0031
XXZZ 0.0031
YYXZ 0.00798
XXXZ -0.00798
YYXI 0.00798
XXXI -0.00798
ZZZZ 0.0845
ZZXZ -0.00899
ZZXI -0.00899
XIZZ -0.00899
XZZZ 0.00899
XIXZ 0.00661
XZXZ -0.00661
XIXI 0.00661
XZXI -0.00661
ZIZZ 0.0604
ZIXZ 0.011
ZIXI 0.011
IZZI 0.113
IXZI -0.0108
ZXZI -0.0108
YYZI -0.0336
XXZI 0.0336
ZZZI -0.0604
XIZI -0.011
XZZI -0.011
ZIZI -0.113
IIII -7.012
";

/// Amplitude overlap `|⟨ψ|t⟩|/‖t‖` with the quoted LiH reference state
/// `0.9877|0011⟩ - 0.1154|1100⟩` (an unnormalized 2-amplitude truncation of
/// the full ground state).
pub fn lih_reference_overlap(state: &QuantumState) -> f64 {
    let mut t = vec![Complex64::new(0.0, 0.0); 16];
    t[0b0011] = Complex64::new(0.9877, 0.0);
    t[0b1100] = Complex64::new(-0.1154, 0.0);
    let norm: f64 = t.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let dot: Complex64 =
        state.amps.iter().zip(&t).map(|(a, b)| a.conj() * b).sum();
    dot.norm() / norm
}

/// Description of a gate-modified graph ansatz: the ground-state graph of a
/// planar-code lattice, its local-Clifford decoration, and the symmetry
/// classes tying equivalent rotation and edge-modification slots together.
#[derive(Clone, Debug)]
pub struct GraphAnsatzSpec {
    pub n_qubits: usize,
    /// Directed as (hub, leaf): the per-edge modification rotation acts on
    /// the second qubit.
    pub edges: Vec<(usize, usize)>,
    /// Qubits carrying an H in the graph-state decoration.
    pub lc: Vec<usize>,
    /// Symmetry class of each qubit's rotation slots.
    pub vertex_class: Vec<usize>,
    pub n_vertex_classes: usize,
    /// Symmetry class of each edge's modification slots.
    pub edge_class: Vec<usize>,
    pub n_edge_classes: usize,
    /// Modification layers L.
    pub layers: usize,
}

impl GraphAnsatzSpec {
    /// Free parameters: two rotation layers sharing vertex classes plus L
    /// modification layers sharing edge classes.
    pub fn n_parameters(&self) -> usize {
        2 * self.n_vertex_classes + self.layers * self.n_edge_classes
    }
}

/// Graph-ansatz description for the supported planar-code lattices; the
/// parameter counts reduce to 4+L, 8+3L, 6+2L and 12+6L.
pub fn pc_graph_ansatz(m: usize, n: usize, layers: usize) -> Result<GraphAnsatzSpec, Error> {
    if layers == 0 {
        return Err(Error::Config("ansatz needs at least one layer".into()));
    }
    let spec = match (m, n) {
        (1, 1) => GraphAnsatzSpec {
            n_qubits: 4,
            edges: vec![(0, 1), (0, 2), (0, 3)],
            lc: vec![1, 2, 3],
            vertex_class: vec![0, 1, 1, 1],
            n_vertex_classes: 2,
            edge_class: vec![0, 0, 0],
            n_edge_classes: 1,
            layers,
        },
        (2, 1) => GraphAnsatzSpec {
            n_qubits: 7,
            edges: vec![(0, 1), (0, 2), (0, 3), (6, 4), (6, 5), (6, 3)],
            lc: vec![1, 2, 3, 4, 5],
            // 180° rotation swaps the two plaquettes: 0↔6, 1↔5, 2↔4.
            vertex_class: vec![0, 1, 2, 3, 2, 1, 0],
            n_vertex_classes: 4,
            edge_class: vec![0, 1, 2, 1, 0, 2],
            n_edge_classes: 3,
            layers,
        },
        (1, 2) => GraphAnsatzSpec {
            n_qubits: 7,
            edges: vec![(2, 0), (2, 5), (2, 3), (4, 1), (4, 6), (4, 3)],
            lc: vec![0, 1, 3, 5, 6],
            // Reflections identify the four outer leaves and the two hubs.
            vertex_class: vec![0, 0, 1, 2, 1, 0, 0],
            n_vertex_classes: 3,
            edge_class: vec![0, 0, 1, 0, 0, 1],
            n_edge_classes: 2,
            layers,
        },
        (2, 2) => GraphAnsatzSpec {
            n_qubits: 12,
            edges: vec![
                (0, 2),
                (0, 3),
                (0, 5),
                (1, 3),
                (1, 4),
                (1, 6),
                (10, 5),
                (10, 7),
                (10, 8),
                (11, 6),
                (11, 8),
                (11, 9),
            ],
            lc: vec![2, 3, 4, 5, 6, 7, 8, 9],
            // 180° rotation: 0↔11, 1↔10, 2↔9, 3↔8, 4↔7, 5↔6.
            vertex_class: vec![0, 1, 2, 3, 4, 5, 5, 4, 3, 2, 1, 0],
            n_vertex_classes: 6,
            edge_class: vec![0, 1, 2, 3, 4, 5, 5, 4, 3, 2, 1, 0],
            n_edge_classes: 6,
            layers,
        },
        _ => return Err(Error::Config(format!("unsupported planar-code lattice ({m},{n})"))),
    };
    Ok(spec)
}
