//! Shot-based energy estimation with mitigation.
//!
//! A Hamiltonian `H = c₀ + Σ_j c_j Ô_j` is estimated by splitting its terms
//! into qubit-wise commuting groups, dividing the shot budget equally among
//! the `K` groups, and measuring each group in its shared basis.  A term
//! shared by several groups is combined with the ratios `R_k = N_k / Σ N_k`.
//! The reported uncertainty keeps intra-group correlations:
//!
//! `Var̃(Ĥ) = Σ_k (1/N_k) Σ_{i,j ∈ G_k} c_i c_j R_ik R_jk Cov_k(Ô_i, Ô_j)`
//!
//! which expands to the per-group form
//! `c_k²Var(Ô_k) + Σ_ℓ [c_ℓ²R_ℓ²Var(Ô_ℓ) + 2 c_k c_ℓ R_k Cov(Ô_k, Ô_ℓ)]`.
//!
//! Three mitigation layers are provided:
//!
//! * readout mitigation through a column-stochastic calibration matrix `M`
//!   (column `x` = measured distribution when preparing `|x⟩`), inverting
//!   counts by constrained least squares `argmin ‖Mp − c‖₂, p ≥ 0, Σp = 1`;
//! * Pauli twirling, dressing every CX with one of the 16 action-preserving
//!   Pauli pairs so coherent two-qubit errors average to a Pauli channel;
//! * self-mitigation: per measurement group, a Clifford proxy circuit with
//!   every rotation angle snapped to the nearest multiple of π/2 shares the
//!   physical circuit's CX skeleton, its exact expectations are known to be
//!   ±1, and
//!   `⟨Ô⟩_true = ⟨Ô⟩_phys,meas · (⟨Ô⟩_mitig,true / ⟨Ô⟩_mitig,meas)^κ`
//!   cancels the common depolarization (κ = CX-count ratio = 1).

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::Error;
use crate::pauli::{group_commuting, overlap_ratios, Hamiltonian, Pauli, PauliString};
use crate::statevector::{
    marginalize, run_counts, simulate, Counts, DynamicCircuit, Gate, Instruction, MeasurePolicy,
    NoiseModel, QuantumState,
};

/// Column-stochastic readout-confusion matrix: `m[(y, x)]` is the
/// probability of reading `y` after preparing basis state `x`.
#[derive(Clone, Debug)]
pub struct CalibrationMatrix {
    pub n: usize,
    pub m: DMatrix<f64>,
}

/// Empirical calibration matrix from `shots` preparations of each of the
/// `2ⁿ` basis states under the given readout noise.
pub fn build_calibration_matrix<R: Rng>(
    n: usize,
    noise: Option<&NoiseModel>,
    shots: usize,
    rng: &mut R,
) -> Result<CalibrationMatrix, Error> {
    if n > 10 {
        return Err(Error::Config(format!("calibration matrix over {n} qubits is too large")));
    }
    if shots == 0 {
        return Err(Error::Config("calibration needs at least one shot".into()));
    }
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        let mut c = DynamicCircuit::new(n, n);
        for q in 0..n {
            if x >> (n - 1 - q) & 1 == 1 {
                c.gate(Gate::X, &[q]);
            }
            c.measure(q, q);
        }
        let counts = run_counts(&c, shots, None, noise, rng)?;
        for (key, &k) in &counts {
            let y = usize::from_str_radix(key, 2).expect("binary count key");
            m[(y, x)] += k as f64 / shots as f64;
        }
    }
    Ok(CalibrationMatrix { n, m })
}

/// Normalized count vector over `2ⁿ` outcomes (key = bitstring).
fn counts_to_probs(counts: &Counts, n: usize) -> Vec<f64> {
    let total: usize = counts.values().sum();
    let mut p = vec![0.0; 1 << n];
    for (key, &k) in counts {
        let idx = usize::from_str_radix(key, 2).expect("binary count key");
        p[idx] = k as f64 / total as f64;
    }
    p
}

/// Constrained least-squares readout inversion: the distribution `p`
/// minimizing `‖Mp − c‖₂` subject to `p ≥ 0`, `Σp = 1` (active-set
/// iteration, deterministic).
pub fn mitigate_counts(cal: &CalibrationMatrix, counts: &Counts) -> Result<Vec<f64>, Error> {
    let dim = 1usize << cal.n;
    let svd = cal.m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 0.0 || smax / smin > 1e12 {
        return Err(Error::Simulation("calibration matrix is numerically singular".into()));
    }
    let c = DVector::from_vec(counts_to_probs(counts, cal.n));
    let mut zeroed = vec![false; dim];
    loop {
        let free: Vec<usize> = (0..dim).filter(|&i| !zeroed[i]).collect();
        if free.is_empty() {
            return Err(Error::Simulation("readout mitigation emptied the support".into()));
        }
        let k = free.len();
        // KKT system for min ‖A p_F − c‖² s.t. Σ p_F = 1.
        let a = cal.m.select_columns(free.iter());
        let ata = a.transpose() * &a;
        let atc = a.transpose() * &c;
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        kkt.view_mut((0, 0), (k, k)).copy_from(&ata);
        for i in 0..k {
            kkt[(i, k)] = 1.0;
            kkt[(k, i)] = 1.0;
        }
        let mut rhs = DVector::zeros(k + 1);
        rhs.rows_mut(0, k).copy_from(&atc);
        rhs[k] = 1.0;
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Simulation("singular KKT system in readout mitigation".into()))?;
        if let Some(worst) = (0..k).filter(|&i| sol[i] < -1e-12).min_by(|&a, &b| {
            sol[a].partial_cmp(&sol[b]).unwrap()
        }) {
            zeroed[free[worst]] = true;
            continue;
        }
        let mut p = vec![0.0; dim];
        for (i, &idx) in free.iter().enumerate() {
            p[idx] = sol[i].max(0.0);
        }
        let total: f64 = p.iter().sum();
        for v in &mut p {
            *v /= total;
        }
        return Ok(p);
    }
}

fn pauli_gate(x: bool, z: bool) -> Option<Gate> {
    match (x, z) {
        (false, false) => None,
        (true, false) => Some(Gate::X),
        (false, true) => Some(Gate::Z),
        (true, true) => Some(Gate::Y),
    }
}

/// Dress every CX with a uniformly random action-preserving Pauli pair:
/// pre-Paulis `(P_c, P_t)` and their CX conjugates after, leaving the
/// noiseless circuit unchanged up to a global phase.
pub fn pauli_twirl_cx<R: Rng>(circuit: &DynamicCircuit, rng: &mut R) -> DynamicCircuit {
    let mut out = DynamicCircuit::new(circuit.n_qubits, circuit.n_cbits);
    for inst in &circuit.instructions {
        match inst {
            Instruction::Gate { gate: Gate::CX, qubits, cond } => {
                let (xc, zc, xt, zt) =
                    (rng.random::<bool>(), rng.random(), rng.random(), rng.random());
                let mut push = |gate: Option<Gate>, q: usize| {
                    if let Some(g) = gate {
                        match cond {
                            Some((cb, v)) => out.gate_if(g, &[q], *cb, *v),
                            None => out.gate(g, &[q]),
                        };
                    }
                };
                push(pauli_gate(xc, zc), qubits[0]);
                push(pauli_gate(xt, zt), qubits[1]);
                out.instructions.push(inst.clone());
                // CX propagation: X_c → X_c X_t, Z_t → Z_c Z_t.
                let mut push = |gate: Option<Gate>, q: usize| {
                    if let Some(g) = gate {
                        match cond {
                            Some((cb, v)) => out.gate_if(g, &[q], *cb, *v),
                            None => out.gate(g, &[q]),
                        };
                    }
                };
                push(pauli_gate(xc, zc ^ zt), qubits[0]);
                push(pauli_gate(xt ^ xc, zt), qubits[1]);
            }
            other => out.instructions.push(other.clone()),
        }
    }
    out
}

/// `⟨Ô⟩_phys,meas / ⟨Ô⟩_mitig,meas^κ` with `⟨Ô⟩_mitig,true = 1`.
pub fn self_mitigate(phys_meas: f64, mitig_meas: f64, kappa: f64) -> Result<f64, Error> {
    if mitig_meas.abs() < 0.05 {
        return Err(Error::Simulation(format!(
            "mitigation expectation {mitig_meas:.4} too small; amplification refused"
        )));
    }
    if kappa <= 0.0 {
        return Err(Error::Config("self-mitigation exponent must be positive".into()));
    }
    let factor = if kappa.fract() == 0.0 {
        mitig_meas.powi(kappa as i32)
    } else if mitig_meas > 0.0 {
        mitig_meas.powf(kappa)
    } else {
        return Err(Error::Simulation("negative mitigation base with fractional κ".into()));
    };
    Ok(phys_meas / factor)
}

/// First-order error propagation through the self-mitigation quotient:
/// `(1/m)^{2κ} v_p + κ² (p/m^{κ+1})² v_m`.
pub fn propagate_self_mitigation_error(
    phys: (f64, f64),
    mitig: (f64, f64),
    kappa: f64,
) -> Result<f64, Error> {
    let (p, vp) = phys;
    let (m, vm) = mitig;
    if m.abs() < 0.05 {
        return Err(Error::Simulation("mitigation expectation too small for propagation".into()));
    }
    Ok((1.0 / m.abs()).powf(2.0 * kappa) * vp
        + kappa * kappa * (p / m.abs().powf(kappa + 1.0)).powi(2) * vm)
}

/// Mitigation switches for [`estimate_energy`].
#[derive(Clone, Debug, Default)]
pub struct MitigationConfig {
    /// Readout inversion through a pre-built calibration matrix.
    pub readout: Option<CalibrationMatrix>,
    /// Self-mitigation exponent κ (CX-count ratio; the proxy shares the
    /// physical skeleton, so κ = 1).
    pub self_mitigation: Option<f64>,
    /// Pauli-twirl every CX, re-randomized in batches within the shot budget.
    pub twirl: bool,
}

impl MitigationConfig {
    pub fn none() -> Self {
        Self::default()
    }
}

/// Per-group sample statistics of one estimation run.
#[derive(Clone, Debug)]
pub struct GroupEstimate {
    pub basis: PauliString,
    pub shots: usize,
    /// Indices into `Hamiltonian::terms`.
    pub members: Vec<usize>,
    /// Per-member sample mean of the ±1 observable.
    pub means: Vec<f64>,
    /// Per-shot covariance matrix of the members.
    pub cov: Vec<Vec<f64>>,
}

/// Result of a shot-based energy estimate.
#[derive(Clone, Debug)]
pub struct EstimateResult {
    pub mean: f64,
    pub variance: f64,
    /// True when the covariance-aware variance was clamped up to zero.
    pub variance_clamped: bool,
    /// Combined per-term means (after ratio weighting and mitigation).
    pub term_means: Vec<f64>,
    pub groups: Vec<GroupEstimate>,
}

impl EstimateResult {
    pub fn sigma(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Covariance-aware total variance over the group estimates; clamped at
/// zero (flag in the second slot).
pub fn variance_with_covariance(h: &Hamiltonian, groups: &[GroupEstimate]) -> (f64, bool) {
    let shots: Vec<usize> = groups.iter().map(|g| g.shots).collect();
    let plain: Vec<crate::pauli::MeasurementGroup> = groups
        .iter()
        .map(|g| crate::pauli::MeasurementGroup { basis: g.basis.clone(), members: g.members.clone() })
        .collect();
    let ratios = overlap_ratios(&plain, h.terms.len(), &shots);
    let mut var = 0.0;
    for (k, g) in groups.iter().enumerate() {
        let mut acc = 0.0;
        for (a, &i) in g.members.iter().enumerate() {
            for (b, &j) in g.members.iter().enumerate() {
                acc += h.terms[i].coeff
                    * h.terms[j].coeff
                    * ratios[i][&k]
                    * ratios[j][&k]
                    * g.cov[a][b];
            }
        }
        var += acc / g.shots as f64;
    }
    if var < 0.0 {
        (0.0, true)
    } else {
        (var, false)
    }
}

/// Basis-change gates mapping the group basis onto Z-measurements
/// (X → H, Y → S†H).
fn append_readout(circuit: &mut DynamicCircuit, basis: &PauliString, cbit_base: usize) {
    for (q, &p) in basis.0.iter().enumerate() {
        match p {
            Pauli::X => {
                circuit.gate(Gate::H, &[q]);
            }
            Pauli::Y => {
                circuit.gate(Gate::Sdg, &[q]);
                circuit.gate(Gate::H, &[q]);
            }
            _ => {}
        }
    }
    for q in 0..basis.len() {
        circuit.measure(q, cbit_base + q);
    }
}

/// ±1 eigenvalue of a term's outcome on bitstring `idx`.
fn eigenvalue(string: &PauliString, idx: usize, n: usize) -> f64 {
    let mut sign = 1.0;
    for (q, &p) in string.0.iter().enumerate() {
        if p != Pauli::I && idx >> (n - 1 - q) & 1 == 1 {
            sign = -sign;
        }
    }
    sign
}

/// Snap every rotation angle to the nearest multiple of π/2.
fn snap_angles(circuit: &DynamicCircuit) -> DynamicCircuit {
    let snap = |t: f64| (t / std::f64::consts::FRAC_PI_2).round() * std::f64::consts::FRAC_PI_2;
    let mut out = circuit.clone();
    for inst in &mut out.instructions {
        if let Instruction::Gate { gate, .. } = inst {
            *gate = match *gate {
                Gate::RX(t) => Gate::RX(snap(t)),
                Gate::RY(t) => Gate::RY(snap(t)),
                Gate::RZ(t) => Gate::RZ(snap(t)),
                g => g,
            };
        }
    }
    out
}

/// Exact noiseless term expectations of a (byproduct-corrected) circuit,
/// identity-padded onto any ancilla qubits.
fn exact_term_expectations(circuit: &DynamicCircuit, h: &Hamiltonian) -> Result<Vec<f64>, Error> {
    let out = simulate::<rand::rngs::StdRng>(circuit, None, MeasurePolicy::Greedy)?;
    Ok(h.terms
        .iter()
        .map(|t| {
            let mut s = PauliString::identity(circuit.n_qubits);
            s.0[..h.n_qubits].copy_from_slice(&t.string.0);
            out.state.pauli_expectation(&s)
        })
        .collect())
}

/// Clifford self-mitigation proxy: the physical circuit with every rotation
/// snapped to the nearest multiple of π/2, adjusted by ±π/2 greedily until
/// every Hamiltonian term has exact expectation ±1.  Returns the proxy and
/// its exact per-term expectations.
pub fn build_mitigation_circuit(
    circuit: &DynamicCircuit,
    h: &Hamiltonian,
) -> Result<(DynamicCircuit, Vec<f64>), Error> {
    let good = |e: &[f64]| e.iter().filter(|v| v.abs() > 0.99).count();
    let mut best = snap_angles(circuit);
    let mut best_e = exact_term_expectations(&best, h)?;
    let rot_slots: Vec<usize> = best
        .instructions
        .iter()
        .enumerate()
        .filter(|(_, i)| {
            matches!(
                i,
                Instruction::Gate { gate: Gate::RX(_) | Gate::RY(_) | Gate::RZ(_), .. }
            )
        })
        .map(|(i, _)| i)
        .collect();
    let polish = |start: DynamicCircuit,
                  start_e: Vec<f64>|
     -> Result<(DynamicCircuit, Vec<f64>), Error> {
        let mut best = start;
        let mut best_e = start_e;
        for _pass in 0..2 {
            if good(&best_e) == h.terms.len() {
                break;
            }
            for &slot in &rot_slots {
                for delta in [std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2] {
                    let mut cand = best.clone();
                    if let Instruction::Gate { gate, .. } = &mut cand.instructions[slot] {
                        *gate = match *gate {
                            Gate::RX(t) => Gate::RX(t + delta),
                            Gate::RY(t) => Gate::RY(t + delta),
                            Gate::RZ(t) => Gate::RZ(t + delta),
                            g => g,
                        };
                    }
                    let e = exact_term_expectations(&cand, h)?;
                    if good(&e) > good(&best_e) {
                        best = cand;
                        best_e = e;
                    }
                }
            }
        }
        Ok((best, best_e))
    };

    (best, best_e) = polish(best, best_e)?;
    // Greedy tweaking of the snapped angles can stall; fall back on seeded
    // random Clifford angle assignments over the same gate skeleton.
    if good(&best_e) != h.terms.len() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(rot_slots.len() as u64);
        for _restart in 0..100 {
            let mut cand = best.clone();
            for &slot in &rot_slots {
                let t = rng.random_range(0..4) as f64 * std::f64::consts::FRAC_PI_2;
                if let Instruction::Gate { gate, .. } = &mut cand.instructions[slot] {
                    *gate = match *gate {
                        Gate::RX(_) => Gate::RX(t),
                        Gate::RY(_) => Gate::RY(t),
                        Gate::RZ(_) => Gate::RZ(t),
                        g => g,
                    };
                }
            }
            let e = exact_term_expectations(&cand, h)?;
            let (cand, e) = polish(cand, e)?;
            if good(&e) > good(&best_e) {
                best = cand;
                best_e = e;
            }
            if good(&best_e) == h.terms.len() {
                break;
            }
        }
    }
    if good(&best_e) != h.terms.len() {
        return Err(Error::Simulation(
            "no Clifford mitigation circuit with ±1 expectations found".into(),
        ));
    }
    Ok((best, best_e))
}

/// Measure the group statistics of `h` on the state prepared by `circuit`
/// (or sampled from `initial` when given), with the shot budget divided
/// equally among the groups.
#[allow(clippy::too_many_arguments)]
fn measure_groups<R: Rng>(
    h: &Hamiltonian,
    circuit: &DynamicCircuit,
    initial: Option<&QuantumState>,
    shots: usize,
    noise: Option<&NoiseModel>,
    mitigation: &MitigationConfig,
    rng: &mut R,
) -> Result<Vec<GroupEstimate>, Error> {
    let groups = group_commuting(h);
    if shots < groups.len() {
        return Err(Error::Config(format!(
            "{shots} shots cannot cover {} measurement groups",
            groups.len()
        )));
    }
    let base_shots = shots / groups.len();
    let remainder = shots % groups.len();
    let mut out = Vec::with_capacity(groups.len());
    for (k, g) in groups.iter().enumerate() {
        let n_k = base_shots + usize::from(k < remainder);
        let mut meas = circuit.clone();
        let cbit_base = meas.n_cbits;
        meas.n_cbits += h.n_qubits;
        append_readout(&mut meas, &g.basis, cbit_base);
        // Re-randomize the twirl across up to 8 batches of the budget.
        let mut counts = Counts::new();
        let batches = if mitigation.twirl { n_k.min(8) } else { 1 };
        let mut left = n_k;
        for b in 0..batches {
            let batch = left / (batches - b);
            left -= batch;
            let run = if mitigation.twirl { pauli_twirl_cx(&meas, rng) } else { meas.clone() };
            for (key, n) in run_counts(&run, batch, initial, noise, rng)? {
                *counts.entry(key).or_insert(0) += n;
            }
        }
        let counts = marginalize(&counts, &(cbit_base..cbit_base + h.n_qubits).collect::<Vec<_>>());
        // Outcome distribution, readout-mitigated if configured.
        let probs: Vec<(usize, f64)> = match &mitigation.readout {
            Some(cal) => {
                if cal.n != h.n_qubits {
                    return Err(Error::Config("calibration matrix size mismatch".into()));
                }
                mitigate_counts(cal, &counts)?.into_iter().enumerate().collect()
            }
            None => counts
                .iter()
                .map(|(key, &n)| {
                    (usize::from_str_radix(key, 2).expect("binary count key"), n as f64 / n_k as f64)
                })
                .collect(),
        };
        let means: Vec<f64> = g
            .members
            .iter()
            .map(|&ti| {
                probs
                    .iter()
                    .map(|&(idx, p)| p * eigenvalue(&h.terms[ti].string, idx, h.n_qubits))
                    .sum()
            })
            .collect();
        let mut cov = vec![vec![0.0; g.members.len()]; g.members.len()];
        for (a, &ti) in g.members.iter().enumerate() {
            for (b, &tj) in g.members.iter().enumerate() {
                let joint: f64 = probs
                    .iter()
                    .map(|&(idx, p)| {
                        p * eigenvalue(&h.terms[ti].string, idx, h.n_qubits)
                            * eigenvalue(&h.terms[tj].string, idx, h.n_qubits)
                    })
                    .sum();
                cov[a][b] = joint - means[a] * means[b];
            }
        }
        out.push(GroupEstimate {
            basis: g.basis.clone(),
            shots: n_k,
            members: g.members.clone(),
            means,
            cov,
        });
    }
    Ok(out)
}

/// Combined per-term means with the overlap ratios `R_k`.
fn combine_term_means(h: &Hamiltonian, groups: &[GroupEstimate]) -> Vec<f64> {
    let shots: Vec<usize> = groups.iter().map(|g| g.shots).collect();
    let plain: Vec<crate::pauli::MeasurementGroup> = groups
        .iter()
        .map(|g| crate::pauli::MeasurementGroup { basis: g.basis.clone(), members: g.members.clone() })
        .collect();
    let ratios = overlap_ratios(&plain, h.terms.len(), &shots);
    let mut means = vec![0.0; h.terms.len()];
    for (k, g) in groups.iter().enumerate() {
        for (a, &ti) in g.members.iter().enumerate() {
            means[ti] += ratios[ti][&k] * g.means[a];
        }
    }
    means
}

/// Per-term sampling variance `Σ_k R_ik² Var_k(Ô_i) / N_k` (used when
/// propagating through the self-mitigation quotient).
fn per_term_variances(h: &Hamiltonian, groups: &[GroupEstimate]) -> Vec<f64> {
    let shots: Vec<usize> = groups.iter().map(|g| g.shots).collect();
    let plain: Vec<crate::pauli::MeasurementGroup> = groups
        .iter()
        .map(|g| crate::pauli::MeasurementGroup { basis: g.basis.clone(), members: g.members.clone() })
        .collect();
    let ratios = overlap_ratios(&plain, h.terms.len(), &shots);
    let mut vars = vec![0.0; h.terms.len()];
    for (k, g) in groups.iter().enumerate() {
        for (a, &ti) in g.members.iter().enumerate() {
            let r = ratios[ti][&k];
            vars[ti] += r * r * g.cov[a][a] / g.shots as f64;
        }
    }
    vars
}

/// Shot-based estimate of `⟨H⟩` on the state prepared by `circuit` (qubits
/// `0..h.n_qubits` are the data register; extra qubits are ancillas whose
/// mid-circuit measurement bits are marginalized away).  `initial`, when
/// given, replaces the |0…0⟩ starting state of every shot.
pub fn estimate_energy<R: Rng>(
    h: &Hamiltonian,
    circuit: &DynamicCircuit,
    initial: Option<&QuantumState>,
    shots: usize,
    noise: Option<&NoiseModel>,
    mitigation: &MitigationConfig,
    rng: &mut R,
) -> Result<EstimateResult, Error> {
    if h.terms.is_empty() {
        return Err(Error::Config("cannot estimate an empty Hamiltonian".into()));
    }
    if circuit.n_qubits < h.n_qubits {
        return Err(Error::Config("circuit has fewer qubits than the Hamiltonian".into()));
    }
    let groups = measure_groups(h, circuit, initial, shots, noise, mitigation, rng)?;
    let term_means = combine_term_means(h, &groups);

    if let Some(kappa) = mitigation.self_mitigation {
        // Proxy runs with the same per-group budgets and remaining
        // mitigation layers.  The proxy is built per measurement group:
        // anticommuting terms of H (e.g. X⊗ⁿ vs Zᵢ) can never share one
        // Clifford state with all expectations at ±1, but every QWC group
        // can be pinned at once.
        let sub = MitigationConfig {
            readout: mitigation.readout.clone(),
            self_mitigation: None,
            twirl: mitigation.twirl,
        };
        let shots_list: Vec<usize> = groups.iter().map(|g| g.shots).collect();
        let plain: Vec<crate::pauli::MeasurementGroup> = groups
            .iter()
            .map(|g| crate::pauli::MeasurementGroup {
                basis: g.basis.clone(),
                members: g.members.clone(),
            })
            .collect();
        let ratios = overlap_ratios(&plain, h.terms.len(), &shots_list);
        let mut proxy_means = vec![0.0; h.terms.len()];
        let mut proxy_vars = vec![0.0; h.terms.len()];
        for (k, g) in groups.iter().enumerate() {
            let mut sub_h = Hamiltonian::new(h.n_qubits);
            for &ti in &g.members {
                sub_h.add(h.terms[ti].coeff, h.terms[ti].string.clone());
            }
            let (proxy, truth) = build_mitigation_circuit(circuit, &sub_h)?;
            let proxy_groups = measure_groups(&sub_h, &proxy, None, g.shots, noise, &sub, rng)?;
            let pm = combine_term_means(&sub_h, &proxy_groups);
            let pv = per_term_variances(&sub_h, &proxy_groups);
            for (a, &ti) in g.members.iter().enumerate() {
                // ⟨Ô⟩_mitig,true = ±1: fold the sign into the measured mean.
                let r = ratios[ti][&k];
                proxy_means[ti] += r * pm[a] * truth[a].signum();
                proxy_vars[ti] += r * r * pv[a];
            }
        }
        let phys_vars = per_term_variances(h, &groups);
        let mut mean = h.constant;
        let mut variance = 0.0;
        let mut mitigated = vec![0.0; h.terms.len()];
        for i in 0..h.terms.len() {
            let m = proxy_means[i];
            mitigated[i] = self_mitigate(term_means[i], m, kappa)?;
            mean += h.terms[i].coeff * mitigated[i];
            variance += h.terms[i].coeff.powi(2)
                * propagate_self_mitigation_error(
                    (term_means[i], phys_vars[i]),
                    (m, proxy_vars[i]),
                    kappa,
                )?;
        }
        return Ok(EstimateResult {
            mean,
            variance,
            variance_clamped: false,
            term_means: mitigated,
            groups,
        });
    }

    let mean = h.constant
        + h.terms.iter().zip(&term_means).map(|(t, &m)| t.coeff * m).sum::<f64>();
    let (variance, variance_clamped) = variance_with_covariance(h, &groups);
    Ok(EstimateResult { mean, variance, variance_clamped, term_means, groups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{z2_exact_gs, z2_hamiltonian};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    #[test]
    fn z_on_zero_state_is_exact() {
        let mut h = Hamiltonian::new(1);
        h.add_on(1.0, &[0], Pauli::Z);
        let c = DynamicCircuit::new(1, 0);
        let r = estimate_energy(&h, &c, None, 100, None, &MitigationConfig::none(), &mut rng(1))
            .unwrap();
        assert_abs_diff_eq!(r.mean, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.variance, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn z2_ground_state_estimate_within_three_sigma() {
        let h = z2_hamiltonian(0.5).unwrap();
        let (e0, gs) = z2_exact_gs(0.5).unwrap();
        let c = DynamicCircuit::new(4, 0);
        let r = estimate_energy(
            &h,
            &c,
            Some(&gs),
            50_000,
            None,
            &MitigationConfig::none(),
            &mut rng(7),
        )
        .unwrap();
        assert_abs_diff_eq!(e0, -8.016, epsilon = 5e-4);
        assert!((r.mean - e0).abs() <= 3.0 * r.sigma().max(1e-6), "{} vs {}", r.mean, e0);
    }

    #[test]
    fn x_on_zero_state_has_unit_shot_variance() {
        let mut h = Hamiltonian::new(1);
        h.add_on(1.0, &[0], Pauli::X);
        let c = DynamicCircuit::new(1, 0);
        let n = 4000;
        let mut preds = Vec::new();
        for seed in 0..50 {
            let r = estimate_energy(&h, &c, None, n, None, &MitigationConfig::none(), &mut rng(seed))
                .unwrap();
            preds.push(r.variance);
        }
        let mean_pred = preds.iter().sum::<f64>() / preds.len() as f64;
        assert!((mean_pred - 1.0 / n as f64).abs() < 0.2 / n as f64, "{mean_pred}");
    }

    #[test]
    fn predicted_sigma_matches_empirical_spread() {
        let h = z2_hamiltonian(1.52).unwrap();
        let (_, gs) = z2_exact_gs(1.52).unwrap();
        let c = DynamicCircuit::new(4, 0);
        let mut means = Vec::new();
        let mut pred_vars = Vec::new();
        for seed in 0..100 {
            let r = estimate_energy(
                &h,
                &c,
                Some(&gs),
                10_000,
                None,
                &MitigationConfig::none(),
                &mut rng(1000 + seed),
            )
            .unwrap();
            means.push(r.mean);
            pred_vars.push(r.variance);
        }
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let emp = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
        let pred = pred_vars.iter().sum::<f64>() / pred_vars.len() as f64;
        let ratio = (pred / emp).sqrt();
        assert!((0.8..1.25).contains(&ratio), "sigma ratio {ratio}");
    }

    #[test]
    fn split_term_variance_equals_merged() {
        // The same string twice with split coefficients lands in one group
        // with perfect correlation: variance equals the merged term's.
        let mk = |coeffs: &[f64]| {
            let mut h = Hamiltonian::new(1);
            for &c in coeffs {
                h.terms.push(crate::pauli::PauliTerm {
                    coeff: c,
                    string: "X".parse().unwrap(),
                });
            }
            h
        };
        let prep = DynamicCircuit::new(1, 0);
        let split = estimate_energy(
            &mk(&[0.3, 0.7]),
            &prep,
            None,
            5000,
            None,
            &MitigationConfig::none(),
            &mut rng(3),
        )
        .unwrap();
        let merged =
            estimate_energy(&mk(&[1.0]), &prep, None, 5000, None, &MitigationConfig::none(), &mut rng(3))
                .unwrap();
        assert_abs_diff_eq!(split.variance, merged.variance, epsilon = 1e-12);
        assert_abs_diff_eq!(split.mean, merged.mean, epsilon = 1e-12);
    }

    #[test]
    fn calibration_matrix_reflects_flip_probabilities() {
        let nm = NoiseModel { depol2: 0.0, readout: vec![(0.1, 0.2)] };
        let cal = build_calibration_matrix(1, Some(&nm), 40_000, &mut rng(5)).unwrap();
        assert_abs_diff_eq!(cal.m[(0, 0)], 0.9, epsilon = 0.01);
        assert_abs_diff_eq!(cal.m[(1, 0)], 0.1, epsilon = 0.01);
        assert_abs_diff_eq!(cal.m[(0, 1)], 0.2, epsilon = 0.01);
        assert_abs_diff_eq!(cal.m[(1, 1)], 0.8, epsilon = 0.01);

        let clean = build_calibration_matrix(2, None, 10_000, &mut rng(6)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(clean.m[(i, j)], expect, epsilon = 0.01);
            }
        }
    }

    #[test]
    fn mitigate_counts_recovers_distribution() {
        // Identity calibration: output equals normalized counts.
        let cal = build_calibration_matrix(1, None, 1000, &mut rng(2)).unwrap();
        let mut counts = Counts::new();
        counts.insert("0".into(), 750);
        counts.insert("1".into(), 250);
        let p = mitigate_counts(&cal, &counts).unwrap();
        assert_abs_diff_eq!(p[0], 0.75, epsilon = 1e-9);
        assert_abs_diff_eq!(p[1], 0.25, epsilon = 1e-9);

        // 5% flips on |0⟩: recovered ⟨Z⟩ near 1 with the exact matrix.
        let dim_cal = CalibrationMatrix {
            n: 1,
            m: DMatrix::from_row_slice(2, 2, &[0.95, 0.05, 0.05, 0.95]),
        };
        let nm = NoiseModel::uniform(1, 0.0, 0.05, 0.05);
        let mut c = DynamicCircuit::new(1, 1);
        c.measure(0, 0);
        let counts = run_counts(&c, 100_000, None, Some(&nm), &mut rng(9)).unwrap();
        let p = mitigate_counts(&dim_cal, &counts).unwrap();
        let z = p[0] - p[1];
        assert!((z - 1.0).abs() < 0.01, "recovered <Z> = {z}");
        assert!(p.iter().all(|&v| v >= 0.0));
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn twirled_circuit_is_noiselessly_equivalent() {
        let mut c = DynamicCircuit::new(3, 0);
        c.gate(Gate::H, &[0]);
        c.gate(Gate::RY(0.7), &[1]);
        c.gate(Gate::CX, &[0, 1]);
        c.gate(Gate::CX, &[1, 2]);
        c.gate(Gate::RZ(-1.1), &[2]);
        c.gate(Gate::CX, &[0, 2]);
        let base = simulate::<ChaCha12Rng>(&c, None, MeasurePolicy::Greedy).unwrap().state;
        for seed in 0..20 {
            let t = pauli_twirl_cx(&c, &mut rng(seed));
            assert_eq!(t.two_qubit_gate_count(), c.two_qubit_gate_count());
            let out = simulate::<ChaCha12Rng>(&t, None, MeasurePolicy::Greedy).unwrap().state;
            assert!(base.fidelity(&out) > 1.0 - 1e-10);
        }
    }

    #[test]
    fn self_mitigation_arithmetic() {
        assert_abs_diff_eq!(self_mitigate(0.45, 0.9, 1.0).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(self_mitigate(0.3, 1.0, 2.0).unwrap(), 0.3, epsilon = 1e-12);
        assert!(self_mitigate(0.5, 0.01, 1.0).is_err());
        let v = propagate_self_mitigation_error((0.5, 1e-4), (0.9, 1e-4), 1.0).unwrap();
        assert_abs_diff_eq!(v, 1e-4 / 0.81 + (0.5f64 / 0.81).powi(2) * 1e-4, epsilon = 1e-12);
        let v = propagate_self_mitigation_error((0.7, 2e-4), (1.0, 0.0), 1.0).unwrap();
        assert_abs_diff_eq!(v, 2e-4, epsilon = 1e-15);
    }

    #[test]
    fn mitigation_circuit_snaps_to_clifford() {
        // RY(π) on both qubits of a ZZ observable: already Clifford.
        let mut h = Hamiltonian::new(2);
        h.add_on(1.0, &[0, 1], Pauli::Z);
        let mut c = DynamicCircuit::new(2, 0);
        c.gate(Gate::RY(3.1), &[0]);
        c.gate(Gate::RY(0.1), &[1]);
        c.gate(Gate::CX, &[0, 1]);
        let (proxy, truth) = build_mitigation_circuit(&c, &h).unwrap();
        assert_eq!(proxy.two_qubit_gate_count(), 1);
        assert_abs_diff_eq!(truth[0].abs(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn self_mitigation_corrects_depolarizing_bias() {
        // Z on a CX-entangled pair under depolarizing noise: the raw mean is
        // damped towards 0; the proxy (identical circuit, already Clifford)
        // measures the damping factor and divides it out.
        let mut h = Hamiltonian::new(2);
        h.add_on(1.0, &[0, 1], Pauli::Z);
        let mut c = DynamicCircuit::new(2, 0);
        c.gate(Gate::CX, &[0, 1]);
        c.gate(Gate::CX, &[0, 1]);
        c.gate(Gate::CX, &[0, 1]);
        c.gate(Gate::CX, &[0, 1]);
        let nm = NoiseModel::uniform(2, 0.05, 0.0, 0.0);
        let mit = MitigationConfig {
            readout: None,
            self_mitigation: Some(1.0),
            twirl: false,
        };
        let mut wins = 0;
        for seed in 0..20 {
            let raw = estimate_energy(
                &h,
                &c,
                None,
                20_000,
                Some(&nm),
                &MitigationConfig::none(),
                &mut rng(100 + seed),
            )
            .unwrap();
            let fixed =
                estimate_energy(&h, &c, None, 20_000, Some(&nm), &mit, &mut rng(100 + seed))
                    .unwrap();
            if (fixed.mean - 1.0).abs() < (raw.mean - 1.0).abs() {
                wins += 1;
            }
        }
        assert!(wins >= 17, "self-mitigation won only {wins}/20 trials");
    }

    #[test]
    fn unbiased_over_many_seeds() {
        let h = z2_hamiltonian(2.0).unwrap();
        let (e0, gs) = z2_exact_gs(2.0).unwrap();
        let c = DynamicCircuit::new(4, 0);
        let n_seeds = 200;
        let mut sum = 0.0;
        let mut pred_var = 0.0;
        for seed in 0..n_seeds {
            let r = estimate_energy(
                &h,
                &c,
                Some(&gs),
                2_000,
                None,
                &MitigationConfig::none(),
                &mut rng(5000 + seed),
            )
            .unwrap();
            sum += r.mean;
            pred_var += r.variance;
        }
        let mean = sum / n_seeds as f64;
        let sigma = (pred_var / n_seeds as f64 / n_seeds as f64).sqrt();
        assert!((mean - e0).abs() < 3.0 * sigma, "bias {} vs 3σ {}", mean - e0, 3.0 * sigma);
    }
}
