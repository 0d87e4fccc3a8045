//! Command-line front end: build models, compile/reduce measurement
//! patterns, run single VQEs and parameter sweeps, emit plot-ready CSV.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on verification
//! failures. `HVQE_SEED` sets the default seed.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use hvqe::error::Error;
use hvqe::estimation::{build_calibration_matrix, MitigationConfig};
use hvqe::mbqc::{self, compile_to_circuit, gadget_pattern, simulate_pattern, Pattern};
use hvqe::models::{
    exact_diagonalize, lih_hamiltonian, lih_reference_overlap, pc_graph_ansatz,
    planar_code_hamiltonian, su3_hamiltonian, su3_number_op, su3_number_op_prime, z2_efield_op,
    z2_hamiltonian, z2_plaquette_op,
};
use hvqe::pauli::{Hamiltonian, Pauli, PauliString};
use hvqe::statevector::{
    simulate, DynamicCircuit, Instruction, MeasurePolicy, NoiseModel, QuantumState,
};
use hvqe::vqe::{
    default_initial_parameters, exact_energy, Ansatz, Objective, OptimizerConfig, OptimizerMethod,
    VQERunRecord,
};

#[derive(Parser)]
#[command(name = "hvqe", about = "Hybrid gate/measurement-based VQE toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a model Hamiltonian with its low spectrum and key observables.
    Model(ModelArgs),
    /// Build, reduce, compile and optionally verify measurement patterns.
    Pattern {
        #[command(subcommand)]
        action: PatternAction,
    },
    /// Run a single VQE from a JSON config.
    Vqe(RunArgs),
    /// Run a VQE sweep over the config's parameter grid.
    Sweep(RunArgs),
    /// Run quick internal consistency checks.
    Selftest,
}

#[derive(Args)]
struct ModelArgs {
    /// Model name: z2 | su3 | pc | lih.
    model: String,
    /// Z2 coupling λ.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// SU(3) reduced bare quark mass m̃.
    #[arg(long, default_value_t = -1.0)]
    m_tilde: f64,
    /// SU(3) gauge coupling x.
    #[arg(long, default_value_t = 0.8)]
    x: f64,
    /// Planar-code lattice rows.
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Planar-code lattice columns.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Planar-code perturbation strength ξ.
    #[arg(long, default_value_t = 0.0)]
    xi: f64,
}

#[derive(Subcommand)]
enum PatternAction {
    /// Emit the n-body rotation gadget pattern and its compiled circuit.
    Gadget {
        /// Body qubit count.
        #[arg(long)]
        n: usize,
        /// Rotation axis: a Pauli letter, optionally repeated n times (ZZZ).
        #[arg(long)]
        axis: String,
        /// Rotation angle.
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
        theta: f64,
        /// Cross-check the compiled circuit against the dense rotation.
        #[arg(long)]
        verify: bool,
    },
    /// Reduce a pattern file: eliminate Pauli-measured qubits.
    Reduce {
        /// Pattern file in the line-oriented text format.
        file: PathBuf,
        /// Cross-check reduced against original on dense states (≤10 qubits).
        #[arg(long)]
        verify: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config shot count (0 = exact objective).
    #[arg(long)]
    shots: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the sweep grid (comma separated).
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
}

/// Declarative experiment description; flags override individual fields.
#[derive(Clone, Serialize, Deserialize)]
struct ExperimentConfig {
    model: String,
    /// Sweep values of the model's scan parameter (λ, m̃ or ξ); a single
    /// value for `vqe`.
    grid: Vec<f64>,
    #[serde(default = "default_x")]
    x: f64,
    #[serde(default = "default_lattice")]
    m: usize,
    #[serde(default = "default_lattice_n")]
    n: usize,
    #[serde(default = "default_layers")]
    layers: usize,
    /// Optimizer: "local" or "direct".
    #[serde(default = "default_optimizer")]
    optimizer: String,
    #[serde(default = "default_max_iters")]
    max_iters: usize,
    #[serde(default = "default_global_iters")]
    global_iters: usize,
    #[serde(default = "default_local_iters")]
    local_iters: usize,
    /// Starting parameters; empty = model defaults.
    #[serde(default)]
    initial: Vec<f64>,
    /// 0 = exact expectation objective.
    #[serde(default)]
    shots: usize,
    #[serde(default)]
    noise: Option<NoiseConfig>,
    #[serde(default)]
    readout_mitigation: bool,
    #[serde(default)]
    twirl: bool,
    #[serde(default)]
    self_mitigation: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default = "default_out")]
    out: PathBuf,
}

#[derive(Clone, Serialize, Deserialize)]
struct NoiseConfig {
    depol2: f64,
    p01: f64,
    p10: f64,
}

fn default_x() -> f64 {
    0.8
}
fn default_lattice() -> usize {
    2
}
fn default_lattice_n() -> usize {
    1
}
fn default_layers() -> usize {
    1
}
fn default_optimizer() -> String {
    "local".into()
}
fn default_max_iters() -> usize {
    100
}
fn default_global_iters() -> usize {
    50
}
fn default_local_iters() -> usize {
    50
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_seed() -> u64 {
    std::env::var("HVQE_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Model(args) => cmd_model(&args),
        Command::Pattern { action } => cmd_pattern(&action),
        Command::Vqe(args) => cmd_run(&args, false),
        Command::Sweep(args) => cmd_run(&args, true),
        Command::Selftest => cmd_selftest(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse(_) | Error::Io(_) | Error::Json(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}

fn build_model(args: &ModelArgs) -> Result<Hamiltonian, Error> {
    match args.model.as_str() {
        "z2" => z2_hamiltonian(args.lambda),
        "su3" => su3_hamiltonian(args.m_tilde, args.x),
        "pc" => planar_code_hamiltonian(args.m, args.n, args.xi),
        "lih" => lih_hamiltonian(),
        other => Err(Error::Config(format!("unknown model '{other}'"))),
    }
}

fn cmd_model(args: &ModelArgs) -> Result<ExitCode, Error> {
    let h = build_model(args)?;
    let sp = exact_diagonalize(&h)?;
    let mut observables = serde_json::Map::new();
    let gs_expect = |op: &Hamiltonian| sp.ground_state.energy(op);
    match args.model.as_str() {
        "z2" => {
            observables.insert("plaquette".into(), gs_expect(&z2_plaquette_op()).into());
            observables.insert("efield".into(), gs_expect(&z2_efield_op()).into());
        }
        "su3" => {
            observables.insert("occupation".into(), gs_expect(&su3_number_op()).into());
            observables
                .insert("occupation_prime".into(), gs_expect(&su3_number_op_prime()).into());
        }
        "lih" => {
            observables.insert(
                "reference_overlap".into(),
                lih_reference_overlap(&sp.ground_state).into(),
            );
        }
        _ => {}
    }
    let doc = serde_json::json!({
        "model": args.model,
        "n_qubits": h.n_qubits,
        "n_terms": h.terms.len() + usize::from(h.constant != 0.0),
        "terms": h.to_text(),
        "e0": sp.e0(),
        "e1": sp.e1(),
        "e2": sp.e2(),
        "gap": sp.gap(),
        "observables": observables,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(ExitCode::SUCCESS)
}

fn parse_axis(axis: &str, n: usize) -> Result<Pauli, Error> {
    let letters: Vec<char> = axis.chars().collect();
    if letters.is_empty() || (letters.len() != 1 && letters.len() != n) {
        return Err(Error::Config(format!("axis must be 1 or {n} Pauli letters")));
    }
    if !letters.iter().all(|&c| c == letters[0]) {
        return Err(Error::Config("only uniform axes P⊗ⁿ are supported".into()));
    }
    match letters[0] {
        'X' | 'x' => Ok(Pauli::X),
        'Y' | 'y' => Ok(Pauli::Y),
        'Z' | 'z' => Ok(Pauli::Z),
        c => Err(Error::Config(format!("'{c}' is not a Pauli axis"))),
    }
}

fn circuit_listing(c: &DynamicCircuit) -> String {
    let mut out = format!("circuit: {} qubits, {} cbits\n", c.n_qubits, c.n_cbits);
    for inst in &c.instructions {
        match inst {
            Instruction::Gate { gate, qubits, cond } => {
                let qs: Vec<String> = qubits.iter().map(|q| q.to_string()).collect();
                out.push_str(&format!("  {:?} {}", gate, qs.join(" ")));
                if let Some((c, v)) = cond {
                    out.push_str(&format!(" if c{c}={}", u8::from(*v)));
                }
                out.push('\n');
            }
            Instruction::Measure { qubit, cbit } => {
                out.push_str(&format!("  measure {qubit} -> c{cbit}\n"));
            }
            Instruction::Reset { qubit } => out.push_str(&format!("  reset {qubit}\n")),
        }
    }
    out
}

/// `exp(−iθ/2 P)` applied densely.
fn apply_exp_pauli(state: &QuantumState, p: &PauliString, theta: f64) -> QuantumState {
    let mut rotated = state.clone();
    rotated.apply_pauli(p);
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let amps: Vec<Complex64> = state
        .amps
        .iter()
        .zip(&rotated.amps)
        .map(|(a, b)| a * c - Complex64::i() * s * b)
        .collect();
    QuantumState { n_qubits: state.n_qubits, amps }
}

/// Dense cross-check of a compiled gadget against the rotation it encodes.
fn verify_gadget(n: usize, axis: Pauli, theta: f64) -> Result<bool, Error> {
    let pattern = gadget_pattern(n, axis, theta)?;
    let (circuit, _) = compile_to_circuit(&pattern)?;
    let p = PauliString(vec![axis; n]);
    let mut rng = ChaCha12Rng::seed_from_u64(default_seed());
    for trial in 0..20 {
        let amps: Vec<Complex64> = (0..1 << n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let input = QuantumState {
            n_qubits: n,
            amps: amps.into_iter().map(|a| a / norm).collect(),
        };
        let expected = apply_exp_pauli(&input, &p, theta);
        // Force each ancilla branch in turn.
        for branch in [false, true] {
            let mut init = input.clone();
            init.amps.resize(1 << (n + 1), Complex64::new(0.0, 0.0));
            let mut embedded = vec![Complex64::new(0.0, 0.0); 1 << (n + 1)];
            for (i, a) in input.amps.iter().enumerate() {
                embedded[i << 1] = *a;
            }
            let init = QuantumState { n_qubits: n + 1, amps: embedded };
            let forced = [branch];
            let out = simulate::<ChaCha12Rng>(
                &circuit,
                Some(init),
                MeasurePolicy::Forced(&forced),
            )?;
            let mut got = vec![Complex64::new(0.0, 0.0); 1 << n];
            for (idx, amp) in out.state.amps.iter().enumerate() {
                if (idx & 1 != 0) == branch {
                    got[idx >> 1] = *amp;
                }
            }
            let got = QuantumState { n_qubits: n, amps: got };
            if got.fidelity(&expected) < 1.0 - 1e-10 {
                eprintln!(
                    "verification failed: trial {trial}, branch {}, fidelity {}",
                    u8::from(branch),
                    got.fidelity(&expected)
                );
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Dense cross-check of a reduced pattern against the original.
fn verify_reduction(original: &Pattern, reduced: &Pattern) -> Result<bool, Error> {
    let n_in = original.inputs().len();
    if original.n_qubits() > 16 {
        return Err(Error::Config("verification supports at most 16 qubits".into()));
    }
    if reduced.inputs().len() != n_in {
        eprintln!("verification failed: input arity changed");
        return Ok(false);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(default_seed());
    for _ in 0..10 {
        let amps: Vec<Complex64> = (0..1 << n_in)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let input = QuantumState {
            n_qubits: n_in,
            amps: amps.into_iter().map(|a| a / norm).collect(),
        };
        let a = simulate_pattern(original, &input, MeasurePolicy::Sample(&mut rng))?;
        let b = simulate_pattern(reduced, &input, MeasurePolicy::Sample(&mut rng))?;
        if a.state.fidelity(&b.state) < 1.0 - 1e-10 {
            eprintln!("verification failed: fidelity {}", a.state.fidelity(&b.state));
            return Ok(false);
        }
    }
    Ok(true)
}

fn cmd_pattern(action: &PatternAction) -> Result<ExitCode, Error> {
    match action {
        PatternAction::Gadget { n, axis, theta, verify } => {
            let axis = parse_axis(axis, *n)?;
            let pattern = gadget_pattern(*n, axis, *theta)?;
            let (circuit, _) = compile_to_circuit(&pattern)?;
            print!("{}", pattern.to_text());
            print!("{}", circuit_listing(&circuit));
            if *verify {
                if *n > 9 {
                    return Err(Error::Config("verification supports at most 10 qubits".into()));
                }
                if verify_gadget(*n, axis, *theta)? {
                    println!("verify: PASS");
                } else {
                    println!("verify: FAIL");
                    return Ok(ExitCode::from(3));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        PatternAction::Reduce { file, verify } => {
            let text = std::fs::read_to_string(file)?;
            let pattern = Pattern::from_text(&text)?;
            let reduced = mbqc::reduce(&pattern)?;
            println!(
                "# reduced {} -> {} qubits",
                pattern.n_qubits(),
                reduced.pattern.n_qubits()
            );
            print!("{}", reduced.pattern.to_text());
            print!("{}", circuit_listing(&reduced.clifford_prefix));
            if *verify {
                if verify_reduction(&pattern, &reduced.pattern)? {
                    println!("verify: PASS");
                } else {
                    println!("verify: FAIL");
                    return Ok(ExitCode::from(3));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

struct ModelPoint {
    h: Hamiltonian,
    ansatz: Ansatz,
    initial: Vec<f64>,
}

fn build_point(cfg: &ExperimentConfig, value: f64) -> Result<ModelPoint, Error> {
    let (h, ansatz) = match cfg.model.as_str() {
        "z2" => (z2_hamiltonian(value)?, Ansatz::GadgetShared { n: 4, axis: Pauli::X }),
        "su3" => (su3_hamiltonian(value, cfg.x)?, Ansatz::GadgetShared { n: 3, axis: Pauli::X }),
        "pc" => (
            planar_code_hamiltonian(cfg.m, cfg.n, value)?,
            Ansatz::GraphModified(pc_graph_ansatz(cfg.m, cfg.n, cfg.layers)?),
        ),
        "lih" => (
            lih_hamiltonian()?,
            Ansatz::GadgetStack { n: 4, axes: vec![Pauli::Z; cfg.layers] },
        ),
        other => return Err(Error::Config(format!("unknown model '{other}'"))),
    };
    let initial = if cfg.initial.is_empty() {
        default_initial_parameters(&cfg.model, value, ansatz.n_parameters())
    } else {
        cfg.initial.clone()
    };
    if initial.len() != ansatz.n_parameters() {
        return Err(Error::Config(format!(
            "{} initial parameters given, ansatz needs {}",
            initial.len(),
            ansatz.n_parameters()
        )));
    }
    Ok(ModelPoint { h, ansatz, initial })
}

fn build_objective(
    cfg: &ExperimentConfig,
    point: &ModelPoint,
    seed: u64,
) -> Result<Objective, Error> {
    if cfg.shots == 0 {
        return Ok(Objective::Exact);
    }
    let noise = cfg
        .noise
        .as_ref()
        .map(|n| NoiseModel::uniform(point.ansatz.n_qubits(), n.depol2, n.p01, n.p10));
    let readout = if cfg.readout_mitigation {
        let model = noise.clone().ok_or_else(|| {
            Error::Config("readout mitigation requires a noise model".into())
        })?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
        Some(build_calibration_matrix(point.ansatz.n_qubits(), Some(&model), 4096, &mut rng)?)
    } else {
        None
    };
    Ok(Objective::Shots {
        shots: cfg.shots,
        noise,
        mitigation: MitigationConfig {
            readout,
            self_mitigation: cfg.self_mitigation,
            twirl: cfg.twirl,
        },
    })
}

fn optimizer_config(cfg: &ExperimentConfig, initial: Vec<f64>) -> Result<OptimizerConfig, Error> {
    let method = match cfg.optimizer.as_str() {
        "local" => OptimizerMethod::Local,
        "direct" => OptimizerMethod::DirectThenLocal {
            global_iters: cfg.global_iters,
            local_iters: cfg.local_iters,
        },
        other => return Err(Error::Config(format!("unknown optimizer '{other}'"))),
    };
    Ok(OptimizerConfig { method, max_iters: cfg.max_iters, initial, bounds: None })
}

fn run_point(cfg: &ExperimentConfig, value: f64, seed: u64) -> Result<VQERunRecord, Error> {
    let point = build_point(cfg, value)?;
    let objective = build_objective(cfg, &point, seed)?;
    let optimizer = optimizer_config(cfg, point.initial.clone())?;
    hvqe::vqe::run_vqe(&point.h, &point.ansatz, &optimizer, &objective, seed)
}

fn csv_row(value: f64, rec: &VQERunRecord) -> String {
    let sigma = rec.iterations.last().map(|i| i.sigma).unwrap_or(0.0);
    format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        value,
        rec.e_opt,
        sigma,
        rec.e0,
        rec.e1,
        rec.e2,
        rec.rel_err,
        rec.fidelity,
        rec.iterations.len(),
        rec.seed
    )
}

/// Write a file atomically (temp file + rename).
fn write_atomic(path: &Path, contents: &str) -> Result<(), Error> {
        let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp)?;
    f.write_all(contents.as_bytes())?;
    std::fs::rename(&tmp, path).map_err(Error::from)
}

fn cmd_run(args: &RunArgs, sweep: bool) -> Result<ExitCode, Error> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(shots) = args.shots {
        cfg.shots = shots;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(grid) = &args.grid {
        cfg.grid = grid.clone();
    }
    if cfg.grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let seed = cfg.seed.unwrap_or_else(default_seed);
    std::fs::create_dir_all(&cfg.out)?;

    let points: Vec<(usize, f64)> = if sweep {
        cfg.grid.iter().cloned().enumerate().collect()
    } else {
        vec![(0, cfg.grid[0])]
    };

    // Worker pool over sweep points, each with an independent derived seed.
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut results: BTreeMap<usize, Result<VQERunRecord, Error>> = BTreeMap::new();
    std::thread::scope(|scope| {
        let cfg = &cfg;
        let mut handles = Vec::new();
        for chunk in points.chunks(points.len().div_ceil(workers)) {
            handles.push(scope.spawn(move || {
                chunk
                    .iter()
                    .map(|&(i, v)| (i, run_point(cfg, v, seed.wrapping_add(i as u64))))
                    .collect::<Vec<_>>()
            }));
        }
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                results.insert(i, r);
            }
        }
    });

    let mut csv = String::from("param,E_vqe,sigma,E0,E1,E2,rel_err,fidelity,iters,seed\n");
    let mut failure: Option<Error> = None;
    for (i, value) in &points {
        match results.remove(i) {
            Some(Ok(rec)) => {
                csv.push_str(&csv_row(*value, &rec));
                let record_path = cfg.out.join(format!("point_{i:03}.json"));
                write_atomic(
                    &record_path,
                    &serde_json::to_string_pretty(&rec)?,
                )?;
                println!(
                    "param={value} E={:.6} E0={:.6} rel_err={:.4} fidelity={:.4}",
                    rec.e_opt, rec.e0, rec.rel_err, rec.fidelity
                );
            }
            Some(Err(e)) => {
                eprintln!("point {i} (param={value}) failed: {e}");
                failure.get_or_insert(e);
            }
            None => unreachable!(),
        }
    }
    write_atomic(&cfg.out.join("sweep.csv"), &csv)?;
    match failure {
        // Partial results are on disk; report the first failure.
        Some(e) => Err(e),
        None => Ok(ExitCode::SUCCESS),
    }
}

fn cmd_selftest() -> Result<ExitCode, Error> {
    let mut ok = true;
    let mut check = |name: &str, pass: bool| {
        println!("{}: {}", name, if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    };

    let z2 = z2_hamiltonian(2.0)?;
    let sp = exact_diagonalize(&z2)?;
    check("z2 closed-form ground energy", (sp.e0() + (8.0f64).sqrt()).abs() < 1e-10);

    check("gadget n=1 axis Z equals RZ", verify_gadget(1, Pauli::Z, 0.7)?);
    check("gadget n=3 axis Z", verify_gadget(3, Pauli::Z, 1.2)?);

    let chain = mbqc::chain_pattern(0.9)?;
    let red = mbqc::reduce(&chain)?;
    check("15-qubit chain reduces to 4 qubits", red.pattern.n_qubits() == 4);
    check("reduction equivalence", verify_reduction(&chain, &red.pattern)?);

    let h = planar_code_hamiltonian(2, 1, 0.0)?;
    let spec = pc_graph_ansatz(2, 1, 1)?;
    let ansatz = Ansatz::GraphModified(spec);
    let theta = vec![0.0; ansatz.n_parameters()];
    check(
        "graph state is unperturbed planar-code ground state",
        (exact_energy(&ansatz, &theta, &h)? + 8.0).abs() < 1e-10,
    );

    if ok {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(3))
    }
}
