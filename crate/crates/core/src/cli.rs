//! Command-line interface.
//!
//! Every optimizer and experiment setting is resolved as flag, then the
//! `--config` TOML file, then the built-in default.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::baselines::{linear_inversion_baseline, readout_mitigate, CalibrationFile, CalibrationMatrix};
use crate::error::{Error, Result};
use crate::io::{self, ExpectationFile, MeasurementFile, ResultFile, StateFile};
use crate::mifgd::{Init, Momentum, MomentumParams, OptimizerConfig, StepSize, DEFAULT_L_HAT};
use crate::pauli::{monomial_count, sample_monomials};
use crate::states::{Circuit, PureState};
use crate::synthetic::{generate_synthetic, run_on_instance, synthetic_theoretical_mu, Ensemble, SyntheticProblem, SyntheticSettings};
use crate::tomography::{measure_state, reconstruct, Reconstruction};

#[derive(Debug, Parser)]
#[command(name = "mifgd", version, about = "Low-rank quantum state tomography with momentum-inspired factored gradient descent")]
struct Cli {
    /// TOML file with defaults for any flag (keys match flag names, `-` as `_`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the amplitudes of a circuit state.
    State(StateArgs),
    /// Simulate Pauli measurements and write expectation values.
    Measure(MeasureArgs),
    /// Reconstruct a state from expectation values.
    Reconstruct(ReconstructArgs),
    /// Full tomography by linear inversion and projection.
    Baseline(BaselineArgs),
    /// Readout-error mitigation of a probability vector.
    Mitigate(MitigateArgs),
    /// Synthetic low-rank matrix-sensing benchmark.
    Synthetic(SyntheticArgs),
    /// Run FGD (μ = 0) and MiFGD on the same data.
    Compare(ReconstructArgs),
}

#[derive(Debug, Args)]
struct CircuitArgs {
    /// ghz, ghz_minus, hadamard or random.
    #[arg(long)]
    circuit: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Gate count of random circuits.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Read the state from a state file instead of building a circuit.
    #[arg(long)]
    state: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SamplingArgs {
    /// Percentage of Pauli monomials measured.
    #[arg(long)]
    measpc: Option<f64>,
    /// Shots per measurement setting.
    #[arg(long)]
    shots: Option<u64>,
    /// Use exact expectation values instead of sampled shots.
    #[arg(long)]
    exact: bool,
}

#[derive(Debug, Args)]
struct OptimizerArgs {
    /// Step size, or `auto`.
    #[arg(long)]
    eta: Option<String>,
    /// Momentum, or `theory:ε` for the theoretical bound.
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    maxiters: Option<usize>,
    #[arg(long)]
    reltol: Option<f64>,
    /// spectral or random.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    lhat: Option<f64>,
    /// Threads evaluating the gradient.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct StateArgs {
    #[command(flatten)]
    circuit: CircuitArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MeasureArgs {
    #[command(flatten)]
    circuit: CircuitArgs,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Expectation file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the raw measurement records.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    #[command(flatten)]
    circuit: CircuitArgs,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    /// Reconstruct from this expectation file instead of simulating.
    #[arg(long)]
    expectations: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trace as CSV (compare writes `<stem>.fgd.csv` and `<stem>.mifgd.csv`).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Include the final factor in the result.
    #[arg(long)]
    factor: bool,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[command(flatten)]
    circuit: CircuitArgs,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MitigateArgs {
    /// Calibration file `{"n", "columns"}`.
    #[arg(long)]
    calibration: PathBuf,
    /// JSON array of measured probabilities.
    #[arg(long)]
    probs: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SyntheticArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    /// Oversampling factor, m = c·d·r.
    #[arg(long)]
    c: Option<usize>,
    /// ‖w‖₂ of the additive noise.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// gaussian or hadamard.
    #[arg(long)]
    ensemble: Option<String>,
    /// Comma-separated momentum values; `theory:ε` allowed.
    #[arg(long)]
    mus: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    maxiters: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Scalar {
    Num(f64),
    Text(String),
}

impl Scalar {
    fn text(&self) -> String {
        match self {
            Scalar::Num(x) => x.to_string(),
            Scalar::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    circuit: Option<String>,
    n: Option<usize>,
    depth: Option<usize>,
    seed: Option<u64>,
    measpc: Option<f64>,
    shots: Option<u64>,
    exact: Option<bool>,
    eta: Option<Scalar>,
    mu: Option<Scalar>,
    maxiters: Option<usize>,
    reltol: Option<f64>,
    init: Option<String>,
    rank: Option<usize>,
    lhat: Option<f64>,
    workers: Option<usize>,
    d: Option<usize>,
    r: Option<usize>,
    c: Option<usize>,
    noise: Option<f64>,
    ensemble: Option<String>,
    mus: Option<String>,
    tol: Option<f64>,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn config_error<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

fn parse_circuit(s: &str) -> Result<Circuit> {
    s.parse().map_err(Error::Config)
}

fn parse_init(s: &str) -> Result<Init> {
    match s {
        "spectral" => Ok(Init::Spectral),
        "random" => Ok(Init::Random),
        _ => config_error(format!("unknown init {s:?}, expected spectral or random")),
    }
}

fn parse_eta(s: &str) -> Result<StepSize> {
    if s == "auto" {
        return Ok(StepSize::Auto);
    }
    s.parse().map(StepSize::Fixed).or_else(|_| config_error(format!("invalid step size {s:?}")))
}

fn parse_mu(s: &str, rank: usize) -> Result<Momentum> {
    let theory = |eps: f64| Momentum::Theoretical(MomentumParams { rank, ..MomentumParams::pure_state(eps) });
    if s == "theory" {
        return Ok(theory(1.0));
    }
    if let Some(eps) = s.strip_prefix("theory:") {
        return eps.parse().map(theory).or_else(|_| config_error(format!("invalid ε in {s:?}")));
    }
    s.parse().map(Momentum::Fixed).or_else(|_| config_error(format!("invalid momentum {s:?}")))
}

/// Experiment settings after merging flags, config and defaults.
#[derive(Debug, Clone, Serialize)]
struct Resolved {
    circuit: Circuit,
    n: usize,
    depth: usize,
    seed: u64,
    measpc: f64,
    shots: Option<u64>,
}

fn resolve_circuit(args: &CircuitArgs, file: &FileConfig) -> Result<(Circuit, usize, usize, u64)> {
    let circuit = match args.circuit.as_deref().or(file.circuit.as_deref()) {
        Some(s) => parse_circuit(s)?,
        None => Circuit::Ghz,
    };
    Ok((
        circuit,
        args.n.or(file.n).unwrap_or(3),
        args.depth.or(file.depth).unwrap_or(20),
        args.seed.or(file.seed).unwrap_or(0),
    ))
}

fn resolve_experiment(circuit: &CircuitArgs, sampling: &SamplingArgs, file: &FileConfig) -> Result<Resolved> {
    let (circuit, n, depth, seed) = resolve_circuit(circuit, file)?;
    let exact = sampling.exact || file.exact.unwrap_or(false);
    let shots = sampling.shots.or(file.shots).unwrap_or(2048);
    if shots == 0 {
        return config_error("shots must be at least 1");
    }
    Ok(Resolved {
        circuit,
        n,
        depth,
        seed,
        measpc: sampling.measpc.or(file.measpc).unwrap_or(50.0),
        shots: (!exact).then_some(shots),
    })
}

fn resolve_optimizer(args: &OptimizerArgs, file: &FileConfig, seed: u64) -> Result<(OptimizerConfig, usize)> {
    let defaults = OptimizerConfig::default();
    let rank = args.rank.or(file.rank).unwrap_or(defaults.rank);
    let eta = match (&args.eta, &file.eta) {
        (Some(s), _) => parse_eta(s)?,
        (None, Some(v)) => parse_eta(&v.text())?,
        (None, None) => defaults.eta,
    };
    let mu = match (&args.mu, &file.mu) {
        (Some(s), _) => parse_mu(s, rank)?,
        (None, Some(v)) => parse_mu(&v.text(), rank)?,
        (None, None) => defaults.mu,
    };
    let init = match args.init.as_deref().or(file.init.as_deref()) {
        Some(s) => parse_init(s)?,
        None => defaults.init,
    };
    let config = OptimizerConfig {
        rank,
        eta,
        mu,
        maxiters: args.maxiters.or(file.maxiters).unwrap_or(defaults.maxiters),
        reltol: args.reltol.or(file.reltol).unwrap_or(defaults.reltol),
        seed,
        init,
        l_hat: args.lhat.or(file.lhat).unwrap_or(DEFAULT_L_HAT),
    };
    config.validate()?;
    let workers = args.workers.or(file.workers).unwrap_or(1);
    if workers == 0 {
        return config_error("workers must be at least 1");
    }
    Ok((config, workers))
}

fn load_or_build_state(args: &CircuitArgs, file: &FileConfig) -> Result<PureState> {
    match &args.state {
        Some(path) => io::read_json::<StateFile>(path)?.to_state(),
        None => {
            let (circuit, n, depth, seed) = resolve_circuit(args, file)?;
            circuit.build(n, depth, seed)
        }
    }
}

fn emit<T: Serialize + ?Sized>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => io::write_json(path, value),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, value)?;
            writeln!(lock)?;
            Ok(())
        }
    }
}

fn cmd_state(args: &StateArgs, file: &FileConfig) -> Result<()> {
    let state = load_or_build_state(&args.circuit, file)?;
    emit(args.out.as_deref(), &StateFile::from_state(&state))
}

fn cmd_measure(args: &MeasureArgs, file: &FileConfig) -> Result<()> {
    let exp = resolve_experiment(&args.circuit, &args.sampling, file)?;
    let state = load_or_build_state(&args.circuit, file)?;
    let n = state.num_qubits();
    let monomials = sample_monomials(n, monomial_count(n, exp.measpc)?, exp.seed)?;
    let data = measure_state(&state, &monomials, exp.shots, exp.seed)?;
    if let Some(path) = &args.records {
        let Some(shots) = exp.shots else {
            return config_error("exact expectations have no measurement records");
        };
        io::write_json(path, &MeasurementFile::from_records(n, shots, &data.records))?;
    }
    emit(args.out.as_deref(), &ExpectationFile::from_measurements(&data))
}

/// Input data and optional metric target for reconstruct and compare.
fn reconstruction_inputs(
    args: &ReconstructArgs,
    file: &FileConfig,
) -> Result<(usize, Vec<crate::pauli::ExpectationSample>, Option<PureState>, u64)> {
    let exp = resolve_experiment(&args.circuit, &args.sampling, file)?;
    match &args.expectations {
        Some(path) => {
            let data: ExpectationFile = io::read_json(path)?;
            data.validate()?;
            let explicit_target = args.circuit.state.is_some() || args.circuit.circuit.is_some() || file.circuit.is_some();
            let target = if explicit_target { Some(load_or_build_state(&args.circuit, file)?) } else { None };
            Ok((data.n, data.items, target, exp.seed))
        }
        None => {
            let state = load_or_build_state(&args.circuit, file)?;
            let n = state.num_qubits();
            let monomials = sample_monomials(n, monomial_count(n, exp.measpc)?, exp.seed)?;
            let data = measure_state(&state, &monomials, exp.shots, exp.seed)?;
            Ok((n, data.expectations, Some(state), exp.seed))
        }
    }
}

fn summary(label: &str, rec: &Reconstruction) -> String {
    let fid = rec.final_fidelity.map_or("n/a".to_string(), |f| format!("{f:.6}"));
    format!(
        "{label}: m={} iterations={} converged={} fidelity={fid}",
        rec.m,
        rec.trace.iterations(),
        rec.trace.converged
    )
}

fn cmd_reconstruct(args: &ReconstructArgs, file: &FileConfig) -> Result<()> {
    let (n, items, target, seed) = reconstruction_inputs(args, file)?;
    let (config, workers) = resolve_optimizer(&args.optimizer, file, seed)?;
    let rec = reconstruct(n, &items, &config, workers, target.as_ref())?;
    if let Some(path) = &args.csv {
        io::write_trace_csv(path, &rec.trace.records)?;
    }
    if args.out.is_some() {
        eprintln!("{}", summary("mifgd", &rec));
    }
    emit(args.out.as_deref(), &ResultFile::new(&config, &rec, args.factor))
}

#[derive(Serialize)]
struct CompareFile {
    fgd: ResultFile,
    mifgd: ResultFile,
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn cmd_compare(args: &ReconstructArgs, file: &FileConfig) -> Result<()> {
    let (n, items, target, seed) = reconstruction_inputs(args, file)?;
    let (config, workers) = resolve_optimizer(&args.optimizer, file, seed)?;
    if config.mu.value()? == 0.0 {
        return config_error("compare needs a nonzero momentum for the MiFGD run");
    }
    let fgd_config = OptimizerConfig { mu: Momentum::Fixed(0.0), ..config.clone() };
    let fgd = reconstruct(n, &items, &fgd_config, workers, target.as_ref())?;
    let mifgd = reconstruct(n, &items, &config, workers, target.as_ref())?;
    if let Some(path) = &args.csv {
        io::write_trace_csv(&with_suffix(path, "fgd"), &fgd.trace.records)?;
        io::write_trace_csv(&with_suffix(path, "mifgd"), &mifgd.trace.records)?;
    }
    eprintln!("{}", summary("fgd", &fgd));
    eprintln!("{}", summary("mifgd", &mifgd));
    let report = CompareFile {
        fgd: ResultFile::new(&fgd_config, &fgd, args.factor),
        mifgd: ResultFile::new(&config, &mifgd, args.factor),
    };
    emit(args.out.as_deref(), &report)
}

#[derive(Serialize)]
struct BaselineFile {
    n: usize,
    shots: u64,
    fidelity: f64,
    eigenvalues: Vec<f64>,
    /// Rows of ρ̂ as `[re, im]` pairs.
    density: Vec<Vec<[f64; 2]>>,
}

fn cmd_baseline(args: &BaselineArgs, file: &FileConfig) -> Result<()> {
    let state = load_or_build_state(&args.circuit, file)?;
    let (_, _, _, seed) = resolve_circuit(&args.circuit, file)?;
    let shots = args.shots.or(file.shots).unwrap_or(2048);
    let rho = linear_inversion_baseline(&state, shots, seed)?;
    let mut eigenvalues: Vec<f64> = rho.entries().clone().symmetric_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let density = rho.entries().row_iter().map(|r| r.iter().map(|c| [c.re, c.im]).collect()).collect();
    emit(
        args.out.as_deref(),
        &BaselineFile { n: state.num_qubits(), shots, fidelity: rho.fidelity(&state)?, eigenvalues, density },
    )
}

fn cmd_mitigate(args: &MitigateArgs) -> Result<()> {
    let cal = CalibrationMatrix::from_file(&io::read_json::<CalibrationFile>(&args.calibration)?)?;
    let probs: Vec<f64> = io::read_json(&args.probs)?;
    emit(args.out.as_deref(), &readout_mitigate(&cal, &probs)?)
}

#[derive(Serialize)]
struct SyntheticFile {
    problem: SyntheticProblem,
    settings: SyntheticSettings,
    runs: Vec<crate::synthetic::SyntheticRun>,
}

fn cmd_synthetic(args: &SyntheticArgs, file: &FileConfig) -> Result<()> {
    let ensemble = match args.ensemble.as_deref().or(file.ensemble.as_deref()) {
        Some(s) => s.parse()?,
        None => Ensemble::Hadamard,
    };
    let problem = SyntheticProblem {
        d: args.d.or(file.d).unwrap_or(256),
        r: args.r.or(file.r).unwrap_or(5),
        c: args.c.or(file.c).unwrap_or(5),
        noise_norm: args.noise.or(file.noise).unwrap_or(0.0),
        seed: args.seed.or(file.seed).unwrap_or(0),
        ensemble,
    };
    let settings = SyntheticSettings {
        tol: args.tol.or(file.tol).unwrap_or(1e-3),
        maxiters: args.maxiters.or(file.maxiters).unwrap_or(4000),
        seed: problem.seed,
    };
    let instance = generate_synthetic(&problem)?;
    let spec = args.mus.as_deref().or(file.mus.as_deref()).unwrap_or("0,0.6666666666666666");
    let mus = spec
        .split(',')
        .map(|s| {
            let s = s.trim();
            match s.strip_prefix("theory:") {
                Some(eps) => synthetic_theoretical_mu(&instance, eps.parse().map_err(|_| Error::Config(format!("invalid ε in {s:?}")))?),
                None if s == "theory" => synthetic_theoretical_mu(&instance, 1.0),
                None => s.parse().or_else(|_| config_error(format!("invalid momentum {s:?}"))),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let runs = run_on_instance(&instance, &mus, &settings)?;
    for run in &runs {
        eprintln!(
            "mu={:.6} iterations={} converged={} error={:.3e} time={:.2}s",
            run.mu, run.iterations, run.converged, run.final_error, run.wall_time_s
        );
    }
    emit(args.out.as_deref(), &SyntheticFile { problem, settings, runs })
}

fn dispatch(cli: &Cli) -> Result<()> {
    let file = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::State(a) => cmd_state(a, &file),
        Command::Measure(a) => cmd_measure(a, &file),
        Command::Reconstruct(a) => cmd_reconstruct(a, &file),
        Command::Baseline(a) => cmd_baseline(a, &file),
        Command::Mitigate(a) => cmd_mitigate(a),
        Command::Synthetic(a) => cmd_synthetic(a, &file),
        Command::Compare(a) => cmd_compare(a, &file),
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
