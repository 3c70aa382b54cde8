//! `qgp` — experiment harness for the phase-estimation GP-training
//! estimators in `qgp-core`.
//!
//! Subcommands: `gen-data`, `estimate {logdet|datafit|lml}`, `compare`,
//! `train`, `study`. Every command requires `--seed`, either as a flag or
//! through `--config`; there is no wall-clock fallback, so a rerun with the
//! same inputs is byte-identical. The config file is flat `key=value` text
//! whose keys mirror the long flag names; explicit flags override file
//! entries.
//!
//! Exit codes: 1 for usage and configuration problems, 2 for missing or
//! malformed data files, 3 for numeric failures (non-positive-definite
//! matrices, diverging series, failed decompositions).

mod config;

use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::{ConfigFile, LoadError};
use qgp_core::baselines::{
    compare_estimators, exact_lml_from_matrix, write_comparison_csv, ComparisonConfig,
};
use qgp_core::estimators::{
    choose_rotation_constant, estimate_datafit, estimate_lml, estimate_logdet, headroom_bound,
};
use qgp_core::kernels::{
    grid_dataset_1d, read_dataset_csv, regularized_covariance, synthetic_dataset,
    write_dataset_csv, Dataset, Hyperparameters, KernelKind, KernelSpec,
};
use qgp_core::numerics::{cholesky_logdet, eigendecompose, solve_spd, spectral_upper_bound};
use qgp_core::qsim::{ClampPolicy, PhaseEstimationConfig};
use qgp_core::trainer::{
    relative_variance_study, train, write_study_csv, write_trace_jsonl, LmlEvaluator, StudyConfig,
    TrainerConfig, TrainingGrid,
};
use qgp_core::Error;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            // clap exits with 2 by default, which collides with the
            // data-error slot; usage mistakes are exit code 1 here.
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[derive(Parser)]
#[command(
    name = "qgp",
    version,
    about = "Sampled GP log-marginal-likelihood estimators, baselines, and studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic GP dataset as CSV.
    GenData(GenDataArgs),
    /// Estimate one LML term (or the full LML) on a dataset; JSONL output.
    #[command(subcommand)]
    Estimate(EstimateKind),
    /// Score the sampled estimator against classical baselines; CSV output.
    Compare(CompareArgs),
    /// Grid-based hyperparameter training; JSONL trace output.
    Train(TrainArgs),
    /// Relative-variance scaling study over problem sizes; CSV output.
    Study(StudyArgs),
}

#[derive(Subcommand)]
enum EstimateKind {
    /// Log-determinant penalty term.
    Logdet(EstimateArgs),
    /// Quadratic-form data-fit term.
    Datafit(EstimateArgs),
    /// Assembled log marginal likelihood.
    Lml(EstimateArgs),
}

#[derive(Args)]
struct CommonOpts {
    /// Flat key=value configuration file; explicit flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// RNG seed. Required here or in the config file; never wall-clock.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KernelOpts {
    /// Covariance family.
    #[arg(long, value_enum)]
    kernel: Option<KernelChoice>,
    #[arg(long)]
    lengthscale: Option<f64>,
    #[arg(long)]
    signal_variance: Option<f64>,
    #[arg(long)]
    noise_variance: Option<f64>,
    /// Cutoff radius of the compactly supported kernel.
    #[arg(long)]
    support_radius: Option<f64>,
}

#[derive(Args)]
struct PhaseOpts {
    /// Phase-estimation register size (power of two).
    #[arg(long = "T", value_name = "SIZE")]
    register_size: Option<usize>,
    /// 'auto' (top-bin rule against a padded spectral bound) or a fixed
    /// positive evolution time.
    #[arg(long = "t0-policy", value_parser = parse_time_policy, value_name = "POLICY")]
    t0_policy: Option<TimePolicy>,
    /// Sample budget of the log-determinant estimator.
    #[arg(long)]
    samples_det: Option<u64>,
    /// Trial budget of the data-fit estimator.
    #[arg(long)]
    samples_fit: Option<u64>,
}

#[derive(Args)]
struct GenDataArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Number of observations (power of two, for downstream simulator use).
    #[arg(long)]
    n: Option<usize>,
    /// Input dimension.
    #[arg(long)]
    d: Option<usize>,
    #[command(flatten)]
    kernel: KernelOpts,
    /// Place inputs on a regular 1-d grid with this spacing instead of
    /// drawing them at random (requires d = 1).
    #[arg(long)]
    spacing: Option<f64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Input dataset CSV (as written by gen-data).
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    #[command(flatten)]
    kernel: KernelOpts,
    #[command(flatten)]
    phase: PhaseOpts,
    /// Register-bin-0 handling.
    #[arg(long, value_enum)]
    clamp_policy: Option<ClampChoice>,
    /// Also emit the exact-oracle value and the signed estimation error.
    #[arg(long)]
    with_oracle: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Input dataset CSV (as written by gen-data).
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    #[command(flatten)]
    kernel: KernelOpts,
    #[command(flatten)]
    phase: PhaseOpts,
    /// Probe budget for each classical trace estimator.
    #[arg(long)]
    probes: Option<usize>,
    #[arg(long)]
    taylor_degree: Option<usize>,
    #[arg(long)]
    chebyshev_degree: Option<usize>,
    /// Record wall-clock times (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Input dataset CSV (as written by gen-data).
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Covariance family to train.
    #[arg(long, value_enum)]
    kernel: Option<KernelChoice>,
    /// Cutoff radius of the compactly supported kernel.
    #[arg(long)]
    support_radius: Option<f64>,
    /// Candidate lengthscales, comma-separated.
    #[arg(long, value_name = "LIST")]
    grid_lengthscale: Option<String>,
    /// Candidate signal variances, comma-separated.
    #[arg(long, value_name = "LIST")]
    grid_signal_variance: Option<String>,
    /// Candidate noise variances, comma-separated.
    #[arg(long, value_name = "LIST")]
    grid_noise_variance: Option<String>,
    /// How candidates are scored.
    #[arg(long, value_enum)]
    evaluator: Option<EvaluatorChoice>,
    /// Coordinate-ascent pass budget.
    #[arg(long)]
    max_steps: Option<u32>,
    #[command(flatten)]
    phase: PhaseOpts,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    kernel: KernelOpts,
    #[command(flatten)]
    phase: PhaseOpts,
    /// Problem sizes, comma-separated.
    #[arg(long, value_name = "LIST")]
    sizes: Option<String>,
    /// Grid spacing of the generated 1-d instances.
    #[arg(long)]
    spacing: Option<f64>,
    /// Independent repetitions per size.
    #[arg(long)]
    repetitions: Option<u32>,
    /// Relative lengthscale perturbation defining the delta objective.
    #[arg(long)]
    delta_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelChoice {
    /// Squared-exponential (radial basis function) kernel.
    Rbf,
    /// Compactly supported polynomial kernel; sparse covariance.
    Compact,
}

impl KernelChoice {
    fn kind(self) -> KernelKind {
        match self {
            KernelChoice::Rbf => KernelKind::SquaredExponential,
            KernelChoice::Compact => KernelKind::CompactSupport,
        }
    }
}

impl FromStr for KernelChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rbf" => Ok(KernelChoice::Rbf),
            "compact" => Ok(KernelChoice::Compact),
            other => Err(format!(
                "unknown kernel {other:?} (expected rbf or compact)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClampChoice {
    /// Decode bin 0 as half a bin width.
    HalfBin,
    /// Redraw the whole trial on bin 0.
    Resample,
}

impl ClampChoice {
    fn policy(self) -> ClampPolicy {
        match self {
            ClampChoice::HalfBin => ClampPolicy::HalfBinClamp,
            ClampChoice::Resample => ClampPolicy::Resample,
        }
    }
}

impl FromStr for ClampChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "half-bin" => Ok(ClampChoice::HalfBin),
            "resample" => Ok(ClampChoice::Resample),
            other => Err(format!(
                "unknown clamp policy {other:?} (expected half-bin or resample)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvaluatorChoice {
    /// Exact Cholesky scoring.
    Exact,
    /// Sampled phase-estimation scoring.
    Quantum,
}

impl FromStr for EvaluatorChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(EvaluatorChoice::Exact),
            "quantum" => Ok(EvaluatorChoice::Quantum),
            other => Err(format!(
                "unknown evaluator {other:?} (expected exact or quantum)"
            )),
        }
    }
}

/// Evolution-time selection: the padded default rule, or a user-fixed time.
#[derive(Debug, Clone, Copy, PartialEq)]
enum TimePolicy {
    Auto,
    Fixed(f64),
}

impl TimePolicy {
    fn fixed(self) -> Option<f64> {
        match self {
            TimePolicy::Auto => None,
            TimePolicy::Fixed(t0) => Some(t0),
        }
    }
}

fn parse_time_policy(s: &str) -> Result<TimePolicy, String> {
    if s == "auto" {
        return Ok(TimePolicy::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(TimePolicy::Fixed(v)),
        _ => Err(format!(
            "expected 'auto' or a positive evolution time, got {s:?}"
        )),
    }
}

impl FromStr for TimePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_time_policy(s)
    }
}

/// Command failures, split by who must fix them.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e {
                // Parameter values outside their documented ranges are
                // usage problems no matter which layer catches them.
                Error::InvalidConfig(_)
                | Error::OutOfRange { .. }
                | Error::InvalidInterval { .. }
                | Error::EmptyGrid
                | Error::TooFewSamples(_) => 1,
                Error::Io(_)
                | Error::Parse { .. }
                | Error::NotSymmetric { .. }
                | Error::DimensionMismatch { .. }
                | Error::ZeroVector => 2,
                _ => 3,
            },
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::GenData(a) => run_gen_data(a),
        Command::Estimate(kind) => match kind {
            EstimateKind::Logdet(a) => run_estimate(Term::Logdet, a),
            EstimateKind::Datafit(a) => run_estimate(Term::Datafit, a),
            EstimateKind::Lml(a) => run_estimate(Term::Lml, a),
        },
        Command::Compare(a) => run_compare(a),
        Command::Train(a) => run_train(a),
        Command::Study(a) => run_study(a),
    }
}

// ---------------------------------------------------------------------
// flag / config-file resolution

fn load_config(common: &CommonOpts) -> Result<ConfigFile, CliError> {
    match &common.config {
        None => Ok(ConfigFile::empty()),
        Some(path) => ConfigFile::load(path).map_err(|e| match e {
            LoadError::Io(e) => CliError::Core(e.into()),
            LoadError::Malformed(msg) => CliError::Usage(msg),
        }),
    }
}

/// Flag value if given, else the config-file entry, else None.
fn pick<T>(cli: Option<T>, file: &ConfigFile, key: &str) -> Result<Option<T>, CliError>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    match cli {
        Some(v) => Ok(Some(v)),
        None => file.get_parsed(key).map_err(CliError::Usage),
    }
}

fn pick_flag(cli: bool, file: &ConfigFile, key: &str) -> Result<bool, CliError> {
    if cli {
        return Ok(true);
    }
    file.get_flag(key).map_err(CliError::Usage)
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| {
        CliError::Usage(format!(
            "{flag} is required (as a flag or a config-file entry)"
        ))
    })
}

fn parse_list<T>(raw: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    raw.split(',')
        .map(|tok| {
            let tok = tok.trim();
            tok.parse::<T>()
                .map_err(|e| CliError::Usage(format!("{what}: bad entry {tok:?}: {e}")))
        })
        .collect()
}

fn pick_list<T>(
    cli: &Option<String>,
    file: &ConfigFile,
    key: &str,
    what: &str,
) -> Result<Option<Vec<T>>, CliError>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    match pick(cli.clone(), file, key)? {
        None => Ok(None),
        Some(raw) => parse_list(&raw, what).map(Some),
    }
}

impl CommonOpts {
    fn seed(&self, file: &ConfigFile) -> Result<u64, CliError> {
        require(pick(self.seed, file, "seed")?, "--seed")
    }

    fn out(&self, file: &ConfigFile) -> Result<Option<PathBuf>, CliError> {
        pick(self.out.clone(), file, "out")
    }
}

impl KernelOpts {
    fn resolve(&self, file: &ConfigFile) -> Result<KernelSpec, CliError> {
        let kind = pick(self.kernel, file, "kernel")?
            .unwrap_or(KernelChoice::Rbf)
            .kind();
        let params = Hyperparameters::new(
            pick(self.lengthscale, file, "lengthscale")?.unwrap_or(1.0),
            pick(self.signal_variance, file, "signal-variance")?.unwrap_or(1.0),
            pick(self.noise_variance, file, "noise-variance")?.unwrap_or(0.1),
        )
        .with_support_radius(pick(self.support_radius, file, "support-radius")?.unwrap_or(1.0));
        params.validate()?;
        Ok(KernelSpec::new(kind, params))
    }
}

/// Resolved phase-estimation parameters shared by several commands.
struct PhaseParams {
    register_size: usize,
    policy: TimePolicy,
    samples_det: u64,
    samples_fit: u64,
}

impl PhaseOpts {
    fn resolve(&self, file: &ConfigFile) -> Result<PhaseParams, CliError> {
        Ok(PhaseParams {
            register_size: pick(self.register_size, file, "T")?.unwrap_or(256),
            policy: pick(self.t0_policy, file, "t0-policy")?.unwrap_or(TimePolicy::Auto),
            samples_det: pick(self.samples_det, file, "samples-det")?.unwrap_or(10_000),
            samples_fit: pick(self.samples_fit, file, "samples-fit")?.unwrap_or(10_000),
        })
    }
}

impl PhaseParams {
    /// Builds the register configuration against a spectral bound. The
    /// auto policy pads the bound before applying the top-bin rule so
    /// eigenvalues near the bound cannot leak tail mass around the phase
    /// circle; a fixed time is used exactly as given.
    fn pe_config(&self, bound: f64, clamp: ClampPolicy) -> Result<PhaseEstimationConfig, CliError> {
        let cfg = match self.policy {
            TimePolicy::Auto => PhaseEstimationConfig::with_default_t0(
                self.register_size,
                headroom_bound(bound),
                clamp,
            )?,
            TimePolicy::Fixed(t0) => {
                PhaseEstimationConfig::new(self.register_size, t0, bound, clamp)?
            }
        };
        Ok(cfg)
    }
}

// ---------------------------------------------------------------------
// output plumbing

fn with_output<F>(path: &Option<PathBuf>, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> qgp_core::Result<()>,
{
    match path {
        Some(p) => {
            let file = File::create(p).map_err(Error::from)?;
            let mut out = io::BufWriter::new(file);
            body(&mut out)?;
            out.flush().map_err(Error::from)?;
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            body(&mut out)?;
            out.flush().map_err(Error::from)?;
        }
    }
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(Error::from)?;
    Ok(read_dataset_csv(&mut BufReader::new(file))?)
}

// ---------------------------------------------------------------------
// commands

fn run_gen_data(a: &GenDataArgs) -> Result<(), CliError> {
    let file = load_config(&a.common)?;
    let seed = a.common.seed(&file)?;
    let n = require(pick(a.n, &file, "n")?, "--n")?;
    if n == 0 || !n.is_power_of_two() {
        return Err(CliError::Usage(format!(
            "--n must be a power of two for downstream simulator use, got {n}"
        )));
    }
    let d = pick(a.d, &file, "d")?.unwrap_or(1);
    let spec = a.kernel.resolve(&file)?;
    let data = match pick(a.spacing, &file, "spacing")? {
        Some(h) => {
            if d != 1 {
                return Err(CliError::Usage(
                    "--spacing builds a 1-d grid; --d must be 1".into(),
                ));
            }
            grid_dataset_1d(n, h, &spec, seed)?
        }
        None => synthetic_dataset(n, d, &spec, seed)?,
    };
    with_output(&a.common.out(&file)?, |mut out| {
        write_dataset_csv(&data, &mut out)
    })
}

#[derive(Debug, Clone, Copy)]
enum Term {
    Logdet,
    Datafit,
    Lml,
}

/// Second JSONL line of `estimate --with-oracle`: the exact value and the
/// signed error of the sampled mean against it.
#[derive(Serialize)]
struct OracleLine {
    oracle: f64,
    error: f64,
}

fn run_estimate(term: Term, a: &EstimateArgs) -> Result<(), CliError> {
    let file = load_config(&a.common)?;
    let seed = a.common.seed(&file)?;
    let data = read_dataset(&require(pick(a.data.clone(), &file, "data")?, "--data")?)?;
    let spec = a.kernel.resolve(&file)?;
    let phase = a.phase.resolve(&file)?;
    let clamp = pick(a.clamp_policy, &file, "clamp-policy")?
        .unwrap_or(ClampChoice::HalfBin)
        .policy();
    let with_oracle = pick_flag(a.with_oracle, &file, "with-oracle")?;

    let matrix = regularized_covariance(&data, &spec)?;
    let y = data.outputs();

    // The oracle runs first: a numerically hopeless instance should fail
    // before any sampling work, not after.
    let oracle = if with_oracle {
        Some(match term {
            Term::Logdet => cholesky_logdet(&matrix)?,
            Term::Datafit => {
                let x = solve_spd(&matrix, y)?;
                y.iter().zip(&x).map(|(a, b)| a * b).sum()
            }
            Term::Lml => exact_lml_from_matrix(&matrix, y)?,
        })
    } else {
        None
    };

    let sd = eigendecompose(&matrix)?;
    let cfg = phase.pe_config(spectral_upper_bound(&matrix), clamp)?;

    let report = match term {
        Term::Logdet => estimate_logdet(&sd, &cfg, phase.samples_det, seed)?,
        Term::Datafit => {
            let py = sd.project(y)?;
            let c = choose_rotation_constant(&cfg, spec.params.noise_variance)?;
            estimate_datafit(&sd, &py, &cfg, &c, phase.samples_fit, seed)?
        }
        Term::Lml => {
            let py = sd.project(y)?;
            let c = choose_rotation_constant(&cfg, spec.params.noise_variance)?;
            estimate_lml(
                &sd,
                &py,
                &cfg,
                &c,
                phase.samples_det,
                phase.samples_fit,
                seed,
            )?
        }
    };

    with_output(&a.common.out(&file)?, |out| {
        writeln!(
            out,
            "{}",
            serde_json::to_string(&report).expect("report serialization")
        )?;
        if let Some(oracle) = oracle {
            let line = OracleLine {
                oracle,
                error: report.mean - oracle,
            };
            writeln!(
                out,
                "{}",
                serde_json::to_string(&line).expect("oracle serialization")
            )?;
        }
        Ok(())
    })
}

fn run_compare(a: &CompareArgs) -> Result<(), CliError> {
    let file = load_config(&a.common)?;
    let seed = a.common.seed(&file)?;
    let data = read_dataset(&require(pick(a.data.clone(), &file, "data")?, "--data")?)?;
    let spec = a.kernel.resolve(&file)?;
    let phase = a.phase.resolve(&file)?;
    let cfg = ComparisonConfig {
        register_size: phase.register_size,
        t0: phase.policy.fixed(),
        samples_det: phase.samples_det,
        samples_fit: phase.samples_fit,
        probe_count: pick(a.probes, &file, "probes")?.unwrap_or(1000),
        taylor_degree: pick(a.taylor_degree, &file, "taylor-degree")?.unwrap_or(5),
        chebyshev_degree: pick(a.chebyshev_degree, &file, "chebyshev-degree")?.unwrap_or(30),
        seed,
        timing: pick_flag(a.timing, &file, "timing")?,
    };
    let rows = compare_estimators(&data, &spec, &cfg)?;
    with_output(&a.common.out(&file)?, |mut out| {
        write_comparison_csv(&rows, &mut out)
    })
}

fn run_train(a: &TrainArgs) -> Result<(), CliError> {
    let file = load_config(&a.common)?;
    let seed = a.common.seed(&file)?;
    let data = read_dataset(&require(pick(a.data.clone(), &file, "data")?, "--data")?)?;
    let kind = pick(a.kernel, &file, "kernel")?
        .unwrap_or(KernelChoice::Rbf)
        .kind();
    let support_radius = pick(a.support_radius, &file, "support-radius")?.unwrap_or(1.0);
    let grid = TrainingGrid {
        lengthscales: require(
            pick_list(
                &a.grid_lengthscale,
                &file,
                "grid-lengthscale",
                "--grid-lengthscale",
            )?,
            "--grid-lengthscale",
        )?,
        signal_variances: require(
            pick_list(
                &a.grid_signal_variance,
                &file,
                "grid-signal-variance",
                "--grid-signal-variance",
            )?,
            "--grid-signal-variance",
        )?,
        noise_variances: require(
            pick_list(
                &a.grid_noise_variance,
                &file,
                "grid-noise-variance",
                "--grid-noise-variance",
            )?,
            "--grid-noise-variance",
        )?,
    };
    let phase = a.phase.resolve(&file)?;
    let evaluator = match pick(a.evaluator, &file, "evaluator")?.unwrap_or(EvaluatorChoice::Exact) {
        EvaluatorChoice::Exact => LmlEvaluator::Exact,
        EvaluatorChoice::Quantum => LmlEvaluator::Quantum {
            register_size: phase.register_size,
            t0: phase.policy.fixed(),
            samples_det: phase.samples_det,
            samples_fit: phase.samples_fit,
        },
    };
    let mut cfg = TrainerConfig::new(evaluator, seed);
    if let Some(max_steps) = pick(a.max_steps, &file, "max-steps")? {
        cfg = cfg.with_max_steps(max_steps);
    }
    let trace = train(&data, kind, support_radius, &grid, &cfg)?;
    with_output(&a.common.out(&file)?, |mut out| {
        write_trace_jsonl(&trace, &mut out)
    })
}

fn run_study(a: &StudyArgs) -> Result<(), CliError> {
    let file = load_config(&a.common)?;
    let seed = a.common.seed(&file)?;
    let spec = a.kernel.resolve(&file)?;
    if spec.kind == KernelKind::CompactSupport {
        return Err(CliError::Usage(
            "the study perturbs the lengthscale, which the compact kernel does not use; \
             use --kernel rbf"
                .into(),
        ));
    }
    let phase = a.phase.resolve(&file)?;
    let sizes: Vec<usize> =
        pick_list(&a.sizes, &file, "sizes", "--sizes")?.unwrap_or_else(|| vec![16, 64, 256]);
    let spacing = pick(a.spacing, &file, "spacing")?.unwrap_or(0.25);
    let mut cfg = StudyConfig::new(
        phase.register_size,
        phase.samples_det,
        phase.samples_fit,
        seed,
    );
    cfg.t0 = phase.policy.fixed();
    if let Some(reps) = pick(a.repetitions, &file, "repetitions")? {
        cfg.repetitions = reps;
    }
    if let Some(fraction) = pick(a.delta_fraction, &file, "delta-fraction")? {
        cfg.delta_fraction = fraction;
    }
    let rows = relative_variance_study(
        |n, instance_seed| grid_dataset_1d(n, spacing, &spec, instance_seed),
        &spec,
        &sizes,
        &cfg,
    )?;
    with_output(&a.common.out(&file)?, |mut out| {
        write_study_csv(&rows, &mut out)
    })
}
