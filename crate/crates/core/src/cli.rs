//! Command-line front end. Exit codes: 0 success, 1 usage or configuration
//! error, 2 runtime failure or failed validation.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::channel::draw_realization;
use crate::combining::CombinerRegistry;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::report::{single_dump, sweep_csv, Sidecar};
use crate::seed::SeedPolicy;
use crate::sweep::run_sweep;
use crate::validation::{validate_realization, SampleCounts};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ramimo", version, about = "Repeater-assisted massive MIMO uplink with a non-linear repeater amplifier")]
pub struct Cli {
    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Average sum-SE over the amplification-gain grid.
    Sweep(SweepArgs),
    /// Check the closed forms against Monte-Carlo estimates.
    Validate(ValidateArgs),
    /// Dump one realization with its per-point Bussgang model and SE.
    Single(SingleArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Master seed (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Samples for every estimator (overrides `validate.samples_*`).
    #[arg(long)]
    pub samples: Option<u64>,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct SingleArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Realization index.
    #[arg(long)]
    pub index: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.quiet);
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn init_logging(quiet: bool) {
    let level = if quiet { "warn" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Validate(a) => validate(a),
        Command::Single(a) => single(a),
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start thread pool: {e}")))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<i32> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(dir) = &args.out {
        cfg.output.dir = dir.clone();
    }
    let spec = cfg.sweep_spec(&CombinerRegistry::with_defaults())?;
    info!(
        "sweep: {} alpha x {} rho x {} flavors, {} realizations, seed {}",
        spec.alpha_grid.len(),
        spec.rho_grid.len(),
        spec.flavors.len(),
        spec.num_realizations,
        spec.master_seed
    );
    let start = Instant::now();
    let result = pool(args.threads)?.install(|| run_sweep(&spec))?;
    let wall = start.elapsed().as_secs_f64();

    let csv_path = cfg.output.dir.join(format!("{}.csv", cfg.output.stem));
    let json_path = cfg.output.dir.join(format!("{}.json", cfg.output.stem));
    write_file(&csv_path, &sweep_csv(&result))?;
    let sidecar = Sidecar::new(&cfg, &result, wall);
    write_file(&json_path, &(serde_json::to_string_pretty(&sidecar).expect("sidecar serializes") + "\n"))?;
    info!("wrote {} and {} in {wall:.1} s", csv_path.display(), json_path.display());
    Ok(EXIT_OK)
}

fn validate(args: &ValidateArgs) -> Result<i32> {
    let cfg = RunConfig::load(&args.config)?;
    let full = cfg.system_params()?;
    let channels = draw_realization(&cfg.scenario(), &full, cfg.validate.realization, &SeedPolicy::new(cfg.seed))?;
    let m = cfg.validate.antennas.min(full.num_bs_antennas);
    let channels = channels.truncate_antennas(m);
    let base = crate::scenario::SystemParams { num_bs_antennas: m, ..full };
    let samples = match args.samples {
        Some(n) => SampleCounts { gain: n, covariance: n },
        None => SampleCounts { gain: cfg.validate.samples_gain, covariance: cfg.validate.samples_cov },
    };
    let (alphas, rhos) = cfg.validation_points();
    info!(
        "validate: realization {} on {m} antennas, {} operating points, N = {}/{}",
        cfg.validate.realization,
        alphas.len() * rhos.len(),
        samples.gain,
        samples.covariance
    );
    let report = pool(args.threads)?.install(|| validate_realization(&channels, &base, &alphas, &rhos, samples, cfg.seed))?;
    print!("{}", report.to_text());
    if let Some(path) = &args.json {
        write_file(path, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    }
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_FAILURE })
}

fn single(args: &SingleArgs) -> Result<i32> {
    let cfg = RunConfig::load(&args.config)?;
    let spec = cfg.sweep_spec(&CombinerRegistry::with_defaults())?;
    let channels = draw_realization(&spec.scenario, &spec.base_params, args.index, &SeedPolicy::new(cfg.seed))?;
    let dump = single_dump(
        &channels,
        &spec.base_params,
        &spec.alpha_grid,
        &spec.rho_grid,
        &spec.flavors,
        args.index,
        cfg.seed,
    )?;
    let text = serde_json::to_string_pretty(&dump).expect("dump serializes") + "\n";
    match &args.out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}
