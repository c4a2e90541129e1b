mod args;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use spamm_core::bench::{
    emit, emit_purify_report, run_purification_experiment, run_squaring_experiment, sharpness,
    sharpness_ordering_holds, ExperimentConfig, MatrixSource, OutputFormat, PurifyExperimentConfig,
};
use spamm_core::errorctl::ToleranceGrid;
use spamm_core::oracle::DecayModelSpec;
use spamm_core::{Exec, RunRecord, Status, DEFAULT_LEAF_SIZE};

use args::{GenSpec, MatrixArg, ToleranceList, VariantList};
use config::ConfigFile;

const EXIT_VIOLATION: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "spamm-ec", version, about = "SpAMM error-control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Square an input matrix twice per variant and tolerance.
    Square(SquareArgs),
    /// Purify a generated Hamiltonian with each variant.
    Purify(PurifyArgs),
}

#[derive(Args, Debug, Default)]
struct GridArgs {
    /// First candidate SpAMM tolerance.
    #[arg(long)]
    grid_start: Option<f64>,
    /// Ratio between consecutive candidates.
    #[arg(long)]
    grid_ratio: Option<f64>,
    /// Number of candidates.
    #[arg(long)]
    grid_count: Option<usize>,
}

#[derive(Args, Debug)]
struct SquareArgs {
    /// key=value file mirroring the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// MatrixMarket file, or gen:n,alpha,seed for a generated density matrix.
    #[arg(long)]
    matrix: Option<MatrixArg>,
    #[arg(long)]
    variants: Option<VariantList>,
    /// Comma list, start:end:log, or start:end:log:count.
    #[arg(long)]
    tolerances: Option<ToleranceList>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    leaf: Option<usize>,
    /// Occupied states for generated matrices (default n/4).
    #[arg(long)]
    occupation: Option<usize>,
    /// Truncation applied to a generated density matrix before squaring.
    #[arg(long)]
    input_tolerance: Option<f64>,
    /// Run without the thread pool.
    #[arg(long)]
    sequential: bool,
    /// Output file; `.json` selects JSON, anything else CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PurifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// n,alpha,seed for the generated Hamiltonian.
    #[arg(long)]
    gen: Option<GenSpec>,
    /// Occupied states (default n/4).
    #[arg(long)]
    occupation: Option<usize>,
    /// Total error budget.
    #[arg(long)]
    epsilon: Option<f64>,
    /// One variant or a comma list (default all).
    #[arg(long)]
    variant: Option<VariantList>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    leaf: Option<usize>,
    /// Largest n checked against the dense eigensolver.
    #[arg(long)]
    oracle_limit: Option<usize>,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

const GRID_KEYS: [&str; 3] = ["grid-start", "grid-ratio", "grid-count"];

const SQUARE_KEYS: [&str; 8] = [
    "matrix",
    "variants",
    "tolerances",
    "leaf",
    "occupation",
    "input-tolerance",
    "sequential",
    "out",
];

const PURIFY_KEYS: [&str; 9] = [
    "gen",
    "occupation",
    "epsilon",
    "variant",
    "max-iter",
    "leaf",
    "oracle-limit",
    "sequential",
    "out",
];

fn load_config(path: Option<&Path>, keys: &[&str]) -> Result<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let cfg = ConfigFile::load(path)?;
    let known: Vec<&str> = keys.iter().chain(GRID_KEYS.iter()).copied().collect();
    cfg.check_keys(&known)?;
    Ok(cfg)
}

fn grid(args: GridArgs, cfg: &ConfigFile) -> Result<ToleranceGrid> {
    let start = cfg
        .resolve(args.grid_start, "grid-start")?
        .unwrap_or(ToleranceGrid::DEFAULT_START);
    let ratio = cfg
        .resolve(args.grid_ratio, "grid-ratio")?
        .unwrap_or(ToleranceGrid::DEFAULT_RATIO);
    let count = cfg
        .resolve(args.grid_count, "grid-count")?
        .unwrap_or(ToleranceGrid::DEFAULT_COUNT);
    Ok(ToleranceGrid::geometric(start, ratio, count)?)
}

fn exec(sequential: bool, cfg: &ConfigFile) -> Result<Exec> {
    let flag = sequential.then_some(true);
    Ok(if cfg.resolve(flag, "sequential")?.unwrap_or(false) {
        Exec::Sequential
    } else {
        Exec::Parallel
    })
}

fn decay_spec(g: GenSpec, occupation: Option<usize>) -> DecayModelSpec {
    let spec = DecayModelSpec::new(g.dimension, g.decay_rate, g.seed);
    match occupation {
        Some(occ) => spec.with_occupation(occ),
        None => spec,
    }
}

fn output_path(out: Option<PathBuf>, cfg: &ConfigFile, default: &str) -> Result<PathBuf> {
    Ok(cfg
        .resolve(out, "out")?
        .unwrap_or_else(|| PathBuf::from(default)))
}

fn count_failures(records: &[RunRecord]) -> (usize, usize) {
    let violations = records
        .iter()
        .filter(|r| r.status == Status::Violation)
        .count();
    let stalled = records
        .iter()
        .filter(|r| r.status == Status::NotConverged)
        .count();
    (violations, stalled)
}

fn print_sharpness(records: &[RunRecord]) {
    let summary = sharpness(records);
    for s in &summary {
        println!(
            "  {:<8} error/tolerance mean {:.3e} max {:.3e}",
            s.variant.as_str(),
            s.mean_ratio,
            s.max_ratio
        );
    }
    if sharpness_ordering_holds(&summary) == Some(false) {
        eprintln!("warning: sharpness is not ordered truncmul >= hybrid >= spamm on this input");
    }
}

fn square(args: SquareArgs) -> Result<bool> {
    let cfg = load_config(args.config.as_deref(), &SQUARE_KEYS)?;
    let matrix: MatrixArg = cfg
        .resolve(args.matrix, "matrix")?
        .context("no input matrix; pass --matrix <file|gen:n,alpha,seed>")?;
    let occupation = cfg.resolve(args.occupation, "occupation")?;
    let source = match matrix {
        MatrixArg::File(path) => {
            if occupation.is_some() {
                bail!("--occupation only applies to generated matrices");
            }
            MatrixSource::File(path)
        }
        MatrixArg::Gen(g) => MatrixSource::GeneratedDensity(decay_spec(g, occupation)),
    };
    let variants = cfg
        .resolve(args.variants, "variants")?
        .map_or_else(|| "all".parse(), Ok)?;
    let tolerances: ToleranceList = cfg
        .resolve(args.tolerances, "tolerances")?
        .map_or_else(|| "1e-2:1e-8:log".parse(), Ok)?;

    let mut config = ExperimentConfig::new(source, variants.0, tolerances.0);
    config.grid = grid(args.grid, &cfg)?;
    config.leaf_size = cfg.resolve(args.leaf, "leaf")?.unwrap_or(DEFAULT_LEAF_SIZE);
    if let Some(t) = cfg.resolve(args.input_tolerance, "input-tolerance")? {
        config.input_tolerance = t;
    }
    config.exec = exec(args.sequential, &cfg)?;
    let out = output_path(args.out, &cfg, "results.csv")?;

    let records = run_squaring_experiment(&config)?;
    emit(&records, &out, OutputFormat::from_path(&out))
        .with_context(|| format!("writing {}", out.display()))?;

    let (violations, _) = count_failures(&records);
    println!("{} records written to {}", records.len(), out.display());
    print_sharpness(&records);
    if violations > 0 {
        eprintln!("error: {violations} tolerance violations");
    }
    Ok(violations == 0)
}

fn purify(args: PurifyArgs) -> Result<bool> {
    let cfg = load_config(args.config.as_deref(), &PURIFY_KEYS)?;
    let g: GenSpec = cfg
        .resolve(args.gen, "gen")?
        .context("no Hamiltonian; pass --gen n,alpha,seed")?;
    let spec = decay_spec(g, cfg.resolve(args.occupation, "occupation")?);
    let variants = cfg
        .resolve(args.variant, "variant")?
        .map_or_else(|| "all".parse(), Ok)?;
    let epsilon = cfg.resolve(args.epsilon, "epsilon")?.unwrap_or(1e-5);

    let mut config = PurifyExperimentConfig::new(spec, variants.0, epsilon);
    if let Some(n) = cfg.resolve(args.max_iter, "max-iter")? {
        config.max_iterations = n;
    }
    config.grid = grid(args.grid, &cfg)?;
    config.leaf_size = cfg.resolve(args.leaf, "leaf")?.unwrap_or(DEFAULT_LEAF_SIZE);
    if let Some(n) = cfg.resolve(args.oracle_limit, "oracle-limit")? {
        config.oracle_limit = n;
    }
    config.exec = exec(args.sequential, &cfg)?;
    let out = output_path(args.out, &cfg, "run.json")?;

    let report = run_purification_experiment(&config)?;
    emit_purify_report(&report, &config, &out, OutputFormat::from_path(&out))
        .with_context(|| format!("writing {}", out.display()))?;

    println!(
        "{} records written to {}",
        report.records.len(),
        out.display()
    );
    for s in &report.summaries {
        let oracle = s
            .oracle_error
            .map_or_else(|| "not checked".to_string(), |e| format!("{e:.3e}"));
        println!(
            "  {:<8} converged {} after {} iterations, |D - D_ref| {oracle}, {:.3}s",
            s.variant.as_str(),
            s.converged,
            s.iterations,
            s.wall_time
        );
    }
    let (violations, stalled) = count_failures(&report.records);
    if violations > 0 {
        eprintln!("error: {violations} tolerance violations");
    }
    if stalled > 0 {
        eprintln!("error: {stalled} variants did not converge");
    }
    if let Some(s) = report
        .summaries
        .iter()
        .find(|s| s.oracle_error.is_some_and(|e| !(e < s.epsilon)))
    {
        eprintln!(
            "error: {} missed the reference density matrix by more than epsilon",
            s.variant
        );
    }
    Ok(report.all_ok())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Square(a) => square(a),
        Command::Purify(a) => purify(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VIOLATION),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
