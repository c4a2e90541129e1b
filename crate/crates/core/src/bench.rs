//! Experiment protocols and result emission.
//!
//! The squaring experiment follows the end-of-purification protocol: square
//! the input with a variant and tolerance, square the result again with the
//! same tolerance, and compare the second product against the exact dense
//! square of its input. Only the second iteration is recorded.
//!
//! Output columns are fixed; see [`CSV_COLUMNS`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::dense::{dense_distance, dense_multiply, DenseMatrix};
use crate::error::{Error, Result};
use crate::errorctl::{truncate, ToleranceGrid};
use crate::exec::Exec;
use crate::mtx;
use crate::oracle::{
    density_matrix_oracle, generate_decay_matrix, gershgorin_bounds, DecayModelSpec,
};
use crate::purification::{
    approximate_step, initial_transform, purify, PurificationConfig, Sp2Polynomial,
    SpectralTransform,
};
use crate::quadtree::{QuadTreeMatrix, DEFAULT_LEAF_SIZE};
use crate::record::{RunRecord, Status, Variant};

pub const CSV_COLUMNS: [&str; 14] = [
    "variant",
    "iter",
    "tolerance",
    "chosen_tau",
    "t_mul",
    "t_trunc",
    "t_spamm",
    "t_cse",
    "nnz_in",
    "nnz_mid",
    "nnz_out",
    "nnz_blocks_out",
    "realized_error",
    "status",
];

/// Where the squaring experiment gets its input matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MatrixSource {
    /// MatrixMarket file, used as is.
    File(PathBuf),
    /// Density matrix of a generated decay Hamiltonian, computed by the dense
    /// oracle and truncated with the experiment's input tolerance.
    GeneratedDensity(DecayModelSpec),
    /// Starting purification matrix `X_0` of a generated decay Hamiltonian.
    GeneratedStart(DecayModelSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub source: MatrixSource,
    pub variants: Vec<Variant>,
    pub tolerances: Vec<f64>,
    pub grid: ToleranceGrid,
    pub leaf_size: usize,
    /// Truncation applied to generated density matrices before squaring.
    pub input_tolerance: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl ExperimentConfig {
    pub fn new(source: MatrixSource, variants: Vec<Variant>, tolerances: Vec<f64>) -> Self {
        ExperimentConfig {
            source,
            variants,
            tolerances,
            grid: ToleranceGrid::default(),
            leaf_size: DEFAULT_LEAF_SIZE,
            input_tolerance: 1e-10,
            exec: Exec::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::InvalidArgument("no variants given".into()));
        }
        if self.tolerances.is_empty() {
            return Err(Error::InvalidArgument("no tolerances given".into()));
        }
        if let Some(t) = self.tolerances.iter().find(|t| !(**t > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {t}"
            )));
        }
        Ok(())
    }
}

/// `X_0` for a generated Hamiltonian, using its Gershgorin interval.
pub fn generated_start(spec: &DecayModelSpec, leaf_size: usize) -> Result<QuadTreeMatrix> {
    let f = generate_decay_matrix(spec)?;
    start_from_dense(&f, leaf_size)
}

fn start_from_dense(f: &DenseMatrix, leaf_size: usize) -> Result<QuadTreeMatrix> {
    let (lo, hi) = gershgorin_bounds(f);
    let fq = QuadTreeMatrix::from_dense(f, leaf_size)?;
    initial_transform(&fq, SpectralTransform::new(lo, hi)?)
}

pub fn load_input(config: &ExperimentConfig) -> Result<QuadTreeMatrix> {
    match &config.source {
        MatrixSource::File(path) => mtx::read_matrix(path, config.leaf_size),
        MatrixSource::GeneratedDensity(spec) => {
            let f = generate_decay_matrix(spec)?;
            let d = density_matrix_oracle(&f, spec.occupation)?;
            let dq = QuadTreeMatrix::from_dense(&d, config.leaf_size)?;
            Ok(truncate(&dq, config.input_tolerance).matrix)
        }
        MatrixSource::GeneratedStart(spec) => generated_start(spec, config.leaf_size),
    }
}

/// Two squarings per (variant, tolerance); records the second.
pub fn run_squaring_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let input = load_input(config)?;
    squaring_records(&input, config)
}

/// Same as [`run_squaring_experiment`] on an already loaded matrix.
pub fn squaring_records(
    input: &QuadTreeMatrix,
    config: &ExperimentConfig,
) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let mut records = Vec::new();
    for &variant in &config.variants {
        for &tol in &config.tolerances {
            records.push(square_twice(
                input,
                variant,
                tol,
                &config.grid,
                config.exec,
            )?);
        }
    }
    Ok(records)
}

/// Squares `input` twice with `variant` at tolerance `tol` and measures the
/// second step against the exact dense square.
pub fn square_twice(
    input: &QuadTreeMatrix,
    variant: Variant,
    tol: f64,
    grid: &ToleranceGrid,
    exec: Exec,
) -> Result<RunRecord> {
    let first = approximate_step(variant, input, Sp2Polynomial::Square, tol, grid, exec)?;
    let x1 = first.output;
    let second = approximate_step(variant, &x1, Sp2Polynomial::Square, tol, grid, exec)?;
    let x1_dense = x1.to_dense();
    let exact = dense_multiply(&x1_dense, &x1_dense)?;
    let realized = dense_distance(&second.output.to_dense(), &exact)?;
    Ok(RunRecord {
        variant,
        iter: 2,
        tolerance: tol,
        chosen_tau: second.chosen_tau.map(|t| t.value()),
        times: second.times,
        nnz_in: x1.nnz(),
        nnz_mid: second.intermediate.nnz(),
        nnz_out: second.output.nnz(),
        nnz_blocks_out: second.output.nnz_blocks(),
        realized_error: realized,
        status: Status::judge(realized, tol),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PurifyExperimentConfig {
    pub spec: DecayModelSpec,
    pub variants: Vec<Variant>,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub grid: ToleranceGrid,
    pub leaf_size: usize,
    /// Largest dimension for which the dense oracle is run.
    pub oracle_limit: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl PurifyExperimentConfig {
    pub fn new(spec: DecayModelSpec, variants: Vec<Variant>, epsilon: f64) -> Self {
        PurifyExperimentConfig {
            spec,
            variants,
            epsilon,
            max_iterations: 100,
            grid: ToleranceGrid::default(),
            leaf_size: DEFAULT_LEAF_SIZE,
            oracle_limit: 1024,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PurifySummary {
    pub variant: Variant,
    pub converged: bool,
    pub iterations: usize,
    pub idempotency: f64,
    /// `‖D̃ - D‖_F` against the eigensolver, when it was run.
    pub oracle_error: Option<f64>,
    pub epsilon: f64,
    pub wall_time: f64,
    pub nnz_final: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PurifyReport {
    pub records: Vec<RunRecord>,
    pub summaries: Vec<PurifySummary>,
}

impl PurifyReport {
    /// Every variant converged, every step met its tolerance and every
    /// oracle comparison stayed below epsilon.
    pub fn all_ok(&self) -> bool {
        self.records.iter().all(|r| r.status == Status::Ok)
            && self
                .summaries
                .iter()
                .all(|s| s.converged && s.oracle_error.is_none_or(|e| e < s.epsilon))
    }
}

/// Full purification of a generated Hamiltonian with each variant.
pub fn run_purification_experiment(config: &PurifyExperimentConfig) -> Result<PurifyReport> {
    if config.variants.is_empty() {
        return Err(Error::InvalidArgument("no variants given".into()));
    }
    let f = generate_decay_matrix(&config.spec)?;
    let x0 = start_from_dense(&f, config.leaf_size)?;
    let oracle = if config.spec.dimension <= config.oracle_limit {
        Some(density_matrix_oracle(&f, config.spec.occupation)?)
    } else {
        None
    };

    let mut report = PurifyReport {
        records: Vec::new(),
        summaries: Vec::new(),
    };
    for &variant in &config.variants {
        let mut cfg = PurificationConfig::new(variant, config.spec.occupation, config.epsilon);
        cfg.max_iterations = config.max_iterations;
        cfg.grid = config.grid.clone();
        cfg.exec = config.exec;
        let start = Instant::now();
        let p = purify(&x0, &cfg)?;
        let wall_time = start.elapsed().as_secs_f64();
        let oracle_error = match &oracle {
            Some(d) => Some(dense_distance(&p.density.to_dense(), d)?),
            None => None,
        };
        report.summaries.push(PurifySummary {
            variant,
            converged: p.converged,
            iterations: p.iterations,
            idempotency: p.idempotency,
            oracle_error,
            epsilon: config.epsilon,
            wall_time,
            nnz_final: p.density.nnz(),
        });
        report.records.extend(p.records);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    /// `.json` means JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => OutputFormat::Json,
            _ => OutputFormat::Csv,
        }
    }
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// One CSV line per record, in [`CSV_COLUMNS`] order.
pub fn csv_row(r: &RunRecord) -> String {
    let fields = [
        r.variant.to_string(),
        r.iter.to_string(),
        float(r.tolerance),
        r.chosen_tau.map(float).unwrap_or_default(),
        float(r.times.mul),
        float(r.times.trunc),
        float(r.times.spamm),
        float(r.times.cse),
        r.nnz_in.to_string(),
        r.nnz_mid.to_string(),
        r.nnz_out.to_string(),
        r.nnz_blocks_out.to_string(),
        float(r.realized_error),
        r.status.as_str().to_string(),
    ];
    fields.join(",")
}

/// Flat JSON form of a record, same field names as the CSV columns.
#[derive(Serialize)]
struct JsonRow<'a> {
    variant: &'a str,
    iter: usize,
    tolerance: f64,
    chosen_tau: Option<f64>,
    t_mul: f64,
    t_trunc: f64,
    t_spamm: f64,
    t_cse: f64,
    nnz_in: usize,
    nnz_mid: usize,
    nnz_out: usize,
    nnz_blocks_out: usize,
    realized_error: f64,
    status: &'a str,
    processes: usize,
}

impl<'a> From<&'a RunRecord> for JsonRow<'a> {
    fn from(r: &'a RunRecord) -> Self {
        JsonRow {
            variant: r.variant.as_str(),
            iter: r.iter,
            tolerance: r.tolerance,
            chosen_tau: r.chosen_tau,
            t_mul: r.times.mul,
            t_trunc: r.times.trunc,
            t_spamm: r.times.spamm,
            t_cse: r.times.cse,
            nnz_in: r.nnz_in,
            nnz_mid: r.nnz_mid,
            nnz_out: r.nnz_out,
            nnz_blocks_out: r.nnz_blocks_out,
            realized_error: r.realized_error,
            status: r.status.as_str(),
            processes: 1,
        }
    }
}

pub fn write_records<W: Write>(
    records: &[RunRecord],
    format: OutputFormat,
    mut out: W,
) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            writeln!(out, "{}", CSV_COLUMNS.join(","))?;
            for r in records {
                writeln!(out, "{}", csv_row(r))?;
            }
        }
        OutputFormat::Json => {
            let rows: Vec<JsonRow> = records.iter().map(JsonRow::from).collect();
            serde_json::to_writer_pretty(&mut out, &rows)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes `records` to `path`, replacing any existing file.
pub fn emit(records: &[RunRecord], path: impl AsRef<Path>, format: OutputFormat) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_records(records, format, BufWriter::new(file))
}

/// Writes a purification report. JSON carries the configuration, the
/// per-variant summaries and every record; CSV carries the records only.
pub fn write_purify_report<W: Write>(
    report: &PurifyReport,
    config: &PurifyExperimentConfig,
    format: OutputFormat,
    mut out: W,
) -> Result<()> {
    match format {
        OutputFormat::Csv => write_records(&report.records, format, out),
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct Document<'a> {
                config: &'a PurifyExperimentConfig,
                summaries: &'a [PurifySummary],
                records: Vec<JsonRow<'a>>,
            }
            let doc = Document {
                config,
                summaries: &report.summaries,
                records: report.records.iter().map(JsonRow::from).collect(),
            };
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn emit_purify_report(
    report: &PurifyReport,
    config: &PurifyExperimentConfig,
    path: impl AsRef<Path>,
    format: OutputFormat,
) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_purify_report(report, config, format, BufWriter::new(file))
}

/// Mean and max of `realized_error / tolerance` for one variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sharpness {
    pub variant: Variant,
    pub mean_ratio: f64,
    pub max_ratio: f64,
}

pub fn sharpness(records: &[RunRecord]) -> Vec<Sharpness> {
    Variant::ALL
        .iter()
        .filter_map(|&variant| {
            let ratios: Vec<f64> = records
                .iter()
                .filter(|r| r.variant == variant && r.tolerance > 0.0)
                .map(RunRecord::sharpness)
                .collect();
            if ratios.is_empty() {
                return None;
            }
            Some(Sharpness {
                variant,
                mean_ratio: ratios.iter().sum::<f64>() / ratios.len() as f64,
                max_ratio: ratios.iter().copied().fold(0.0, f64::max),
            })
        })
        .collect()
}

/// Whether mean sharpness is ordered truncmul >= hybrid >= spamm. `None`
/// when a variant is missing.
pub fn sharpness_ordering_holds(summary: &[Sharpness]) -> Option<bool> {
    let get = |v: Variant| {
        summary
            .iter()
            .find(|s| s.variant == v)
            .map(|s| s.mean_ratio)
    };
    let (t, h, s) = (
        get(Variant::Truncmul)?,
        get(Variant::Hybrid)?,
        get(Variant::Spamm)?,
    );
    Some(t >= h && h >= s)
}
