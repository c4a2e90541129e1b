//! Density matrix purification with per-iteration Frobenius error control.
//!
//! The driver iterates SP2 steps `X <- X^2` or `X <- 2X - X^2`, picked by
//! comparing the trace with the occupation count. Each step is evaluated
//! approximately according to a [`Variant`] so that
//! `‖X̃_i - f_i(X̃_{i-1})‖_F < δ_i`:
//!
//! * `truncmul`: exact square, then truncation with `δ_i`;
//! * `spamm`: error-controlled SpAMM square with `δ_i`, no truncation;
//! * `hybrid`: error-controlled SpAMM with `δ_i / 2`, then truncation with
//!   `δ_i / 2`.
//!
//! `truncmul` and `hybrid` also truncate the starting matrix with `δ_0`.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::errorctl::{cse_with, select_tolerance, truncate, ToleranceGrid};
use crate::exec::Exec;
use crate::multiply::{multiply_exact_with, spamm_with, SpammTolerance};
use crate::quadtree::QuadTreeMatrix;
use crate::record::{PhaseTimes, RunRecord, Status, Variant};

/// Bounds on the spectrum of the Fock/Kohn-Sham matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralTransform {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl SpectralTransform {
    pub fn new(lambda_min: f64, lambda_max: f64) -> Result<Self> {
        if !(lambda_min < lambda_max) || !lambda_min.is_finite() || !lambda_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "spectral bounds must satisfy lambda_min < lambda_max, got [{lambda_min}, {lambda_max}]"
            )));
        }
        Ok(SpectralTransform {
            lambda_min,
            lambda_max,
        })
    }
}

/// `X_0 = (lambda_max I - F) / (lambda_max - lambda_min)`: maps the spectrum
/// into `[0, 1]` with low (occupied) eigenvalues sent near 1.
pub fn initial_transform(f: &QuadTreeMatrix, t: SpectralTransform) -> Result<QuadTreeMatrix> {
    let t = SpectralTransform::new(t.lambda_min, t.lambda_max)?;
    let shifted = QuadTreeMatrix::identity(f.dimension(), f.leaf_size())?
        .scale(t.lambda_max)
        .sub(f)?;
    Ok(shifted.divide(t.lambda_max - t.lambda_min))
}

/// The two SP2 polynomials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sp2Polynomial {
    /// `x^2`, lowers the trace.
    Square,
    /// `2x - x^2`, raises the trace.
    Reflect,
}

impl Sp2Polynomial {
    /// Evaluates the polynomial given `x` and (an approximation of) `x^2`.
    pub fn apply(self, x: &QuadTreeMatrix, x_squared: &QuadTreeMatrix) -> Result<QuadTreeMatrix> {
        match self {
            Sp2Polynomial::Square => Ok(x_squared.clone()),
            Sp2Polynomial::Reflect => x.scale(2.0).sub(x_squared),
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Sp2Polynomial::Square => "x^2",
            Sp2Polynomial::Reflect => "2x - x^2",
        }
    }
}

/// SP2 choice: `x^2` when the trace exceeds the occupation, else `2x - x^2`.
pub fn sp2_step(x: &QuadTreeMatrix, occupation: usize) -> Sp2Polynomial {
    if x.trace() > occupation as f64 {
        Sp2Polynomial::Square
    } else {
        Sp2Polynomial::Reflect
    }
}

/// Per-iteration error tolerances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBudget {
    /// `δ_0`, spent on truncating the starting matrix.
    pub initial: f64,
    /// `δ_1 … δ_n`.
    pub deltas: Vec<f64>,
}

impl ErrorBudget {
    pub fn new(initial: f64, deltas: Vec<f64>) -> Result<Self> {
        if !(initial >= 0.0) || deltas.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::InvalidArgument(
                "error tolerances must be non-negative".into(),
            ));
        }
        Ok(ErrorBudget { initial, deltas })
    }

    /// Half of `epsilon` goes to `δ_0`; the other half is split over the
    /// iterations with weights `max(ratio^(i-1), floor)`, so later iterations
    /// get tighter tolerances that never drop below `floor` times the first.
    pub fn geometric(epsilon: f64, iterations: usize, ratio: f64, floor: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "global epsilon must be positive, got {epsilon}"
            )));
        }
        if !(ratio > 0.0 && ratio <= 1.0) || !(floor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "invalid geometric budget ratio {ratio} / floor {floor}"
            )));
        }
        let weights: Vec<f64> = (0..iterations)
            .map(|i| ratio.powi(i as i32).max(floor))
            .collect();
        let total: f64 = weights.iter().sum();
        let half = 0.5 * epsilon;
        // Shaved so the rounded sum of the deltas stays within `half`.
        let share = half * (1.0 - 1e-12);
        Self::new(half, weights.iter().map(|w| share * w / total).collect())
    }

    /// All tolerances zero: every product exact, nothing truncated.
    pub fn exact(iterations: usize) -> Self {
        ErrorBudget {
            initial: 0.0,
            deltas: vec![0.0; iterations],
        }
    }

    pub fn total(&self) -> f64 {
        self.initial + self.deltas.iter().sum::<f64>()
    }
}

/// How the driver derives its [`ErrorBudget`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BudgetPolicy {
    Geometric { ratio: f64, floor: f64 },
    Exact,
    Fixed(ErrorBudget),
}

impl Default for BudgetPolicy {
    fn default() -> Self {
        BudgetPolicy::Geometric {
            ratio: 0.5,
            floor: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurificationConfig {
    pub variant: Variant,
    pub occupation: usize,
    pub max_iterations: usize,
    pub epsilon: f64,
    pub grid: ToleranceGrid,
    /// Idempotency threshold on `|tr(X) - tr(X^2)|`. Defaults to `epsilon / 10`.
    pub idempotency_threshold: f64,
    pub budget: BudgetPolicy,
    /// Measure each step's error against an exact quadtree evaluation.
    pub verify: bool,
    #[serde(skip)]
    pub exec: Exec,
}

impl PurificationConfig {
    pub fn new(variant: Variant, occupation: usize, epsilon: f64) -> Self {
        PurificationConfig {
            variant,
            occupation,
            max_iterations: 100,
            epsilon,
            grid: ToleranceGrid::default(),
            idempotency_threshold: epsilon / 10.0,
            budget: BudgetPolicy::default(),
            verify: true,
            exec: Exec::default(),
        }
    }

    pub fn budget(&self) -> Result<ErrorBudget> {
        match &self.budget {
            BudgetPolicy::Geometric { ratio, floor } => {
                ErrorBudget::geometric(self.epsilon, self.max_iterations, *ratio, *floor)
            }
            BudgetPolicy::Exact => Ok(ErrorBudget::exact(self.max_iterations)),
            BudgetPolicy::Fixed(b) => {
                if b.deltas.len() < self.max_iterations {
                    return Err(Error::InvalidArgument(format!(
                        "budget has {} tolerances for {} iterations",
                        b.deltas.len(),
                        self.max_iterations
                    )));
                }
                Ok(b.clone())
            }
        }
    }

    fn validate(&self, dimension: usize) -> Result<()> {
        if self.occupation == 0 || self.occupation >= dimension {
            return Err(Error::InvalidArgument(format!(
                "occupation must lie in 1..{dimension}, got {}",
                self.occupation
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "global epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.idempotency_threshold > 0.0) {
            return Err(Error::InvalidArgument(
                "idempotency threshold must be positive".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one approximate polynomial evaluation.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub output: QuadTreeMatrix,
    /// Polynomial value before any truncation.
    pub intermediate: QuadTreeMatrix,
    pub chosen_tau: Option<SpammTolerance>,
    /// Guaranteed bound on `‖output - f(x)‖_F`.
    pub bound: f64,
    pub times: PhaseTimes,
}

/// Evaluates `poly(x)` with the given variant so that the result is within
/// `delta` of the exact value in Frobenius norm. `delta = 0` means exact.
pub fn approximate_step(
    variant: Variant,
    x: &QuadTreeMatrix,
    poly: Sp2Polynomial,
    delta: f64,
    grid: &ToleranceGrid,
    exec: Exec,
) -> Result<StepResult> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step tolerance must be non-negative, got {delta}"
        )));
    }
    let mut times = PhaseTimes::default();

    // Square with a SpAMM budget, returning (square, tau, bound).
    let controlled_square = |budget: f64, times: &mut PhaseTimes| -> Result<_> {
        if budget == 0.0 {
            let start = Instant::now();
            let sq = multiply_exact_with(x, x, exec)?;
            times.mul += start.elapsed().as_secs_f64();
            return Ok((sq, None, 0.0));
        }
        let start = Instant::now();
        let bounds = cse_with(x, x, grid, exec)?;
        let choice = select_tolerance(&bounds, grid, budget);
        times.cse += start.elapsed().as_secs_f64();
        let start = Instant::now();
        let sq = spamm_with(x, x, choice.tau, exec)?;
        times.spamm += start.elapsed().as_secs_f64();
        Ok((sq, Some(choice.tau), choice.bound))
    };

    let (output, intermediate, chosen_tau, bound) = match variant {
        Variant::Truncmul => {
            let start = Instant::now();
            let sq = multiply_exact_with(x, x, exec)?;
            let y = poly.apply(x, &sq)?;
            times.mul += start.elapsed().as_secs_f64();
            let start = Instant::now();
            let t = truncate(&y, delta);
            times.trunc += start.elapsed().as_secs_f64();
            (t.matrix, y, None, t.removed_norm_bound)
        }
        Variant::Spamm => {
            let (sq, tau, bound) = controlled_square(delta, &mut times)?;
            let y = poly.apply(x, &sq)?;
            (y.clone(), y, tau, bound)
        }
        Variant::Hybrid => {
            let half = 0.5 * delta;
            let (sq, tau, bound) = controlled_square(half, &mut times)?;
            let y = poly.apply(x, &sq)?;
            let start = Instant::now();
            let t = truncate(&y, half);
            times.trunc += start.elapsed().as_secs_f64();
            (t.matrix, y, tau, bound + t.removed_norm_bound)
        }
    };
    Ok(StepResult {
        output,
        intermediate,
        chosen_tau,
        bound,
        times,
    })
}

#[derive(Debug, Clone)]
pub struct Purification {
    pub density: QuadTreeMatrix,
    /// Record 0 describes the initial truncation, record `i` iteration `i`.
    pub records: Vec<RunRecord>,
    pub converged: bool,
    pub iterations: usize,
    /// `|tr(X) - tr(X^2)|` at the final check.
    pub idempotency: f64,
    pub budget: ErrorBudget,
}

impl Purification {
    pub fn ensure_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                idempotency: self.idempotency,
            })
        }
    }
}

/// Purifies a starting matrix `x0` whose spectrum lies in `[0, 1]`.
pub fn purify(x0: &QuadTreeMatrix, config: &PurificationConfig) -> Result<Purification> {
    config.validate(x0.dimension())?;
    let budget = config.budget()?;
    let variant = config.variant;
    let exec = config.exec;
    let grid = &config.grid;

    let mut records = Vec::new();
    let mut x = if variant.truncates() {
        let start = Instant::now();
        let t = truncate(x0, budget.initial);
        let t_trunc = start.elapsed().as_secs_f64();
        let realized = if config.verify {
            t.matrix.sub(x0)?.frobenius_norm()
        } else {
            t.removed_norm_bound
        };
        records.push(RunRecord {
            variant,
            iter: 0,
            tolerance: budget.initial,
            chosen_tau: None,
            times: PhaseTimes {
                trunc: t_trunc,
                ..PhaseTimes::default()
            },
            nnz_in: x0.nnz(),
            nnz_mid: x0.nnz(),
            nnz_out: t.matrix.nnz(),
            nnz_blocks_out: t.matrix.nnz_blocks(),
            realized_error: realized,
            status: Status::judge(realized, budget.initial),
        });
        t.matrix
    } else {
        x0.clone()
    };

    let mut idempotency = f64::INFINITY;
    for i in 1..=config.max_iterations {
        let delta = budget.deltas[i - 1];
        let poly = sp2_step(&x, config.occupation);
        let step = approximate_step(variant, &x, poly, delta, grid, exec)?;

        // The squared matrix is recoverable from the untruncated polynomial value.
        let trace_sq = match poly {
            Sp2Polynomial::Square => step.intermediate.trace(),
            Sp2Polynomial::Reflect => 2.0 * x.trace() - step.intermediate.trace(),
        };
        idempotency = (x.trace() - trace_sq).abs();
        if idempotency < config.idempotency_threshold {
            return Ok(Purification {
                density: x,
                records,
                converged: true,
                iterations: i - 1,
                idempotency,
                budget,
            });
        }

        let realized = if config.verify {
            let exact = poly.apply(&x, &multiply_exact_with(&x, &x, exec)?)?;
            step.output.sub(&exact)?.frobenius_norm()
        } else {
            step.bound
        };
        records.push(RunRecord {
            variant,
            iter: i,
            tolerance: delta,
            chosen_tau: step.chosen_tau.map(SpammTolerance::value),
            times: step.times,
            nnz_in: x.nnz(),
            nnz_mid: step.intermediate.nnz(),
            nnz_out: step.output.nnz(),
            nnz_blocks_out: step.output.nnz_blocks(),
            realized_error: realized,
            status: Status::judge(realized, delta),
        });
        x = step.output;
    }

    if let Some(last) = records.last_mut() {
        if last.status == Status::Ok {
            last.status = Status::NotConverged;
        }
    }
    Ok(Purification {
        density: x,
        records,
        converged: false,
        iterations: config.max_iterations,
        idempotency,
        budget,
    })
}
