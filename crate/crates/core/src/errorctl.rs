//! Frobenius-norm error control for SpAMM and truncation.
//!
//! [`cse`] walks the product recursion once and returns, for every candidate
//! tolerance in a [`ToleranceGrid`], an upper bound on
//! `‖spamm(A, B, tau) - AB‖_F`. A leaf-level sub-product whose norm product
//! `p` falls below `tau` contributes `p`; the two terms of each output
//! quadrant are added and the quadrants combined as a root sum of squares.
//! Skips that SpAMM takes higher up the tree are covered because every leaf
//! product beneath a skipped node also falls under `tau`.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::multiply::{spamm_with, SpammTolerance};
use crate::quadtree::{BlockIndex, Node, QuadTreeMatrix};

/// Candidate SpAMM tolerances, strictly decreasing and positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToleranceGrid {
    taus: Vec<f64>,
}

impl ToleranceGrid {
    pub const DEFAULT_START: f64 = 1.0;
    pub const DEFAULT_RATIO: f64 = 0.9;
    pub const DEFAULT_COUNT: usize = 350;

    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if taus.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if let Some(&t) = taus.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid tolerances must be positive and finite, got {t}"
            )));
        }
        if taus.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument(
                "grid tolerances must be strictly decreasing".into(),
            ));
        }
        Ok(ToleranceGrid { taus })
    }

    /// `tau_1 = start`, `tau_i = ratio * tau_{i-1}`.
    pub fn geometric(start: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "grid ratio must lie in (0, 1), got {ratio}"
            )));
        }
        let mut taus = Vec::with_capacity(count);
        let mut tau = start;
        for _ in 0..count {
            taus.push(tau);
            tau *= ratio;
        }
        Self::new(taus)
    }

    #[inline]
    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

impl Default for ToleranceGrid {
    fn default() -> Self {
        Self::geometric(
            Self::DEFAULT_START,
            Self::DEFAULT_RATIO,
            Self::DEFAULT_COUNT,
        )
        .expect("default grid parameters are valid")
    }
}

/// Error bounds paired index-by-index with a [`ToleranceGrid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBoundVector {
    bounds: Vec<f64>,
}

impl ErrorBoundVector {
    #[inline]
    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn from_bounds(bounds: Vec<f64>) -> Self {
        ErrorBoundVector { bounds }
    }
}

pub fn cse(
    a: &QuadTreeMatrix,
    b: &QuadTreeMatrix,
    grid: &ToleranceGrid,
) -> Result<ErrorBoundVector> {
    cse_with(a, b, grid, Exec::default())
}

pub fn cse_with(
    a: &QuadTreeMatrix,
    b: &QuadTreeMatrix,
    grid: &ToleranceGrid,
    exec: Exec,
) -> Result<ErrorBoundVector> {
    a.check_conformable(b)?;
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let bounds = cse_node(a.root(), b.root(), grid.taus(), a.depth(), exec)
        .unwrap_or_else(|| vec![0.0; grid.len()]);
    Ok(ErrorBoundVector { bounds })
}

/// `None` stands for an all-zero error vector.
fn cse_node(a: &Node, b: &Node, taus: &[f64], levels: u32, exec: Exec) -> Option<Vec<f64>> {
    let p = a.norm() * b.norm();
    if p == 0.0 {
        return None;
    }
    if levels == 0 {
        if !(p < taus[0]) {
            return None;
        }
        return Some(taus.iter().map(|&t| if p < t { p } else { 0.0 }).collect());
    }
    let exec = exec.at_level(levels);
    let quadrant = |i: usize, j: usize| {
        let (e1, e2) = exec.join(
            || cse_node(a.child(2 * i), b.child(j), taus, levels - 1, exec),
            || cse_node(a.child(2 * i + 1), b.child(2 + j), taus, levels - 1, exec),
        );
        match (e1, e2) {
            (None, None) => None,
            (Some(e), None) | (None, Some(e)) => Some(e),
            (Some(mut e1), Some(e2)) => {
                for (x, y) in e1.iter_mut().zip(&e2) {
                    *x += y;
                }
                Some(e1)
            }
        }
    };
    let sums = exec.join4(
        || quadrant(0, 0),
        || quadrant(0, 1),
        || quadrant(1, 0),
        || quadrant(1, 1),
    );
    let mut errors: Option<Vec<f64>> = None;
    for s in sums.into_iter().flatten() {
        let acc = errors.get_or_insert_with(|| vec![0.0; taus.len()]);
        for (x, e) in acc.iter_mut().zip(&s) {
            *x += e * e;
        }
    }
    errors.map(|mut e| {
        for x in &mut e {
            *x = x.sqrt();
        }
        e
    })
}

/// A tolerance picked from a grid together with its error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauChoice {
    pub tau: SpammTolerance,
    pub bound: f64,
}

/// Largest grid tolerance whose bound is strictly below `delta`, or the
/// exact product (`tau = 0`, bound 0) when none qualifies.
pub fn select_tolerance(bounds: &ErrorBoundVector, grid: &ToleranceGrid, delta: f64) -> TauChoice {
    let mut best: Option<TauChoice> = None;
    for (&tau, &bound) in grid.taus().iter().zip(bounds.bounds()) {
        if bound < delta && best.is_none_or(|b| tau > b.tau.value()) {
            best = Some(TauChoice {
                tau: SpammTolerance::new(tau).expect("grid tolerances are valid"),
                bound,
            });
        }
    }
    best.unwrap_or(TauChoice {
        tau: SpammTolerance::EXACT,
        bound: 0.0,
    })
}

#[derive(Debug, Clone)]
pub struct TruncationResult {
    pub matrix: QuadTreeMatrix,
    /// `sqrt(sum of squared norms of the removed blocks)`, strictly below the
    /// requested tolerance.
    pub removed_norm_bound: f64,
    pub removed_block_count: usize,
}

/// Removes whole leaf blocks in ascending norm order (ties broken by block
/// row, then column) for as long as the norm of everything removed stays
/// strictly below `delta`.
pub fn truncate(x: &QuadTreeMatrix, delta: f64) -> TruncationResult {
    let mut blocks = x.leaf_blocks();
    blocks.sort_by(|a, b| a.norm.total_cmp(&b.norm).then(a.index.cmp(&b.index)));

    let mut sumsq = 0.0;
    let mut removed: HashSet<BlockIndex> = HashSet::new();
    for block in &blocks {
        let next = sumsq + block.norm * block.norm;
        if !(next.sqrt() < delta) {
            break;
        }
        sumsq = next;
        removed.insert(block.index);
    }
    TruncationResult {
        matrix: x.without_blocks(&removed),
        removed_norm_bound: sumsq.sqrt(),
        removed_block_count: removed.len(),
    }
}

/// Result of [`spamm_with_error_control`].
#[derive(Debug, Clone)]
pub struct ControlledProduct {
    pub matrix: QuadTreeMatrix,
    pub tau: SpammTolerance,
    /// Upper bound on `‖matrix - AB‖_F`; strictly below the requested delta.
    pub bound: f64,
}

/// SpAMM with a tolerance chosen so that `‖result - AB‖_F < delta`.
pub fn spamm_with_error_control(
    a: &QuadTreeMatrix,
    b: &QuadTreeMatrix,
    delta: f64,
    grid: &ToleranceGrid,
) -> Result<ControlledProduct> {
    spamm_with_error_control_with(a, b, delta, grid, Exec::default())
}

pub fn spamm_with_error_control_with(
    a: &QuadTreeMatrix,
    b: &QuadTreeMatrix,
    delta: f64,
    grid: &ToleranceGrid,
    exec: Exec,
) -> Result<ControlledProduct> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "error tolerance must be positive, got {delta}"
        )));
    }
    let bounds = cse_with(a, b, grid, exec)?;
    let choice = select_tolerance(&bounds, grid, delta);
    let matrix = spamm_with(a, b, choice.tau, exec)?;
    Ok(ControlledProduct {
        matrix,
        tau: choice.tau,
        bound: choice.bound,
    })
}
