//! Per-iteration measurements shared by the purification driver and the
//! experiment runner.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// How each approximate matrix-polynomial evaluation is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Exact multiplication followed by truncation.
    Truncmul,
    /// Error-controlled SpAMM, no truncation.
    Spamm,
    /// Error-controlled SpAMM with half the budget, then truncation with the other half.
    Hybrid,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Truncmul, Variant::Spamm, Variant::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Truncmul => "truncmul",
            Variant::Spamm => "spamm",
            Variant::Hybrid => "hybrid",
        }
    }

    /// Whether the variant truncates the starting matrix.
    pub fn truncates(self) -> bool {
        !matches!(self, Variant::Spamm)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "truncmul" => Ok(Variant::Truncmul),
            "spamm" => Ok(Variant::Spamm),
            "hybrid" => Ok(Variant::Hybrid),
            other => Err(Error::InvalidArgument(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// The realized error reached the requested tolerance.
    Violation,
    /// Last record of a run that hit its iteration limit.
    NotConverged,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Violation => "violation",
            Status::NotConverged => "not_converged",
        }
    }

    /// `Ok` when `realized < tolerance`; a zero tolerance admits only a zero error.
    pub fn judge(realized: f64, tolerance: f64) -> Status {
        if realized < tolerance || (tolerance == 0.0 && realized == 0.0) {
            Status::Ok
        } else {
            Status::Violation
        }
    }
}

/// Wall-clock seconds spent in each phase of one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub mul: f64,
    pub trunc: f64,
    pub spamm: f64,
    pub cse: f64,
}

impl PhaseTimes {
    pub fn total(&self) -> f64 {
        self.mul + self.trunc + self.spamm + self.cse
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: Variant,
    pub iter: usize,
    /// Requested bound on the error of this step.
    pub tolerance: f64,
    /// SpAMM tolerance used, if the step multiplied with SpAMM.
    pub chosen_tau: Option<f64>,
    pub times: PhaseTimes,
    pub nnz_in: usize,
    pub nnz_mid: usize,
    pub nnz_out: usize,
    pub nnz_blocks_out: usize,
    pub realized_error: f64,
    pub status: Status,
}

impl RunRecord {
    /// `realized_error / tolerance`; how close the step came to its budget.
    pub fn sharpness(&self) -> f64 {
        self.realized_error / self.tolerance
    }

    /// Copy with timings zeroed, for comparing runs.
    pub fn without_timings(&self) -> RunRecord {
        RunRecord {
            times: PhaseTimes::default(),
            ..self.clone()
        }
    }
}
