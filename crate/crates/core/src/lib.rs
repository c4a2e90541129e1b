//! Quadtree sparse matrices with strict Frobenius-norm error control for
//! approximate multiplication, and density matrix purification built on it.
//!
//! * [`quadtree`]: the hierarchical matrix type with cached subtree norms.
//! * [`multiply`]: exact multiplication and SpAMM.
//! * [`errorctl`]: the CSE error-bound sweep, tolerance selection and
//!   norm-controlled truncation.
//! * [`purification`]: SP2 purification in the truncmul, spamm and hybrid
//!   variants.
//! * [`oracle`]: dense reference computations and test matrix generators.
//! * [`bench`]: the experiment protocols behind the `spamm-ec` CLI.
//!
//! Recursive kernels run on rayon when the `parallel` feature is on (the
//! default); see [`Exec`]. Results do not depend on the execution policy.

pub mod bench;
pub mod dense;
pub mod error;
pub mod errorctl;
pub mod exec;
pub mod mtx;
pub mod multiply;
pub mod oracle;
pub mod purification;
pub mod quadtree;
pub mod record;

pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use errorctl::{
    cse, select_tolerance, spamm_with_error_control, truncate, ControlledProduct, ErrorBoundVector,
    TauChoice, ToleranceGrid, TruncationResult,
};
pub use exec::Exec;
pub use multiply::{multiply_exact, spamm, SpammTolerance};
pub use purification::{purify, PurificationConfig, Sp2Polynomial, SpectralTransform};
pub use quadtree::{QuadTreeMatrix, DEFAULT_LEAF_SIZE};
pub use record::{RunRecord, Status, Variant};
