//! Dense reference computations and synthetic test matrices.
//!
//! The density matrix oracle diagonalizes with a cyclic Jacobi solver written
//! here, so it shares no code with the quadtree kernels it is used to check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::dense::{dense_distance, dense_frobenius, dense_multiply, DenseMatrix};
use crate::error::{Error, Result};

/// Off-diagonal norm, relative to the matrix norm, at which Jacobi stops.
pub const JACOBI_THRESHOLD: f64 = 1e-14;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix. Eigenvalues ascend; eigenvector
/// `k` is column `k` of `vectors`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
pub fn symmetric_eigen(a: &DenseMatrix) -> Result<SymmetricEigen> {
    if !a.is_symmetric() {
        return Err(Error::InvalidArgument("matrix is not symmetric".into()));
    }
    let n = a.dimension();
    let mut m = a.values().to_vec();
    let mut v = DenseMatrix::identity(n).values().to_vec();
    let total = dense_frobenius(a);

    let off_norm = |m: &[f64]| {
        let mut s = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    s += m[p * n + q] * m[p * n + q];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    let mut off = off_norm(&m);
    while off > JACOBI_THRESHOLD * total {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNoConvergence {
                sweeps,
                off_norm: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (kp, kq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * kp - s * kq;
                    m[k * n + q] = s * kp + c * kq;
                }
                for k in 0..n {
                    let (pk, qk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * pk - s * qk;
                    m[q * n + k] = s * pk + c * qk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let (kp, kq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * kp - s * kq;
                    v[k * n + q] = s * kp + c * kq;
                }
            }
        }
        off = off_norm(&m);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = DenseMatrix::from_fn(n, |row, k| v[row * n + order[k]]);
    Ok(SymmetricEigen { values, vectors })
}

/// Projector onto the eigenvectors of the `occupation` lowest eigenvalues of
/// `f`.
pub fn density_matrix_oracle(f: &DenseMatrix, occupation: usize) -> Result<DenseMatrix> {
    let n = f.dimension();
    if occupation > n {
        return Err(Error::InvalidArgument(format!(
            "occupation {occupation} exceeds dimension {n}"
        )));
    }
    let eig = symmetric_eigen(f)?;
    let v = &eig.vectors;
    let mut d = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..occupation {
                s += v[(i, k)] * v[(j, k)];
            }
            d[(i, j)] = s;
            d[(j, i)] = s;
        }
    }
    Ok(d)
}

/// Interval containing every eigenvalue, from Gershgorin discs.
pub fn gershgorin_bounds(a: &DenseMatrix) -> (f64, f64) {
    let n = a.dimension();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let radius: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
        lo = lo.min(a[(i, i)] - radius);
        hi = hi.max(a[(i, i)] + radius);
    }
    (lo, hi)
}

/// Parameters of a synthetic symmetric matrix with exponentially decaying
/// off-diagonal elements and a gapped spectrum.
///
/// Off-diagonal entries are `scale * exp(-decay_rate * |i - j|) * u` with
/// `u` uniform in `[-1, 1]`; entries whose envelope is below `cutoff` are
/// exactly zero. `occupation` sites, spread evenly along the diagonal, get
/// a low on-site energy and the rest a high one, placed so that every
/// Gershgorin disc lies inside `spectral_interval` and the two groups of
/// discs do not overlap. The matrix therefore has exactly `occupation`
/// eigenvalues below the gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayModelSpec {
    pub dimension: usize,
    pub decay_rate: f64,
    pub scale: f64,
    pub spectral_interval: (f64, f64),
    pub occupation: usize,
    pub cutoff: f64,
    pub seed: u64,
}

impl DecayModelSpec {
    pub fn new(dimension: usize, decay_rate: f64, seed: u64) -> Self {
        DecayModelSpec {
            dimension,
            decay_rate,
            scale: 0.1,
            spectral_interval: (-1.0, 1.0),
            occupation: dimension / 4,
            cutoff: 1e-12,
            seed,
        }
    }

    pub fn with_occupation(mut self, occupation: usize) -> Self {
        self.occupation = occupation;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_spectral_interval(mut self, lo: f64, hi: f64) -> Self {
        self.spectral_interval = (lo, hi);
        self
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = cutoff;
        self
    }

    /// Envelope `scale * exp(-decay_rate * distance)` for an off-diagonal entry.
    pub fn envelope(&self, distance: usize) -> f64 {
        self.scale * (-self.decay_rate * distance as f64).exp()
    }

    /// Bound on the off-diagonal row sum of any generated matrix.
    pub fn disc_radius(&self) -> f64 {
        let q = (-self.decay_rate).exp();
        2.0 * self.scale * q / (1.0 - q)
    }

    /// Whether site `i` carries a low (occupied) on-site energy.
    pub fn is_occupied_site(&self, i: usize) -> bool {
        let (n, occ) = (self.dimension, self.occupation);
        (i + 1) * occ / n > i * occ / n
    }

    fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if !(self.decay_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "decay rate must be positive, got {}",
                self.decay_rate
            )));
        }
        if !(self.scale >= 0.0) || !self.scale.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "invalid scale {}",
                self.scale
            )));
        }
        if self.occupation > self.dimension {
            return Err(Error::InvalidArgument(format!(
                "occupation {} exceeds dimension {}",
                self.occupation, self.dimension
            )));
        }
        let (lo, hi) = self.spectral_interval;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InfeasibleSpectrum(format!(
                "empty interval [{lo}, {hi}]"
            )));
        }
        let r = self.disc_radius();
        if !(hi - lo > 4.0 * r) {
            return Err(Error::InfeasibleSpectrum(format!(
                "interval [{lo}, {hi}] cannot hold two disjoint disc groups of radius {r}"
            )));
        }
        Ok(())
    }
}

/// Generates the matrix described by `spec`. Deterministic in `spec.seed`.
pub fn generate_decay_matrix(spec: &DecayModelSpec) -> Result<DenseMatrix> {
    spec.validate()?;
    let n = spec.dimension;
    let r = spec.disc_radius();
    let (lo, hi) = spec.spectral_interval;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut m = DenseMatrix::zeros(n);
    for i in 0..n {
        m[(i, i)] = if spec.is_occupied_site(i) {
            lo + r
        } else {
            hi - r
        };
        for j in i + 1..n {
            let env = spec.envelope(j - i);
            if env < spec.cutoff {
                break;
            }
            let v = env * rng.gen_range(-1.0..=1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}
