//! Plain row-major dense square matrices.
//!
//! These are the reference containers used by the oracles and by conversion
//! from/to the quadtree representation. Nothing here is tuned for speed.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    dimension: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(dimension: usize) -> Self {
        DenseMatrix {
            dimension,
            values: vec![0.0; dimension * dimension],
        }
    }

    pub fn identity(dimension: usize) -> Self {
        let mut m = Self::zeros(dimension);
        for i in 0..dimension {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diagonal: &[f64]) -> Self {
        let mut m = Self::zeros(diagonal.len());
        for (i, &d) in diagonal.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major values.
    pub fn from_row_major(dimension: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != dimension * dimension {
            return Err(Error::mismatch(
                format!("{} values", values.len()),
                format!("{dimension}x{dimension} matrix"),
            ));
        }
        Ok(DenseMatrix { dimension, values })
    }

    pub fn from_fn(dimension: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(dimension * dimension);
        for i in 0..dimension {
            for j in 0..dimension {
                values.push(f(i, j));
            }
        }
        DenseMatrix { dimension, values }
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dimension).map(|i| self[(i, i)]).sum()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dimension, |i, j| self[(j, i)])
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.dimension;
        (0..n).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn scale(&self, alpha: f64) -> Self {
        DenseMatrix {
            dimension: self.dimension,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dimension != other.dimension {
            return Err(Error::mismatch(self.dimension, other.dimension));
        }
        Ok(DenseMatrix {
            dimension: self.dimension,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Number of entries different from exactly zero.
    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }

    /// Copy with every entry of magnitude below `cutoff` set to zero.
    pub fn with_cutoff(&self, cutoff: f64) -> Self {
        DenseMatrix {
            dimension: self.dimension,
            values: self
                .values
                .iter()
                .map(|&v| if v.abs() < cutoff { 0.0 } else { v })
                .collect(),
        }
    }

    /// Nonzero entries as `(row, col, value)` triples in row-major order.
    pub fn to_coordinates(&self) -> Vec<(usize, usize, f64)> {
        let n = self.dimension;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = self[(i, j)];
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.values[i * self.dimension + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.values[i * self.dimension + j]
    }
}

/// Textbook product in fixed i-k-j loop order.
pub fn dense_multiply(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.dimension != b.dimension {
        return Err(Error::mismatch(a.dimension, b.dimension));
    }
    let n = a.dimension;
    let mut c = DenseMatrix::zeros(n);
    for i in 0..n {
        let c_row = &mut c.values[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = a.values[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let b_row = &b.values[k * n..(k + 1) * n];
            for (cij, &bkj) in c_row.iter_mut().zip(b_row) {
                *cij += aik * bkj;
            }
        }
    }
    Ok(c)
}

/// Frobenius norm by plain accumulation of squares.
pub fn dense_frobenius(a: &DenseMatrix) -> f64 {
    a.values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `‖a - b‖_F`.
pub fn dense_distance(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    Ok(dense_frobenius(&a.sub(b)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0)
    }

    #[test]
    fn identity_is_neutral() {
        let a = sample(9);
        let i = DenseMatrix::identity(9);
        assert_eq!(dense_multiply(&i, &a).unwrap(), a);
        assert_eq!(dense_multiply(&a, &i).unwrap(), a);
    }

    #[test]
    fn identity_norm_is_sqrt_n() {
        assert_eq!(dense_frobenius(&DenseMatrix::identity(16)), 4.0);
    }

    #[test]
    fn product_matches_column_order_summation() {
        let a = sample(12);
        let b = sample(12).transpose();
        let c = dense_multiply(&a, &b).unwrap();
        // Second, independent summation order: j-outer, k descending.
        let n = 12;
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in (0..n).rev() {
                    s += a[(i, k)] * b[(k, j)];
                }
                assert!((s - c[(i, j)]).abs() <= 1e-12 * s.abs().max(1.0));
            }
        }
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        assert!(dense_multiply(&sample(3), &sample(4)).is_err());
        assert!(DenseMatrix::from_row_major(3, vec![0.0; 8]).is_err());
    }
}
