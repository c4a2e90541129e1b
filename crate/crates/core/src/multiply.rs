//! Exact quadtree multiplication and SpAMM.
//!
//! Both products use the same recursion. At an inner node the output
//! quadrant `(i, j)` is `T0 + T1` with `T0 = A(i,0) B(0,j)` and
//! `T1 = A(i,1) B(1,j)`, always added in that order. Leaf products loop
//! `j, k, i` over column-major blocks, so every output entry accumulates
//! its terms in ascending `k`. Products with a zero operand are skipped.
//!
//! SpAMM additionally returns zero for any sub-product whose norm product
//! `‖A‖_F ‖B‖_F` is strictly below `tau`, tested at every level including
//! the root. With `tau = 0` nothing is skipped and the result is bitwise
//! identical to [`multiply_exact`].

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::quadtree::{add_nodes, Node, QuadTreeMatrix};

/// Skip threshold for [`spamm`]. Always finite and non-negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, serde::Serialize)]
pub struct SpammTolerance(f64);

impl SpammTolerance {
    /// Tolerance that never skips a product.
    pub const EXACT: SpammTolerance = SpammTolerance(0.0);

    pub fn new(tau: f64) -> Result<Self> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "SpAMM tolerance must be finite and non-negative, got {tau}"
            )));
        }
        Ok(SpammTolerance(tau))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_exact(self) -> bool {
        self.0 == 0.0
    }
}

pub fn multiply_exact(a: &QuadTreeMatrix, b: &QuadTreeMatrix) -> Result<QuadTreeMatrix> {
    multiply_exact_with(a, b, Exec::default())
}

pub fn multiply_exact_with(
    a: &QuadTreeMatrix,
    b: &QuadTreeMatrix,
    exec: Exec,
) -> Result<QuadTreeMatrix> {
    spamm_with(a, b, SpammTolerance::EXACT, exec)
}

/// Sparse approximate product of `a` and `b` with skip threshold `tau`.
pub fn spamm(
    a: &QuadTreeMatrix,
    b: &QuadTreeMatrix,
    tau: SpammTolerance,
) -> Result<QuadTreeMatrix> {
    spamm_with(a, b, tau, Exec::default())
}

pub fn spamm_with(
    a: &QuadTreeMatrix,
    b: &QuadTreeMatrix,
    tau: SpammTolerance,
    exec: Exec,
) -> Result<QuadTreeMatrix> {
    a.check_conformable(b)?;
    let root = spamm_node(a.root(), b.root(), tau.0, a.depth(), a.leaf_size(), exec);
    Ok(a.with_root(root))
}

fn spamm_node(a: &Node, b: &Node, tau: f64, levels: u32, ls: usize, exec: Exec) -> Node {
    if a.is_zero() || b.is_zero() {
        return Node::Zero;
    }
    if a.norm() * b.norm() < tau {
        return Node::Zero;
    }
    if levels == 0 {
        let (Node::Leaf(x), Node::Leaf(y)) = (a, b) else {
            unreachable!("non-leaf node at leaf level")
        };
        return leaf_product(x.values(), y.values(), ls);
    }
    let exec = exec.at_level(levels);
    let quadrant = |i: usize, j: usize| {
        let (t0, t1) = exec.join(
            || spamm_node(a.child(2 * i), b.child(j), tau, levels - 1, ls, exec),
            || {
                spamm_node(
                    a.child(2 * i + 1),
                    b.child(2 + j),
                    tau,
                    levels - 1,
                    ls,
                    exec,
                )
            },
        );
        add_nodes(&t0, &t1)
    };
    let children = exec.join4(
        || quadrant(0, 0),
        || quadrant(0, 1),
        || quadrant(1, 0),
        || quadrant(1, 1),
    );
    Node::inner(children)
}

/// Dense product of two column-major `ls x ls` blocks.
pub(crate) fn leaf_product(a: &[f64], b: &[f64], ls: usize) -> Node {
    let mut c = vec![0.0; ls * ls].into_boxed_slice();
    for j in 0..ls {
        let c_col = &mut c[j * ls..(j + 1) * ls];
        for k in 0..ls {
            let bkj = b[j * ls + k];
            if bkj == 0.0 {
                continue;
            }
            let a_col = &a[k * ls..(k + 1) * ls];
            for (cij, &aik) in c_col.iter_mut().zip(a_col) {
                *cij += aik * bkj;
            }
        }
    }
    Node::leaf(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{dense_distance, dense_frobenius, dense_multiply, DenseMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn tolerance_validation() {
        assert!(SpammTolerance::new(-1.0).is_err());
        assert!(SpammTolerance::new(f64::NAN).is_err());
        assert!(SpammTolerance::new(f64::INFINITY).is_err());
        assert!(SpammTolerance::new(0.0).unwrap().is_exact());
    }

    #[test]
    fn identity_is_neutral() {
        let a = QuadTreeMatrix::from_dense(&random_dense(24, 1), 4).unwrap();
        let i = QuadTreeMatrix::identity(24, 4).unwrap();
        assert_eq!(multiply_exact(&a, &i).unwrap().to_dense(), a.to_dense());
        assert_eq!(multiply_exact(&i, &a).unwrap().to_dense(), a.to_dense());
    }

    #[test]
    fn zero_operand_gives_zero() {
        let a = QuadTreeMatrix::from_dense(&random_dense(16, 2), 4).unwrap();
        let z = QuadTreeMatrix::zeros(16, 4).unwrap();
        assert!(multiply_exact(&a, &z).unwrap().is_zero());
        assert!(multiply_exact(&z, &a).unwrap().is_zero());
    }

    #[test]
    fn exact_matches_dense_oracle() {
        let (da, db) = (random_dense(64, 3), random_dense(64, 4));
        let a = QuadTreeMatrix::from_dense(&da, 8).unwrap();
        let b = QuadTreeMatrix::from_dense(&db, 8).unwrap();
        let c = multiply_exact(&a, &b).unwrap();
        c.check_invariants(1e-12).unwrap();
        let oracle = dense_multiply(&da, &db).unwrap();
        let rel = dense_distance(&c.to_dense(), &oracle).unwrap() / dense_frobenius(&oracle);
        assert!(rel < 1e-12, "relative error {rel:e}");
    }

    #[test]
    fn zero_tau_is_bitwise_exact() {
        let a = QuadTreeMatrix::from_dense(&random_dense(40, 5), 8).unwrap();
        let b = QuadTreeMatrix::from_dense(&random_dense(40, 6), 8).unwrap();
        let exact = multiply_exact(&a, &b).unwrap();
        let approx = spamm(&a, &b, SpammTolerance::EXACT).unwrap();
        assert!(exact.bitwise_eq(&approx));
    }

    #[test]
    fn root_skip() {
        let a = QuadTreeMatrix::from_dense(&random_dense(16, 7), 4).unwrap();
        let b = QuadTreeMatrix::from_dense(&random_dense(16, 8), 4).unwrap();
        let p = a.frobenius_norm() * b.frobenius_norm();
        let tau = SpammTolerance::new(p * 1.0001).unwrap();
        assert!(spamm(&a, &b, tau).unwrap().is_zero());
        // A norm product equal to tau is not strictly below it.
        let a = QuadTreeMatrix::from_dense(&random_dense(4, 7), 4).unwrap();
        let b = QuadTreeMatrix::from_dense(&random_dense(4, 8), 4).unwrap();
        let tau = SpammTolerance::new(a.frobenius_norm() * b.frobenius_norm()).unwrap();
        assert!(!spamm(&a, &b, tau).unwrap().is_zero());
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let a = QuadTreeMatrix::from_dense(&random_dense(128, 9), 8).unwrap();
        let b = QuadTreeMatrix::from_dense(&random_dense(128, 10), 8).unwrap();
        let tau = SpammTolerance::new(0.5).unwrap();
        let s = spamm_with(&a, &b, tau, Exec::Sequential).unwrap();
        let p = spamm_with(&a, &b, tau, Exec::Parallel).unwrap();
        assert!(s.bitwise_eq(&p));
    }

    #[test]
    fn dimension_mismatch() {
        let a = QuadTreeMatrix::zeros(16, 4).unwrap();
        let b = QuadTreeMatrix::zeros(17, 4).unwrap();
        assert!(multiply_exact(&a, &b).is_err());
    }
}
