//! SpAMM and CSE checked against direct block enumeration on dense input.

mod common;

use rand::Rng;
use spamm_core::errorctl::{cse, ToleranceGrid};
use spamm_core::multiply::{spamm, SpammTolerance};
use spamm_core::DenseMatrix;

use common::{quadtree, random_block_sparse, rng};

/// Frobenius norm of the `size x size` block at block coordinates `(r, c)`,
/// treating entries outside the matrix as zero.
fn block_norm(m: &DenseMatrix, size: usize, r: usize, c: usize) -> f64 {
    let n = m.dimension();
    let mut s = 0.0;
    for i in r * size..((r + 1) * size).min(n) {
        for j in c * size..((c + 1) * size).min(n) {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s.sqrt()
}

/// SpAMM by enumerating every leaf triple `(i, k, j)` and keeping it only if
/// no ancestor product, root included, falls below `tau`.
fn spamm_enumerated(
    a: &DenseMatrix,
    b: &DenseMatrix,
    leaf: usize,
    depth: u32,
    tau: f64,
) -> DenseMatrix {
    let n = a.dimension();
    let blocks = 1usize << depth;
    let mut c = vec![0.0; n * n];
    for i in 0..blocks {
        for k in 0..blocks {
            for j in 0..blocks {
                let survives = (0..=depth).all(|up| {
                    let size = leaf << up;
                    let na = block_norm(a, size, i >> up, k >> up);
                    let nb = block_norm(b, size, k >> up, j >> up);
                    !(na * nb < tau)
                });
                if !survives {
                    continue;
                }
                for r in i * leaf..((i + 1) * leaf).min(n) {
                    for s in j * leaf..((j + 1) * leaf).min(n) {
                        for t in k * leaf..((k + 1) * leaf).min(n) {
                            c[r * n + s] += a[(r, t)] * b[(t, s)];
                        }
                    }
                }
            }
        }
    }
    DenseMatrix::from_row_major(n, c).unwrap()
}

/// Error bound recursion written directly over block coordinates.
#[allow(clippy::too_many_arguments)]
fn cse_recursive(
    a: &DenseMatrix,
    b: &DenseMatrix,
    leaf: usize,
    level: u32,
    i: usize,
    j: usize,
    k: usize,
    tau: f64,
) -> f64 {
    let size = leaf << level;
    let p = block_norm(a, size, i, k) * block_norm(b, size, k, j);
    if level == 0 {
        return if p < tau { p } else { 0.0 };
    }
    let mut sumsq = 0.0;
    for (qi, qj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let (ci, cj) = (2 * i + qi, 2 * j + qj);
        let e: f64 = (0..2)
            .map(|kk| cse_recursive(a, b, leaf, level - 1, ci, cj, 2 * k + kk, tau))
            .sum();
        sumsq += e * e;
    }
    sumsq.sqrt()
}

fn max_abs_diff(x: &DenseMatrix, y: &DenseMatrix) -> f64 {
    x.values()
        .iter()
        .zip(y.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[test]
fn spamm_matches_enumeration_on_8x8() {
    for seed in 0..40 {
        let mut r = rng(seed);
        let a = random_block_sparse(8, 2, r.gen_range(0.0..1.0), 0.8, &mut r);
        let b = random_block_sparse(8, 2, r.gen_range(0.0..1.0), 0.8, &mut r);
        let (qa, qb) = (quadtree(&a, 2), quadtree(&b, 2));
        assert_eq!(qa.depth(), 2);
        let top = qa.frobenius_norm() * qb.frobenius_norm();
        for f in [0.0, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.3, 0.7, 1.0, 1.1] {
            let tau = top * f;
            let got = spamm(&qa, &qb, SpammTolerance::new(tau).unwrap())
                .unwrap()
                .to_dense();
            let want = spamm_enumerated(&a, &b, 2, 2, tau);
            let diff = max_abs_diff(&got, &want);
            assert!(
                diff <= 1e-14 * top.max(1.0),
                "seed {seed} tau {tau:e}: diff {diff:e}"
            );
        }
    }
}

#[test]
fn spamm_matches_enumeration_with_padding() {
    for seed in 0..20 {
        let mut r = rng(100 + seed);
        let a = random_block_sparse(11, 3, 0.3, 0.7, &mut r);
        let b = random_block_sparse(11, 3, 0.3, 0.7, &mut r);
        let (qa, qb) = (quadtree(&a, 3), quadtree(&b, 3));
        let top = qa.frobenius_norm() * qb.frobenius_norm();
        for f in [0.0, 0.01, 0.1, 0.5] {
            let tau = top * f;
            let got = spamm(&qa, &qb, SpammTolerance::new(tau).unwrap())
                .unwrap()
                .to_dense();
            let want = spamm_enumerated(&a, &b, 3, qa.depth(), tau);
            assert!(max_abs_diff(&got, &want) <= 1e-14 * top.max(1.0));
        }
    }
}

#[test]
fn cse_matches_direct_recursion() {
    for seed in 0..40 {
        let mut r = rng(200 + seed);
        let n = r.gen_range(5..=16);
        let a = random_block_sparse(n, 2, r.gen_range(0.0..1.0), 0.7, &mut r);
        let b = random_block_sparse(n, 2, r.gen_range(0.0..1.0), 0.7, &mut r);
        let (qa, qb) = (quadtree(&a, 2), quadtree(&b, 2));
        let top = qa.frobenius_norm() * qb.frobenius_norm();
        if top == 0.0 {
            continue;
        }
        let grid = ToleranceGrid::geometric(top * 1.2, 0.6, 30).unwrap();
        let bounds = cse(&qa, &qb, &grid).unwrap();
        for (&tau, &bound) in grid.taus().iter().zip(bounds.bounds()) {
            let want = cse_recursive(&a, &b, 2, qa.depth(), 0, 0, 0, tau);
            assert!(
                (bound - want).abs() <= 1e-13 * top,
                "seed {seed} tau {tau:e}: {bound:e} vs {want:e}"
            );
        }
    }
}
