#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spamm_core::{DenseMatrix, QuadTreeMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random matrix with entries `u * exp(-decay |i - j|)`, whole leaf blocks
/// zeroed with probability `1 - block_density`.
pub fn random_block_sparse(
    n: usize,
    leaf: usize,
    decay: f64,
    block_density: f64,
    rng: &mut ChaCha8Rng,
) -> DenseMatrix {
    let nb = n.div_ceil(leaf);
    let keep: Vec<bool> = (0..nb * nb).map(|_| rng.gen_bool(block_density)).collect();
    DenseMatrix::from_fn(n, |i, j| {
        let u: f64 = rng.gen_range(-1.0..1.0);
        if keep[(i / leaf) * nb + j / leaf] {
            u * (-decay * i.abs_diff(j) as f64).exp()
        } else {
            0.0
        }
    })
}

/// A random conformable pair with varied size, leaf size and sparsity.
pub fn random_pair(seed: u64) -> (DenseMatrix, DenseMatrix, usize) {
    let mut r = rng(seed);
    let leaf = [4usize, 8, 16][r.gen_range(0..3)];
    let n = r.gen_range(leaf..=96);
    let decay = r.gen_range(0.0..1.5);
    let density = r.gen_range(0.3..1.0);
    let a = random_block_sparse(n, leaf, decay, density, &mut r);
    let b = random_block_sparse(n, leaf, decay, density, &mut r);
    (a, b, leaf)
}

pub fn quadtree(d: &DenseMatrix, leaf: usize) -> QuadTreeMatrix {
    QuadTreeMatrix::from_dense(d, leaf).expect("valid dense input")
}
