#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmpc::blockops::BlockLtOperator;

/// Random BLT operator with well-conditioned diagonal blocks when square.
pub fn random_blt(rng: &mut impl Rng, horizon: usize, rows: usize, cols: usize) -> BlockLtOperator {
    let n = horizon + 1;
    let mut dense = DMatrix::from_fn(n * rows, n * cols, |_, _| rng.gen_range(-1.0..1.0));
    for t in 0..n {
        for c in 0..n {
            if c > t {
                dense.view_mut((t * rows, c * cols), (rows, cols)).fill(0.0);
            } else if c == t && rows == cols {
                for i in 0..rows {
                    dense[(t * rows + i, c * cols + i)] += 3.0 * rows as f64;
                }
            }
        }
    }
    BlockLtOperator::from_dense(&dense, horizon, rows, cols).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense `Z · blkdiag(m, …, m)` built entry by entry.
pub fn dense_shift(m: &DMatrix<f64>, horizon: usize) -> DMatrix<f64> {
    let (p, q) = m.shape();
    let mut d = DMatrix::zeros((horizon + 1) * p, (horizon + 1) * q);
    for t in 1..=horizon {
        for i in 0..p {
            for j in 0..q {
                d[(t * p + i, (t - 1) * q + j)] = m[(i, j)];
            }
        }
    }
    d
}
