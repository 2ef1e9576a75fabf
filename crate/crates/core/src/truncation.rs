//! Last-column-block-augmented northwest-corner truncation.
//!
//! `trunc(P, n)` keeps the blocks `P(k; l)` for `k <= n, l < n` and replaces block column `n`
//! by the tail sums `sum_{m >= n} P(k; m)`. Levels above `n` are transient for the augmented
//! chain, so only levels `0..=n` are materialized.

use crate::blockmatrix::{Block, BlockKernel, Structure};
use crate::error::{invalid, Error, Result};
use crate::solver::{FiniteStochasticMatrix, DENSE_LIMIT};

/// Builds the LC-block-augmented truncation on levels `0..=n`.
///
/// Dense storage is used up to [`DENSE_LIMIT`] states. Larger truncations need a kernel with
/// finite up and down reach and are stored banded.
pub fn lc_block_augment<K: BlockKernel + ?Sized>(p: &K, n: usize) -> Result<FiniteStochasticMatrix> {
    if n == 0 {
        return Err(invalid("truncation level must be at least 1"));
    }
    let d = p.phases();
    let states = (n + 1) * d;
    if states <= DENSE_LIMIT {
        let mut a = vec![0.0; states * states];
        let mut buf = vec![0.0; d * d];
        for k in 0..=n {
            let first = p.max_down_jump().map_or(0, |dn| k.saturating_sub(dn));
            let end = p.max_up_jump().map_or(n, |u| (k + u + 1).min(n));
            for l in first..end {
                p.write_block(k, l, &mut buf);
                scatter(&mut a, states, d, k, l, &buf);
            }
            let t = p.tail_block(k, n);
            write_tail(&mut a, states, d, k, n, &t);
        }
        FiniteStochasticMatrix::dense_with_phases(states, d, a)
    } else {
        let (Some(up), Some(down)) = (p.max_up_jump(), p.max_down_jump()) else {
            return Err(Error::Resource(format!(
                "{states} states exceed the dense limit and the kernel has unbounded reach"
            )));
        };
        let lower = down * d + d - 1;
        let upper = up * d + d - 1;
        let w = lower + upper + 1;
        let mut data = vec![0.0; states * w];
        for k in 0..=n {
            let first = k.saturating_sub(down);
            for l in first..(k + up + 1).min(n) {
                let b = p.block(k, l);
                for i in 0..d {
                    for j in 0..d {
                        let (r, c) = (k * d + i, l * d + j);
                        data[r * w + FiniteStochasticMatrix::band_offset(r, c, lower)] = b[(i, j)];
                    }
                }
            }
            if k + up >= n {
                let t = p.tail_block(k, n);
                for i in 0..d {
                    for j in 0..d {
                        let (r, c) = (k * d + i, n * d + j);
                        data[r * w + FiniteStochasticMatrix::band_offset(r, c, lower)] = t[(i, j)];
                    }
                }
            }
        }
        FiniteStochasticMatrix::banded(states, d, lower, upper, data)
    }
}

fn scatter(a: &mut [f64], states: usize, d: usize, k: usize, l: usize, buf: &[f64]) {
    for i in 0..d {
        let row = (k * d + i) * states + l * d;
        a[row..row + d].copy_from_slice(&buf[i * d..(i + 1) * d]);
    }
}

fn write_tail(a: &mut [f64], states: usize, d: usize, k: usize, n: usize, t: &Block) {
    for i in 0..d {
        for j in 0..d {
            a[(k * d + i) * states + n * d + j] = t[(i, j)];
        }
    }
}

/// `trunc(P, n)` viewed as a kernel on the whole level-phase space; rows above `n` are
/// those of the full truncation (block column `n` absorbs everything at or beyond `n`).
pub struct LcTruncated<K> {
    inner: K,
    n: usize,
}

impl<K: BlockKernel> LcTruncated<K> {
    pub fn new(inner: K, n: usize) -> Self {
        LcTruncated { inner, n }
    }
}

impl<K: BlockKernel> BlockKernel for LcTruncated<K> {
    fn phases(&self) -> usize {
        self.inner.phases()
    }

    fn block(&self, k: usize, l: usize) -> Block {
        match l.cmp(&self.n) {
            std::cmp::Ordering::Less => self.inner.block(k, l),
            std::cmp::Ordering::Equal => self.inner.tail_block(k, l),
            std::cmp::Ordering::Greater => Block::zeros(self.phases(), self.phases()),
        }
    }

    fn tail_block(&self, k: usize, l: usize) -> Block {
        if l <= self.n {
            self.inner.tail_block(k, l)
        } else {
            Block::zeros(self.phases(), self.phases())
        }
    }

    fn structure(&self) -> Structure {
        Structure::Custom
    }

    fn max_down_jump(&self) -> Option<usize> {
        self.inner.max_down_jump()
    }
}
