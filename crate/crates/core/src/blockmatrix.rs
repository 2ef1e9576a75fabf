//! Level-phase block kernels, block-increasing vectors and the block-wise orders.
//!
//! A kernel on the level-phase space `{0, 1, ..} x {0, .., d-1}` is accessed block by block:
//! `block(k, l)` is the `d x d` matrix `P(k; l)` and `tail_block(k, l)` is `sum_{m >= l} P(k; m)`.
//! Block monotonicity and block-wise dominance are statements about tail blocks.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::solver;

/// A `d x d` block.
pub type Block = DMatrix<f64>;

/// How the repeating part of a kernel is organised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    /// Levels >= 1 form a GI/G/1-type chain: `P(k; l)` depends on `l - k` for `k, l >= 1`
    /// and the first block column is `sum_{j <= -k} A(j)`.
    GiG1,
    /// No structure is assumed.
    Custom,
}

/// A row-stochastic kernel on the level-phase space, given block-wise.
pub trait BlockKernel: Send + Sync {
    fn phases(&self) -> usize;

    /// `P(k; l)`.
    fn block(&self, k: usize, l: usize) -> Block;

    /// `sum_{m >= l} P(k; m)`, evaluated exactly or by a convergent closed form.
    fn tail_block(&self, k: usize, l: usize) -> Block;

    fn structure(&self) -> Structure {
        Structure::Custom
    }

    /// Largest `u` with `P(k; k + u) != 0` for some `k`, if finite.
    fn max_up_jump(&self) -> Option<usize> {
        None
    }

    /// Largest `u` with `P(k; k - u) != 0` for some `k`, if finite.
    fn max_down_jump(&self) -> Option<usize> {
        None
    }

    /// Writes `P(k; l)` row-major into `out`, which has length `d * d`.
    fn write_block(&self, k: usize, l: usize, out: &mut [f64]) {
        let b = self.block(k, l);
        let d = self.phases();
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = b[(i, j)];
            }
        }
    }
}

impl<T: BlockKernel + ?Sized> BlockKernel for &T {
    fn phases(&self) -> usize {
        (**self).phases()
    }
    fn block(&self, k: usize, l: usize) -> Block {
        (**self).block(k, l)
    }
    fn tail_block(&self, k: usize, l: usize) -> Block {
        (**self).tail_block(k, l)
    }
    fn structure(&self) -> Structure {
        (**self).structure()
    }
    fn max_up_jump(&self) -> Option<usize> {
        (**self).max_up_jump()
    }
    fn max_down_jump(&self) -> Option<usize> {
        (**self).max_down_jump()
    }
    fn write_block(&self, k: usize, l: usize, out: &mut [f64]) {
        (**self).write_block(k, l, out)
    }
}

type BlockFn = dyn Fn(usize, usize) -> Block + Send + Sync;

/// A kernel defined by a closure, with transitions at most `max_up` levels upward.
///
/// Tail blocks are finite sums, so this is exact for any kernel of bounded upward reach.
pub struct FnKernel {
    d: usize,
    max_up: usize,
    f: Box<BlockFn>,
}

impl FnKernel {
    pub fn new(
        d: usize,
        max_up: usize,
        f: impl Fn(usize, usize) -> Block + Send + Sync + 'static,
    ) -> Self {
        FnKernel { d, max_up, f: Box::new(f) }
    }
}

impl BlockKernel for FnKernel {
    fn phases(&self) -> usize {
        self.d
    }
    fn block(&self, k: usize, l: usize) -> Block {
        if l > k + self.max_up {
            return Block::zeros(self.d, self.d);
        }
        (self.f)(k, l)
    }
    fn tail_block(&self, k: usize, l: usize) -> Block {
        let mut t = Block::zeros(self.d, self.d);
        for m in l..=k + self.max_up {
            t += (self.f)(k, m);
        }
        t
    }
    fn max_up_jump(&self) -> Option<usize> {
        Some(self.max_up)
    }
}

type EntryFn = dyn Fn(usize, usize) -> f64 + Send + Sync;

/// A function `v(k, i)` on the level-phase space.
#[derive(Clone)]
pub struct BlockVector {
    d: usize,
    f: Arc<EntryFn>,
}

impl std::fmt::Debug for BlockVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockVector").field("phases", &self.d).finish_non_exhaustive()
    }
}

impl BlockVector {
    pub fn new(d: usize, f: impl Fn(usize, usize) -> f64 + Send + Sync + 'static) -> Self {
        BlockVector { d, f: Arc::new(f) }
    }

    /// `v(k, i) = g(k)` for every phase.
    pub fn level_only(d: usize, g: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        BlockVector::new(d, move |k, _| g(k))
    }

    pub fn phases(&self) -> usize {
        self.d
    }

    pub fn value(&self, k: usize, i: usize) -> f64 {
        (self.f)(k, i)
    }

    pub fn level(&self, k: usize) -> DVector<f64> {
        DVector::from_fn(self.d, |i, _| self.value(k, i))
    }

    /// `v(k, w) = sum_i w_i v(k, i)`.
    pub fn weighted(&self, k: usize, w: &DVector<f64>) -> f64 {
        (0..self.d).map(|i| w[i] * self.value(k, i)).sum()
    }
}

/// Checks `v(k) <= v(k + 1)` componentwise for `k < horizon`.
pub fn is_block_increasing(v: &BlockVector, horizon: usize) -> bool {
    (0..horizon).all(|k| (0..v.d).all(|i| v.value(k, i) <= v.value(k + 1, i)))
}

/// The phase transition matrix `Psi = sum_l P(k; l)`, read at level 0.
pub fn psi<K: BlockKernel + ?Sized>(p: &K) -> Block {
    p.tail_block(0, 0)
}

/// Stationary vector of the phase matrix `Psi`.
pub fn stationary_phase(psi: &Block) -> Result<DVector<f64>> {
    let d = psi.nrows();
    if d == 0 || psi.ncols() != d {
        return Err(invalid("phase matrix must be square and non-empty"));
    }
    for i in 0..d {
        let s: f64 = psi.row(i).iter().sum();
        if (s - 1.0).abs() > 1e-9 || psi.row(i).iter().any(|&x| x < 0.0) {
            return Err(invalid(format!("phase matrix row {i} is not stochastic (sum {s})")));
        }
    }
    let dense: Vec<f64> = (0..d).flat_map(|i| (0..d).map(move |j| psi[(i, j)])).collect();
    let m = solver::FiniteStochasticMatrix::dense(d, dense)?;
    match solver::stationary_gth_states(&m) {
        Ok(pi) => Ok(DVector::from_vec(pi)),
        Err(Error::AmbiguousStationary { first, second }) => Err(Error::Reducible(format!(
            "phase matrix has several closed classes (phases {} and {})",
            first.0 * d + first.1,
            second.0 * d + second.1
        ))),
        Err(e) => Err(e),
    }
}

fn max_excess(a: &Block, b: &Block) -> (f64, usize, usize) {
    let mut worst = (f64::NEG_INFINITY, 0, 0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let e = a[(i, j)] - b[(i, j)];
            if e > worst.0 {
                worst = (e, i, j);
            }
        }
    }
    worst
}

fn check_psi<K: BlockKernel + ?Sized>(p: &K, levels: usize, tol: f64) -> Result<()> {
    let psi0 = psi(p);
    for k in 1..=levels {
        let pk = p.tail_block(k, 0);
        let diff = (&pk - &psi0).abs().max();
        if diff > tol {
            return Err(Error::NotBlockMonotone {
                level: k,
                detail: format!(
                    "boundary_matrix_psi: row sum of level {k} differs from level 0 by {diff:e}"
                ),
            });
        }
    }
    Ok(())
}

/// Decides block monotonicity on levels `0..=horizon`.
///
/// Returns `Ok(false)` when some tail comparison `sum_{m>=l} P(k; m) <= sum_{m>=l} P(k+1; m)`
/// fails by more than `tol`, and an error when the row-sum matrix `Psi` is not level
/// independent (the kernel then cannot be block-monotone for any ordering of tails).
/// GI/G/1-structured kernels are checked once per diagonal of the repeating part.
pub fn is_block_monotone<K: BlockKernel + ?Sized>(p: &K, horizon: usize, tol: f64) -> Result<bool> {
    if horizon == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    match p.structure() {
        Structure::GiG1 => {
            check_psi(p, 1, tol)?;
            // Boundary row against the first repeating row.
            for l in 1..=horizon + 1 {
                if max_excess(&p.tail_block(0, l), &p.tail_block(1, l)).0 > tol {
                    return Ok(false);
                }
            }
            // For k, l >= 1 the tail depends on j = l - k only.
            let h = horizon as i64;
            for j in -h..=h + 1 {
                let k = (1 - j).max(1) as usize;
                let l = (k as i64 + j) as usize;
                if l == 0 {
                    continue;
                }
                if max_excess(&p.tail_block(k, l), &p.tail_block(k + 1, l)).0 > tol {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Structure::Custom => {
            check_psi(p, horizon, tol)?;
            for k in 0..horizon {
                for l in 1..=horizon + 1 {
                    if max_excess(&p.tail_block(k, l), &p.tail_block(k + 1, l)).0 > tol {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
    }
}

/// Decides `P1 <=_d P2` on levels `0..=horizon`: every tail block of `P1` is dominated by the
/// corresponding tail block of `P2`.
pub fn block_dominates<A, B>(p1: &A, p2: &B, horizon: usize, tol: f64) -> Result<bool>
where
    A: BlockKernel + ?Sized,
    B: BlockKernel + ?Sized,
{
    if p1.phases() != p2.phases() {
        return Err(invalid(format!(
            "phase counts differ: {} vs {}",
            p1.phases(),
            p2.phases()
        )));
    }
    for k in 0..=horizon {
        for l in 0..=horizon + 1 {
            if max_excess(&p1.tail_block(k, l), &p2.tail_block(k, l)).0 > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Decides `mu <=_d eta` for level-phase vectors stored level-major with `d` phases per level.
/// The shorter vector is padded with zero levels.
pub fn vector_dominates(mu: &[f64], eta: &[f64], d: usize, tol: f64) -> Result<bool> {
    if d == 0 || mu.len() % d != 0 || eta.len() % d != 0 {
        return Err(invalid("vector lengths must be multiples of the phase count"));
    }
    let levels = mu.len().max(eta.len()) / d;
    let at = |v: &[f64], idx: usize| v.get(idx).copied().unwrap_or(0.0);
    let mut tail_mu = vec![0.0; d];
    let mut tail_eta = vec![0.0; d];
    for l in (0..levels).rev() {
        for j in 0..d {
            tail_mu[j] += at(mu, l * d + j);
            tail_eta[j] += at(eta, l * d + j);
            if tail_mu[j] > tail_eta[j] + tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
