//! GI/G/1-type chains: level increments `A(k)`, `k` in Z, and a boundary row `B(l)`.
//!
//! The assembled kernel has first block row `B(l)`, first block column
//! `underline_A(-k) = sum_{j <= -k} A(j)` and Toeplitz interior `P(k; l) = A(l - k)`.

mod pipeline;
mod vfamily;

pub use pipeline::*;
pub use vfamily::*;

use nalgebra::{DMatrix, DVector};

use crate::blockmatrix::{stationary_phase, Block, BlockKernel, Structure};
use crate::error::{invalid, Error, Result};

/// Row `i` of `A(l)` for `l >= 0` has mass at most `coef * (l + 1)^{-exponent}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub coef: f64,
    pub exponent: f64,
}

/// Level increments and boundary row of a GI/G/1-type chain.
pub trait GiG1Kernel: Send + Sync {
    fn phases(&self) -> usize;

    /// `A(k)`.
    fn a(&self, k: i64) -> Block;

    /// `sum_{j >= k} A(j)`.
    fn a_upper_tail(&self, k: i64) -> Block;

    /// `sum_{j <= k} A(j)`.
    fn a_lower_tail(&self, k: i64) -> Block;

    /// `B(l)`.
    fn b(&self, l: usize) -> Block;

    /// `sum_{m >= l} B(m)`.
    fn b_tail(&self, l: usize) -> Block;

    /// `sum_{k >= 1} k A(k)`.
    fn first_moment_pos(&self) -> Block;

    /// `sum_{k <= -1} k A(k)`.
    fn first_moment_neg(&self) -> Block;

    /// Largest `N` with `A(-N) != 0`, if finite.
    fn negative_reach(&self) -> Option<usize>;

    /// Largest `U` with `A(U) != 0`, if finite.
    fn positive_reach(&self) -> Option<usize>;

    /// Largest `U` with `B(U) != 0`, if finite.
    fn boundary_reach(&self) -> Option<usize>;

    /// Per-phase power-law majorant of the rows of `A(l)`, `l >= 0`, if known.
    fn power_law(&self) -> Option<Vec<PowerLaw>> {
        None
    }

    /// `A = sum_k A(k)`.
    fn a_total(&self) -> Block {
        self.a_lower_tail(0) + self.a_upper_tail(1)
    }

    /// Writes `A(k)` row-major into `out`.
    fn write_a(&self, k: i64, out: &mut [f64]) {
        let b = self.a(k);
        let d = self.phases();
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = b[(i, j)];
            }
        }
    }
}

impl<T: GiG1Kernel + ?Sized> GiG1Kernel for &T {
    fn phases(&self) -> usize {
        (**self).phases()
    }
    fn a(&self, k: i64) -> Block {
        (**self).a(k)
    }
    fn a_upper_tail(&self, k: i64) -> Block {
        (**self).a_upper_tail(k)
    }
    fn a_lower_tail(&self, k: i64) -> Block {
        (**self).a_lower_tail(k)
    }
    fn b(&self, l: usize) -> Block {
        (**self).b(l)
    }
    fn b_tail(&self, l: usize) -> Block {
        (**self).b_tail(l)
    }
    fn first_moment_pos(&self) -> Block {
        (**self).first_moment_pos()
    }
    fn first_moment_neg(&self) -> Block {
        (**self).first_moment_neg()
    }
    fn negative_reach(&self) -> Option<usize> {
        (**self).negative_reach()
    }
    fn positive_reach(&self) -> Option<usize> {
        (**self).positive_reach()
    }
    fn boundary_reach(&self) -> Option<usize> {
        (**self).boundary_reach()
    }
    fn power_law(&self) -> Option<Vec<PowerLaw>> {
        (**self).power_law()
    }
    fn a_total(&self) -> Block {
        (**self).a_total()
    }
    fn write_a(&self, k: i64, out: &mut [f64]) {
        (**self).write_a(k, out)
    }
}

/// `underline_A(-k) = sum_{j <= -k} A(j)` for `k >= 0`.
pub fn underline_a<G: GiG1Kernel + ?Sized>(g: &G, k: usize) -> Block {
    g.a_lower_tail(-(k as i64))
}

/// Stationary vector `varpi` of `A = sum_k A(k)`.
pub fn phase_stationary<G: GiG1Kernel + ?Sized>(g: &G) -> Result<DVector<f64>> {
    stationary_phase(&g.a_total())
}

/// Mean drift `sigma = varpi sum_k k A(k) e`.
pub fn mean_drift_sigma<G: GiG1Kernel + ?Sized>(g: &G) -> Result<f64> {
    let w = phase_stationary(g)?;
    let m = (g.first_moment_pos() + g.first_moment_neg()) * DVector::from_element(g.phases(), 1.0);
    Ok(w.dot(&m))
}

/// Checks that `A` is stochastic and irreducible and that the boundary row is stochastic.
pub fn validate_kernel<G: GiG1Kernel + ?Sized>(g: &G) -> Result<()> {
    let a = g.a_total();
    let d = g.phases();
    for i in 0..d {
        let s: f64 = a.row(i).iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("row {i} of A sums to {s}")));
        }
        let sb: f64 = g.b_tail(0).row(i).iter().sum();
        if (sb - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("row {i} of the boundary row sums to {sb}")));
        }
    }
    let m = crate::solver::FiniteStochasticMatrix::dense(
        d,
        (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| a[(i, j)]).collect(),
    )?;
    let classes = crate::solver::closed_classes(&m);
    if classes.len() != 1 || classes[0].len() != d {
        return Err(Error::Reducible("A = sum_k A(k) is not irreducible".into()));
    }
    Ok(())
}

/// Finitely supported increments `A(k)`, `k` in `[min_k, min_k + a.len())`, and boundary
/// blocks `B(0..b.len())`.
#[derive(Debug, Clone)]
pub struct TabulatedGiG1 {
    d: usize,
    min_k: i64,
    a: Vec<Block>,
    b: Vec<Block>,
}

impl TabulatedGiG1 {
    pub fn new(min_k: i64, a: Vec<Block>, b: Vec<Block>) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(invalid("increment and boundary tables must be non-empty"));
        }
        if min_k > 0 {
            return Err(invalid("the increment table must start at k <= 0"));
        }
        let d = a[0].nrows();
        for blk in a.iter().chain(&b) {
            if blk.nrows() != d || blk.ncols() != d {
                return Err(invalid("all blocks must be d x d"));
            }
            if blk.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(invalid("blocks must be nonnegative"));
            }
        }
        let t = TabulatedGiG1 { d, min_k, a, b };
        validate_kernel(&t)?;
        Ok(t)
    }

    /// Boundary row chosen as `B(0) = underline_A(0)`, `B(l) = A(l)`, which makes the assembled
    /// kernel a reflected random walk.
    pub fn reflected(min_k: i64, a: Vec<Block>) -> Result<Self> {
        let d = a.first().map_or(0, |b| b.nrows());
        let max_k = min_k + a.len() as i64 - 1;
        let mut b = vec![Block::zeros(d, d); max_k.max(0) as usize + 1];
        for (idx, blk) in a.iter().enumerate() {
            let k = min_k + idx as i64;
            let slot = k.max(0) as usize;
            b[slot] += blk;
        }
        TabulatedGiG1::new(min_k, a, b)
    }

    fn max_k(&self) -> i64 {
        self.min_k + self.a.len() as i64 - 1
    }
}

impl GiG1Kernel for TabulatedGiG1 {
    fn phases(&self) -> usize {
        self.d
    }
    fn a(&self, k: i64) -> Block {
        if k < self.min_k || k > self.max_k() {
            Block::zeros(self.d, self.d)
        } else {
            self.a[(k - self.min_k) as usize].clone()
        }
    }
    fn a_upper_tail(&self, k: i64) -> Block {
        let mut t = Block::zeros(self.d, self.d);
        for j in k.max(self.min_k)..=self.max_k() {
            t += &self.a[(j - self.min_k) as usize];
        }
        t
    }
    fn a_lower_tail(&self, k: i64) -> Block {
        let mut t = Block::zeros(self.d, self.d);
        for j in self.min_k..=k.min(self.max_k()) {
            t += &self.a[(j - self.min_k) as usize];
        }
        t
    }
    fn b(&self, l: usize) -> Block {
        self.b.get(l).cloned().unwrap_or_else(|| Block::zeros(self.d, self.d))
    }
    fn b_tail(&self, l: usize) -> Block {
        let mut t = Block::zeros(self.d, self.d);
        for blk in self.b.iter().skip(l) {
            t += blk;
        }
        t
    }
    fn first_moment_pos(&self) -> Block {
        let mut t = Block::zeros(self.d, self.d);
        for k in 1..=self.max_k() {
            t += self.a(k) * k as f64;
        }
        t
    }
    fn first_moment_neg(&self) -> Block {
        let mut t = Block::zeros(self.d, self.d);
        for k in self.min_k..=-1 {
            t += self.a(k) * k as f64;
        }
        t
    }
    fn negative_reach(&self) -> Option<usize> {
        Some((-self.min_k) as usize)
    }
    fn positive_reach(&self) -> Option<usize> {
        Some(self.max_k().max(0) as usize)
    }
    fn boundary_reach(&self) -> Option<usize> {
        Some(self.b.len() - 1)
    }
}

/// The assembled GI/G/1-type kernel as a [`BlockKernel`].
pub struct Assembled<G>(pub G);

impl<G: GiG1Kernel> BlockKernel for Assembled<G> {
    fn phases(&self) -> usize {
        self.0.phases()
    }

    fn block(&self, k: usize, l: usize) -> Block {
        match (k, l) {
            (0, l) => self.0.b(l),
            (k, 0) => underline_a(&self.0, k),
            (k, l) => self.0.a(l as i64 - k as i64),
        }
    }

    fn tail_block(&self, k: usize, l: usize) -> Block {
        match (k, l) {
            (0, l) => self.0.b_tail(l),
            (_, 0) => self.0.a_total(),
            (k, l) => self.0.a_upper_tail(l as i64 - k as i64),
        }
    }

    fn write_block(&self, k: usize, l: usize, out: &mut [f64]) {
        if k >= 1 && l >= 1 {
            self.0.write_a(l as i64 - k as i64, out);
        } else {
            let b = self.block(k, l);
            let d = self.phases();
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] = b[(i, j)];
                }
            }
        }
    }

    fn structure(&self) -> Structure {
        Structure::GiG1
    }

    fn max_up_jump(&self) -> Option<usize> {
        Some(self.0.positive_reach()?.max(self.0.boundary_reach()?))
    }

    fn max_down_jump(&self) -> Option<usize> {
        self.0.negative_reach()
    }
}

/// `A_N`: increments below `-N` folded into `-N`, positive side and boundary unchanged.
pub struct Modified<G> {
    inner: G,
    n: usize,
}

/// The kernel of `P_N`.
pub fn modified_kernel<G: GiG1Kernel>(g: G, n: usize) -> Result<Modified<G>> {
    if n == 0 {
        return Err(invalid("N must be at least 1"));
    }
    Ok(Modified { inner: g, n })
}

impl<G: GiG1Kernel> Modified<G> {
    pub fn fold_level(&self) -> usize {
        self.n
    }

    pub fn inner(&self) -> &G {
        &self.inner
    }

    fn cut(&self) -> i64 {
        -(self.n as i64)
    }
}

impl<G: GiG1Kernel> GiG1Kernel for Modified<G> {
    fn phases(&self) -> usize {
        self.inner.phases()
    }
    fn a(&self, k: i64) -> Block {
        match k.cmp(&self.cut()) {
            std::cmp::Ordering::Less => Block::zeros(self.phases(), self.phases()),
            std::cmp::Ordering::Equal => self.inner.a_lower_tail(k),
            std::cmp::Ordering::Greater => self.inner.a(k),
        }
    }
    fn a_upper_tail(&self, k: i64) -> Block {
        if k <= self.cut() {
            self.inner.a_total()
        } else {
            self.inner.a_upper_tail(k)
        }
    }
    fn a_lower_tail(&self, k: i64) -> Block {
        if k < self.cut() {
            Block::zeros(self.phases(), self.phases())
        } else {
            self.inner.a_lower_tail(k)
        }
    }
    fn b(&self, l: usize) -> Block {
        self.inner.b(l)
    }
    fn b_tail(&self, l: usize) -> Block {
        self.inner.b_tail(l)
    }
    fn first_moment_pos(&self) -> Block {
        self.inner.first_moment_pos()
    }
    fn first_moment_neg(&self) -> Block {
        let mut t = self.inner.a_lower_tail(self.cut()) * self.cut() as f64;
        for k in self.cut() + 1..=-1 {
            t += self.inner.a(k) * k as f64;
        }
        t
    }
    fn negative_reach(&self) -> Option<usize> {
        Some(self.inner.negative_reach().map_or(self.n, |r| r.min(self.n)))
    }
    fn positive_reach(&self) -> Option<usize> {
        self.inner.positive_reach()
    }
    fn boundary_reach(&self) -> Option<usize> {
        self.inner.boundary_reach()
    }
    fn power_law(&self) -> Option<Vec<PowerLaw>> {
        self.inner.power_law()
    }
    fn a_total(&self) -> Block {
        self.inner.a_total()
    }
}

/// `sigma_N = varpi sum_k k A_N(k) e`.
pub fn sigma_n<G: GiG1Kernel>(g: G, n: usize) -> Result<f64> {
    mean_drift_sigma(&modified_kernel(g, n)?)
}

/// Smallest `N <= n_max` with `sigma_N < 0`.
pub fn choose_n<G: GiG1Kernel>(g: &G, n_max: usize) -> Result<usize> {
    let sigma = mean_drift_sigma(g)?;
    if !(sigma < 0.0) {
        return Err(Error::HypothesisViolated(format!("mean drift sigma = {sigma} is not negative")));
    }
    for n in 1..=n_max {
        if sigma_n(g, n)? < 0.0 {
            return Ok(n);
        }
    }
    Err(Error::SearchExhausted(format!("sigma_N >= 0 for every N <= {n_max}")))
}

fn ones(d: usize) -> DVector<f64> {
    DVector::from_element(d, 1.0)
}

/// `sum_k k A^{*M}(k) e = sum_{j < M} A^j m_1`, exact by differentiating the generating function.
pub fn convolution_moment<G: GiG1Kernel + ?Sized>(g: &G, m: usize) -> DVector<f64> {
    let a = g.a_total();
    let m1 = (g.first_moment_pos() + g.first_moment_neg()) * ones(g.phases());
    let mut acc = DVector::zeros(g.phases());
    let mut term = m1;
    for _ in 0..m {
        acc += &term;
        term = &a * term;
    }
    acc
}

/// `A^{*M}(k)` on `[min_k, min_k + blocks.len())`.
///
/// Exact on the negative side. When the positive reach is unbounded, each factor is truncated
/// at `cutoff` and the missing row mass is reported in `neglected`.
#[derive(Debug, Clone)]
pub struct IncrementTable {
    pub d: usize,
    pub min_k: i64,
    pub blocks: Vec<Block>,
    pub neglected: DVector<f64>,
    pub cutoff: usize,
}

impl IncrementTable {
    pub fn get(&self, k: i64) -> Block {
        if k < self.min_k || k >= self.min_k + self.blocks.len() as i64 {
            Block::zeros(self.d, self.d)
        } else {
            self.blocks[(k - self.min_k) as usize].clone()
        }
    }

    pub fn max_k(&self) -> i64 {
        self.min_k + self.blocks.len() as i64 - 1
    }

    /// Upper bound on `sum_{k < 0} |k| A^{*M}(k) e`: table mass plus neglected mass placed at the
    /// most negative level.
    pub fn negative_abs_moment_upper(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.d);
        for k in self.min_k..0 {
            acc += self.get(k) * ones(self.d) * (-k) as f64;
        }
        acc + &self.neglected * (-self.min_k) as f64
    }
}

/// Largest factor support allowed when a heavy positive tail must be truncated.
pub const MAX_CONVOLUTION_CUTOFF: usize = 20_000;

/// M-fold convolution of the increments of `g`.
pub fn convolve_power<G: GiG1Kernel + ?Sized>(g: &G, m: usize, pos_tail_tol: f64) -> Result<IncrementTable> {
    if m == 0 {
        return Err(invalid("M must be at least 1"));
    }
    let d = g.phases();
    let Some(neg) = g.negative_reach() else {
        return Err(invalid("convolution requires finite negative reach (fold first)"));
    };
    let cutoff = match g.positive_reach() {
        Some(u) => u,
        None => {
            let per_factor = pos_tail_tol / m as f64;
            let tail_ok = |l: usize| {
                (g.a_upper_tail(l as i64 + 1) * ones(d)).iter().all(|&x| x <= per_factor)
            };
            let mut l = 16usize;
            while !tail_ok(l) {
                l *= 2;
                if l > MAX_CONVOLUTION_CUTOFF {
                    return Err(Error::Resource(format!(
                        "positive tail above {per_factor:e} beyond {MAX_CONVOLUTION_CUTOFF} levels"
                    )));
                }
            }
            // Shrink to the smallest passing cutoff.
            let (mut lo, mut hi) = (l / 2, l);
            while lo + 1 < hi {
                let mid = (lo + hi) / 2;
                if tail_ok(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        }
    };
    let base: Vec<Block> = (-(neg as i64)..=cutoff as i64).map(|k| g.a(k)).collect();
    let mut cur = base.clone();
    let mut cur_min = -(neg as i64);
    for _ in 1..m {
        let mut next = vec![Block::zeros(d, d); cur.len() + base.len() - 1];
        for (i, x) in cur.iter().enumerate() {
            if x.iter().all(|&v| v == 0.0) {
                continue;
            }
            for (j, y) in base.iter().enumerate() {
                next[i + j] += x * y;
            }
        }
        cur = next;
        cur_min -= neg as i64;
    }
    let mut mass = DVector::zeros(d);
    for b in &cur {
        mass += b * ones(d);
    }
    let neglected = mass.map(|x: f64| (1.0 - x).max(0.0));
    Ok(IncrementTable { d, min_k: cur_min, blocks: cur, neglected, cutoff })
}

/// Smallest `M <= m_max` whose `M`-step drift vector `sum_k k A_N^{*M}(k) e` is negative in
/// every phase.
pub fn choose_m0<G: GiG1Kernel + ?Sized>(g: &G, m_max: usize) -> Result<usize> {
    let w = phase_stationary(g)?;
    let m1 = (g.first_moment_pos() + g.first_moment_neg()) * ones(g.phases());
    let sigma = w.dot(&m1);
    if !(sigma < 0.0) {
        return Err(Error::HypothesisViolated(format!("sigma_N = {sigma} is not negative")));
    }
    let mut trajectory = Vec::new();
    for m in 1..=m_max {
        let v = convolution_moment(g, m);
        if v.iter().all(|&x| x < 0.0) {
            return Ok(m);
        }
        trajectory.push(v.iter().copied().collect::<Vec<_>>());
    }
    Err(Error::SearchExhausted(format!(
        "no M <= {m_max} gives a negative drift vector; trajectory {trajectory:?}"
    )))
}

/// Feasible `(kappa, epsilon)` with slack vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaEpsilon {
    pub kappa: f64,
    pub epsilon: f64,
    /// `-2 kappa - [(1 - eps) m_tot + 2 eps m_pos]`, componentwise, nonnegative.
    pub slack: DVector<f64>,
}

/// Total and nonnegative-part first moments of `A_N^{*M}` (the latter an upper bound).
pub fn convolution_moments<G: GiG1Kernel + ?Sized>(
    g: &G,
    m: usize,
    pos_tail_tol: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let total = convolution_moment(g, m);
    let neg_abs = if m == 1 {
        -(g.first_moment_neg() * ones(g.phases()))
    } else {
        convolve_power(g, m, pos_tail_tol)?.negative_abs_moment_upper()
    };
    let pos = &total + neg_abs;
    Ok((total, pos))
}

/// `kappa(eps) = min_i -[(1 - eps) m_tot + 2 eps m_pos]_i / 2`.
pub fn kappa_for_epsilon(total: &DVector<f64>, pos: &DVector<f64>, eps: f64) -> (f64, DVector<f64>) {
    let lhs = total * (1.0 - eps) + pos * (2.0 * eps);
    let kappa = lhs.iter().map(|&x| -0.5 * x).fold(f64::INFINITY, f64::min);
    let slack = lhs.map(|x| -2.0 * kappa - x);
    (kappa, slack)
}

/// Grid of `epsilon` values searched by [`choose_kappa_epsilon`].
pub const EPSILON_GRID: [f64; 19] = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75,
    0.80, 0.85, 0.90, 0.95,
];

/// Maximises `kappa` over [`EPSILON_GRID`]; ties go to the smallest `epsilon`.
pub fn choose_kappa_epsilon<G: GiG1Kernel + ?Sized>(
    g: &G,
    m: usize,
    pos_tail_tol: f64,
) -> Result<KappaEpsilon> {
    let (total, pos) = convolution_moments(g, m, pos_tail_tol)?;
    let mut best: Option<KappaEpsilon> = None;
    for &eps in &EPSILON_GRID {
        let (kappa, slack) = kappa_for_epsilon(&total, &pos, eps);
        if kappa > 0.0 && best.as_ref().map_or(true, |b| kappa > b.kappa) {
            best = Some(KappaEpsilon { kappa, epsilon: eps, slack });
        }
    }
    best.ok_or_else(|| Error::Contract(format!("no feasible epsilon for M = {m}; is M >= M0?")))
}

/// Block `[P^M](k; 0) e` lower bound: paths are followed exactly within levels
/// `0..=k + M * reach`, which is exact for finite upward reach.
pub fn compute_big_b<K: BlockKernel + ?Sized>(p: &K, m: usize, k: usize, b: f64) -> Result<f64> {
    if m == 0 {
        return Err(invalid("M must be at least 1"));
    }
    let d = p.phases();
    let reach = p.max_up_jump().unwrap_or(64);
    let top = k + m * reach;
    let mut rows: Vec<DMatrix<f64>> = vec![DMatrix::zeros(d, d); top + 1];
    rows[k] = DMatrix::identity(d, d);
    for _ in 0..m {
        let mut next: Vec<DMatrix<f64>> = vec![DMatrix::zeros(d, d); top + 1];
        for (j, r) in rows.iter().enumerate() {
            if r.iter().all(|&x| x == 0.0) {
                continue;
            }
            let first = p.max_down_jump().map_or(0, |dn| j.saturating_sub(dn));
            let last = (j + reach).min(top);
            for (l, slot) in next.iter_mut().enumerate().take(last + 1).skip(first) {
                *slot += r * p.block(j, l);
            }
        }
        rows = next;
    }
    let mass = &rows[0] * ones(d);
    let min = mass.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::HypothesisViolated(format!(
            "[P^M]({k}; 0) has a zero row sum; the bound with exceptional levels does not apply"
        )));
    }
    Ok(b / min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockmatrix::is_block_monotone;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> Block {
        Block::from_row_slice(2, 2, &[a, b, c, d])
    }

    /// Two-phase walk with jumps in {-2, .., 2}.
    fn sample() -> TabulatedGiG1 {
        let a = vec![
            m2(0.10, 0.10, 0.10, 0.10),
            m2(0.20, 0.15, 0.15, 0.20),
            m2(0.10, 0.10, 0.10, 0.10),
            m2(0.10, 0.05, 0.05, 0.10),
            m2(0.05, 0.05, 0.05, 0.05),
        ];
        TabulatedGiG1::reflected(-2, a).unwrap()
    }

    #[test]
    fn underline_telescopes() {
        let g = sample();
        for k in 0..4 {
            let diff = underline_a(&g, k) - underline_a(&g, k + 1);
            assert!((diff - g.a(-(k as i64))).abs().max() < 1e-15);
        }
        assert_eq!(underline_a(&g, 5).max(), 0.0);
    }

    #[test]
    fn symmetric_drift_is_zero() {
        let a = vec![m2(0.25, 0.0, 0.0, 0.25), m2(0.0, 0.5, 0.5, 0.0), m2(0.25, 0.0, 0.0, 0.25)];
        let g = TabulatedGiG1::reflected(-1, a).unwrap();
        assert!(mean_drift_sigma(&g).unwrap().abs() < 1e-15);
    }

    #[test]
    fn folding_preserves_mass_and_raises_drift() {
        let g = sample();
        let sigma = mean_drift_sigma(&g).unwrap();
        let f = modified_kernel(&g, 1).unwrap();
        let mut total = Block::zeros(2, 2);
        for k in -3..=3 {
            total += f.a(k);
        }
        assert!((total - g.a_total()).abs().max() < 1e-15);
        assert!(sigma_n(&g, 1).unwrap() >= sigma);
        let same = modified_kernel(&g, 5).unwrap();
        for k in -3..=3 {
            assert_eq!(same.a(k), g.a(k));
        }
    }

    #[test]
    fn assembled_is_monotone_and_dominated_by_fold() {
        let g = sample();
        let p = Assembled(&g);
        assert!(is_block_monotone(&p, 12, 1e-14).unwrap());
        let pn = Assembled(modified_kernel(&g, 1).unwrap());
        assert!(is_block_monotone(&pn, 12, 1e-14).unwrap());
        assert!(crate::blockmatrix::block_dominates(&p, &pn, 12, 1e-14).unwrap());
    }

    #[test]
    fn convolution_matches_brute_force() {
        let g = sample();
        let t = convolve_power(&g, 3, 1e-14).unwrap();
        assert_eq!(t.min_k, -6);
        for k in -6..=6i64 {
            let mut want = Block::zeros(2, 2);
            for i in -2..=2i64 {
                for j in -2..=2i64 {
                    let l = k - i - j;
                    if (-2..=2).contains(&l) {
                        want += g.a(i) * g.a(j) * g.a(l);
                    }
                }
            }
            assert!((t.get(k) - want).abs().max() < 1e-15);
        }
        let moment = convolution_moment(&g, 3);
        let mut direct = DVector::zeros(2);
        for k in -6..=6i64 {
            direct += t.get(k) * ones(2) * k as f64;
        }
        assert!((moment - direct).abs().max() < 1e-14);
        assert!(t.neglected.max() < 1e-14);
    }

    #[test]
    fn m0_needs_mixing() {
        // Phase 0 drifts up by 0.8 and rarely leaves; phase 1 drops by 3.
        let z = Block::zeros(2, 2);
        let a = vec![
            m2(0.0, 0.0, 0.5, 0.5),
            z.clone(),
            z,
            m2(0.0, 0.2, 0.0, 0.0),
            m2(0.8, 0.0, 0.0, 0.0),
        ];
        let g = TabulatedGiG1::reflected(-3, a).unwrap();
        let m0 = choose_m0(&g, 20).unwrap();
        // Brute force: the drift vector from explicit convolutions.
        let neg = |m: usize| {
            let t = convolve_power(&g, m, 0.0).unwrap();
            let mut v = DVector::zeros(2);
            for k in t.min_k..=t.max_k() {
                v += t.get(k) * ones(2) * k as f64;
            }
            v.iter().all(|&x| x < 0.0)
        };
        assert!(neg(m0));
        for m in 1..m0 {
            assert!(!neg(m));
        }
        assert_eq!(m0, 6);
    }

    #[test]
    fn kappa_epsilon_without_positive_moment() {
        // Only nonpositive jumps: the second term vanishes and eps = 0.05 wins.
        let a = vec![m2(0.3, 0.2, 0.2, 0.3), m2(0.25, 0.25, 0.25, 0.25)];
        let g = TabulatedGiG1::reflected(-1, a).unwrap();
        let ke = choose_kappa_epsilon(&g, 1, 1e-14).unwrap();
        assert_eq!(ke.epsilon, 0.05);
        assert!((ke.kappa - 0.95 * 0.5 / 2.0).abs() < 1e-15);
        assert!(ke.slack.iter().all(|&s| s >= -1e-15));
    }

    #[test]
    fn big_b_of_geometric_column() {
        let g = sample();
        let p = Assembled(&g);
        let bb = compute_big_b(&p, 1, 2, 3.0).unwrap();
        let mass = underline_a(&g, 2) * ones(2);
        assert!((bb - 3.0 / mass.min()).abs() < 1e-12);
        let bb2 = compute_big_b(&p, 1, 2, 6.0).unwrap();
        assert!((bb2 - 2.0 * bb).abs() < 1e-12);
        assert!(matches!(compute_big_b(&p, 1, 3, 1.0), Err(Error::HypothesisViolated(_))));
    }
}
