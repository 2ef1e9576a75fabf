//! Stationary distributions of finite stochastic matrices.
//!
//! The primary solver is Grassmann–Taksar–Heyman state elimination, which never subtracts
//! and therefore keeps full relative accuracy for tiny probabilities. Dense storage is used
//! up to [`DENSE_LIMIT`] states; banded storage covers larger finite-range chains, since
//! elimination from the last state down never widens the band.

use nalgebra::{DMatrix, DMatrixViewMut, DVector};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// Largest state count stored densely.
pub const DENSE_LIMIT: usize = 20_000;

/// Row-sum tolerance accepted when constructing a matrix.
pub const ROW_SUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
enum Storage {
    Dense(Vec<f64>),
    /// Row `i` holds columns `i - lower ..= i + upper` at offsets `0 ..= lower + upper`.
    Banded { lower: usize, upper: usize, data: Vec<f64> },
}

/// A finite row-stochastic matrix on `states` states, grouped into levels of `d` phases.
#[derive(Debug, Clone)]
pub struct FiniteStochasticMatrix {
    states: usize,
    d: usize,
    storage: Storage,
}

impl FiniteStochasticMatrix {
    /// Dense row-major matrix with one phase per level.
    pub fn dense(states: usize, data: Vec<f64>) -> Result<Self> {
        Self::dense_with_phases(states, 1, data)
    }

    pub fn dense_with_phases(states: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != states * states {
            return Err(invalid(format!(
                "dense storage needs {} entries, got {}",
                states * states,
                data.len()
            )));
        }
        let m = FiniteStochasticMatrix { states, d, storage: Storage::Dense(data) };
        m.validate()?;
        Ok(m)
    }

    /// Banded matrix; `data` holds `lower + upper + 1` entries per row (see [`Self::band_offset`]).
    pub fn banded(
        states: usize,
        d: usize,
        lower: usize,
        upper: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        let w = lower + upper + 1;
        if data.len() != states * w {
            return Err(invalid(format!(
                "banded storage needs {} entries, got {}",
                states * w,
                data.len()
            )));
        }
        let m = FiniteStochasticMatrix { states, d, storage: Storage::Banded { lower, upper, data } };
        m.validate()?;
        Ok(m)
    }

    /// Offset of column `j` inside the stored band of row `i`.
    pub fn band_offset(i: usize, j: usize, lower: usize) -> usize {
        j + lower - i
    }

    fn validate(&self) -> Result<()> {
        if self.states == 0 {
            return Err(invalid("matrix must have at least one state"));
        }
        if self.d == 0 || self.states % self.d != 0 {
            return Err(invalid("state count must be a multiple of the phase count"));
        }
        for i in 0..self.states {
            let mut sum = 0.0;
            for (j, v) in self.row(i) {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(invalid(format!("entry ({i}, {j}) = {v} is not a probability")));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(invalid(format!("row {i} sums to {sum}")));
            }
        }
        Ok(())
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn phases(&self) -> usize {
        self.d
    }

    pub fn is_banded(&self) -> bool {
        matches!(self.storage, Storage::Banded { .. })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(a) => a[i * self.states + j],
            Storage::Banded { lower, upper, data } => {
                if j + lower < i || j > i + upper {
                    0.0
                } else {
                    data[i * (lower + upper + 1) + j + lower - i]
                }
            }
        }
    }

    fn col_range(&self, i: usize) -> std::ops::Range<usize> {
        match &self.storage {
            Storage::Dense(_) => 0..self.states,
            Storage::Banded { lower, upper, .. } => {
                i.saturating_sub(*lower)..(i + upper + 1).min(self.states)
            }
        }
    }

    /// Stored entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.col_range(i).map(move |j| (j, self.get(i, j)))
    }

    /// `x M`.
    pub fn left_multiply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.states];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                y[j] += xi * v;
            }
        }
        y
    }

    fn to_dense_vec(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(a) => a.clone(),
            Storage::Banded { .. } => {
                let mut a = vec![0.0; self.states * self.states];
                for i in 0..self.states {
                    for (j, v) in self.row(i) {
                        a[i * self.states + j] = v;
                    }
                }
                a
            }
        }
    }

    fn level_phase(&self, state: usize) -> (usize, usize) {
        (state / self.d, state % self.d)
    }
}

/// A probability vector on levels `0..levels` with `d` phases per level, stored level-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    d: usize,
    data: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 || data.len() % d != 0 || data.is_empty() {
            return Err(invalid("length must be a positive multiple of the phase count"));
        }
        if data.iter().any(|&x| !(x >= 0.0)) {
            return Err(invalid("probabilities must be nonnegative"));
        }
        let s: f64 = data.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("probabilities sum to {s}")));
        }
        Ok(ProbabilityVector { d, data })
    }

    pub fn phases(&self) -> usize {
        self.d
    }

    pub fn levels(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.data[k * self.d + i]
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.data[k * self.d..(k + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// `sum_x |mu(x) - eta(x)|`, padding the shorter vector with zeros.
pub fn total_variation(mu: &ProbabilityVector, eta: &ProbabilityVector) -> Result<f64> {
    if mu.d != eta.d {
        return Err(invalid("phase counts differ"));
    }
    let n = mu.data.len().max(eta.data.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    Ok((0..n).map(|i| (at(&mu.data, i) - at(&eta.data, i)).abs()).sum())
}

/// Phase marginal `sum_k pi(k, i)`.
pub fn level_marginal(pi: &ProbabilityVector) -> DVector<f64> {
    let mut m = DVector::zeros(pi.d);
    for k in 0..pi.levels() {
        for i in 0..pi.d {
            m[i] += pi.get(k, i);
        }
    }
    m
}

/// `|| pi M - pi ||_1`.
pub fn residual(m: &FiniteStochasticMatrix, pi: &[f64]) -> f64 {
    m.left_multiply(pi).iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()
}

/// Stationary distribution by GTH elimination, grouped into levels.
pub fn stationary_gth(m: &FiniteStochasticMatrix) -> Result<ProbabilityVector> {
    let pi = stationary_gth_states(m)?;
    Ok(ProbabilityVector { d: m.d, data: pi })
}

/// `floor(pi)_{n_ref}`, used in place of `pi` when checking smaller truncations.
///
/// Callers must treat the result as `pi` up to the bound at `n_ref`. Requires `n_ref` to be at
/// least eight times every studied truncation level.
pub fn reference_pi<K: crate::blockmatrix::BlockKernel + ?Sized>(
    p: &K,
    n_ref: usize,
    studied: &[usize],
) -> Result<ProbabilityVector> {
    if let Some(&worst) = studied.iter().max() {
        if n_ref < worst.saturating_mul(8) {
            return Err(Error::Config(format!(
                "n_ref = {n_ref} must be at least 8 x the largest studied level {worst}"
            )));
        }
    }
    stationary_gth(&crate::truncation::lc_block_augment(p, n_ref)?)
}

/// Stationary distribution by GTH elimination as a flat state vector.
///
/// With a single closed class the solve is restricted to it and transient states get zero
/// mass. Several closed classes make the stationary distribution non-unique, which is
/// reported with one state from each of two classes.
pub fn stationary_gth_states(m: &FiniteStochasticMatrix) -> Result<Vec<f64>> {
    let classes = closed_classes(m);
    match classes.len() {
        0 => unreachable!("a finite chain has at least one closed class"),
        1 => {}
        _ => {
            return Err(Error::AmbiguousStationary {
                first: m.level_phase(classes[0][0]),
                second: m.level_phase(classes[1][0]),
            })
        }
    }
    let class = &classes[0];
    if class.len() == m.states {
        return gth_full(m);
    }
    // Restrict to the closed class; it is stochastic on its own.
    let c = class.len();
    let contiguous = class.windows(2).all(|w| w[1] == w[0] + 1);
    let sub_pi = match (&m.storage, contiguous) {
        (Storage::Banded { lower, upper, .. }, true) if c > DENSE_LIMIT => {
            let (lower, upper) = (*lower, *upper);
            let w = lower + upper + 1;
            let base = class[0];
            let mut data = vec![0.0; c * w];
            for r in 0..c {
                for (j, v) in m.row(base + r) {
                    if j >= base && j < base + c {
                        data[r * w + (j - base) + lower - r] = v;
                    }
                }
            }
            gth_banded(c, lower, upper, data)?
        }
        _ => {
            if c > DENSE_LIMIT {
                return Err(Error::Resource(format!(
                    "closed class of {c} states is too large for dense elimination"
                )));
            }
            let mut data = vec![0.0; c * c];
            for (r, &i) in class.iter().enumerate() {
                for (cidx, &j) in class.iter().enumerate() {
                    data[r * c + cidx] = m.get(i, j);
                }
            }
            gth_dense(c, data)?
        }
    };
    let mut pi = vec![0.0; m.states];
    for (r, &i) in class.iter().enumerate() {
        pi[i] = sub_pi[r];
    }
    Ok(pi)
}

fn gth_full(m: &FiniteStochasticMatrix) -> Result<Vec<f64>> {
    match &m.storage {
        Storage::Dense(a) => gth_dense(m.states, a.clone()),
        Storage::Banded { lower, upper, data } => gth_banded(m.states, *lower, *upper, data.clone()),
    }
}

fn normalized(mut x: Vec<f64>) -> Vec<f64> {
    let total: f64 = x.iter().sum();
    for v in x.iter_mut() {
        *v /= total;
    }
    x
}

/// States eliminated per panel in [`gth_dense`].
const GTH_PANEL: usize = 128;

/// Dense GTH elimination, blocked so that the bulk of the work is one matrix product per panel.
///
/// States `q..hi` of a panel are first eliminated among themselves; their rows are left
/// normalised by the pivot sums. The columns of the remaining rows are then brought up to date
/// by a triangular sweep, and the censored block is updated by a single product. Every step adds
/// nonnegative terms only.
fn gth_dense(s: usize, mut a: Vec<f64>) -> Result<Vec<f64>> {
    let mut pivots = vec![0.0; s];
    let mut hi = s;
    while hi > 1 {
        let q = hi.saturating_sub(GTH_PANEL).max(1);
        let (upper, panel) = a.split_at_mut(q * s);
        let panel = &mut panel[..(hi - q) * s];
        for t in (q..hi).rev() {
            let (before, from_t) = panel.split_at_mut((t - q) * s);
            let row_t = &mut from_t[..t];
            let st: f64 = row_t.iter().sum();
            if !(st > 0.0) {
                return Err(Error::Reducible(format!(
                    "state {t} cannot reach any lower-indexed state"
                )));
            }
            pivots[t] = st;
            let inv = 1.0 / st;
            row_t.iter_mut().for_each(|x| *x *= inv);
            let row_t = &*row_t;
            for row in before.chunks_mut(s) {
                let f = row[t];
                if f != 0.0 {
                    row[..t].iter_mut().zip(row_t).for_each(|(r, &v)| *r += f * v);
                }
            }
        }
        let panel = &*panel;
        upper.par_chunks_mut(s).for_each(|row| {
            for t in (q..hi).rev() {
                let f = row[t];
                if f != 0.0 {
                    let r = &panel[(t - q) * s..(t - q) * s + t];
                    row[q..t].iter_mut().zip(&r[q..t]).for_each(|(x, &v)| *x += f * v);
                }
            }
        });
        let b = hi - q;
        let c = DMatrix::from_fn(q, b, |i, t| upper[i * s + q + t]);
        let r = DMatrix::from_fn(b, q, |t, j| panel[t * s + j]);
        let len = (q - 1) * s + q;
        let mut target = DMatrixViewMut::from_slice_with_strides_mut(&mut upper[..len], q, q, s, 1);
        target.gemm(1.0, &c, &r, 1.0);
        hi = q;
    }
    let mut x = vec![0.0; s];
    x[0] = 1.0;
    for p in 1..s {
        let mut acc = 0.0;
        for i in 0..p {
            acc += x[i] * a[i * s + p];
        }
        x[p] = acc / pivots[p];
    }
    Ok(normalized(x))
}

fn gth_banded(s: usize, lower: usize, upper: usize, mut a: Vec<f64>) -> Result<Vec<f64>> {
    let w = lower + upper + 1;
    let idx = |i: usize, j: usize| i * w + j + lower - i;
    let mut pivots = vec![0.0; s];
    let mut prow = vec![0.0; lower];
    for p in (1..s).rev() {
        let lo = p.saturating_sub(lower);
        let len = p - lo;
        for (t, j) in (lo..p).enumerate() {
            prow[t] = a[idx(p, j)];
        }
        let sp: f64 = prow[..len].iter().sum();
        if !(sp > 0.0) {
            return Err(Error::Reducible(format!(
                "state {p} cannot reach any lower-indexed state"
            )));
        }
        pivots[p] = sp;
        for i in p.saturating_sub(upper)..p {
            let f = a[idx(i, p)];
            if f == 0.0 {
                continue;
            }
            let f = f / sp;
            // Columns lo..p lie inside row i's band because i < p and p - lo <= lower.
            let base = idx(i, lo);
            for t in 0..len {
                a[base + t] += f * prow[t];
            }
        }
    }
    let mut x = vec![0.0; s];
    x[0] = 1.0;
    for p in 1..s {
        let mut acc = 0.0;
        for i in p.saturating_sub(upper)..p {
            acc += x[i] * a[idx(i, p)];
        }
        x[p] = acc / pivots[p];
    }
    Ok(normalized(x))
}

/// Closed communicating classes, each sorted, ordered by smallest member.
pub fn closed_classes(m: &FiniteStochasticMatrix) -> Vec<Vec<usize>> {
    let n = m.states;
    let comp = strongly_connected(m);
    let ncomp = comp.iter().copied().max().map_or(0, |c| c + 1);
    let mut closed = vec![true; ncomp];
    for i in 0..n {
        for j in m.col_range(i) {
            if m.get(i, j) > 0.0 && comp[i] != comp[j] {
                closed[comp[i]] = false;
            }
        }
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for i in 0..n {
        if closed[comp[i]] {
            members[comp[i]].push(i);
        }
    }
    let mut out: Vec<Vec<usize>> = members.into_iter().filter(|c| !c.is_empty()).collect();
    out.sort_by_key(|c| c[0]);
    out
}

/// Iterative Tarjan; returns the component label of every state.
fn strongly_connected(m: &FiniteStochasticMatrix) -> Vec<usize> {
    const UNSEEN: usize = usize::MAX;
    let n = m.states;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut cursor: Vec<usize> = (0..n).map(|i| m.col_range(i).start).collect();
    let mut stack = Vec::new();
    let mut call: Vec<usize> = Vec::new();
    let mut next_index = 0;
    let mut next_comp = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push(root);
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&v) = call.last() {
            let end = m.col_range(v).end;
            let mut descended = false;
            while cursor[v] < end {
                let w = cursor[v];
                cursor[v] += 1;
                if m.get(v, w) <= 0.0 {
                    continue;
                }
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push(w);
                    descended = true;
                    break;
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            if descended {
                continue;
            }
            call.pop();
            if let Some(&parent) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp[w] = next_comp;
                    if w == v {
                        break;
                    }
                }
                next_comp += 1;
            }
        }
    }
    comp
}

/// Power iteration on the lazy chain `(I + M) / 2`, used as an independent cross-check.
pub fn stationary_power(
    m: &FiniteStochasticMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<ProbabilityVector> {
    let n = m.states;
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let y = m.left_multiply(&x);
        let next: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let diff: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if diff < tol {
            let s: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= s);
            return Ok(ProbabilityVector { d: m.d, data: x });
        }
    }
    Err(Error::SearchExhausted(format!("power iteration did not reach {tol:e} in {max_iter} steps")))
}

/// Stationary distribution via an LU solve of `pi (I - M) = 0, pi e = 1`, for cross-checks.
pub fn stationary_dense_lu(m: &FiniteStochasticMatrix) -> Result<Vec<f64>> {
    let n = m.states;
    let a = m.to_dense_vec();
    // Transposed system with the last equation replaced by normalisation.
    let mut sys = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            sys[(j, i)] = id - a[i * n + j];
        }
    }
    for i in 0..n {
        sys[(n - 1, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    sys.lu()
        .solve(&rhs)
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::Reducible("singular system".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stochastic(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                let v: f64 = rng.gen::<f64>() + 1e-3;
                a[i * n + j] = v;
                s += v;
            }
            for j in 0..n {
                a[i * n + j] /= s;
            }
        }
        a
    }

    #[test]
    fn two_state_closed_form() {
        let (p, q) = (0.3, 0.1);
        let m = FiniteStochasticMatrix::dense(2, vec![1.0 - p, p, q, 1.0 - q]).unwrap();
        let pi = stationary_gth(&m).unwrap();
        assert!((pi.get(0, 0) - q / (p + q)).abs() < 1e-15);
        assert!((pi.get(1, 0) - p / (p + q)).abs() < 1e-15);
    }

    #[test]
    fn identity_has_many_classes() {
        let mut a = vec![0.0; 9];
        a[0] = 1.0;
        a[4] = 1.0;
        a[8] = 1.0;
        let m = FiniteStochasticMatrix::dense(3, a).unwrap();
        match stationary_gth(&m) {
            Err(Error::AmbiguousStationary { first, second }) => {
                assert_eq!(first, (0, 0));
                assert_eq!(second, (1, 0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transient_states_get_zero_mass() {
        // State 0 is transient, {1, 2} is closed.
        let a = vec![0.5, 0.25, 0.25, 0.0, 0.2, 0.8, 0.0, 0.6, 0.4];
        let m = FiniteStochasticMatrix::dense(3, a).unwrap();
        let pi = stationary_gth_states(&m).unwrap();
        assert_eq!(pi[0], 0.0);
        assert!((pi[1] - 0.6 / 1.4).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_stochastic() {
        assert!(FiniteStochasticMatrix::dense(2, vec![0.5, 0.6, 0.5, 0.5]).is_err());
        assert!(FiniteStochasticMatrix::dense(2, vec![1.5, -0.5, 0.5, 0.5]).is_err());
        assert!(FiniteStochasticMatrix::dense(2, vec![1.0, 0.0]).is_err());
        assert!(FiniteStochasticMatrix::dense_with_phases(3, 2, vec![0.0; 9]).is_err());
    }

    #[test]
    fn gth_matches_lu_and_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[5usize, 20, 50] {
            let m = FiniteStochasticMatrix::dense(n, random_stochastic(n, &mut rng)).unwrap();
            let g = stationary_gth_states(&m).unwrap();
            let l = stationary_dense_lu(&m).unwrap();
            let p = stationary_power(&m, 1e-15, 100_000).unwrap();
            for i in 0..n {
                assert!((g[i] - l[i]).abs() < 1e-12);
                assert!((g[i] - p.as_slice()[i]).abs() < 1e-12);
            }
            assert!(residual(&m, &g) < 1e-13);
        }
    }

    #[test]
    fn banded_matches_dense() {
        // Birth-death chain with a second-neighbour jump.
        let n = 60;
        let (lower, upper) = (1usize, 2usize);
        let w = lower + upper + 1;
        let mut band = vec![0.0; n * w];
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            let mut row = vec![0.0; n];
            if i > 0 {
                row[i - 1] = 0.5;
            }
            if i + 1 < n {
                row[i + 1] = 0.2;
            }
            if i + 2 < n {
                row[i + 2] = 0.1;
            }
            let s: f64 = row.iter().sum();
            row[i] = 1.0 - s;
            for j in 0..n {
                dense[i * n + j] = row[j];
                if j + lower >= i && j <= i + upper {
                    band[i * w + FiniteStochasticMatrix::band_offset(i, j, lower)] = row[j];
                }
            }
        }
        let b = FiniteStochasticMatrix::banded(n, 1, lower, upper, band).unwrap();
        let d = FiniteStochasticMatrix::dense(n, dense).unwrap();
        let pb = stationary_gth_states(&b).unwrap();
        let pd = stationary_gth_states(&d).unwrap();
        for i in 0..n {
            assert!((pb[i] - pd[i]).abs() <= 1e-15 + 1e-13 * pd[i]);
        }
    }

    #[test]
    fn reference_pi_enforces_margin() {
        use crate::gig1::Assembled;
        use crate::special::ZetaChain;
        let p = Assembled(ZetaChain::new(3.0, 4.0).unwrap());
        let direct = stationary_gth(&crate::truncation::lc_block_augment(&p, 12).unwrap()).unwrap();
        let r = reference_pi(&p, 12, &[]).unwrap();
        assert_eq!(direct.as_slice(), r.as_slice());
        assert!(matches!(reference_pi(&p, 12, &[2]), Err(Error::Config(_))));
        assert!(reference_pi(&p, 16, &[2]).is_ok());
    }

    #[test]
    fn tv_pads_with_zeros() {
        let a = ProbabilityVector::new(1, vec![0.5, 0.5]).unwrap();
        let b = ProbabilityVector::new(1, vec![0.5, 0.25, 0.25]).unwrap();
        assert!((total_variation(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(total_variation(&a, &a).unwrap(), 0.0);
        let c = ProbabilityVector::new(2, vec![0.5, 0.5]).unwrap();
        assert!(total_variation(&a, &c).is_err());
    }

    #[test]
    fn marginal_sums_levels() {
        let p = ProbabilityVector::new(2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let m = level_marginal(&p);
        assert!((m[0] - 0.4).abs() < 1e-15 && (m[1] - 0.6).abs() < 1e-15);
    }
}
