//! Finite count-chain engine.
//!
//! A [`CountKernel`] is a dense row-stochastic matrix on `{0, ..., n}`. The
//! operations here are model-agnostic: stationary laws, the stationary-entry
//! flux into a [`TargetSet`], exact mean hitting times, one-block entry
//! moments, and total-variation utilities.
//!
//! Kernels keep both linear and log entries. Stationary laws of kernels
//! whose upward jumps have size at most one are computed by a
//! subtraction-free cut-flux recursion in log space, which keeps full
//! relative accuracy in tails far below `1e-300`. Other kernels use dense
//! partial-pivot elimination (up to [`DENSE_SOLVE_LIMIT`] states) or power
//! iteration.

use crate::logspace::{log_add_exp, log_sum_exp};
use crate::{Error, LogProb, Result};
use std::collections::BTreeSet;

/// Allowed deviation of a kernel row sum from one.
pub const ROW_TOLERANCE: f64 = 1e-12;
/// Allowed max-norm of `πP − π` for a stationary law.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Largest state count solved by dense elimination.
pub const DENSE_SOLVE_LIMIT: usize = 2001;

/// Dense transition matrix on `{0, ..., n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountKernel {
    n: usize,
    rows: Vec<Vec<f64>>,
    log_rows: Vec<Vec<f64>>,
}

impl CountKernel {
    /// Builds a kernel from linear rows, checking the stochastic invariants.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let log_rows = rows
            .iter()
            .map(|r| r.iter().map(|&x| x.ln()).collect())
            .collect();
        Self::checked(rows, log_rows)
    }

    /// Builds a kernel from natural-log entries (`-inf` for zero).
    pub fn from_log_rows(log_rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows = log_rows
            .iter()
            .map(|r| r.iter().map(|&x| x.exp()).collect())
            .collect();
        Self::checked(rows, log_rows)
    }

    fn checked(rows: Vec<Vec<f64>>, log_rows: Vec<Vec<f64>>) -> Result<Self> {
        let states = rows.len();
        if states < 2 {
            return Err(Error::DomainError(format!(
                "a count kernel needs n >= 1, got {} states",
                states
            )));
        }
        for (i, (row, log_row)) in rows.iter().zip(&log_rows).enumerate() {
            if row.len() != states {
                return Err(Error::LengthMismatch {
                    left: row.len(),
                    right: states,
                });
            }
            let min = row.iter().copied().fold(f64::INFINITY, f64::min);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum = log_sum_exp(log_row.iter().copied()).exp();
            if !(min >= 0.0 && max <= 1.0) || (sum - 1.0).abs() > ROW_TOLERANCE || sum.is_nan() {
                return Err(Error::NonStochastic { row: i, sum, min });
            }
        }
        Ok(CountKernel {
            n: states - 1,
            rows,
            log_rows,
        })
    }

    /// Top state; the state space is `0..=n`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn states(&self) -> usize {
        self.n + 1
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn log_row(&self, i: usize) -> &[f64] {
        &self.log_rows[i]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn log_entry(&self, i: usize, j: usize) -> f64 {
        self.log_rows[i][j]
    }

    /// True when no row jumps up by more than one and every upward step
    /// `i -> i + 1` has positive probability.
    pub fn is_up_skip_free(&self) -> bool {
        (0..=self.n).all(|i| {
            let up_ok = i == self.n || self.log_rows[i][i + 1] > f64::NEG_INFINITY;
            up_ok && self.log_rows[i][(i + 2).min(self.n + 1)..].iter().all(|&x| x == f64::NEG_INFINITY)
        })
    }

    /// One step of the row-vector recursion `d ↦ dP`.
    pub fn step(&self, d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.states()];
        for (di, row) in d.iter().zip(&self.rows) {
            if *di == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(row) {
                *o += di * p;
            }
        }
        out
    }

    /// `log P(i, {0..=k})` for every `i, k`.
    fn log_prefix_table(&self) -> Vec<Vec<f64>> {
        self.log_rows
            .iter()
            .map(|row| {
                let mut acc = f64::NEG_INFINITY;
                row.iter()
                    .map(|&x| {
                        acc = log_add_exp(acc, x);
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    /// `log P(i, {k+1..=n})` for every `i, k`; the last column is `-inf`.
    fn log_suffix_table(&self) -> Vec<Vec<f64>> {
        self.log_rows
            .iter()
            .map(|row| {
                let mut out = vec![f64::NEG_INFINITY; row.len()];
                let mut acc = f64::NEG_INFINITY;
                for k in (0..row.len()).rev() {
                    out[k] = acc;
                    acc = log_add_exp(acc, row[k]);
                }
                out
            })
            .collect()
    }
}

/// Set of target states `A ⊆ {0..=n}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetSet {
    members: BTreeSet<usize>,
}

impl TargetSet {
    pub fn new(members: impl IntoIterator<Item = usize>, n: usize) -> Result<Self> {
        let members: BTreeSet<usize> = members.into_iter().collect();
        if members.is_empty() || members.iter().any(|&m| m > n) {
            return Err(Error::InvalidTarget { n });
        }
        Ok(TargetSet { members })
    }

    pub fn single(state: usize, n: usize) -> Result<Self> {
        Self::new([state], n)
    }

    pub fn contains(&self, state: usize) -> bool {
        self.members.contains(&state)
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + Clone + '_ {
        self.members.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn complement(&self, states: usize) -> Vec<usize> {
        (0..states).filter(|s| !self.contains(*s)).collect()
    }
}

/// How a stationary law was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    CutFlux,
    Dense,
    PowerIteration,
}

/// Stationary law with its residual diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    residual: f64,
    relative_residual: f64,
    method: SolveMethod,
}

impl StationaryDistribution {
    fn from_log(kernel: &CountKernel, mut log_probs: Vec<f64>, method: SolveMethod) -> Self {
        let norm = log_sum_exp(log_probs.iter().copied());
        for x in &mut log_probs {
            *x -= norm;
        }
        let probs: Vec<f64> = log_probs.iter().map(|x| x.exp()).collect();
        let residual = kernel
            .step(&probs)
            .iter()
            .zip(&probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let relative_residual = (0..kernel.states())
            .filter(|&j| log_probs[j] > f64::NEG_INFINITY)
            .map(|j| {
                let image = log_sum_exp((0..kernel.states()).map(|i| log_probs[i] + kernel.log_rows[i][j]));
                (image - log_probs[j]).exp_m1().abs()
            })
            .fold(0.0, f64::max);
        StationaryDistribution {
            probs,
            log_probs,
            residual,
            relative_residual,
            method,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.probs[k]
    }

    pub fn log_prob(&self, k: usize) -> f64 {
        self.log_probs[k]
    }

    /// Max-norm of `πP − π`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Largest per-state relative balance error `|(πP)(j)/π(j) − 1|`.
    pub fn relative_residual(&self) -> f64 {
        self.relative_residual
    }

    pub fn method(&self) -> SolveMethod {
        self.method
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }
}

/// Stationary law, choosing the solver from the kernel's structure.
pub fn stationary_distribution(kernel: &CountKernel) -> Result<StationaryDistribution> {
    if kernel.is_up_skip_free() {
        stationary_cut_flux(kernel)
    } else if kernel.states() <= DENSE_SOLVE_LIMIT {
        stationary_dense(kernel)
    } else {
        Ok(stationary_power(kernel, 1e-15, 10_000_000))
    }
}

/// Cut-flux recursion for kernels with unit upward jumps.
///
/// Across the cut between `{0..k}` and `{k+1..n}` the only upward flow is
/// `π(k)P(k, k+1)`, so
/// `π(k) = Σ_{j>k} π(j) P(j, {0..k}) / P(k, k+1)`,
/// a sum of nonnegative terms evaluated from the top state downward.
pub fn stationary_cut_flux(kernel: &CountKernel) -> Result<StationaryDistribution> {
    if !kernel.is_up_skip_free() {
        return Err(Error::DomainError(
            "cut-flux recursion needs unit upward jumps with positive rate".into(),
        ));
    }
    let n = kernel.n();
    let prefix = kernel.log_prefix_table();
    let mut log_nu = vec![f64::NEG_INFINITY; n + 1];
    log_nu[n] = 0.0;
    for k in (0..n).rev() {
        let down = log_sum_exp((k + 1..=n).map(|j| log_nu[j] + prefix[j][k]));
        log_nu[k] = down - kernel.log_entry(k, k + 1);
    }
    Ok(StationaryDistribution::from_log(kernel, log_nu, SolveMethod::CutFlux))
}

/// Partial-pivot elimination of `(Pᵀ − I)x = 0` with the last balance
/// equation replaced by `Σx = 1`.
pub fn stationary_dense(kernel: &CountKernel) -> Result<StationaryDistribution> {
    let m = kernel.states();
    let mut a = vec![vec![0.0; m]; m];
    for (i, row) in kernel.rows().iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            a[j][i] = *p;
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] -= 1.0;
    }
    a[m - 1] = vec![1.0; m];
    let mut rhs = vec![0.0; m];
    rhs[m - 1] = 1.0;
    let x = solve_dense(a, rhs)?;
    let log_probs = x.iter().map(|&v| v.max(0.0).ln()).collect();
    Ok(StationaryDistribution::from_log(kernel, log_probs, SolveMethod::Dense))
}

/// Power iteration from the uniform law until the max-norm change drops
/// below `tol`.
pub fn stationary_power(kernel: &CountKernel, tol: f64, max_iter: usize) -> StationaryDistribution {
    let m = kernel.states();
    let mut d = vec![1.0 / m as f64; m];
    for _ in 0..max_iter {
        let next = kernel.step(&d);
        let delta = next.iter().zip(&d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        d = next;
        if delta < tol {
            break;
        }
    }
    let log_probs = d.iter().map(|&v| v.max(0.0).ln()).collect();
    StationaryDistribution::from_log(kernel, log_probs, SolveMethod::PowerIteration)
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let m = b.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() <= 1e-14 * scale {
            return Err(Error::SingularSolve { pivot: col });
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (head, tail) = a.split_at_mut(col + 1);
        let prow = &head[col];
        for (off, row) in tail.iter_mut().enumerate() {
            let f = row[col] / prow[col];
            if f == 0.0 {
                continue;
            }
            for (x, y) in row[col..].iter_mut().zip(&prow[col..]) {
                *x -= f * y;
            }
            b[col + 1 + off] -= f * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Ok(x)
}

/// Stationary-entry flux `log Σ_{x∉A} π(x) P(x, A)`.
pub fn entry_flux(kernel: &CountKernel, pi: &StationaryDistribution, target: &TargetSet) -> Result<LogProb> {
    let outside = target.complement(kernel.states());
    if outside.is_empty() {
        return Err(Error::EmptyComplement);
    }
    Ok(LogProb(log_sum_exp(outside.iter().flat_map(|&x| {
        target.members().map(move |y| pi.log_prob(x) + kernel.log_entry(x, y))
    }))))
}

/// Exact stationary-entry flux next to a closed-form or asymptotic
/// prediction, all as natural logs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FluxReport {
    pub log_exact: LogProb,
    pub log_predicted: LogProb,
    /// `log_exact − log_predicted`.
    pub log_ratio: f64,
    /// Other exact routes to the same flux, keyed by name.
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub alternatives: std::collections::BTreeMap<String, LogProb>,
}

impl FluxReport {
    pub fn new(log_exact: LogProb, log_predicted: LogProb) -> Self {
        FluxReport {
            log_exact,
            log_predicted,
            log_ratio: log_exact.ln() - log_predicted.ln(),
            alternatives: Default::default(),
        }
    }

    pub fn with_alternative(mut self, name: &str, value: LogProb) -> Self {
        self.alternatives.insert(name.to_string(), value);
        self
    }

    pub fn ratio(&self) -> f64 {
        self.log_ratio.exp()
    }
}

/// Stationary exit flux `log Σ_{x∈A} π(x) P(x, Aᶜ)`; equals the entry flux
/// under stationarity.
pub fn exit_flux(kernel: &CountKernel, pi: &StationaryDistribution, target: &TargetSet) -> Result<LogProb> {
    let outside = target.complement(kernel.states());
    if outside.is_empty() {
        return Err(Error::EmptyComplement);
    }
    Ok(LogProb(log_sum_exp(target.members().flat_map(|x| {
        outside.iter().map(move |&y| pi.log_prob(x) + kernel.log_entry(x, y))
    }))))
}

/// Relative mismatch of the two sides of the cut-flux identity at every
/// level `k < n`: upward flow out of `{0..k}` against downward flow into it.
pub fn cut_flux_residuals(kernel: &CountKernel, pi: &StationaryDistribution) -> Vec<f64> {
    let n = kernel.n();
    let prefix = kernel.log_prefix_table();
    let suffix = kernel.log_suffix_table();
    (0..n)
        .map(|k| {
            let up = log_sum_exp((0..=k).map(|i| pi.log_prob(i) + suffix[i][k]));
            let down = log_sum_exp((k + 1..=n).map(|j| pi.log_prob(j) + prefix[j][k]));
            (up - down).exp_m1().abs()
        })
        .collect()
}

/// Exact expected hitting time of `target` from `start`.
///
/// When upward jumps have size one and every target state lies above
/// `start`, the time is a sum of level-crossing times computed by a
/// positive recursion in log space (see [`log_ladder_mean`]). Otherwise
/// `(I − P_BB) h = 1` is solved on the complement `B`.
pub fn mean_hitting_time(kernel: &CountKernel, target: &TargetSet, start: usize) -> Result<f64> {
    if target.contains(start) {
        return Ok(0.0);
    }
    let lowest = target.members().min().ok_or(Error::InvalidTarget { n: kernel.n() })?;
    if start < lowest && kernel.is_up_skip_free() {
        return Ok(log_ladder_mean(kernel, start, lowest)?.exp());
    }
    mean_hitting_time_dense(kernel, target, start)
}

/// Dense linear-solve route of [`mean_hitting_time`], for any kernel.
pub fn mean_hitting_time_dense(kernel: &CountKernel, target: &TargetSet, start: usize) -> Result<f64> {
    if target.contains(start) {
        return Ok(0.0);
    }
    let outside = target.complement(kernel.states());
    let m = outside.len();
    let mut a = vec![vec![0.0; m]; m];
    for (r, &x) in outside.iter().enumerate() {
        for (c, &y) in outside.iter().enumerate() {
            a[r][c] = if r == c { 1.0 } else { 0.0 } - kernel.entry(x, y);
        }
    }
    let h = solve_dense(a, vec![1.0; m])?;
    let pos = outside.iter().position(|&x| x == start).ok_or(Error::InvalidTarget { n: kernel.n() })?;
    let v = h[pos];
    if !v.is_finite() || v < 0.0 {
        return Err(Error::SingularSolve { pivot: pos });
    }
    Ok(v)
}

/// `log E_start τ_top` for an up-skip-free kernel and `start < top`.
///
/// The chain crosses each level in turn, so `E_start τ_top = Σ_{start<=j<top} m_j`
/// with `m_j = E_j τ_{j+1}`. Conditioning on the first step,
/// `m_j P(j, j+1) = 1 + Σ_{l<j} m_l P(j, {0..l})`: every term is
/// nonnegative, so the recursion is free of cancellation even when the
/// answer is astronomically large.
pub fn log_ladder_mean(kernel: &CountKernel, start: usize, top: usize) -> Result<f64> {
    if start >= top || top > kernel.n() {
        return Err(Error::InvalidTarget { n: kernel.n() });
    }
    let prefix = kernel.log_prefix_table();
    let mut log_m: Vec<f64> = Vec::with_capacity(top);
    for j in 0..top {
        let up = kernel.log_entry(j, j + 1);
        if up == f64::NEG_INFINITY {
            return Err(Error::SingularSolve { pivot: j });
        }
        let acc = log_sum_exp(std::iter::once(0.0).chain((0..j).map(|l| log_m[l] + prefix[j][l])));
        log_m.push(acc - up);
    }
    Ok(log_sum_exp(log_m[start..].iter().copied()))
}

/// `P_start(T_A <= r)` by propagating the mass that has not yet hit.
pub fn hit_probability_within(kernel: &CountKernel, target: &TargetSet, start: usize, r: usize) -> f64 {
    if target.contains(start) {
        return 1.0;
    }
    let mut alive = vec![0.0; kernel.states()];
    alive[start] = 1.0;
    let mut hit = 0.0;
    for _ in 0..r {
        let mut next = kernel.step(&alive);
        for y in target.members() {
            hit += next[y];
            next[y] = 0.0;
        }
        alive = next;
    }
    hit
}

/// First and second factorial moments of the number of new entries into
/// the target in one stationary block of length `b`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlockMomentReport {
    pub b: usize,
    /// `E N_b = b μ`.
    pub first_moment: f64,
    /// `E[N_b (N_b − 1)]`.
    pub second_factorial: f64,
    /// `second_factorial / first_moment`, exact even when `μ` underflows.
    pub ratio: f64,
    pub log_flux: LogProb,
}

/// Entry-conditioned law on the target: `v(y) ∝ Σ_{x∉A} π(x) P(x, y)`.
fn entry_law(kernel: &CountKernel, pi: &StationaryDistribution, target: &TargetSet, log_mu: f64) -> Vec<f64> {
    let outside = target.complement(kernel.states());
    let mut v = vec![0.0; kernel.states()];
    for y in target.members() {
        let l = log_sum_exp(outside.iter().map(|&x| pi.log_prob(x) + kernel.log_entry(x, y)));
        v[y] = (l - log_mu).exp();
    }
    v
}

/// Computes `E N_b = bμ` and
/// `E[(N_b)_2] = 2 Σ_{d=1}^{b−1} (b − d) P_π(E_1 = 1, E_{1+d} = 1)` by
/// propagating the entry-conditioned law through the kernel.
pub fn block_entry_moments(
    kernel: &CountKernel,
    pi: &StationaryDistribution,
    target: &TargetSet,
    b: usize,
) -> Result<BlockMomentReport> {
    if b == 0 {
        return Err(Error::DomainError("block length must be at least 1".into()));
    }
    let log_mu = entry_flux(kernel, pi, target)?;
    let outside = target.complement(kernel.states());
    let into_target: Vec<f64> = (0..kernel.states())
        .map(|x| target.members().map(|y| kernel.entry(x, y)).sum())
        .collect();
    let mut v = entry_law(kernel, pi, target, log_mu.ln());
    let mut weighted = 0.0;
    for d in 1..b {
        let g: f64 = outside.iter().map(|&x| v[x] * into_target[x]).sum();
        weighted += (b - d) as f64 * g;
        if d + 1 < b {
            v = kernel.step(&v);
        }
    }
    let mu = log_mu.exp();
    let ratio = 2.0 * weighted / b as f64;
    Ok(BlockMomentReport {
        b,
        first_moment: b as f64 * mu,
        second_factorial: ratio * b as f64 * mu,
        ratio,
        log_flux: log_mu,
    })
}

/// `P_π(N_b >= 1)`, accumulated as a sum of first-entry probabilities so
/// that tiny values keep their relative accuracy.
pub fn block_entry_probability(
    kernel: &CountKernel,
    pi: &StationaryDistribution,
    target: &TargetSet,
    b: usize,
) -> f64 {
    let states = kernel.states();
    let mut w = pi.probs().to_vec();
    let mut total = 0.0;
    for _ in 0..b {
        let mut next = vec![0.0; states];
        for x in 0..states {
            if w[x] == 0.0 {
                continue;
            }
            let inside = target.contains(x);
            for y in 0..states {
                let p = kernel.entry(x, y);
                if !inside && target.contains(y) {
                    total += w[x] * p;
                } else {
                    next[y] += w[x] * p;
                }
            }
        }
        w = next;
    }
    total
}

/// `(1/2) Σ |d1 − d2|`.
pub fn total_variation(d1: &[f64], d2: &[f64]) -> Result<f64> {
    if d1.len() != d2.len() {
        return Err(Error::LengthMismatch {
            left: d1.len(),
            right: d2.len(),
        });
    }
    Ok(0.5 * d1.iter().zip(d2).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `TV(d1 P^t, d2 P^t)` for `t = 0..=steps`.
pub fn tv_contraction_check(kernel: &CountKernel, d1: &[f64], d2: &[f64], steps: usize) -> Result<Vec<f64>> {
    for d in [d1, d2] {
        if d.len() != kernel.states() {
            return Err(Error::LengthMismatch {
                left: d.len(),
                right: kernel.states(),
            });
        }
    }
    let (mut a, mut b) = (d1.to_vec(), d2.to_vec());
    let mut out = Vec::with_capacity(steps + 1);
    out.push(total_variation(&a, &b)?);
    for _ in 0..steps {
        a = kernel.step(&a);
        b = kernel.step(&b);
        out.push(total_variation(&a, &b)?);
    }
    Ok(out)
}

/// Exact mixing coefficient of the count chain,
/// `sup_x ‖P^h(x, ·) − π‖_TV`.
pub fn worst_case_tv(kernel: &CountKernel, pi: &StationaryDistribution, h: usize) -> f64 {
    (0..kernel.states())
        .map(|x| {
            let mut d = vec![0.0; kernel.states()];
            d[x] = 1.0;
            for _ in 0..h {
                d = kernel.step(&d);
            }
            0.5 * d.iter().zip(pi.probs()).map(|(a, b)| (a - b).abs()).sum::<f64>()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(a: f64, b: f64) -> CountKernel {
        CountKernel::from_rows(vec![vec![1.0 - a, a], vec![b, 1.0 - b]]).unwrap()
    }

    #[test]
    fn symmetric_two_state_is_uniform() {
        let k = two_state(0.5, 0.5);
        for pi in [stationary_dense(&k).unwrap(), stationary_cut_flux(&k).unwrap()] {
            assert!((pi.prob(0) - 0.5).abs() < 1e-15);
            assert!((pi.prob(1) - 0.5).abs() < 1e-15);
            assert!(pi.residual() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let err = CountKernel::from_rows(vec![vec![0.5, 0.6], vec![0.5, 0.5]]).unwrap_err();
        assert_eq!(err.name(), "NonStochastic");
        let err = CountKernel::from_rows(vec![vec![1.1, -0.1], vec![0.5, 0.5]]).unwrap_err();
        assert_eq!(err.name(), "NonStochastic");
        assert!(CountKernel::from_rows(vec![vec![1.0]]).is_err());
    }

    #[test]
    fn dense_and_cut_flux_agree_on_birth_death() {
        let rows = vec![
            vec![0.7, 0.3, 0.0, 0.0],
            vec![0.2, 0.5, 0.3, 0.0],
            vec![0.1, 0.2, 0.4, 0.3],
            vec![0.3, 0.2, 0.1, 0.4],
        ];
        let k = CountKernel::from_rows(rows).unwrap();
        assert!(k.is_up_skip_free());
        let a = stationary_dense(&k).unwrap();
        let b = stationary_cut_flux(&k).unwrap();
        for i in 0..4 {
            assert!((a.prob(i) - b.prob(i)).abs() < 1e-14);
        }
        let c = stationary_power(&k, 1e-16, 100_000);
        for i in 0..4 {
            assert!((a.prob(i) - c.prob(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn general_kernel_goes_through_dense_solver() {
        let k = CountKernel::from_rows(vec![
            vec![0.1, 0.2, 0.7],
            vec![0.3, 0.3, 0.4],
            vec![0.5, 0.25, 0.25],
        ])
        .unwrap();
        assert!(!k.is_up_skip_free());
        let pi = stationary_distribution(&k).unwrap();
        assert_eq!(pi.method(), SolveMethod::Dense);
        assert!(pi.residual() < RESIDUAL_TOLERANCE);
        assert!((pi.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entry_flux_two_state_and_degenerate_target() {
        let k = two_state(0.5, 0.5);
        let pi = stationary_distribution(&k).unwrap();
        let t = TargetSet::single(1, 1).unwrap();
        assert!((entry_flux(&k, &pi, &t).unwrap().exp() - 0.25).abs() < 1e-15);
        let all = TargetSet::new([0, 1], 1).unwrap();
        assert_eq!(entry_flux(&k, &pi, &all).unwrap_err(), Error::EmptyComplement);
        assert!(TargetSet::new([], 1).is_err());
        assert!(TargetSet::new([2], 1).is_err());
    }

    #[test]
    fn mean_hitting_geometric() {
        let k = two_state(0.5, 0.5);
        let t = TargetSet::single(1, 1).unwrap();
        assert_eq!(mean_hitting_time(&k, &t, 1).unwrap(), 0.0);
        assert!((mean_hitting_time(&k, &t, 0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ladder_matches_dense_solve() {
        // up-skip-free with arbitrary downward jumps
        let n = 6;
        let rows: Vec<Vec<f64>> = (0..=n)
            .map(|i| {
                let mut r = vec![0.0; n + 1];
                let up = if i < n { 0.2 / (i + 1) as f64 } else { 0.0 };
                if i < n {
                    r[i + 1] = up;
                }
                let w: Vec<f64> = (0..=i).map(|j| 1.0 + ((i * 7 + j * 3) % 5) as f64).collect();
                let tot: f64 = w.iter().sum();
                for j in 0..=i {
                    r[j] = (1.0 - up) * w[j] / tot;
                }
                r
            })
            .collect();
        let k = CountKernel::from_rows(rows).unwrap();
        let t = TargetSet::single(n, n).unwrap();
        for s in 0..n {
            let dense = mean_hitting_time_dense(&k, &t, s).unwrap();
            let ladder = log_ladder_mean(&k, s, n).unwrap().exp();
            // the dense solve loses ~cond·eps here; the ladder is the sharper side
            assert!((ladder / dense - 1.0).abs() < 1e-8, "{s}: {ladder} vs {dense}");
        }
        let mid = TargetSet::new([3, 5], n).unwrap();
        let dense = mean_hitting_time_dense(&k, &mid, 1).unwrap();
        assert!((mean_hitting_time(&k, &mid, 1).unwrap() / dense - 1.0).abs() < 1e-8);
        assert!((log_ladder_mean(&two_state(1e-9, 0.5), 0, 1).unwrap() - 1e9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn unreachable_target_is_singular() {
        let k = CountKernel::from_rows(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let t = TargetSet::single(1, 1).unwrap();
        assert_eq!(mean_hitting_time(&k, &t, 0).unwrap_err().name(), "SingularSolve");
    }

    #[test]
    fn block_moments_unit_block() {
        let k = two_state(0.3, 0.6);
        let pi = stationary_distribution(&k).unwrap();
        let t = TargetSet::single(1, 1).unwrap();
        let r = block_entry_moments(&k, &pi, &t, 1).unwrap();
        assert_eq!(r.second_factorial, 0.0);
        assert!((r.first_moment - entry_flux(&k, &pi, &t).unwrap().exp()).abs() < 1e-15);
        assert!(block_entry_moments(&k, &pi, &t, 0).is_err());
    }

    /// Enumerates every path of length `b` from stationarity.
    fn brute_block(k: &CountKernel, pi: &StationaryDistribution, t: &TargetSet, b: usize) -> (f64, f64, f64) {
        let m = k.states();
        let mut first = 0.0;
        let mut second = 0.0;
        let mut any = 0.0;
        let total = m.pow(b as u32 + 1);
        for code in 0..total {
            let mut c = code;
            let path: Vec<usize> = (0..=b)
                .map(|_| {
                    let s = c % m;
                    c /= m;
                    s
                })
                .collect();
            let mut p = pi.prob(path[0]);
            for w in path.windows(2) {
                p *= k.entry(w[0], w[1]);
            }
            let entries = path
                .windows(2)
                .filter(|w| !t.contains(w[0]) && t.contains(w[1]))
                .count() as f64;
            first += p * entries;
            second += p * entries * (entries - 1.0);
            if entries > 0.0 {
                any += p;
            }
        }
        (first, second, any)
    }

    #[test]
    fn block_moments_match_path_enumeration() {
        let k = CountKernel::from_rows(vec![
            vec![0.6, 0.4, 0.0],
            vec![0.3, 0.3, 0.4],
            vec![0.2, 0.5, 0.3],
        ])
        .unwrap();
        let pi = stationary_distribution(&k).unwrap();
        let t = TargetSet::single(2, 2).unwrap();
        for b in 1..=6 {
            let r = block_entry_moments(&k, &pi, &t, b).unwrap();
            let (first, second, any) = brute_block(&k, &pi, &t, b);
            assert!((r.first_moment - first).abs() < 1e-12, "b={b}");
            assert!((r.second_factorial - second).abs() < 1e-12, "b={b}");
            assert!((block_entry_probability(&k, &pi, &t, b) - any).abs() < 1e-12, "b={b}");
        }
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(total_variation(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(total_variation(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((total_variation(&[0.75, 0.25], &[0.5, 0.5]).unwrap() - 0.25).abs() < 1e-16);
        assert_eq!(total_variation(&[1.0], &[0.5, 0.5]).unwrap_err().name(), "LengthMismatch");
    }

    #[test]
    fn tv_contraction_trivial_cases() {
        let k = two_state(0.3, 0.6);
        let same = tv_contraction_check(&k, &[0.2, 0.8], &[0.2, 0.8], 5).unwrap();
        assert!(same.iter().all(|&x| x == 0.0));
        let zero = tv_contraction_check(&k, &[1.0, 0.0], &[0.0, 1.0], 0).unwrap();
        assert_eq!(zero, vec![1.0]);
    }

    #[test]
    fn hit_probability_two_state() {
        let k = two_state(0.5, 0.5);
        let t = TargetSet::single(1, 1).unwrap();
        assert!((hit_probability_within(&k, &t, 0, 3) - 0.875).abs() < 1e-15);
        assert_eq!(hit_probability_within(&k, &t, 1, 3), 1.0);
    }

    #[test]
    fn worst_case_tv_decays() {
        let k = two_state(0.3, 0.6);
        let pi = stationary_distribution(&k).unwrap();
        // second eigenvalue 1 − 0.3 − 0.6 = 0.1
        let a1 = worst_case_tv(&k, &pi, 1);
        let a2 = worst_case_tv(&k, &pi, 2);
        assert!((a2 / a1 - 0.1).abs() < 1e-12);
    }
}
