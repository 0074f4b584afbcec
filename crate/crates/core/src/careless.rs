//! Careless collector, post-loss convention.
//!
//! Each step adds a uniformly chosen type to the collection, then every held
//! coupon is lost independently with probability `p`. Completion is checked
//! after the loss step. The held count `K_t` is a Markov chain whose upward
//! jumps have size at most one, and completion is its entry into `{n}`.

use crate::chain::{
    entry_flux, stationary_distribution, CountKernel, FluxReport, StationaryDistribution, TargetSet,
};
use crate::logspace::{log1m_exp, log_add_exp, log_binomial_row};
use crate::qseries::{infinite_chain_stationary, log_falling_ratio, log_q_pochhammer, LuckyWeightTable, Terms};
use crate::sampler::Outcome;
use crate::{Error, LogProb, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Predicted mean above which simulation is flagged as impractical.
pub const SIMULATION_WARN_MEAN: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarelessParams {
    pub n: usize,
    pub p: f64,
}

impl CarelessParams {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::DomainError("careless model needs n >= 1".into()));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::DomainError(format!("loss probability must lie in (0,1), got {p}")));
        }
        Ok(CarelessParams { n, p })
    }

    pub fn from_q(n: usize, q: f64) -> Result<Self> {
        Self::new(n, 1.0 - q)
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    /// Completion target `{n}` in held-count coordinates.
    pub fn target(&self) -> TargetSet {
        TargetSet::single(self.n, self.n).expect("state n exists")
    }

    /// `q / (p + q/n)`, the stationary mean of the held count.
    pub fn stationary_mean(&self) -> f64 {
        self.q() / (self.p + self.q() / self.n as f64)
    }

    /// `log μ_asym = −log (q;q)_∞ + log(n!/n^n) + n(n+1)/2 · log q`.
    pub fn log_asymptotic_flux(&self) -> Result<f64> {
        let nf = self.n as f64;
        Ok(-log_q_pochhammer(self.q(), Terms::Infinite)? + log_falling_ratio(self.n, self.n)
            + 0.5 * nf * (nf + 1.0) * self.q().ln())
    }

    /// `1/μ_asym`, the predicted mean completion time.
    pub fn predicted_mean(&self) -> Result<f64> {
        Ok((-self.log_asymptotic_flux()?).exp())
    }
}

/// Row `k`: `(k/n) Bin(k, q) + ((n − k)/n) Bin(k + 1, q)`.
pub fn careless_kernel(params: &CarelessParams) -> Result<CountKernel> {
    let n = params.n;
    let q = params.q();
    let nf = n as f64;
    let mut log_rows = Vec::with_capacity(n + 1);
    let mut prev = log_binomial_row(0, q);
    for k in 0..=n {
        let next = if k < n { log_binomial_row(k + 1, q) } else { Vec::new() };
        let mut row = vec![f64::NEG_INFINITY; n + 1];
        if k > 0 {
            let w = (k as f64 / nf).ln();
            for (j, l) in prev.iter().enumerate() {
                row[j] = w + l;
            }
        }
        if k < n {
            let w = ((n - k) as f64 / nf).ln();
            for (j, l) in next.iter().enumerate() {
                row[j] = log_add_exp(row[j], w + l);
            }
        }
        log_rows.push(row);
        prev = next;
    }
    CountKernel::from_log_rows(log_rows)
}

pub fn careless_stationary(params: &CarelessParams) -> Result<StationaryDistribution> {
    stationary_distribution(&careless_kernel(params)?)
}

/// Entry flux into completion, computed three ways: the cut sum
/// `Σ_{x<n} ν(x) P(x, n)`, `ν(n)(1 − q^n)` and `ν(n − 1) q^n / n`.
pub fn careless_flux(params: &CarelessParams) -> Result<FluxReport> {
    let kernel = careless_kernel(params)?;
    let nu = stationary_distribution(&kernel)?;
    careless_flux_from(params, &kernel, &nu)
}

pub fn careless_flux_from(params: &CarelessParams, kernel: &CountKernel, nu: &StationaryDistribution) -> Result<FluxReport> {
    let n = params.n;
    let (nf, lq) = (n as f64, params.q().ln());
    let exact = entry_flux(kernel, nu, &params.target())?;
    let top = nu.log_prob(n) + log1m_exp(nf * lq);
    let below = nu.log_prob(n - 1) + nf * lq - nf.ln();
    Ok(FluxReport::new(exact, LogProb(params.log_asymptotic_flux()?))
        .with_alternative("top_mass", LogProb(top))
        .with_alternative("penultimate_mass", LogProb(below)))
}

/// `a_{n,k} = ν_n(k) / w_{n,k}` over `k_min..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRatioProfile {
    pub k_range: Vec<usize>,
    pub log_a: Vec<f64>,
    pub a: Vec<f64>,
    /// `1 / (q;q)_∞`.
    pub limit_constant: f64,
}

impl TailRatioProfile {
    fn index(&self, k: usize) -> Option<usize> {
        self.k_range.iter().position(|&x| x == k)
    }

    /// `max_{k >= m} |log a_{n,k} − log a_{n,m}|`.
    pub fn flatness_from(&self, m: usize) -> Option<f64> {
        let i = self.index(m)?;
        Some(self.log_a[i..].iter().map(|l| (l - self.log_a[i]).abs()).fold(0.0, f64::max))
    }

    /// `a_{n,n} (q;q)_∞`, which tends to one.
    pub fn top_ratio(&self) -> f64 {
        self.a.last().copied().unwrap_or(f64::NAN) / self.limit_constant
    }

    pub fn min(&self) -> f64 {
        self.a.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.a.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Start of the flatness diagnostic, `floor(n^{1/4})`.
pub fn flatness_start(n: usize) -> usize {
    (n as f64).powf(0.25).floor() as usize
}

pub fn tail_ratio_profile(params: &CarelessParams, k_min: usize) -> Result<TailRatioProfile> {
    let nu = careless_stationary(params)?;
    tail_ratio_profile_from(params, &nu, k_min)
}

pub fn tail_ratio_profile_from(params: &CarelessParams, nu: &StationaryDistribution, k_min: usize) -> Result<TailRatioProfile> {
    if k_min > params.n {
        return Err(Error::DomainError(format!("k_min {k_min} exceeds n = {}", params.n)));
    }
    let w = LuckyWeightTable::new(params.n, params.q(), 1.0)?;
    let k_range: Vec<usize> = (k_min..=params.n).collect();
    let log_a: Vec<f64> = k_range.iter().map(|&k| nu.log_prob(k) - w.log_w[k]).collect();
    Ok(TailRatioProfile {
        a: log_a.iter().map(|l| l.exp()).collect(),
        k_range,
        log_a,
        limit_constant: (-log_q_pochhammer(params.q(), Terms::Infinite)?).exp(),
    })
}

/// `max_{j <= j_max} |ν_n(j) − π(j)|` against the limiting chain.
pub fn local_convergence_check(params: &CarelessParams, j_max: usize) -> Result<f64> {
    let nu = careless_stationary(params)?;
    let pi = infinite_chain_stationary(params.q(), 1.0, j_max)?;
    Ok((0..=j_max.min(params.n))
        .map(|j| (nu.prob(j) - pi[j]).abs())
        .fold(0.0, f64::max))
}

/// Completion time from the empty collection on a presence bitmask.
pub fn simulate_careless<R: Rng + ?Sized>(params: &CarelessParams, budget: u64, rng: &mut R) -> Outcome {
    let n = params.n;
    let q = params.q();
    let mut held = vec![0u64; n.div_ceil(64)];
    for t in 1..=budget {
        let j = rng.random_range(0..n);
        held[j / 64] |= 1 << (j % 64);
        let mut count = 0usize;
        for word in held.iter_mut() {
            let mut bits = *word;
            while bits != 0 {
                let b = bits.trailing_zeros();
                bits &= bits - 1;
                if rng.random::<f64>() >= q {
                    *word &= !(1u64 << b);
                }
            }
            count += word.count_ones() as usize;
        }
        if count == n {
            return Outcome::Completed(t);
        }
    }
    Outcome::Censored(budget)
}

/// True against marginal-heuristic completion scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalComparison {
    /// `−log μ_asym`.
    pub log_true_scale: f64,
    /// `n log(1/q_*)` with `q_* = q/(q + np)`.
    pub log_marginal_scale: f64,
    pub gap: f64,
}

pub fn marginal_heuristic_comparison(params: &CarelessParams) -> Result<MarginalComparison> {
    let (nf, p, q) = (params.n as f64, params.p, params.q());
    let log_true_scale = -params.log_asymptotic_flux()?;
    let log_marginal_scale = nf * ((q + nf * p) / q).ln();
    Ok(MarginalComparison {
        log_true_scale,
        log_marginal_scale,
        gap: log_true_scale - log_marginal_scale,
    })
}

/// `min(1, n q^t)`.
pub fn careless_mixing_bound(n: usize, q: f64, t: u64) -> f64 {
    (n as f64 * (t as f64 * q.ln()).exp()).min(1.0)
}

/// Coalescence time of copies started empty and full that share the
/// selected type and every loss indicator, capped at `max_t`.
pub fn careless_coupling_time<R: Rng + ?Sized>(params: &CarelessParams, max_t: u64, rng: &mut R) -> Option<u64> {
    let n = params.n;
    let q = params.q();
    let mut a = vec![false; n];
    let mut b = vec![true; n];
    for t in 1..=max_t {
        let j = rng.random_range(0..n);
        a[j] = true;
        b[j] = true;
        let mut same = true;
        for i in 0..n {
            if rng.random::<f64>() >= q {
                a[i] = false;
                b[i] = false;
            }
            same &= a[i] == b[i];
        }
        if same {
            return Some(t);
        }
    }
    None
}
