//! Combined clumsy-careless collector.
//!
//! Each step selects a type uniformly and sets it present with probability
//! `Q = 1 − α` (absent otherwise); then every present coupon is retained
//! independently with probability `S = 1 − β`. Completion is checked after
//! the thinning step.

use crate::chain::{
    entry_flux, stationary_distribution, CountKernel, FluxReport, StationaryDistribution, TargetSet,
};
use crate::logspace::{log1m_exp, log_add_exp, log_binomial_row};
use crate::qseries::{log_falling_ratio, log_q_pochhammer, Terms};
use crate::sampler::Outcome;
use crate::{Error, LogProb, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedParams {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl CombinedParams {
    pub fn new(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::DomainError("combined model needs n >= 1".into()));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::DomainError(format!("alpha must lie in [0,1), got {alpha}")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::DomainError(format!("beta must lie in (0,1), got {beta}")));
        }
        Ok(CombinedParams { n, alpha, beta })
    }

    /// Parameters from the refresh and survival probabilities.
    pub fn from_refresh(n: usize, refresh: f64, survival: f64) -> Result<Self> {
        Self::new(n, 1.0 - refresh, 1.0 - survival)
    }

    pub fn refresh(&self) -> f64 {
        1.0 - self.alpha
    }

    pub fn survival(&self) -> f64 {
        1.0 - self.beta
    }

    pub fn target(&self) -> TargetSet {
        TargetSet::single(self.n, self.n).expect("state n exists")
    }

    /// `log μ_asym = −log (S;S)_∞ + log(n!/n^n) + n log Q + n(n+1)/2 · log S`.
    pub fn log_asymptotic_flux(&self) -> Result<f64> {
        let nf = self.n as f64;
        Ok(-log_q_pochhammer(self.survival(), Terms::Infinite)? + log_falling_ratio(self.n, self.n)
            + nf * self.refresh().ln()
            + 0.5 * nf * (nf + 1.0) * self.survival().ln())
    }

    pub fn predicted_mean(&self) -> Result<f64> {
        Ok((-self.log_asymptotic_flux()?).exp())
    }

    /// `log(α (1 − α)^n)`, the flux of the clumsy collector with loss `α`.
    pub fn log_clumsy_flux(&self) -> f64 {
        self.alpha.ln() + self.n as f64 * self.refresh().ln()
    }
}

/// `log` pmf of `Bin(m, S) ⊕ Bernoulli(r)`, padded to `len`.
fn log_binomial_plus_bernoulli(m: usize, survival: f64, r: f64, len: usize) -> Vec<f64> {
    let base = log_binomial_row(m, survival);
    let (lr, l1r) = (r.ln(), (-r).ln_1p());
    let mut out = vec![f64::NEG_INFINITY; len];
    for (j, slot) in out.iter_mut().enumerate().take(m + 2) {
        let stay = if j <= m { base[j] + l1r } else { f64::NEG_INFINITY };
        let up = if j >= 1 { base[j - 1] + lr } else { f64::NEG_INFINITY };
        *slot = log_add_exp(stay, up);
    }
    out
}

/// Row `k`: `(k/n) [Bin(k−1, S) ⊕ Bern(QS)] + ((n−k)/n) [Bin(k, S) ⊕ Bern(QS)]`.
pub fn combined_kernel(params: &CombinedParams) -> Result<CountKernel> {
    let n = params.n;
    let nf = n as f64;
    let (s, qs) = (params.survival(), params.refresh() * params.survival());
    let log_rows = (0..=n)
        .map(|k| {
            let mut row = vec![f64::NEG_INFINITY; n + 1];
            if k > 0 {
                let w = (k as f64 / nf).ln();
                for (j, l) in log_binomial_plus_bernoulli(k - 1, s, qs, n + 1).into_iter().enumerate() {
                    row[j] = w + l;
                }
            }
            if k < n {
                let w = ((n - k) as f64 / nf).ln();
                for (j, l) in log_binomial_plus_bernoulli(k, s, qs, n + 1).into_iter().enumerate() {
                    row[j] = log_add_exp(row[j], w + l);
                }
            }
            row
        })
        .collect();
    CountKernel::from_log_rows(log_rows)
}

pub fn combined_stationary(params: &CombinedParams) -> Result<StationaryDistribution> {
    stationary_distribution(&combined_kernel(params)?)
}

/// Exact entry flux (cut sum and `ν(n)(1 − QS^n)`) against the lucky-climb
/// asymptotic.
pub fn combined_flux(params: &CombinedParams) -> Result<FluxReport> {
    let kernel = combined_kernel(params)?;
    let nu = stationary_distribution(&kernel)?;
    combined_flux_from(params, &kernel, &nu)
}

pub fn combined_flux_from(params: &CombinedParams, kernel: &CountKernel, nu: &StationaryDistribution) -> Result<FluxReport> {
    let nf = params.n as f64;
    let exact = entry_flux(kernel, nu, &params.target())?;
    let stay = params.refresh().ln() + nf * params.survival().ln();
    let top = nu.log_prob(params.n) + log1m_exp(stay);
    Ok(FluxReport::new(exact, LogProb(params.log_asymptotic_flux()?)).with_alternative("top_mass", LogProb(top)))
}

/// Completion time from the empty collection on a presence bitmask.
pub fn simulate_combined<R: Rng + ?Sized>(params: &CombinedParams, budget: u64, rng: &mut R) -> Outcome {
    let n = params.n;
    let (refresh, s) = (params.refresh(), params.survival());
    let mut held = vec![0u64; n.div_ceil(64)];
    for t in 1..=budget {
        let j = rng.random_range(0..n);
        let bit = 1u64 << (j % 64);
        if rng.random::<f64>() < refresh {
            held[j / 64] |= bit;
        } else {
            held[j / 64] &= !bit;
        }
        let mut count = 0usize;
        for word in held.iter_mut() {
            let mut bits = *word;
            while bits != 0 {
                let b = bits.trailing_zeros();
                bits &= bits - 1;
                if rng.random::<f64>() >= s {
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

/// `min(1, n S^t)`.
pub fn combined_mixing_bound(n: usize, survival: f64, t: u64) -> f64 {
    (n as f64 * (t as f64 * survival.ln()).exp()).min(1.0)
}

/// Coalescence time of copies started empty and full sharing the selected
/// type, the refresh bit and every thinning indicator, capped at `max_t`.
pub fn combined_coupling_time<R: Rng + ?Sized>(params: &CombinedParams, max_t: u64, rng: &mut R) -> Option<u64> {
    let n = params.n;
    let (refresh, s) = (params.refresh(), params.survival());
    let mut a = vec![false; n];
    let mut b = vec![true; n];
    for t in 1..=max_t {
        let j = rng.random_range(0..n);
        let v = rng.random::<f64>() < refresh;
        a[j] = v;
        b[j] = v;
        let mut same = true;
        for i in 0..n {
            if rng.random::<f64>() >= s {
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

/// Comparison of the lucky-climb asymptotic with the clumsy scale near
/// the `β → 0` boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCheck {
    pub log_asymptotic_flux: f64,
    pub log_clumsy_flux: f64,
    pub log_exact_flux: f64,
    /// `|log μ_asym − log α(1−α)^n|`.
    pub log_separation: f64,
}

pub fn boundary_singularity_check(params: &CombinedParams) -> Result<BoundaryCheck> {
    let log_asymptotic_flux = params.log_asymptotic_flux()?;
    let log_clumsy_flux = params.log_clumsy_flux();
    Ok(BoundaryCheck {
        log_asymptotic_flux,
        log_clumsy_flux,
        log_exact_flux: combined_flux(params)?.log_exact.ln(),
        log_separation: (log_asymptotic_flux - log_clumsy_flux).abs(),
    })
}
