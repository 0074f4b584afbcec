//! Log-space q-series: Pochhammer symbols, lucky-climb weights and the
//! stationary law of the limiting immigration-thinning chain.

use crate::logspace::{log1m_exp, log_add_exp, log_binomial};
use crate::{Error, Result};

/// Increments below this size end the infinite Pochhammer product.
pub const POCHHAMMER_CUTOFF: f64 = 1e-17;
/// Bernoulli parameters below this size end the limiting-law convolution.
pub const BERNOULLI_CUTOFF: f64 = 1e-18;

/// Number of factors in a Pochhammer product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terms {
    Finite(usize),
    Infinite,
}

/// `log (a; a)_m = Σ_{r=1}^m log(1 − a^r)`.
pub fn log_q_pochhammer(a: f64, terms: Terms) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::DomainError(format!("Pochhammer base must lie in (0,1), got {a}")));
    }
    let log_a = a.ln();
    let mut sum = 0.0;
    let mut r = 1usize;
    loop {
        if let Terms::Finite(m) = terms {
            if r > m {
                break;
            }
        }
        let inc = log1m_exp(r as f64 * log_a);
        if terms == Terms::Infinite && inc.abs() < POCHHAMMER_CUTOFF {
            break;
        }
        sum += inc;
        r += 1;
    }
    Ok(sum)
}

/// `log((n)_k / n^k)` with the falling factorial summed as logs.
pub fn log_falling_ratio(n: usize, k: usize) -> f64 {
    let nf = n as f64;
    (0..k).map(|j| ((n - j) as f64 / nf).ln()).sum()
}

fn check_weight_args(n: usize, k: usize, survival: f64, refresh: f64) -> Result<()> {
    if k > n {
        return Err(Error::DomainError(format!("lucky-climb level {k} exceeds n = {n}")));
    }
    if !(survival > 0.0 && survival < 1.0) {
        return Err(Error::DomainError(format!("survival must lie in (0,1), got {survival}")));
    }
    if !(refresh > 0.0 && refresh <= 1.0) {
        return Err(Error::DomainError(format!("refresh must lie in (0,1], got {refresh}")));
    }
    Ok(())
}

/// Log probability of the strictly increasing path `0 → 1 → … → k`:
/// `log[(n)_k / n^k] + k log Q + k(k+1)/2 · log S`.
pub fn log_lucky_weight(n: usize, k: usize, survival: f64, refresh: f64) -> Result<f64> {
    check_weight_args(n, k, survival, refresh)?;
    let kf = k as f64;
    Ok(log_falling_ratio(n, k) + kf * refresh.ln() + 0.5 * kf * (kf + 1.0) * survival.ln())
}

/// All lucky-climb weights `w_{n,0..=n}` for one parameter pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LuckyWeightTable {
    pub n: usize,
    pub survival: f64,
    pub refresh: f64,
    pub log_w: Vec<f64>,
}

impl LuckyWeightTable {
    /// Builds the table by the one-step recursion `w_{k+1} = w_k u_k` with
    /// `u_k = ((n − k)/n) Q S^{k+1}`.
    pub fn new(n: usize, survival: f64, refresh: f64) -> Result<Self> {
        check_weight_args(n, 0, survival, refresh)?;
        let (ls, lq, nf) = (survival.ln(), refresh.ln(), n as f64);
        let mut log_w = Vec::with_capacity(n + 1);
        log_w.push(0.0);
        for k in 0..n {
            let step = ((n - k) as f64 / nf).ln() + lq + (k + 1) as f64 * ls;
            log_w.push(log_w[k] + step);
        }
        Ok(LuckyWeightTable {
            n,
            survival,
            refresh,
            log_w,
        })
    }

    /// `log w_{n,n} = log[n!/n^n] + n log Q + n(n+1)/2 · log S`.
    pub fn log_top(&self) -> f64 {
        self.log_w[self.n]
    }
}

fn check_limit_args(survival: f64, refresh: f64) -> Result<()> {
    if !(survival > 0.0 && survival < 1.0) {
        return Err(Error::DomainError(format!("survival must lie in (0,1), got {survival}")));
    }
    if !(0.0..=1.0).contains(&refresh) {
        return Err(Error::DomainError(format!("refresh must lie in [0,1], got {refresh}")));
    }
    Ok(())
}

/// Log masses `log π(0..=kmax)` of `Σ_{r>=1} B_r` with independent
/// `B_r ~ Bernoulli(Q S^r)`, by exact convolution.
///
/// This is the stationary law of `Y' = Bin(Y, S) + Bernoulli(QS)`; with
/// `Q = 1` it is the law of `Y' = Bin(Y + 1, S)`. Mass above `kmax` is
/// dropped, so the returned masses sum to at most one.
pub fn infinite_chain_log_stationary(survival: f64, refresh: f64, kmax: usize) -> Result<Vec<f64>> {
    check_limit_args(survival, refresh)?;
    let mut log_pi = vec![f64::NEG_INFINITY; kmax + 1];
    log_pi[0] = 0.0;
    if refresh == 0.0 {
        return Ok(log_pi);
    }
    let (lq, ls) = (refresh.ln(), survival.ln());
    let mut r = 1usize;
    loop {
        let log_b = lq + r as f64 * ls;
        if log_b.exp() < BERNOULLI_CUTOFF {
            break;
        }
        let log_nb = log1m_exp(log_b);
        let top = r.min(kmax);
        for k in (0..=top).rev() {
            let stay = log_pi[k] + log_nb;
            log_pi[k] = if k == 0 { stay } else { log_add_exp(stay, log_pi[k - 1] + log_b) };
        }
        r += 1;
    }
    Ok(log_pi)
}

/// Linear version of [`infinite_chain_log_stationary`].
pub fn infinite_chain_stationary(survival: f64, refresh: f64, kmax: usize) -> Result<Vec<f64>> {
    Ok(infinite_chain_log_stationary(survival, refresh, kmax)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// `π(k)` from the alternating q-binomial expansion
/// `Σ_{m>=k} (−1)^{m−k} C(m,k) Q^m S^{m(m+1)/2} / (S;S)_m`.
///
/// Independent of the convolution route; loses accuracy to cancellation
/// when `Q` is close to one and `S` close to one.
pub fn alternating_series_stationary(survival: f64, refresh: f64, k: usize) -> Result<f64> {
    check_limit_args(survival, refresh)?;
    if refresh == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    let (lq, ls) = (refresh.ln(), survival.ln());
    let mut log_poch = log_q_pochhammer(survival, Terms::Finite(k))?;
    let mut sum = 0.0;
    let mut first_mag = None;
    for m in k.. {
        if m > k {
            log_poch += log1m_exp(m as f64 * ls);
        }
        let mf = m as f64;
        let log_mag = log_binomial(m as u64, k as u64) + mf * lq + 0.5 * mf * (mf + 1.0) * ls - log_poch;
        let first = *first_mag.get_or_insert(log_mag);
        let sign = if (m - k).is_multiple_of(2) { 1.0 } else { -1.0 };
        sum += sign * log_mag.exp();
        if log_mag < first - 80.0 || log_mag < -745.0 {
            break;
        }
    }
    Ok(sum)
}

/// `log Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::DomainError(format!("log-gamma needs x > 0, got {x}")));
    }
    Ok(statrs::function::gamma::ln_gamma(x))
}
