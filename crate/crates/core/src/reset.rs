//! Reset-button collector.
//!
//! Each draw is the reset coupon with probability `ρ` (the collection is
//! emptied) or standard coupon `i` with probability `p_i`, `Σ p_i = q = 1 − ρ`.
//! Completion is the first time all `n` standard coupons are held. The empty
//! collection is a regeneration point, so everything reduces to the
//! success probability `s = E q^C` of one reset-free excursion, where `C` is
//! the classical collection time under the conditional weights `p_i / q`.

use crate::qseries::log_gamma;
use crate::sampler::Outcome;
use crate::{Error, LogProb, Result};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Largest `n` for the `2^n`-term inclusion-exclusion.
pub const SUBSET_LIMIT: usize = 24;
/// Largest `n` served by the regenerative sampler.
pub const REGENERATIVE_LIMIT: usize = 10_000;
/// Smallest factor denominator accepted by the generating functions.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetParams {
    pub n: usize,
    pub rho: f64,
    /// Standard-coupon probabilities `p_1..p_n`; `None` means `q/n` each.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl ResetParams {
    pub fn equal(n: usize, rho: f64) -> Result<Self> {
        let p = ResetParams { n, rho, weights: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_weights(rho: f64, weights: Vec<f64>) -> Result<Self> {
        let p = ResetParams {
            n: weights.len(),
            rho,
            weights: Some(weights),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::DomainError("reset model needs n >= 1".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::DomainError(format!("rho must lie in (0,1), got {}", self.rho)));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.n {
                return Err(Error::LengthMismatch {
                    left: w.len(),
                    right: self.n,
                });
            }
            let sum: f64 = w.iter().sum();
            if w.iter().any(|&x| !(x > 0.0)) || (sum - self.q()).abs() > 1e-12 {
                return Err(Error::DomainError(format!(
                    "weights must be positive and sum to 1 - rho = {}, got {sum}",
                    self.q()
                )));
            }
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        1.0 - self.rho
    }

    /// `a = nρ/q`, the shape parameter of the equal-weight gamma ratio.
    pub fn a(&self) -> f64 {
        self.n as f64 * self.rho / self.q()
    }

    pub fn is_equal(&self) -> bool {
        self.weights.is_none()
    }

    /// Conditional weights `π_i = p_i / q`.
    pub fn conditional_weights(&self) -> Vec<f64> {
        match &self.weights {
            Some(w) => w.iter().map(|p| p / self.q()).collect(),
            None => vec![1.0 / self.n as f64; self.n],
        }
    }
}

/// What [`uniform_pgf`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PgfMode {
    /// `φ_n(x) = E x^C`.
    Value,
    /// `x φ_n'(x) / φ_n(x)`.
    LogDerivative,
}

fn check_x(x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::DomainError(format!("generating-function argument must be >= 0, got {x}")));
    }
    Ok(())
}

/// Generating function of the equal-weight collection time:
/// `φ_n(x) = ∏_{j=1}^n (j/n) x / (1 − (1 − j/n) x)`.
pub fn uniform_pgf(n: usize, x: f64, mode: PgfMode) -> Result<f64> {
    check_x(x)?;
    let nf = n as f64;
    let mut log_value = 0.0;
    let mut log_derivative = 0.0;
    for j in 1..=n {
        let frac = j as f64 / nf;
        let den = 1.0 - (1.0 - frac) * x;
        if den <= 0.0 {
            return Err(Error::PoleError { x, denominator: den });
        }
        log_value += (frac * x).ln() - den.ln();
        log_derivative += 1.0 / den;
    }
    Ok(match mode {
        PgfMode::Value => log_value.exp(),
        PgfMode::LogDerivative => log_derivative,
    })
}

/// `log φ_n(x)` for the equal-weight collection time.
pub fn log_uniform_pgf(n: usize, x: f64) -> Result<f64> {
    check_x(x)?;
    let nf = n as f64;
    let mut acc = 0.0;
    for j in 1..=n {
        let frac = j as f64 / nf;
        let den = 1.0 - (1.0 - frac) * x;
        if den <= 0.0 {
            return Err(Error::PoleError { x, denominator: den });
        }
        acc += (frac * x).ln() - den.ln();
    }
    Ok(acc)
}

/// `φ(x) = 1 − (1 − x) Σ_{∅≠J} (−1)^{|J|+1} / (1 − x(1 − π_J))` for
/// arbitrary conditional weights.
pub fn weighted_pgf(weights: &[f64], x: f64) -> Result<f64> {
    check_x(x)?;
    let n = weights.len();
    if n > SUBSET_LIMIT {
        return Err(Error::SubsetLimit { n, limit: SUBSET_LIMIT });
    }
    let mut sum = 0.0;
    for mask in 1u32..(1u32 << n) {
        let pi_j: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| weights[i]).sum();
        let den = 1.0 - x * (1.0 - pi_j);
        if den <= 0.0 {
            return Err(Error::PoleError { x, denominator: den });
        }
        let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign / den;
    }
    Ok(1.0 - (1.0 - x) * sum)
}

/// `log s` for equal weights, `log Γ(n+1) + log Γ(1+a) − log Γ(n+1+a)`.
pub fn log_success_probability_gamma(n: usize, rho: f64) -> Result<f64> {
    let a = n as f64 * rho / (1.0 - rho);
    let nf = n as f64;
    Ok(log_gamma(nf + 1.0)? + log_gamma(1.0 + a)? - log_gamma(nf + 1.0 + a)?)
}

/// `log s`. Equal weights use the gamma ratio; explicit weights use
/// inclusion-exclusion.
pub fn log_success_probability(params: &ResetParams) -> Result<f64> {
    params.validate()?;
    match &params.weights {
        None => log_success_probability_gamma(params.n, params.rho),
        Some(_) => {
            if params.n > SUBSET_LIMIT {
                return Err(Error::SubsetLimit {
                    n: params.n,
                    limit: SUBSET_LIMIT,
                });
            }
            Ok(weighted_pgf(&params.conditional_weights(), params.q())?.ln())
        }
    }
}

/// Success probability `s` of a reset-free excursion.
pub fn success_probability(params: &ResetParams) -> Result<f64> {
    Ok(log_success_probability(params)?.exp())
}

/// Monte Carlo estimate of `s` with its standard error, for weight vectors
/// too long for inclusion-exclusion.
pub fn success_probability_mc<R: Rng + ?Sized>(params: &ResetParams, excursions: usize, rng: &mut R) -> Result<(f64, f64)> {
    params.validate()?;
    if excursions == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let dist = draw_distribution(params)?;
    let mut held = vec![false; params.n];
    let mut wins = 0usize;
    for _ in 0..excursions {
        held.iter_mut().for_each(|h| *h = false);
        let mut count = 0;
        loop {
            let d = dist.sample(rng);
            if d == 0 {
                break;
            }
            if !held[d - 1] {
                held[d - 1] = true;
                count += 1;
                if count == params.n {
                    wins += 1;
                    break;
                }
            }
        }
    }
    let m = excursions as f64;
    let s = wins as f64 / m;
    Ok((s, (s * (1.0 - s) / m).sqrt()))
}

fn log_phi(params: &ResetParams, x: f64) -> Result<f64> {
    match &params.weights {
        None => log_uniform_pgf(params.n, x),
        Some(_) => {
            let v = weighted_pgf(&params.conditional_weights(), x)?;
            if v <= 0.0 {
                return Err(Error::PoleError { x, denominator: v });
            }
            Ok(v.ln())
        }
    }
}

/// `F(z) = E z^T = (1 − qz) φ(qz) / (1 − z + ρ z φ(qz))`.
pub fn reset_pgf(params: &ResetParams, z: f64) -> Result<f64> {
    params.validate()?;
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::DomainError(format!("PGF argument must be >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let x = params.q() * z;
    if 1.0 - x < DENOMINATOR_FLOOR {
        return Err(Error::DenominatorNonpositive { z, denominator: 1.0 - x });
    }
    let phi = match log_phi(params, x) {
        Ok(l) => l.exp(),
        Err(Error::PoleError { denominator, .. }) => return Err(Error::DenominatorNonpositive { z, denominator }),
        Err(e) => return Err(e),
    };
    let den = 1.0 - z + params.rho * z * phi;
    if den <= 0.0 {
        return Err(Error::DenominatorNonpositive { z, denominator: den });
    }
    Ok((1.0 - x) * phi / den)
}

/// `E T = (1 − s)/(ρ s)`.
pub fn exact_mean(params: &ResetParams) -> Result<f64> {
    let ls = log_success_probability(params)?;
    Ok(-ls.exp_m1() * (-ls).exp() / params.rho)
}

/// Equal-weight mean in beta form, `(1/ρ)(1/(nρ B(n, a)) − 1)`.
pub fn beta_mean(params: &ResetParams) -> Result<f64> {
    params.validate()?;
    if !params.is_equal() {
        return Err(Error::DomainError("the beta form needs equal weights".into()));
    }
    let (n, rho, a) = (params.n as f64, params.rho, params.a());
    let log_beta = log_gamma(n)? + log_gamma(a)? - log_gamma(n + a)?;
    Ok(((-(n * rho).ln() - log_beta).exp() - 1.0) / rho)
}

/// Closed-form summary of one parameter set.
#[derive(Debug, Clone)]
pub struct ResetSolution {
    pub params: ResetParams,
    pub s: f64,
    pub log_s: f64,
    pub mean: f64,
}

impl ResetSolution {
    pub fn new(params: ResetParams) -> Result<Self> {
        let log_s = log_success_probability(&params)?;
        let mean = exact_mean(&params)?;
        Ok(ResetSolution {
            s: log_s.exp(),
            log_s,
            mean,
            params,
        })
    }

    pub fn pgf(&self, z: f64) -> Result<f64> {
        reset_pgf(&self.params, z)
    }
}

/// Which simulator [`simulate_reset`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    /// Draw coupons one at a time.
    Direct,
    /// Geometric number of failed excursions, each of length `K + 1`, then
    /// one successful excursion of length `C`.
    Regenerative,
}

fn draw_distribution(params: &ResetParams) -> Result<WeightedIndex<f64>> {
    let mut w = vec![params.rho];
    match &params.weights {
        Some(ws) => w.extend_from_slice(ws),
        None => w.extend(std::iter::repeat_n(params.q() / params.n as f64, params.n)),
    }
    WeightedIndex::new(w).map_err(|e| Error::DomainError(e.to_string()))
}

/// Completion time `T` (draws, counting resets).
pub fn simulate_reset<R: Rng + ?Sized>(params: &ResetParams, mode: ResetMode, budget: u64, rng: &mut R) -> Result<Outcome> {
    params.validate()?;
    match mode {
        ResetMode::Direct => Ok(simulate_direct(params, budget, rng)),
        ResetMode::Regenerative => simulate_regenerative(params, budget, rng),
    }
}

fn simulate_direct<R: Rng + ?Sized>(params: &ResetParams, budget: u64, rng: &mut R) -> Outcome {
    let n = params.n;
    // a coupon is held when its stamp equals the current epoch
    let mut stamp = vec![0u64; n];
    let mut epoch = 1u64;
    let mut count = 0usize;
    let weighted = match &params.weights {
        Some(_) => draw_distribution(params).ok(),
        None => None,
    };
    let q = params.q();
    for t in 1..=budget {
        let coupon = match &weighted {
            Some(d) => d.sample(rng).checked_sub(1),
            None => {
                let u: f64 = rng.random();
                if u < params.rho {
                    None
                } else {
                    Some((((u - params.rho) / q) * n as f64).min((n - 1) as f64) as usize)
                }
            }
        };
        match coupon {
            None => {
                epoch += 1;
                count = 0;
            }
            Some(i) => {
                if stamp[i] != epoch {
                    stamp[i] = epoch;
                    count += 1;
                    if count == n {
                        return Outcome::Completed(t);
                    }
                }
            }
        }
    }
    Outcome::Censored(budget)
}

/// Failures before the first success, by inversion; saturates at `u64::MAX`.
fn geometric0<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    let g = (u.ln() / (-p).ln_1p()).floor();
    if g >= u64::MAX as f64 {
        u64::MAX
    } else {
        g as u64
    }
}

/// Geometric variate on `{1, 2, ...}` with success probability `p`.
fn geometric1<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    geometric0(p, rng).saturating_add(1)
}

/// Classical collection time with stage `k` geometric with success
/// probability `1 − (k/n) x`; `x = 1` is the plain collector, `x = q` the
/// law of `C` tilted by `q^C`.
fn tilted_collection_time<R: Rng + ?Sized>(n: usize, x: f64, rng: &mut R) -> u64 {
    let nf = n as f64;
    (0..n).map(|k| geometric1(1.0 - (k as f64 / nf) * x, rng)).sum()
}

fn simulate_regenerative<R: Rng + ?Sized>(params: &ResetParams, budget: u64, rng: &mut R) -> Result<Outcome> {
    if !params.is_equal() || params.n > REGENERATIVE_LIMIT {
        return Err(Error::DomainError(format!(
            "regenerative sampling needs equal weights and n <= {REGENERATIVE_LIMIT}"
        )));
    }
    let (n, q) = (params.n, params.q());
    let s = log_success_probability(params)?.exp();
    let failures = if s <= 0.0 { u64::MAX } else { geometric0(s, rng) };
    if failures >= budget {
        return Ok(Outcome::Censored(budget));
    }
    let ln_q = q.ln();
    let mut t = 0u64;
    for _ in 0..failures {
        // C given failure: propose from the classical law, accept w.p. 1 − q^c
        let c = loop {
            let c = tilted_collection_time(n, 1.0, rng);
            let fail = -(c as f64 * ln_q).exp_m1();
            if rng.random::<f64>() < fail {
                break c;
            }
        };
        // K | K < c, truncated geometric with P(K >= k) = q^k
        let span = -(c as f64 * ln_q).exp_m1();
        let u: f64 = rng.random();
        let k = (((-u * span).ln_1p()) / ln_q).floor().clamp(0.0, (c - 1) as f64) as u64;
        t += k + 1;
        if t >= budget {
            return Ok(Outcome::Censored(budget));
        }
    }
    t += tilted_collection_time(n, q, rng);
    Ok(if t > budget {
        Outcome::Censored(budget)
    } else {
        Outcome::Completed(t)
    })
}

/// Asymptotic regimes for the reset probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `ρ` fixed: `s ~ √(2πρn) (q ρ^{ρ/q})^n`.
    FixedRho,
    /// `ρ = λ/n`: `s ~ Γ(1+a) n^{−a}`.
    LambdaOverN,
    /// `ρ = 1/(n+1)`: `ρ s = (n+1)^{−2}` exactly.
    EqualReset,
}

/// Largest `nρ` accepted as a `λ/n` regime.
pub const LAMBDA_MAX: f64 = 100.0;

/// `log(ρ s_asym)` for the requested regime.
pub fn regime_normalization(n: usize, rho: f64, regime: Regime) -> Result<LogProb> {
    ResetParams::equal(n, rho)?;
    let (nf, q) = (n as f64, 1.0 - rho);
    let log_s = match regime {
        Regime::FixedRho => {
            if nf * rho < 1.0 {
                return Err(Error::RegimeMismatch(format!("fixed rho needs n rho >= 1, got {}", nf * rho)));
            }
            0.5 * (2.0 * std::f64::consts::PI * rho * nf).ln() + nf * (q.ln() + rho / q * rho.ln())
        }
        Regime::LambdaOverN => {
            if nf * rho > LAMBDA_MAX {
                return Err(Error::RegimeMismatch(format!(
                    "lambda/n regime needs n rho <= {LAMBDA_MAX}, got {}",
                    nf * rho
                )));
            }
            let a = nf * rho / q;
            log_gamma(1.0 + a)? - a * nf.ln()
        }
        Regime::EqualReset => {
            if (rho * (nf + 1.0) - 1.0).abs() > 1e-12 {
                return Err(Error::RegimeMismatch(format!("equal reset needs rho = 1/(n+1), got {rho}")));
            }
            -(nf + 1.0).ln()
        }
    };
    Ok(LogProb(rho.ln() + log_s))
}

/// `E e^{aρsT}`, the generating function at `z = e^{aρs}`.
pub fn positive_exponential_moment(params: &ResetParams, a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::DomainError(format!("exponent must lie in (0,1), got {a}")));
    }
    let s = success_probability(params)?;
    reset_pgf(params, (a * params.rho * s).exp())
}

/// Gumbel distribution function `exp(−e^{−y})`.
pub fn gumbel_reference(y: f64) -> f64 {
    (-(-y).exp()).exp()
}

/// `ρ q φ'(q) = ρ s · [x φ'/φ]_{x=q}`, which must vanish for the
/// rare-success limit law.
pub fn rare_success_hypothesis(params: &ResetParams) -> Result<f64> {
    if !params.is_equal() {
        return Err(Error::DomainError("hypothesis check needs equal weights".into()));
    }
    let s = success_probability(params)?;
    Ok(params.rho * s * uniform_pgf(params.n, params.q(), PgfMode::LogDerivative)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sample_rng;

    #[test]
    fn uniform_pgf_examples() {
        assert_eq!(uniform_pgf(4, 0.0, PgfMode::Value).unwrap(), 0.0);
        let v = uniform_pgf(2, 2.0 / 3.0, PgfMode::Value).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        let d = uniform_pgf(2, 2.0 / 3.0, PgfMode::LogDerivative).unwrap();
        assert!((d - 2.5).abs() < 1e-14);
        assert_eq!(uniform_pgf(2, 2.5, PgfMode::Value).unwrap_err().name(), "PoleError");
    }

    #[test]
    fn success_probability_examples() {
        let s = success_probability(&ResetParams::equal(3, 0.25).unwrap()).unwrap();
        assert!((s - 0.25).abs() < 1e-12);
        let s = success_probability(&ResetParams::equal(2, 1.0 / 3.0).unwrap()).unwrap();
        assert!((s - 1.0 / 3.0).abs() < 1e-12);
        let w = ResetParams::with_weights(1.0 / 3.0, vec![1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((success_probability(&w).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let long = ResetParams::with_weights(0.5, vec![0.5 / 25.0; 25]).unwrap();
        assert_eq!(success_probability(&long).unwrap_err().name(), "SubsetLimit");
    }

    #[test]
    fn gamma_and_inclusion_exclusion_agree() {
        for n in [1, 3, 7, 12] {
            for rho in [0.05, 0.3, 0.8] {
                let eq = ResetParams::equal(n, rho).unwrap();
                let w = ResetParams::with_weights(rho, vec![(1.0 - rho) / n as f64; n]).unwrap();
                let a = success_probability(&eq).unwrap();
                let b = success_probability(&w).unwrap();
                assert!((a - b).abs() < 1e-9 * a.max(1e-300) || (a - b).abs() < 1e-12, "n={n} rho={rho}");
            }
        }
    }

    #[test]
    fn pgf_boundary_values() {
        let p = ResetParams::equal(5, 0.2).unwrap();
        assert!((reset_pgf(&p, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(reset_pgf(&p, 0.0).unwrap(), 0.0);
        assert_eq!(reset_pgf(&p, 1.0 / 0.8).unwrap_err().name(), "DenominatorNonpositive");
    }

    #[test]
    fn mean_examples() {
        let m = exact_mean(&ResetParams::equal(3, 0.25).unwrap()).unwrap();
        assert!((m - 12.0).abs() < 1e-9);
        let m = exact_mean(&ResetParams::equal(2, 1.0 / 3.0).unwrap()).unwrap();
        assert!((m - 6.0).abs() < 1e-9);
        let m = exact_mean(&ResetParams::equal(2, 1e-6).unwrap()).unwrap();
        assert!((m - 3.0).abs() < 1e-4);
        let p = ResetParams::equal(9, 0.17).unwrap();
        let (a, b) = (exact_mean(&p).unwrap(), beta_mean(&p).unwrap());
        assert!(((a - b) / a).abs() < 1e-9);
    }

    #[test]
    fn regime_examples() {
        let e = regime_normalization(3, 0.25, Regime::EqualReset).unwrap();
        assert!((e.exp() - 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(regime_normalization(3, 0.3, Regime::EqualReset).unwrap_err().name(), "RegimeMismatch");
        let f = regime_normalization(200, 0.3, Regime::FixedRho).unwrap();
        let exact = 0.3f64.ln() + log_success_probability_gamma(200, 0.3).unwrap();
        let ratio = (f.ln() - exact).exp();
        assert!((0.98..=1.02).contains(&ratio), "{ratio}");
        let mut prev = f64::INFINITY;
        for n in [10, 100, 1000, 10000] {
            let rho = 1.0 / (n as f64 + 1.0);
            let l = regime_normalization(n, rho, Regime::LambdaOverN).unwrap();
            let exact = rho.ln() - (n as f64 + 1.0).ln();
            let dev = (l.ln() - exact).abs();
            assert!(dev < prev);
            prev = dev;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn gumbel_values() {
        assert!((gumbel_reference(0.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(gumbel_reference(f64::INFINITY), 1.0);
        assert_eq!(gumbel_reference(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn hypothesis_small_at_fixed_rho() {
        for n in [12, 20, 50] {
            let h = rare_success_hypothesis(&ResetParams::equal(n, 0.3).unwrap()).unwrap();
            assert!(h < 0.01 && h > 0.0);
        }
    }

    #[test]
    fn near_certain_reset_is_censored() {
        let p = ResetParams::equal(3, 1.0 - 1e-12).unwrap();
        for mode in [ResetMode::Direct, ResetMode::Regenerative] {
            let out = simulate_reset(&p, mode, 100_000, &mut sample_rng(5, 0)).unwrap();
            assert!(out.is_censored());
        }
    }

    #[test]
    fn truncated_geometric_stays_below_c() {
        let p = ResetParams::equal(6, 0.6).unwrap();
        let mut rng = sample_rng(9, 0);
        for _ in 0..2000 {
            let t = simulate_reset(&p, ResetMode::Regenerative, u64::MAX, &mut rng).unwrap();
            assert!(t.completed().unwrap() >= 6);
        }
    }
}
