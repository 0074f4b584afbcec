//! Clumsy collector: each step selects a type uniformly and refreshes it to
//! present with probability `q`, absent with probability `p = 1 − q`.
//!
//! The stationary law is product Bernoulli(`q`), and the count of absent
//! types is a birth-death chain; completion is entry of that count into 0.

use crate::chain::{entry_flux, stationary_distribution, CountKernel, FluxReport, TargetSet};
use crate::sampler::Outcome;
use crate::{Error, LogProb, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClumsyParams {
    pub n: usize,
    pub p: f64,
}

impl ClumsyParams {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::DomainError("clumsy model needs n >= 1".into()));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::DomainError(format!("loss probability must lie in (0,1), got {p}")));
        }
        Ok(ClumsyParams { n, p })
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    /// `log(p q^n)`.
    pub fn log_flux(&self) -> f64 {
        self.p.ln() + self.n as f64 * self.q().ln()
    }

    /// The completion target `{0}` in absent-count coordinates.
    pub fn target(&self) -> TargetSet {
        TargetSet::single(0, self.n).expect("state 0 exists")
    }
}

/// Kernel of the absent count: `k → k+1` w.p. `(n−k)p/n`, `k → k−1` w.p.
/// `kq/n`, otherwise hold.
pub fn clumsy_count_kernel(params: &ClumsyParams) -> Result<CountKernel> {
    let n = params.n;
    let (p, q, nf) = (params.p, params.q(), n as f64);
    let rows = (0..=n)
        .map(|k| {
            let mut row = vec![0.0; n + 1];
            let up = (n - k) as f64 * p / nf;
            let down = k as f64 * q / nf;
            if k < n {
                row[k + 1] = up;
            }
            if k > 0 {
                row[k - 1] = down;
            }
            row[k] = 1.0 - up - down;
            row
        })
        .collect();
    CountKernel::from_rows(rows)
}

/// Exact entry flux into completion against `p q^n`.
pub fn clumsy_flux(params: &ClumsyParams) -> Result<FluxReport> {
    let kernel = clumsy_count_kernel(params)?;
    let pi = stationary_distribution(&kernel)?;
    let exact = entry_flux(&kernel, &pi, &params.target())?;
    Ok(FluxReport::new(exact, LogProb(params.log_flux())))
}

/// Completion time from the empty collection, simulated on a packed
/// presence bitmask.
pub fn simulate_clumsy<R: Rng + ?Sized>(params: &ClumsyParams, budget: u64, rng: &mut R) -> Outcome {
    let n = params.n;
    let q = params.q();
    let mut present = vec![0u64; n.div_ceil(64)];
    let mut absent = n;
    for t in 1..=budget {
        let i = rng.random_range(0..n);
        let (word, bit) = (i / 64, 1u64 << (i % 64));
        let was = present[word] & bit != 0;
        let now = rng.random::<f64>() < q;
        if was != now {
            if now {
                present[word] |= bit;
                absent -= 1;
                if absent == 0 {
                    return Outcome::Completed(t);
                }
            } else {
                present[word] &= !bit;
                absent += 1;
            }
        }
    }
    Outcome::Censored(budget)
}

/// `min(1, n (1 − 1/n)^t)`.
pub fn clumsy_mixing_bound(n: usize, t: u64) -> f64 {
    let nf = n as f64;
    if n == 1 {
        return if t == 0 { 1.0 } else { 0.0 };
    }
    (nf * (t as f64 * (-1.0 / nf).ln_1p()).exp()).min(1.0)
}

/// Coalescence time of two copies started all-present and all-absent that
/// share the selected type and the refresh bit, capped at `max_t`.
pub fn clumsy_coupling_time<R: Rng + ?Sized>(params: &ClumsyParams, max_t: u64, rng: &mut R) -> Option<u64> {
    let n = params.n;
    let q = params.q();
    let mut a = vec![true; n];
    let mut b = vec![false; n];
    let mut differ = n;
    for t in 1..=max_t {
        let i = rng.random_range(0..n);
        let v = rng.random::<f64>() < q;
        if a[i] != b[i] {
            differ -= 1;
        }
        a[i] = v;
        b[i] = v;
        if differ == 0 {
            return Some(t);
        }
    }
    None
}
