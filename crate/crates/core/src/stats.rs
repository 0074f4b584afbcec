//! Kolmogorov-Smirnov distances and moment estimates.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// One-sample KS statistic `sup_x |F_N(x) − F(x)|`.
pub fn ks_one_sample(data: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    if data.is_empty() {
        return 1.0;
    }
    let mut xs = data.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d.clamp(0.0, 1.0)
}

/// KS distance to the standard exponential.
pub fn ks_exp1(data: &[f64]) -> f64 {
    ks_one_sample(data, |x| if x <= 0.0 { 0.0 } else { -(-x).exp_m1() })
}

/// Two-sample KS statistic `sup_x |F_a(x) − F_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value of the one-sample statistic.
pub fn ks_threshold_one(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Asymptotic 1% critical value of the two-sample statistic.
pub fn ks_threshold_two(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.628 * ((n + m) / (n * m)).sqrt()
}

/// Raw moment `E X^r` with its jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub order: u32,
    pub value: f64,
    pub std_error: f64,
}

/// Jackknife over leave-one-out means of `x^r`.
pub fn moment_with_jackknife(data: &[f64], order: u32) -> Result<MomentEstimate> {
    let n = data.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let ys: Vec<f64> = data.iter().map(|x| x.powi(order as i32)).collect();
    let total: f64 = ys.iter().sum();
    let nf = n as f64;
    let loo: Vec<f64> = ys.iter().map(|y| (total - y) / (nf - 1.0)).collect();
    let loo_mean = loo.iter().sum::<f64>() / nf;
    let var = (nf - 1.0) / nf * loo.iter().map(|t| (t - loo_mean).powi(2)).sum::<f64>();
    Ok(MomentEstimate {
        order,
        value: total / nf,
        std_error: var.sqrt(),
    })
}

pub fn mean_and_sd(data: &[f64]) -> (f64, f64) {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// CDF of the Gumbel law standardized to mean 0 and variance 1.
pub fn standard_gumbel_cdf(z: f64) -> f64 {
    let scale = 6f64.sqrt() / std::f64::consts::PI;
    let y = z / scale + EULER_GAMMA;
    (-(-y).exp()).exp()
}

/// CDF of `Exp(1) − 1`, the exponential standardized to mean 0 and
/// variance 1.
pub fn centered_exp_cdf(z: f64) -> f64 {
    if z <= -1.0 {
        0.0
    } else {
        -(-(z + 1.0)).exp_m1()
    }
}
