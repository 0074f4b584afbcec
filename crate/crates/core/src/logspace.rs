use serde::{Deserialize, Serialize};
use std::fmt;

/// Natural logarithm of a probability (or any positive rare quantity).
///
/// `q^{n(n+1)/2}` underflows a double near `n = 50` at `q = 1/2`, so every
/// flux, tail mass and lucky weight is stored here and only exponentiated on
/// request.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogProb(pub f64);

impl LogProb {
    /// Smallest linear value handed out by [`LogProb::linear`].
    pub const LINEAR_FLOOR: f64 = 1e-300;

    pub fn from_linear(x: f64) -> Self {
        LogProb(x.ln())
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    /// `exp` of the stored value, without any floor.
    pub fn exp(self) -> f64 {
        self.0.exp()
    }

    /// Linear value, or `None` when it would fall below [`Self::LINEAR_FLOOR`].
    pub fn linear(self) -> Option<f64> {
        let x = self.0.exp();
        (x >= Self::LINEAR_FLOOR).then_some(x)
    }
}

impl fmt::Display for LogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.linear() {
            Some(x) => write!(f, "{x:.6e}"),
            None => write!(f, "exp({:.6})", self.0),
        }
    }
}

/// `log(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log(sum(exp(x)))`, `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    let s: f64 = xs.into_iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// `log(1 - exp(x))` for `x <= 0`, accurate at both ends.
pub(crate) fn log1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `log C(n, k)`.
pub(crate) fn log_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    statrs::function::factorial::ln_binomial(n, k)
}

/// `log P(Bin(n, s) = k)` for `s` in `[0, 1]`.
pub(crate) fn log_binomial_pmf(n: usize, k: usize, log_s: f64, log_1ms: f64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let a = if k == 0 { 0.0 } else { k as f64 * log_s };
    let b = if k == n { 0.0 } else { (n - k) as f64 * log_1ms };
    log_binomial(n as u64, k as u64) + a + b
}

/// Log pmf of `Bin(n, s)` as a vector of length `n + 1`.
pub(crate) fn log_binomial_row(n: usize, s: f64) -> Vec<f64> {
    let (ls, l1) = (s.ln(), (-s).ln_1p());
    (0..=n).map(|k| log_binomial_pmf(n, k, ls, l1)).collect()
}
