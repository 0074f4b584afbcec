//! Hitting-time samplers that work on a count kernel rather than on the
//! underlying set-valued process.
//!
//! [`CountChainWalker`] takes one kernel step at a time. [`BlockJumpSampler`]
//! draws the exact hitting time in `O(log T)` work by jumping whole dyadic
//! blocks of the taboo (target-avoiding) chain and bisecting the block in
//! which the first entry falls.

use crate::chain::{CountKernel, TargetSet};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Result of one simulated run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Target entered at this step.
    Completed(u64),
    /// Budget reached without entry; holds the number of steps simulated.
    Censored(u64),
}

impl Outcome {
    pub fn completed(self) -> Option<u64> {
        match self {
            Outcome::Completed(t) => Some(t),
            Outcome::Censored(_) => None,
        }
    }

    pub fn is_censored(self) -> bool {
        matches!(self, Outcome::Censored(_))
    }
}

/// Largest step budget any simulator accepts.
pub const MAX_BUDGET: u64 = 1 << 62;

/// Budget from a predicted mean and a multiplier, saturating at [`MAX_BUDGET`].
pub fn budget_from_mean(mean: f64, multiplier: f64) -> u64 {
    let b = (mean * multiplier).ceil();
    if !b.is_finite() || b >= MAX_BUDGET as f64 {
        MAX_BUDGET
    } else {
        (b as u64).max(1)
    }
}

fn sample_index<R: Rng + ?Sized>(rng: &mut R, weights: &[f64], total: f64) -> usize {
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = i;
            if u < w {
                return i;
            }
            u -= w;
        }
    }
    last
}

/// One-step simulation of a count kernel.
#[derive(Debug, Clone)]
pub struct CountChainWalker {
    rows: Vec<Vec<f64>>,
}

impl CountChainWalker {
    pub fn new(kernel: &CountKernel) -> Self {
        CountChainWalker {
            rows: kernel.rows().to_vec(),
        }
    }

    /// First `t >= 1` with `X_t ∈ target`.
    pub fn hitting_time<R: Rng + ?Sized>(&self, target: &TargetSet, start: usize, budget: u64, rng: &mut R) -> Outcome {
        let mut x = start;
        for t in 1..=budget {
            x = sample_index(rng, &self.rows[x], 1.0);
            if target.contains(x) {
                return Outcome::Completed(t);
            }
        }
        Outcome::Censored(budget)
    }
}

type Matrix = Vec<Vec<f64>>;

fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let m = a.len();
    let mut c = vec![vec![0.0; m]; m];
    for i in 0..m {
        for k in 0..m {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

/// Exact hitting-time sampler for a count chain.
///
/// Level `j` stores the taboo matrix `Q^{2^j}` (moves that avoid the target)
/// and `H_{2^j}(x) = P_x(T <= 2^j)`, built by squaring with
/// `H_{2m} = H_m + Q^m H_m`.
#[derive(Debug, Clone)]
pub struct BlockJumpSampler {
    outside: Vec<usize>,
    index_of: Vec<Option<usize>>,
    powers: Vec<Matrix>,
    hit: Vec<Vec<f64>>,
    /// `Σ_y Q^{2^j}(x, y)`, the no-hit probability without cancellation.
    stay: Vec<Vec<f64>>,
}

impl BlockJumpSampler {
    /// Builds levels `0..=levels`, so the coarse jump is `2^levels` steps.
    pub fn new(kernel: &CountKernel, target: &TargetSet, levels: usize) -> Result<Self> {
        let states = kernel.states();
        let outside: Vec<usize> = (0..states).filter(|s| !target.contains(*s)).collect();
        if outside.is_empty() {
            return Err(Error::EmptyComplement);
        }
        let mut index_of = vec![None; states];
        for (i, &x) in outside.iter().enumerate() {
            index_of[x] = Some(i);
        }
        let q0: Matrix = outside
            .iter()
            .map(|&x| outside.iter().map(|&y| kernel.entry(x, y)).collect())
            .collect();
        let h0: Vec<f64> = outside
            .iter()
            .map(|&x| target.members().map(|y| kernel.entry(x, y)).sum())
            .collect();
        let mut powers = vec![q0];
        let mut hit = vec![h0];
        for j in 0..levels {
            let (qm, hm) = (&powers[j], &hit[j]);
            let h2: Vec<f64> = (0..outside.len())
                .map(|x| hm[x] + qm[x].iter().zip(hm).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            let q2 = mat_mul(qm, qm);
            powers.push(q2);
            hit.push(h2);
        }
        let stay = powers.iter().map(|q| q.iter().map(|r| r.iter().sum()).collect()).collect();
        Ok(BlockJumpSampler {
            outside,
            index_of,
            powers,
            hit,
            stay,
        })
    }

    /// Picks the number of levels so that a coarse jump covers about
    /// `mean / 32` steps.
    pub fn levels_for_mean(mean: f64) -> usize {
        if !(mean > 64.0) {
            return 0;
        }
        ((mean / 32.0).log2().floor() as usize).min(50)
    }

    pub fn coarse_step(&self) -> u64 {
        1u64 << (self.powers.len() - 1)
    }

    /// Exact law of the first `t >= 1` with `X_t ∈ target`, started at a
    /// state outside the target.
    pub fn hitting_time<R: Rng + ?Sized>(&self, start: usize, budget: u64, rng: &mut R) -> Result<Outcome> {
        let mut x = self.index_of.get(start).copied().flatten().ok_or_else(|| {
            Error::DomainError(format!("start state {start} lies in the target or out of range"))
        })?;
        let top = self.powers.len() - 1;
        let jump = self.coarse_step();
        let mut t = 0u64;
        loop {
            if t >= budget {
                return Ok(Outcome::Censored(t));
            }
            let p_hit = self.hit[top][x];
            let u = rng.random::<f64>() * (p_hit + self.stay[top][x]);
            if u < p_hit {
                break;
            }
            x = sample_index(rng, &self.powers[top][x], self.stay[top][x]);
            t += jump;
        }
        // the first entry lies in (t, t + 2^top]; bisect down to one step
        for j in (1..=top).rev() {
            let half = j - 1;
            let first = self.hit[half][x];
            let h = &self.hit[half];
            let later: Vec<f64> = self.powers[half][x].iter().zip(h).map(|(q, hy)| q * hy).collect();
            let second: f64 = later.iter().sum();
            if rng.random::<f64>() * (first + second) >= first {
                x = sample_index(rng, &later, second);
                t += 1u64 << half;
            }
        }
        t += 1;
        Ok(if t > budget {
            Outcome::Censored(budget)
        } else {
            Outcome::Completed(t)
        })
    }

    /// States outside the target, in the order used internally.
    pub fn outside(&self) -> &[usize] {
        &self.outside
    }

    /// `P_x(T <= 2^j)` for each state outside the target.
    pub fn hit_within_block(&self, j: usize) -> &[f64] {
        &self.hit[j]
    }
}
