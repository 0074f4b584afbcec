//! Verification layer: hitting-time sample sets, Exp(1) limit-law reports,
//! stationary-entry hypothesis audits and parameter sweeps.

use crate::careless::{careless_flux_from, careless_kernel, simulate_careless, tail_ratio_profile_from, CarelessParams};
use crate::chain::{
    block_entry_moments, block_entry_probability, hit_probability_within, mean_hitting_time, stationary_distribution,
    worst_case_tv, CountKernel, TargetSet,
};
use crate::clumsy::{clumsy_count_kernel, clumsy_flux, simulate_clumsy, ClumsyParams};
use crate::combined::{combined_flux_from, combined_kernel, simulate_combined, CombinedParams};
use crate::record::{ExperimentRecord, Model};
use crate::reset::{
    beta_mean, exact_mean, log_success_probability, rare_success_hypothesis, simulate_reset, ResetMode, ResetParams,
};
use crate::rng::parallel_samples;
use crate::sampler::{budget_from_mean, BlockJumpSampler, Outcome};
use crate::stats::{ks_exp1, ks_threshold_one, moment_with_jackknife, MomentEstimate};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Minimum number of completed runs for an Exp(1) test.
pub const MIN_KS_SAMPLES: usize = 1000;
/// Largest censored fraction compatible with a pass.
pub const MAX_CENSOR_FRACTION: f64 = 0.01;
/// Pass threshold shared by the audit flags.
pub const AUDIT_THRESHOLD: f64 = 0.1;
/// Above this many expected elementary steps the set simulators give way
/// to the block-jump sampler.
pub const SET_SIMULATION_STEP_LIMIT: f64 = 2e9;

/// Seeded hitting times plus the flux that normalizes them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingSampleSet {
    pub model: Model,
    pub params: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    /// Completed hitting times, in sample-index order.
    pub samples: Vec<u64>,
    pub censored: usize,
    /// `log μ`.
    pub log_normalization: f64,
    pub engine: Engine,
    pub budget: u64,
}

impl HittingSampleSet {
    pub fn total(&self) -> usize {
        self.samples.len() + self.censored
    }

    pub fn censor_fraction(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.censored as f64 / self.total() as f64
        }
    }

    /// `μ T` for each completed run.
    pub fn normalized(&self) -> Vec<f64> {
        let mu = self.log_normalization.exp();
        self.samples.iter().map(|&t| t as f64 * mu).collect()
    }

    pub fn to_record(&self, timestamp: &str) -> ExperimentRecord {
        let mut r = ExperimentRecord::new(self.model, self.seed, timestamp);
        r.params = self.params.clone();
        r.params.insert("engine".into(), serde_json::to_value(self.engine).expect("engine serializes"));
        r.params.insert("budget".into(), self.budget.into());
        r.put("completed", self.samples.len() as f64);
        r.put("censored", self.censored as f64);
        r.put("censor_fraction", self.censor_fraction());
        r.put_log("normalization", self.log_normalization);
        if !self.samples.is_empty() {
            let mean = self.samples.iter().map(|&t| t as f64).sum::<f64>() / self.samples.len() as f64;
            r.put("mean", mean);
            r.put("normalized_mean", mean * self.log_normalization.exp());
            r.put("ks_exp1", ks_exp1(&self.normalized()));
            r.put("ks_threshold", ks_threshold_one(self.samples.len()));
        }
        r.samples = Some(self.samples.clone());
        r
    }
}

/// Which simulator produced a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Set-valued process simulated step by step.
    Set,
    /// Exact dyadic block jumps on the count chain.
    BlockJump,
    /// Reset model, one draw at a time.
    ResetDirect,
    /// Reset model through its regenerative representation.
    ResetRegenerative,
    /// Set simulation when affordable, block jumps otherwise.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLawReport {
    pub n_used: usize,
    pub censored: usize,
    pub censor_fraction: f64,
    pub ks_statistic: f64,
    /// Asymptotic 1% critical value `1.63/√N`.
    pub ks_threshold: f64,
    pub empirical_moments: Vec<MomentEstimate>,
    /// `r!` for `r = 1..=4`.
    pub reference_moments: Vec<f64>,
    pub ks_pass: bool,
    pub censor_pass: bool,
}

impl LimitLawReport {
    pub fn pass(&self) -> bool {
        self.ks_pass && self.censor_pass
    }
}

fn factorial(r: u32) -> f64 {
    (1..=r).map(f64::from).product()
}

/// One-sample KS test of `μ T` against Exp(1), with moments `r = 1..=4`.
pub fn exp1_ks(set: &HittingSampleSet) -> Result<LimitLawReport> {
    if set.samples.len() < MIN_KS_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_KS_SAMPLES,
            got: set.samples.len(),
        });
    }
    let xs = set.normalized();
    let ks = ks_exp1(&xs);
    let threshold = ks_threshold_one(xs.len());
    let empirical_moments = (1..=4).map(|r| moment_with_jackknife(&xs, r)).collect::<Result<Vec<_>>>()?;
    Ok(LimitLawReport {
        n_used: xs.len(),
        censored: set.censored,
        censor_fraction: set.censor_fraction(),
        ks_statistic: ks,
        ks_threshold: threshold,
        empirical_moments,
        reference_moments: (1..=4).map(factorial).collect(),
        ks_pass: ks <= threshold,
        censor_pass: set.censor_fraction() <= MAX_CENSOR_FRACTION,
    })
}

/// Empirical moment against its Exp(1) limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub order: u32,
    pub empirical: f64,
    pub std_error: f64,
    pub reference: f64,
    /// `empirical / reference − 1`.
    pub relative_error: f64,
}

/// `E(μT)^r` with jackknife errors for `r = 1..=r_max`, `r_max <= 4`.
pub fn moment_report(set: &HittingSampleSet, r_max: u32) -> Result<Vec<MomentRow>> {
    if !(1..=4).contains(&r_max) {
        return Err(Error::DomainError(format!("moment order must lie in 1..=4, got {r_max}")));
    }
    let xs = set.normalized();
    (1..=r_max)
        .map(|r| {
            let m = moment_with_jackknife(&xs, r)?;
            let reference = factorial(r);
            Ok(MomentRow {
                order: r,
                empirical: m.value,
                std_error: m.std_error,
                reference,
                relative_error: m.value / reference - 1.0,
            })
        })
        .collect()
}

/// Prescribed block lengths `b = n³` and `h = ⌈C n²⌉`, with `C = 2`
/// unless `q < e^{-2}`, where `C = 2 log(1/q)`.
pub fn default_block_scales(n: usize, q: f64) -> (usize, usize) {
    let c = if q < (-2.0f64).exp() { 2.0 * (1.0 / q).ln() } else { 2.0 };
    (n.pow(3), (c * (n * n) as f64).ceil() as usize)
}

/// Exact check of the stationary-entry hypotheses at block scales `b`, `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub b: usize,
    pub h: usize,
    pub log_mu: f64,
    /// `b μ`.
    pub b_mu: f64,
    /// Model mixing bound at `h`.
    pub mixing_bound: f64,
    /// Exact worst-case total variation of the count chain at `h`.
    pub mixing_exact: f64,
    /// `mixing_bound / (b μ)`.
    pub mixing_over_b_mu: f64,
    /// `E[(N_b)_2] / E N_b`.
    pub m2_over_m1: f64,
    /// `P_π(N_b >= 1) / (b μ)`.
    pub m1_ratio: f64,
    /// `P_start(T <= h)`.
    pub burn_in_hit: f64,
    pub b_mu_pass: bool,
    pub mixing_pass: bool,
    pub clump_pass: bool,
    pub burn_in_pass: bool,
}

impl AuditRecord {
    pub fn pass(&self) -> bool {
        self.b_mu_pass && self.mixing_pass && self.clump_pass && self.burn_in_pass
    }
}

pub fn hypothesis_audit(
    kernel: &CountKernel,
    target: &TargetSet,
    start: usize,
    b: usize,
    h: usize,
    mixing_bound: f64,
) -> Result<AuditRecord> {
    let pi = stationary_distribution(kernel)?;
    let block = block_entry_moments(kernel, &pi, target, b)?;
    let p_any = block_entry_probability(kernel, &pi, target, b);
    let b_mu = block.first_moment;
    let burn_in_hit = hit_probability_within(kernel, target, start, h);
    let mixing_over_b_mu = mixing_bound / b_mu;
    Ok(AuditRecord {
        b,
        h,
        log_mu: block.log_flux.ln(),
        b_mu,
        mixing_bound,
        mixing_exact: worst_case_tv(kernel, &pi, h),
        mixing_over_b_mu,
        m2_over_m1: block.ratio,
        m1_ratio: p_any / b_mu,
        burn_in_hit,
        b_mu_pass: b_mu <= AUDIT_THRESHOLD,
        mixing_pass: mixing_over_b_mu <= AUDIT_THRESHOLD,
        clump_pass: block.ratio <= AUDIT_THRESHOLD,
        burn_in_pass: burn_in_hit <= AUDIT_THRESHOLD,
    })
}

/// Parameter map with typed accessors.
pub type ParamMap = BTreeMap<String, f64>;

fn get(params: &ParamMap, key: &str) -> Result<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| Error::DomainError(format!("missing parameter `{key}`")))
}

fn get_n(params: &ParamMap) -> Result<usize> {
    let n = get(params, "n")?;
    if n < 1.0 || n.fract() != 0.0 {
        return Err(Error::DomainError(format!("n must be a positive integer, got {n}")));
    }
    Ok(n as usize)
}

pub fn reset_params(p: &ParamMap) -> Result<ResetParams> {
    ResetParams::equal(get_n(p)?, get(p, "rho")?)
}

pub fn clumsy_params(p: &ParamMap) -> Result<ClumsyParams> {
    ClumsyParams::new(get_n(p)?, get(p, "p")?)
}

/// Careless parameters from `p` or `q`.
pub fn careless_params(p: &ParamMap) -> Result<CarelessParams> {
    let n = get_n(p)?;
    match (p.get("p"), p.get("q")) {
        (Some(&loss), _) => CarelessParams::new(n, loss),
        (None, Some(&q)) => CarelessParams::from_q(n, q),
        _ => Err(Error::DomainError("careless model needs `p` or `q`".into())),
    }
}

/// Combined parameters from `alpha`/`beta` or `Q`/`S`.
pub fn combined_params(p: &ParamMap) -> Result<CombinedParams> {
    let n = get_n(p)?;
    let alpha = match (p.get("alpha"), p.get("Q")) {
        (Some(&a), _) => a,
        (None, Some(&q)) => 1.0 - q,
        _ => return Err(Error::DomainError("combined model needs `alpha` or `Q`".into())),
    };
    let beta = match (p.get("beta"), p.get("S")) {
        (Some(&b), _) => b,
        (None, Some(&s)) => 1.0 - s,
        _ => return Err(Error::DomainError("combined model needs `beta` or `S`".into())),
    };
    CombinedParams::new(n, alpha, beta)
}

/// Largest `n` for which exact records include a mean hitting time.
pub const EXACT_MEAN_LIMIT: usize = 400;

fn record_params(r: ExperimentRecord, p: &ParamMap) -> ExperimentRecord {
    p.iter().fold(r, |r, (k, v)| {
        if k == "n" {
            r.param(k, *v as u64)
        } else {
            r.param(k, *v)
        }
    })
}

/// Closed-form and linear-solve quantities for one parameter point.
pub fn exact_record(model: Model, params: &ParamMap, seed: u64, timestamp: &str) -> Result<ExperimentRecord> {
    let mut r = record_params(ExperimentRecord::new(model, seed, timestamp), params);
    match model {
        Model::Reset => {
            let rp = reset_params(params)?;
            let ls = log_success_probability(&rp)?;
            r.put_log("s", ls);
            r.put_log("rho_s", ls + rp.rho.ln());
            r.put("mean", exact_mean(&rp)?);
            r.put("beta_mean", beta_mean(&rp)?);
            r.put("a", rp.a());
            r.put("hypothesis", rare_success_hypothesis(&rp)?);
        }
        Model::Clumsy => {
            let cp = clumsy_params(params)?;
            let flux = clumsy_flux(&cp)?;
            r.put_log("mu", flux.log_exact.ln());
            r.put_log("mu_predicted", flux.log_predicted.ln());
            r.put("log_ratio", flux.log_ratio);
            if cp.n <= EXACT_MEAN_LIMIT {
                let k = clumsy_count_kernel(&cp)?;
                r.put("mean_hitting_time", mean_hitting_time(&k, &cp.target(), cp.n)?);
            }
        }
        Model::Careless => {
            let cp = careless_params(params)?;
            let k = careless_kernel(&cp)?;
            let nu = stationary_distribution(&k)?;
            let flux = careless_flux_from(&cp, &k, &nu)?;
            r.put_log("mu", flux.log_exact.ln());
            r.put_log("mu_asymptotic", flux.log_predicted.ln());
            r.put("log_ratio", flux.log_ratio);
            for (name, v) in &flux.alternatives {
                r.put_log(&format!("mu_{name}"), v.ln());
            }
            r.put("stationary_mean", nu.mean());
            r.put("stationary_mean_formula", cp.stationary_mean());
            r.put("residual", nu.residual());
            r.put_log("nu_top", nu.log_prob(cp.n));
            r.put("top_ratio", tail_ratio_profile_from(&cp, &nu, cp.n)?.top_ratio());
            if cp.n <= EXACT_MEAN_LIMIT {
                r.put("mean_hitting_time", mean_hitting_time(&k, &cp.target(), 0)?);
            }
        }
        Model::Combined => {
            let cp = combined_params(params)?;
            let k = combined_kernel(&cp)?;
            let nu = stationary_distribution(&k)?;
            let flux = combined_flux_from(&cp, &k, &nu)?;
            r.put_log("mu", flux.log_exact.ln());
            r.put_log("mu_asymptotic", flux.log_predicted.ln());
            r.put("log_ratio", flux.log_ratio);
            for (name, v) in &flux.alternatives {
                r.put_log(&format!("mu_{name}"), v.ln());
            }
            r.put("residual", nu.residual());
            if cp.n <= EXACT_MEAN_LIMIT {
                r.put("mean_hitting_time", mean_hitting_time(&k, &cp.target(), 0)?);
            }
        }
    }
    Ok(r)
}

/// Simulation settings shared by every model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub samples: usize,
    pub seed: u64,
    pub threads: usize,
    pub budget_multiplier: f64,
    pub engine: Engine,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            samples: 10_000,
            seed: crate::rng::DEFAULT_SEED,
            threads: 1,
            budget_multiplier: 100.0,
            engine: Engine::Auto,
        }
    }
}

fn collect(outcomes: Vec<Outcome>) -> (Vec<u64>, usize) {
    let mut samples = Vec::with_capacity(outcomes.len());
    let mut censored = 0;
    for o in outcomes {
        match o {
            Outcome::Completed(t) => samples.push(t),
            Outcome::Censored(_) => censored += 1,
        }
    }
    (samples, censored)
}

fn count_chain_set(
    kernel: &CountKernel,
    target: &TargetSet,
    start: usize,
    mean: f64,
    cfg: &SimulationConfig,
    set_step: impl Fn(u64, &mut crate::rng::SampleRng) -> Outcome + Sync + Send,
    n: usize,
) -> Result<(Vec<Outcome>, Engine, u64)> {
    let budget = budget_from_mean(mean, cfg.budget_multiplier);
    let engine = match cfg.engine {
        Engine::Auto => {
            if mean * cfg.samples as f64 * n as f64 <= SET_SIMULATION_STEP_LIMIT {
                Engine::Set
            } else {
                Engine::BlockJump
            }
        }
        e => e,
    };
    let outcomes = match engine {
        Engine::Set => parallel_samples(cfg.seed, cfg.samples, cfg.threads, |_, rng| set_step(budget, rng)),
        Engine::BlockJump => {
            let sampler = BlockJumpSampler::new(kernel, target, BlockJumpSampler::levels_for_mean(mean))?;
            parallel_samples(cfg.seed, cfg.samples, cfg.threads, |_, rng| sampler.hitting_time(start, budget, rng))
                .into_iter()
                .collect::<Result<Vec<_>>>()?
        }
        other => return Err(Error::DomainError(format!("engine {other:?} does not apply to count-chain models"))),
    };
    Ok((outcomes, engine, budget))
}

/// Simulated hitting times for one parameter point.
pub fn simulate_set(model: Model, params: &ParamMap, cfg: &SimulationConfig) -> Result<HittingSampleSet> {
    let mut record_params = BTreeMap::new();
    for (k, v) in params {
        record_params.insert(k.clone(), if k == "n" { (*v as u64).into() } else { (*v).into() });
    }
    let (outcomes, log_mu, engine, budget) = match model {
        Model::Reset => {
            let rp = reset_params(params)?;
            let (mode, engine) = match cfg.engine {
                Engine::ResetDirect => (ResetMode::Direct, Engine::ResetDirect),
                Engine::Auto | Engine::ResetRegenerative => (ResetMode::Regenerative, Engine::ResetRegenerative),
                other => return Err(Error::DomainError(format!("engine {other:?} does not apply to the reset model"))),
            };
            let log_mu = rp.rho.ln() + log_success_probability(&rp)?;
            let budget = budget_from_mean(exact_mean(&rp)?, cfg.budget_multiplier);
            let outcomes = parallel_samples(cfg.seed, cfg.samples, cfg.threads, |_, rng| {
                simulate_reset(&rp, mode, budget, rng)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            (outcomes, log_mu, engine, budget)
        }
        Model::Clumsy => {
            let cp = clumsy_params(params)?;
            let k = clumsy_count_kernel(&cp)?;
            let mean = mean_hitting_time(&k, &cp.target(), cp.n)?;
            let (o, e, b) = count_chain_set(&k, &cp.target(), cp.n, mean, cfg, |b, rng| simulate_clumsy(&cp, b, rng), cp.n)?;
            (o, cp.log_flux(), e, b)
        }
        Model::Careless => {
            let cp = careless_params(params)?;
            let k = careless_kernel(&cp)?;
            let nu = stationary_distribution(&k)?;
            let log_mu = careless_flux_from(&cp, &k, &nu)?.log_exact.ln();
            let mean = mean_hitting_time(&k, &cp.target(), 0)?;
            let (o, e, b) = count_chain_set(&k, &cp.target(), 0, mean, cfg, |b, rng| simulate_careless(&cp, b, rng), cp.n)?;
            (o, log_mu, e, b)
        }
        Model::Combined => {
            let cp = combined_params(params)?;
            let k = combined_kernel(&cp)?;
            let nu = stationary_distribution(&k)?;
            let log_mu = combined_flux_from(&cp, &k, &nu)?.log_exact.ln();
            let mean = mean_hitting_time(&k, &cp.target(), 0)?;
            let (o, e, b) = count_chain_set(&k, &cp.target(), 0, mean, cfg, |b, rng| simulate_combined(&cp, b, rng), cp.n)?;
            (o, log_mu, e, b)
        }
    };
    let (samples, censored) = collect(outcomes);
    Ok(HittingSampleSet {
        model,
        params: record_params,
        seed: cfg.seed,
        samples,
        censored,
        log_normalization: log_mu,
        engine,
        budget,
    })
}

/// A grid of parameter points for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub model: Model,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Parameter name to list of values; points are the Cartesian product
    /// in key order.
    pub grid: BTreeMap<String, Vec<f64>>,
    /// Simulated runs per point; zero means exact quantities only.
    #[serde(default)]
    pub samples: usize,
    #[serde(default = "default_multiplier")]
    pub budget_multiplier: f64,
}

fn default_seed() -> u64 {
    crate::rng::DEFAULT_SEED
}

fn default_multiplier() -> f64 {
    100.0
}

impl SweepPlan {
    pub fn points(&self) -> Result<Vec<ParamMap>> {
        if self.grid.is_empty() || self.grid.values().any(Vec::is_empty) {
            return Err(Error::EmptyGrid);
        }
        let mut points = vec![ParamMap::new()];
        for (key, values) in &self.grid {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.insert(key.clone(), *v);
                        q
                    })
                })
                .collect();
        }
        Ok(points)
    }
}

/// Runs every grid point. Point `i` simulates with seed `plan.seed + i`.
/// Failures are recorded per point and never abort the sweep.
pub fn sweep(plan: &SweepPlan, threads: usize, timestamp: &str) -> Result<Vec<ExperimentRecord>> {
    let points = plan.points()?;
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let seed = plan.seed.wrapping_add(i as u64);
            let run = || -> Result<ExperimentRecord> {
                let mut r = exact_record(plan.model, p, seed, timestamp)?;
                if plan.samples > 0 {
                    let cfg = SimulationConfig {
                        samples: plan.samples,
                        seed,
                        threads,
                        budget_multiplier: plan.budget_multiplier,
                        engine: Engine::Auto,
                    };
                    let set = simulate_set(plan.model, p, &cfg)?;
                    let sim = set.to_record(timestamp);
                    for (k, v) in sim.outputs {
                        r.outputs.insert(format!("sim_{k}"), v);
                    }
                    r.log_space |= sim.log_space;
                    r.samples = sim.samples;
                }
                Ok(r)
            };
            run().unwrap_or_else(|e| {
                let mut r = record_params(ExperimentRecord::new(plan.model, seed, timestamp), p);
                r.error = Some(format!("{}: {e}", e.name()));
                r
            })
        })
        .collect())
}
