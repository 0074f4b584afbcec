use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use couponflux::harness::{exact_record, simulate_set, sweep, Engine, ParamMap, SimulationConfig, SweepPlan};
use couponflux::qseries::{infinite_chain_stationary, log_q_pochhammer, LuckyWeightTable, Terms};
use couponflux::record::{ExperimentRecord, Model, OutputValue, LOG_EMIT_LIMIT};
use couponflux::suites::{run_suite, SUITES};
use couponflux::{careless, clumsy, combined, harness, reset, LogProb};
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "couponflux", version, about = "Exact and simulated completion times of non-monotone coupon collectors")]
struct Cli {
    /// Worker threads for simulation; output does not depend on it.
    #[arg(long, global = true, env = "COUPONFLUX_THREADS", default_value_t = 1)]
    threads: usize,
    /// Flatten scalar outputs to CSV instead of JSON.
    #[arg(long, global = true)]
    csv: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Reset,
    Clumsy,
    Careless,
    Combined,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Model {
        match m {
            ModelArg::Reset => Model::Reset,
            ModelArg::Clumsy => Model::Clumsy,
            ModelArg::Careless => Model::Careless,
            ModelArg::Combined => Model::Combined,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Auto,
    Set,
    BlockJump,
    Direct,
    Regenerative,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Engine {
        match e {
            EngineArg::Auto => Engine::Auto,
            EngineArg::Set => Engine::Set,
            EngineArg::BlockJump => Engine::BlockJump,
            EngineArg::Direct => Engine::ResetDirect,
            EngineArg::Regenerative => Engine::ResetRegenerative,
        }
    }
}

/// Model parameters; each model reads the ones it needs.
#[derive(Args, Clone)]
struct ModelParams {
    model: ModelArg,
    #[arg(long)]
    n: usize,
    /// Reset probability (reset).
    #[arg(long)]
    rho: Option<f64>,
    /// Loss probability (clumsy, careless).
    #[arg(long)]
    p: Option<f64>,
    /// Keep probability `1 − p` (careless).
    #[arg(long)]
    q: Option<f64>,
    /// Per-step drop of an absent selection (combined).
    #[arg(long)]
    alpha: Option<f64>,
    /// Per-coupon loss (combined).
    #[arg(long)]
    beta: Option<f64>,
    /// Refresh probability `1 − alpha` (combined).
    #[arg(long = "Q")]
    refresh: Option<f64>,
    /// Survival probability `1 − beta` (combined).
    #[arg(long = "S")]
    survival: Option<f64>,
}

impl ModelParams {
    fn map(&self) -> ParamMap {
        let mut m = ParamMap::new();
        m.insert("n".into(), self.n as f64);
        for (k, v) in [
            ("rho", self.rho),
            ("p", self.p),
            ("q", self.q),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("Q", self.refresh),
            ("S", self.survival),
        ] {
            if let Some(v) = v {
                m.insert(k.into(), v);
            }
        }
        m
    }
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form and linear-solve quantities.
    Exact {
        #[command(flatten)]
        params: ModelParams,
    },
    /// Seeded hitting-time samples.
    Simulate {
        #[command(flatten)]
        params: ModelParams,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = couponflux::rng::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = EngineArg::Auto)]
        engine: EngineArg,
        /// Censor each run at this multiple of the exact mean.
        #[arg(long, default_value_t = 100.0)]
        budget_multiplier: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact stationary-entry flux against its prediction.
    Flux {
        #[command(flatten)]
        params: ModelParams,
    },
    /// q-Pochhammer partial products, lucky-climb weights and the limiting law.
    Qseries {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        k: usize,
        /// Refresh factor of the lucky climb.
        #[arg(long = "Q", default_value_t = 1.0)]
        refresh: f64,
    },
    /// Run a verification suite; exits nonzero when any check fails.
    Verify {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: String,
        #[arg(long, default_value_t = couponflux::rng::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every point of a parameter grid.
    Sweep {
        #[arg(long)]
        plan: PathBuf,
        /// Directory for one record file per point; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn timestamp() -> anyhow::Result<String> {
    let t = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(s) => {
            let secs: i64 = s.trim().parse().context("SOURCE_DATE_EPOCH is not an integer")?;
            chrono::DateTime::from_timestamp(secs, 0).context("SOURCE_DATE_EPOCH out of range")?
        }
        Err(_) => chrono::Utc::now(),
    };
    Ok(t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn scalar(v: &OutputValue) -> String {
    match v {
        OutputValue::Number(x) => format!("{x}"),
        OutputValue::Tagged(s) => s.clone(),
        OutputValue::Log { ln, .. } => format!("exp({ln})"),
    }
}

fn records_csv(records: &[ExperimentRecord]) -> String {
    let mut params: Vec<&String> = records.iter().flat_map(|r| r.params.keys()).collect();
    params.sort();
    params.dedup();
    let mut outputs: Vec<&String> = records.iter().flat_map(|r| r.outputs.keys()).collect();
    outputs.sort();
    outputs.dedup();
    let mut out = String::from("model,seed");
    for k in params.iter().chain(outputs.iter()) {
        out.push(',');
        out.push_str(&csv_escape(k));
    }
    out.push_str(",error\n");
    for r in records {
        out.push_str(&format!("{},{}", r.model.as_str(), r.seed));
        for k in &params {
            out.push(',');
            if let Some(v) = r.params.get(*k) {
                out.push_str(&csv_escape(v.to_string().trim_matches('"')));
            }
        }
        for k in &outputs {
            out.push(',');
            if let Some(v) = r.outputs.get(*k) {
                out.push_str(&scalar(v));
            }
        }
        out.push(',');
        out.push_str(&csv_escape(r.error.as_deref().unwrap_or("")));
        out.push('\n');
    }
    out
}

fn emit(records: &[ExperimentRecord], csv: bool, out: Option<&Path>) -> anyhow::Result<()> {
    let text = if csv {
        records_csv(records)
    } else if records.len() == 1 {
        records[0].to_json() + "\n"
    } else {
        serde_json::to_string_pretty(records)? + "\n"
    };
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn linear_or_log(ln: f64) -> Value {
    if ln.is_finite() && ln.abs() > LOG_EMIT_LIMIT {
        json!({ "ln": ln, "log_space": true })
    } else {
        serde_json::to_value(OutputValue::number(ln.exp())).expect("number serializes")
    }
}

fn flux_json(model: Model, params: &ParamMap) -> anyhow::Result<Value> {
    let report = match model {
        Model::Reset => {
            let rp = harness::reset_params(params)?;
            let ls = reset::log_success_probability(&rp)?;
            // completion probability per step at regeneration scale: ρ s
            let mu = LogProb(rp.rho.ln() + ls);
            couponflux::chain::FluxReport::new(mu, mu)
        }
        Model::Clumsy => clumsy::clumsy_flux(&harness::clumsy_params(params)?)?,
        Model::Careless => careless::careless_flux(&harness::careless_params(params)?)?,
        Model::Combined => combined::combined_flux(&harness::combined_params(params)?)?,
    };
    let mut v = serde_json::to_value(&report)?;
    let obj = v.as_object_mut().expect("report is an object");
    obj.insert("model".into(), json!(model.as_str()));
    obj.insert("params".into(), serde_json::to_value(params)?);
    obj.insert("mu".into(), linear_or_log(report.log_exact.ln()));
    obj.insert("mu_predicted".into(), linear_or_log(report.log_predicted.ln()));
    obj.insert(
        "log_space".into(),
        json!(report.log_exact.ln().abs() > LOG_EMIT_LIMIT || report.log_predicted.ln().abs() > LOG_EMIT_LIMIT),
    );
    Ok(v)
}

fn qseries_json(q: f64, k: usize, refresh: f64) -> anyhow::Result<Value> {
    let mut rows = Vec::with_capacity(k + 1);
    let w = if k >= 1 { Some(LuckyWeightTable::new(k, q, refresh)?) } else { None };
    let pi = infinite_chain_stationary(q, refresh, k)?;
    for j in 0..=k {
        let lp = log_q_pochhammer(q, Terms::Finite(j))?;
        rows.push(json!({
            "k": j,
            "log_pochhammer": lp,
            "log_lucky_weight": w.as_ref().map(|w| w.log_w[j]),
            "limit_law": pi[j],
        }));
    }
    let inf = log_q_pochhammer(q, Terms::Infinite)?;
    Ok(json!({
        "q": q,
        "Q": refresh,
        "log_pochhammer_infinite": inf,
        "pochhammer_infinite": inf.exp(),
        "rows": rows,
    }))
}

fn print_json(v: &Value) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let threads = cli.threads.max(1);
    match cli.command {
        Command::Exact { params } => {
            let r = exact_record(params.model.into(), &params.map(), 0, &timestamp()?)?;
            emit(&[r], cli.csv, None)?;
        }
        Command::Simulate {
            params,
            samples,
            seed,
            engine,
            budget_multiplier,
            out,
        } => {
            let cfg = SimulationConfig {
                samples,
                seed,
                threads,
                budget_multiplier,
                engine: engine.into(),
            };
            let model: Model = params.model.into();
            if model == Model::Careless {
                let cp = harness::careless_params(&params.map())?;
                if let Ok(m) = cp.predicted_mean() {
                    if m > careless::SIMULATION_WARN_MEAN {
                        eprintln!("warning: predicted mean {m:.3e} steps; runs may be censored");
                    }
                }
            }
            let set = simulate_set(model, &params.map(), &cfg)?;
            emit(&[set.to_record(&timestamp()?)], cli.csv, out.as_deref())?;
        }
        Command::Flux { params } => print_json(&flux_json(params.model.into(), &params.map())?)?,
        Command::Qseries { q, k, refresh } => print_json(&qseries_json(q, k, refresh)?)?,
        Command::Verify { suite, seed, out } => {
            let report = run_suite(&suite, seed, threads)?;
            println!("suite {} seed {:#x}", report.suite, report.seed);
            for c in &report.checks {
                println!(
                    "{} {} = {:.6e} {} {:.6e}{}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.relation,
                    c.threshold,
                    if c.detail.is_empty() { String::new() } else { format!("  ({})", c.detail) }
                );
            }
            if let Some(path) = out {
                std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
            }
            if !report.pass() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Sweep { plan, out } => {
            let text = std::fs::read_to_string(&plan).with_context(|| format!("reading {}", plan.display()))?;
            let plan: SweepPlan = serde_json::from_str(&text).context("parsing sweep plan")?;
            let records = sweep(&plan, threads, &timestamp()?)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    for (i, r) in records.iter().enumerate() {
                        let ext = if cli.csv { "csv" } else { "json" };
                        emit(std::slice::from_ref(r), cli.csv, Some(&dir.join(format!("record-{i:04}.{ext}"))))?;
                    }
                    eprintln!("wrote {} records to {}", records.len(), dir.display());
                }
                None => emit(&records, cli.csv, None)?,
            }
            if records.iter().any(|r| r.error.is_some()) {
                eprintln!("warning: some points failed; see the `error` field");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            if let Some(err) = e.downcast_ref::<couponflux::Error>() {
                eprintln!("error: {}: {err}", err.name());
                ExitCode::from(3)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}
