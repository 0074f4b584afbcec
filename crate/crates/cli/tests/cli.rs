use couponflux::record::{ExperimentRecord, OutputValue};
use serde_json::Value;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_couponflux"))
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("COUPONFLUX_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn exact_reset_equal_weight() {
    let o = run(&["exact", "reset", "--n", "3", "--rho", "0.25"]);
    assert!(o.status.success());
    let r = ExperimentRecord::from_json(&stdout(&o)).unwrap();
    assert!((r.get("s").unwrap() - 0.25).abs() < 1e-12);
    assert!((r.get("mean").unwrap() - 12.0).abs() < 1e-9);
    assert_eq!(r.timestamp, "2023-11-14T22:13:20Z");
    assert_eq!(r.schema_version, 1);
    // parse(emit(record)) = record
    assert_eq!(ExperimentRecord::from_json(&r.to_json()).unwrap(), r);
}

#[test]
fn flux_clumsy_two_types() {
    let o = run(&["flux", "clumsy", "--n", "2", "--p", "0.5"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["mu"].as_f64().unwrap() - 0.125).abs() < 1e-15);
}

#[test]
fn huge_logs_stay_in_log_form() {
    let o = run(&["exact", "careless", "--n", "60", "--q", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = ExperimentRecord::from_json(&stdout(&o)).unwrap();
    assert!(r.log_space);
    assert!(matches!(r.outputs["mu"], OutputValue::Log { ln, log_space: true } if ln < -700.0));
    assert!(r.get("log_mu").unwrap() < -700.0);
    let text = stdout(&o);
    assert!(!text.contains("\"mu\": 0.0"));

    let o = run(&["flux", "careless", "--n", "60", "--q", "0.5"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mu"]["log_space"], Value::Bool(true));
    assert_eq!(v["log_space"], Value::Bool(true));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["exact", "reset", "--rho", "0.2"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "nonsense"]).status.code(), Some(2));
    let o = run(&["exact", "clumsy", "--n", "3", "--p", "1.5"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("DomainError"));
    let o = run(&["exact", "careless", "--n", "3"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn verify_identities_passes_and_audits_report() {
    let o = run(&["verify", "identities"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("seed 0x5eedc01107"));
    assert!(stdout(&o).lines().skip(1).all(|l| l.starts_with("PASS")));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("audit.json");
    let o = run(&["verify", "audits", "--out", path.to_str().unwrap()]);
    // the clumsy n=12 block is too long for its flux; see the README
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["suite"], "audits");
}

#[test]
fn simulate_seed_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let base = ["simulate", "combined", "--n", "4", "--Q", "0.8", "--S", "0.5", "--samples", "500", "--seed", "9"];
    let mut args: Vec<&str> = base.to_vec();
    args.extend(["--out", a.to_str().unwrap()]);
    assert!(run(&args).status.success());
    let written = std::fs::read_to_string(&a).unwrap();
    let r = ExperimentRecord::from_json(&written).unwrap();
    assert_eq!(r.samples.as_ref().unwrap().len() + r.get("censored").unwrap() as usize, 500);

    let mut with_threads = vec!["--threads", "3"];
    with_threads.extend(base);
    assert_eq!(stdout(&run(&with_threads)), written);
    let env = Command::new(env!("CARGO_BIN_EXE_couponflux"))
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env("COUPONFLUX_THREADS", "5")
        .args(base)
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(env.stdout).unwrap(), written);

    let mut other = base.to_vec();
    let last = other.len() - 1;
    other[last] = "10";
    assert_ne!(stdout(&run(&other)), written);
}

#[test]
fn sweep_writes_one_file_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    std::fs::write(
        &plan,
        r#"{"model":"reset","seed":3,"grid":{"n":[8,10,12,14,16],"rho":[0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5]}}"#,
    )
    .unwrap();
    let out = dir.path().join("records");
    let o = run(&["sweep", "--plan", plan.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let mut files: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 45);
    let first = ExperimentRecord::from_json(&std::fs::read_to_string(&files[0]).unwrap()).unwrap();
    assert_eq!(first.params["n"], Value::from(8));
    assert_eq!(first.seed, 3);

    let o = run(&["--csv", "sweep", "--plan", plan.to_str().unwrap()]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 46);
    assert!(text.lines().next().unwrap().starts_with("model,seed,"));

    std::fs::write(&plan, r#"{"model":"reset","grid":{}}"#).unwrap();
    assert_eq!(run(&["sweep", "--plan", plan.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn qseries_table() {
    let o = run(&["qseries", "--q", "0.5", "--k", "3"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["pochhammer_infinite"].as_f64().unwrap() - 0.288788095).abs() < 1e-9);
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    assert!((v["rows"][1]["log_pochhammer"].as_f64().unwrap() - 0.5f64.ln()).abs() < 1e-15);
}
