use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_minerload");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn minerload")
}

fn ok(out: &Path, args: &[&str]) {
    let o = run(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn error_of(o: &Output) -> Value {
    assert!(!o.status.success(), "expected failure");
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().expect("error line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn read_json(p: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn ingest(out: &Path, panel: &Path) {
    let set = format!("input.paths=[\"{}\"]", panel.display());
    ok(out, &["ingest", "--set", &set]);
}

fn validate_report(report: &Value) {
    let schema: Value = serde_json::from_str(minerload_cli::report::REPORT_SCHEMA).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    if let Err(errors) = compiled.validate(report) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("report does not match schema: {msgs:#?}");
    };
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(out, &["simulate", "--seed", "5", "--season", "summer", "--set", "simulate.days=20"]);
    }
    let x = std::fs::read(a.join("synthetic.csv")).unwrap();
    let y = std::fs::read(b.join("synthetic.csv")).unwrap();
    assert!(!x.is_empty());
    assert_eq!(x, y);
    ok(&b, &["simulate", "--seed", "6", "--season", "summer", "--set", "simulate.days=20"]);
    assert_ne!(x, std::fs::read(b.join("synthetic.csv")).unwrap());
}

#[test]
fn simulate_without_seed_fails_and_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let err = error_of(&run(&out, &["simulate", "--season", "summer"]));
    assert_eq!(err["error"]["kind"], "precondition");
    assert!(err["error"]["message"].as_str().unwrap().contains("--seed"));
    assert!(!out.exists());
}

#[test]
fn test_battery_covers_every_series_role() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ingest(out, &fixture("panel_120d.csv"));
    ok(out, &["test"]);
    let tests = read_json(out.join("tests.json"));
    for role in ["miner_mw", "temp_f", "da_price", "rt_price", "system_mw"] {
        for t in ["jarque_bera", "adf", "breusch_pagan", "durbin_watson"] {
            let entry = &tests["series"][role][t];
            assert!(entry["statistic"].is_number(), "{role}/{t}: {entry}");
        }
    }
    let rsi = tests["rsi"]["windows"].as_array().expect("rsi study ran");
    assert_eq!(rsi.len(), 3);
}

#[test]
fn fit_on_ten_days_names_the_precondition() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ingest(out, &fixture("panel_10d.csv"));
    ok(out, &["transform"]);
    let err = error_of(&run(out, &["fit", "--season", "non_summer"]));
    assert_eq!(err["error"]["kind"], "precondition");
    let msg = err["error"]["message"].as_str().unwrap();
    assert!(msg.contains("fit_demand_model"), "{msg}");
    for f in ["model.json", "fit.json", "fit_series.csv"] {
        assert!(!out.join(f).exists(), "{f} left behind");
    }
    let leftovers: Vec<_> = std::fs::read_dir(out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with(".staging"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn fit_needs_the_transform_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ingest(out, &fixture("panel_120d.csv"));
    let err = error_of(&run(out, &["fit", "--season", "non_summer"]));
    assert!(err["error"]["message"].as_str().unwrap().contains("transform.json"));
}

#[test]
fn config_errors_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let err = error_of(&run(dir.path(), &["test", "--set", "fit.no_such_key=3"]));
    assert_eq!(err["error"]["kind"], "invalid_input");
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "season = \"summer\"\n[simulate]\nday = 3\n").unwrap();
    let err = error_of(&run(dir.path(), &["simulate", "--seed", "1", "--config", cfg.to_str().unwrap()]));
    assert!(err["error"]["message"].as_str().unwrap().contains("day"));
}

#[test]
fn report_needs_an_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let err = error_of(&run(dir.path(), &["report"]));
    assert_eq!(err["error"]["kind"], "precondition");
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn full_pipeline_report_matches_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let input = fixture("panel_120d.csv");
    let before = std::fs::read(&input).unwrap();
    ingest(&out, &input);
    ok(&out, &["transform"]);
    ok(&out, &["test", "--season", "non_summer"]);
    ok(&out, &["fit", "--season", "non_summer", "--set", "fit.train_fraction=0.8"]);
    ok(&out, &["report"]);
    assert_eq!(before, std::fs::read(&input).unwrap(), "input modified");

    let report = read_json(out.join("report.json"));
    validate_report(&report);
    assert_eq!(report["schema_version"], "report.v1");
    assert!(report["metrics"]["test"]["rmse"].is_number());
    for p in report["plots"].as_array().unwrap() {
        let f = out.join(p["file"].as_str().unwrap());
        let text = std::fs::read_to_string(&f).unwrap();
        assert_eq!(text.lines().count(), p["rows"].as_u64().unwrap() as usize + 1, "{}", f.display());
    }
    let kinds: Vec<&str> = report["plots"].as_array().unwrap().iter().map(|p| p["kind"].as_str().unwrap()).collect();
    for k in ["histogram", "scatter", "qq", "acf", "timeseries"] {
        assert!(kinds.contains(&k), "missing {k} plot");
    }

    // fit artifact on its own
    let only = dir.path().join("fit_only");
    std::fs::create_dir_all(&only).unwrap();
    std::fs::copy(out.join("fit.json"), only.join("fit.json")).unwrap();
    ok(&only, &["report"]);
    let r = read_json(only.join("report.json"));
    validate_report(&r);
    assert!(r["stages"].is_array() && r["sarima"].is_object() && r["metrics"].is_object());
    assert_eq!(r["artifacts"], serde_json::json!(["fit"]));

    // rerunning leaves byte-identical outputs
    let first = std::fs::read(out.join("report.json")).unwrap();
    let first_tests = std::fs::read(out.join("tests.json")).unwrap();
    ok(&out, &["test", "--season", "non_summer"]);
    ok(&out, &["report"]);
    assert_eq!(first, std::fs::read(out.join("report.json")).unwrap());
    assert_eq!(first_tests, std::fs::read(out.join("tests.json")).unwrap());
}

#[test]
fn numbers_in_reports_carry_at_most_twelve_digits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ingest(out, &fixture("panel_120d.csv"));
    ok(out, &["test"]);
    let text = std::fs::read_to_string(out.join("tests.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    fn walk(v: &Value) {
        match v {
            Value::Number(n) if n.is_f64() => {
                let x = n.as_f64().unwrap();
                assert_eq!(x, minerload_cli::report::round_sig(x));
            }
            Value::Array(a) => a.iter().for_each(walk),
            Value::Object(m) => m.values().for_each(walk),
            _ => {}
        }
    }
    walk(&v);
}
