use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn corpus(name: &str) -> String {
    root().join("corpus").join(name).display().to_string()
}

fn dse(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dse")).args(args).current_dir(dir).output().expect("dse runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "exit {:?}\nstderr: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn schema(name: &str) -> jsonschema::Validator {
    let load = |n: &str| -> Value {
        serde_json::from_str(&std::fs::read_to_string(root().join("docs/schemas").join(n)).unwrap()).unwrap()
    };
    let common = jsonschema::Resource::from_contents(load("common.schema.json")).unwrap();
    jsonschema::options()
        .with_resource("json-schema:///common.schema.json", common)
        .build(&load(name))
        .unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn assert_valid(name: &str, v: &Value) {
    let errors: Vec<String> = schema(name).iter_errors(v).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

#[test]
fn dfs_run_covers_every_arm_of_tri() {
    let dir = tempfile::tempdir().unwrap();
    let out = dse(&["run", &corpus("tri.mc"), "--heuristic", "dfs", "--budget", "50", "-o", "r.json"], dir.path());
    ok(&out);
    let v = read_json(&dir.path().join("r.json"));
    assert_valid("run-concolic.schema.json", &v);
    assert_eq!(v[0]["covered"].as_array().unwrap().len(), 6);
    assert_eq!(v[0]["total_branches"], 6);
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let args = |p: &'static str| {
        vec!["run".to_string(), corpus("loopsum.mc"), "--heuristic".into(), "random".into(), "--trials".into(), "3".into(), "--budget".into(), "20".into(), "--seed".into(), "9".into(), "--parallelism".into(), p.into()]
    };
    let run = |p| {
        let a = args(p);
        ok(&dse(&a.iter().map(String::as_str).collect::<Vec<_>>(), dir.path()))
    };
    let one = run("1");
    assert_eq!(one, run("1"));
    assert_eq!(one, run("3"));
    let v: Value = serde_json::from_str(&one).unwrap();
    let seeds: Vec<&Value> = v.as_array().unwrap().iter().map(|r| &r["seed"]).collect();
    assert!(seeds[0] != seeds[1] && seeds[1] != seeds[2], "trials get distinct seeds");
}

#[test]
fn egt_run_matches_its_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dse(&["run", &corpus("fixtures/eq20.mc"), "--mode", "egt", "--heuristic", "covnew", "--budget", "10"], dir.path());
    let v: Value = serde_json::from_str(&ok(&out)).unwrap();
    assert_valid("run-egt.schema.json", &v);
    assert_eq!(v[0]["faults"][0]["kind"], "error-call");
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dse(&["run", "missing.mc"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.mc"));

    std::fs::write(dir.path().join("bad.mc"), "void main() { if ( }").unwrap();
    let out = dse(&["run", "bad.mc"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.mc"));

    for args in [
        vec!["run", &corpus("tri.mc") as &str, "--heuristic", "nonsense"],
        vec!["run", &corpus("tri.mc"), "--budget", "0"],
        vec!["run", &corpus("tri.mc"), "--seconds", "1"],
        vec!["run", &corpus("tri.mc"), "--solver", "magic"],
        vec!["run", &corpus("tri.mc"), "--no-such-flag"],
        vec!["learn", &corpus("tri.mc"), "--k", "1"],
        vec!["compare", &corpus("tri.mc")],
    ] {
        let out = dse(&args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
    assert_eq!(dse(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn learn_writes_parameters_and_log() {
    let dir = tempfile::tempdir().unwrap();
    for (mode, len) in [("concolic", 40), ("egt", 26)] {
        let theta = format!("{mode}.json");
        let out = dse(
            &["learn", &corpus("tri.mc"), "--mode", mode, "--n", "4", "--k", "2", "--check-trials", "1", "--budget", "10", "--max-iterations", "1", "-o", &theta],
            dir.path(),
        );
        ok(&out);
        let t = read_json(&dir.path().join(&theta));
        assert_valid("theta.schema.json", &t);
        assert_eq!(t.as_array().unwrap().len(), len);
        let log = std::fs::read_to_string(dir.path().join(format!("{mode}.log.jsonl"))).unwrap();
        let lines: Vec<&str> = log.lines().collect();
        assert_eq!(lines.len(), 1, "one iteration, one log line");
        let entry: Value = serde_json::from_str(lines[0]).unwrap();
        assert_valid("learn-log.schema.json", &entry);
        assert_eq!(entry["iteration"], 1);

        let out = dse(&["run", &corpus("tri.mc"), "--mode", mode, "--heuristic", &format!("parametric:{theta}"), "--budget", "10"], dir.path());
        ok(&out);
    }
}

#[test]
fn compare_statistics_recompute_from_trials() {
    let dir = tempfile::tempdir().unwrap();
    let out = dse(
        &["compare", &corpus("tri.mc"), &corpus("wide.mc"), "-H", "dfs", "-H", "cfds", "-H", "random", "--trials", "3", "--budget", "15", "-o", "c.json", "--csv", "c.csv"],
        dir.path(),
    );
    ok(&out);
    let v = read_json(&dir.path().join("c.json"));
    assert_valid("compare.schema.json", &v);
    let mut curve_points = 0;
    for program in v.as_array().unwrap() {
        let hs = program["heuristics"].as_array().unwrap();
        assert_eq!(hs.len(), 3);
        for h in hs {
            let cov: Vec<f64> = h["trials"].as_array().unwrap().iter().map(|t| t["covered"].as_array().unwrap().len() as f64).collect();
            let mean = cov.iter().sum::<f64>() / cov.len() as f64;
            let std = (cov.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / cov.len() as f64).sqrt();
            assert!((h["mean"].as_f64().unwrap() - mean).abs() < 1e-9);
            assert!((h["std"].as_f64().unwrap() - std).abs() < 1e-9);
            assert_eq!(h["max"].as_f64().unwrap(), cov.iter().cloned().fold(0.0, f64::max));
            curve_points += h["trials"].as_array().unwrap().iter().map(|t| t["curve"].as_array().unwrap().len()).sum::<usize>();
        }
    }
    let mut csv = csv::Reader::from_path(dir.path().join("c.csv")).unwrap();
    assert_eq!(csv.headers().unwrap(), vec!["program", "heuristic", "trial", "x", "covered"]);
    assert_eq!(csv.records().count(), curve_points);
}

#[test]
fn report_features_lists_weights() {
    let dir = tempfile::tempdir().unwrap();
    let mut theta = vec![0.0; 26];
    theta[0] = 0.9;
    theta[13] = -0.5;
    theta[25] = 0.1;
    std::fs::write(dir.path().join("t.json"), serde_json::to_string(&theta).unwrap()).unwrap();
    let text = ok(&dse(&["report-features", "t.json", "--top-k", "2"], dir.path()));
    assert!(text.contains("#1") && text.contains("#26") && text.contains("#14"));
    let v: Value = serde_json::from_str(&ok(&dse(&["report-features", "t.json", "--json"], dir.path()))).unwrap();
    assert_valid("features.schema.json", &v);
    assert_eq!(v["mode"], "state");
    assert_eq!(v["positive"][0]["index"], 1);
    assert_eq!(v["negative"][0]["index"], 14);

    std::fs::write(dir.path().join("short.json"), "[0.5, 0.5]").unwrap();
    assert_eq!(dse(&["report-features", "short.json"], dir.path()).status.code(), Some(1));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = serde_json::json!({ "heuristic": "random", "budget": 2, "seed": 4, "trials": 2 });
    assert_valid("config.schema.json", &config);
    std::fs::write(dir.path().join("c.json"), config.to_string()).unwrap();
    let v: Value = serde_json::from_str(&ok(&dse(&["run", &corpus("tri.mc"), "--config", "c.json"], dir.path()))).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[0]["heuristic"], "random");
    assert_eq!(v[0]["executions_used"], 2);
    let v: Value =
        serde_json::from_str(&ok(&dse(&["run", &corpus("tri.mc"), "--config", "c.json", "--budget", "4", "--heuristic", "dfs"], dir.path())))
            .unwrap();
    assert_eq!(v[0]["heuristic"], "dfs");
    assert_eq!(v[0]["executions_used"], 4);

    std::fs::write(dir.path().join("bad.json"), r#"{ "budgett": 3 }"#).unwrap();
    assert_eq!(dse(&["run", &corpus("tri.mc"), "--config", "bad.json"], dir.path()).status.code(), Some(1));
}
