use std::path::Path;
use std::process::{Command, Output};

fn gvasicek(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gvasicek")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("exp.json");
    std::fs::write(
        &path,
        format!(
            r#"{{"kernel": {{"name": "fbm", "H": 0.7}}, "params": {{"k": 1.0, "mu": 2.0}},
                "T_list": [20, 40], "dt": 0.05, "replications": 24, "master_seed": 1{extra}}}"#
        ),
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn kernel_check_fbm_passes_with_zero_ratio() {
    let o = gvasicek(&["kernel-check", "--kernel", "fbm", "--H", "0.7"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().any(|l| l == "PASS max_ratio=0"), "{}", stdout(&o));
}

#[test]
fn kernel_check_subfbm_passes() {
    let o = gvasicek(&["kernel-check", "--kernel", "subfbm", "--H", "0.8", "--T", "10", "--dt", "0.2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().last().unwrap().starts_with("PASS max_ratio="));
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("path.csv");
    let p = path.to_str().unwrap();
    let o = gvasicek(&["simulate", "--H", "0.7", "--k", "1", "--mu", "2", "--T", "50", "--dt", "0.05", "--seed", "3", "--out", p]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("t,G,X\n"));
    assert_eq!(text.lines().count(), 1002);

    let o = gvasicek(&["estimate", "--in", p, "--kernel", "fbm", "--H", "0.7", "--mode", "pathwise"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["mu_hat", "k_hat", "mu_ls", "k_ls"] {
        assert!(v[key].as_f64().unwrap().is_finite(), "{key}");
    }
    assert_eq!(v["mode"], "pathwise");

    let o = gvasicek(&["estimate", "--in", p, "--H", "0.7", "--k", "1", "--mode", "pathwise,skorohod_oracle"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[test]
fn experiment_is_reproducible_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = gvasicek(&["experiment", "--config", &cfg, "--seed", "42", "--threads", threads, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let mut files: Vec<_> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        (stdout(&o), files)
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "4");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let names: Vec<_> = a.1.iter().map(|f| f.0.to_string_lossy().into_owned()).collect();
    assert!(names.contains(&"replications.csv".to_string()));
    assert!(names.contains(&"summary.json".to_string()));
    assert!(names.contains(&"qq_k_hat_40.csv".to_string()));
}

#[test]
fn report_resummarizes_existing_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("run");
    let o = gvasicek(&["experiment", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let original = std::fs::read(out.join("summary.json")).unwrap();
    let again = dir.path().join("again");
    let table = out.join("replications.csv");
    let o = gvasicek(&["report", "--config", &cfg, "--in", table.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(again.join("summary.json")).unwrap(), original);
}

#[test]
fn flag_overrides_win_over_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("o");
    let o = gvasicek(&[
        "experiment", "--config", &cfg, "--T", "10", "--reps", "6", "--mode", "pathwise", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out.join("replications.csv")).unwrap();
    assert_eq!(table.lines().count(), 7);
    assert!(table.lines().skip(1).all(|l| l.contains(",10.0,") && l.contains(",pathwise,")));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // usage errors
    assert_eq!(gvasicek(&[]).status.code(), Some(2));
    assert_eq!(gvasicek(&["bogus"]).status.code(), Some(2));
    assert_eq!(gvasicek(&["experiment"]).status.code(), Some(2));
    assert_eq!(gvasicek(&["experiment", "--config", "/nonexistent/exp.json"]).status.code(), Some(2));
    assert_eq!(gvasicek(&["kernel-check", "--H", "0.7", "--frobnicate"]).status.code(), Some(2));
    assert_eq!(gvasicek(&["kernel-check", "--kernel", "hermite", "--H", "0.7"]).status.code(), Some(2));
    assert_eq!(gvasicek(&["kernel-check"]).status.code(), Some(2));
    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"kernel": {"name": "fbm", "H": 0.7}, "bogus": 1}"#).unwrap();
    assert_eq!(gvasicek(&["experiment", "--config", unknown.to_str().unwrap()]).status.code(), Some(2));
    // domain errors
    assert_eq!(gvasicek(&["kernel-check", "--H", "0.4"]).status.code(), Some(1));
    let sigma0 = write_config(dir.path(), "");
    let text = std::fs::read_to_string(&sigma0).unwrap().replace(r#""mu": 2.0"#, r#""mu": 2.0, "sigma": 0.0"#);
    std::fs::write(&sigma0, text).unwrap();
    assert_eq!(gvasicek(&["experiment", "--config", &sigma0]).status.code(), Some(1));
    // malformed input files never panic
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "t,X\n0,0\n0.1,oops\n").unwrap();
    let o = gvasicek(&["estimate", "--in", bad.to_str().unwrap(), "--H", "0.7"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad number"));
    std::fs::write(&bad, "\u{0}\u{1}garbage").unwrap();
    assert_eq!(gvasicek(&["estimate", "--in", bad.to_str().unwrap(), "--H", "0.7"]).status.code(), Some(1));
    let cfg = write_config(dir.path(), "");
    assert_eq!(gvasicek(&["report", "--config", &cfg, "--in", bad.to_str().unwrap()]).status.code(), Some(1));
    // help is not an error
    assert_eq!(gvasicek(&["--help"]).status.code(), Some(0));
}
