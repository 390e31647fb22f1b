use std::fs;
use std::process::{Command, Output};

fn ccsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccsched"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_kind(o: &Output) -> String {
    let stderr = String::from_utf8_lossy(&o.stderr);
    let line = stderr.lines().last().expect("stderr line");
    let v: serde_json::Value = serde_json::from_str(line).expect("JSON error line");
    v["error"].as_str().unwrap().to_owned()
}

#[test]
fn feasible_beta_prints_the_set() {
    let o = ccsched(&["feasible-beta", "--L", "11", "--G", "8", "--t", "2", "--omega", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "3 6\n");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = ccsched(&["feasible-beta", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(error_kind(&o), "usage");
}

#[test]
fn missing_parameter_is_a_usage_error() {
    let o = ccsched(&["schedule", "--L", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "usage");
}

#[test]
fn version_flag() {
    let o = ccsched(&["--version"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("ccsched "));
}

#[test]
fn exit_codes_follow_error_class() {
    let over = ccsched(&["schedule", "--L", "11", "--G", "6", "--t", "2", "--omega", "5", "--beta", "3", "--mode", "asym", "--m", "4"]);
    assert_eq!(over.status.code(), Some(2));
    assert_eq!(error_kind(&over), "infeasible-m");

    // β = 4 at (L, G) = (11, 8) leaves no room for an extra group
    let stuck = ccsched(&["schedule", "--L", "11", "--G", "8", "--t", "1", "--omega", "4", "--beta", "4", "--mode", "asym", "--m", "2"]);
    assert_eq!(stuck.status.code(), Some(3));
    assert_eq!(error_kind(&stuck), "construction-failure");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"omega":5,"t":1,"L":9,"G":3,"users":[1,2,3,4,5],"delta":1,"delta_tilde":1,"m":0,
            "columns":[[[1,2],[1,3],[1,4],[2,3],[2,5],[3,4],[4,5]]]}"#,
    )
    .unwrap();
    let o = ccsched(&["verify", "--table", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["pass"], false);
    assert_eq!(report["symbolic"]["columns"][0]["witnesses"][0]["condition"], "C1");
}

#[test]
fn emitted_tables_reverify() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.json");
    let t = table.to_str().unwrap();
    let o = ccsched(&["schedule", "--L", "10", "--G", "3", "--t", "1", "--omega", "5", "--beta", "2", "--mode", "asym", "--m", "2", "-o", t]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("t.config.toml").exists());
    let v = ccsched(&["verify", "--table", t, "--numeric", "--trials", "3", "--seed", "4"]);
    assert_eq!(v.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&v)).unwrap();
    assert_eq!(report["table"]["dof"], 14);
    assert_eq!(report["numeric"]["failures"], 0);
    assert_eq!(report["config"]["seed"], 4);
    assert_eq!(report["config"]["verify"]["trials"], 3);
}

#[test]
fn dof_region_writes_csv_and_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("region.csv");
    let o = ccsched(&["dof-region", "--L", "10", "--G", "3", "--t", "1", "--omega", "5", "-o", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("scheme,omega,t,beta,m,dof,witness_file"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().any(|r| r[0] == "asymmetric" && r[5] == "14"));
    for r in &rows {
        let witness = dir.path().join(r[6]);
        let v = ccsched(&["verify", "--table", witness.to_str().unwrap()]);
        assert_eq!(v.status.code(), Some(0), "{}", r[6]);
    }
}

#[test]
fn rate_sweep_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.json");
    let t = table.to_str().unwrap();
    assert!(ccsched(&["schedule", "--L", "10", "--G", "3", "--t", "1", "--omega", "5", "--beta", "2", "-o", t]).status.success());
    let a = dir.path().join("a.csv");
    let o = ccsched(&["rate-sweep", "--table", t, "--snr", "0:10:30", "--trials", "10", "--seed", "7", "-o", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(&a).unwrap();
    assert!(csv.starts_with("snr_db,mean_rsym,std_rsym,min_column_rate,dof,theta\n"));
    assert_eq!(csv.lines().count(), 5);

    // the sidecar config reproduces the run; a flag still overrides it
    let config = dir.path().join("a.config.toml");
    let b = dir.path().join("b.csv");
    let o = ccsched(&["--config", config.to_str().unwrap(), "rate-sweep", "-o", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(csv, fs::read_to_string(&b).unwrap());
    let c = dir.path().join("c.csv");
    ccsched(&["--config", config.to_str().unwrap(), "rate-sweep", "--seed", "8", "-o", c.to_str().unwrap()]);
    assert_ne!(csv, fs::read_to_string(&c).unwrap());
}

#[test]
fn reproduce_single_case() {
    let dir = tempfile::tempdir().unwrap();
    let o = ccsched(&["reproduce", "--case", "example2", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("PASS example2/assembled: delta_tilde=8 S_tilde=10 DoF Uniform(24)"), "{out}");
    assert!(dir.path().join("summary.json").exists());
    let v = ccsched(&["verify", "--table", dir.path().join("example2_table.json").to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0));
}
