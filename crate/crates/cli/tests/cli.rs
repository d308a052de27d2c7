use std::process::Command;

use patchdrift_cli::config::{DeltaGrid, MethodName, TaskSpec};
use patchdrift_cli::{check, execute, scenarios_dir, write_outputs, CliError, RunOptions, ScenarioConfig};

const LEVINS2: &str = r#"{
  "name": "t",
  "seed": 4,
  "model": { "kind": "levins", "n": 2 },
  "landscape": { "mu": [0.3, 0.3], "var": [1.0, 1.0] },
  "sim": { "horizon": 20.0, "burn_in": 2.0, "replicates": 3, "segments": 10 },
  "tasks": [TASKS]
}"#;

fn levins2(tasks: &str) -> String {
    LEVINS2.replace("TASKS", tasks)
}

fn config_path(err: CliError) -> String {
    match err {
        CliError::Config { path, .. } => path,
        other => panic!("expected a config error, got {other}"),
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_patchdrift"))
}

#[test]
fn bundled_scenarios_parse_and_check() {
    let mut count = 0;
    for entry in std::fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ScenarioConfig::from_path(&path).unwrap();
        check(&cfg).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(path.file_stem().unwrap().to_str().unwrap(), cfg.name);
        count += 1;
    }
    assert!(count >= 3);
}

#[test]
fn parse_errors_carry_the_field_path() {
    let bad = levins2(r#"{ "kind": "sweep", "deltas": [1.0, "x"] }"#);
    let path = config_path(ScenarioConfig::from_json(&bad).unwrap_err());
    assert!(path.starts_with("tasks[0]"), "{path}");

    let unknown = levins2(r#"{ "kind": "sweep", "deltas": [1.0], "colour": 1 }"#);
    assert!(ScenarioConfig::from_json(&unknown).is_err());
}

#[test]
fn grids_must_be_positive_and_increasing() {
    for (grid, ok) in [
        ("[0.5, 1.0, 2.0]", true),
        ("[1.0, 1.0]", false),
        ("[2.0, 1.0]", false),
        ("[0.0, 1.0]", false),
        ("[]", false),
        (r#"{ "from": 0.1, "to": 10.0, "points": 5 }"#, true),
        (r#"{ "from": 0.0, "to": 10.0, "points": 5 }"#, false),
        (r#"{ "from": 0.0, "to": 10.0, "points": 5, "spacing": "linear" }"#, false),
        (r#"{ "from": 1.0, "to": 10.0, "points": 10, "spacing": "linear" }"#, true),
    ] {
        let text = levins2(&format!(r#"{{ "kind": "asymptote", "deltas": {grid} }}"#));
        match ScenarioConfig::from_json(&text) {
            Ok(_) => assert!(ok, "{grid} accepted"),
            Err(e) => {
                assert!(!ok, "{grid} rejected: {e}");
                assert_eq!(config_path(e), "tasks[0].deltas");
            }
        }
    }
}

#[test]
fn log_grid_hits_its_endpoints() {
    let g = DeltaGrid::Range {
        from: 0.1,
        to: 1000.0,
        points: 9,
        spacing: Default::default(),
    };
    let v = g.values();
    assert_eq!(v.len(), 9);
    assert_eq!((v[0], v[8]), (0.1, 1000.0));
    assert!((v[4] - 10.0).abs() < 1e-12);
}

#[test]
fn exactly_one_model_source() {
    let ring_with_landscape = r#"{
      "name": "r",
      "model": { "kind": "circle", "n": 8, "s2": 1.0, "mean": 0.0, "amplitude": 0.1, "mode": 1 },
      "landscape": { "mu": [0,0,0,0,0,0,0,0], "var": [1,1,1,1,1,1,1,1] },
      "tasks": [{ "kind": "asymptote", "deltas": [1.0] }]
    }"#;
    assert_eq!(config_path(ScenarioConfig::from_json(ring_with_landscape).unwrap_err()), "landscape");

    let missing = r#"{ "name": "m", "model": { "kind": "levins", "n": 2 }, "tasks": [{ "kind": "ideal_free" }] }"#;
    assert_eq!(config_path(ScenarioConfig::from_json(missing).unwrap_err()), "landscape");

    let two_noises = LEVINS2
        .replace(r#""var": [1.0, 1.0]"#, r#""var": [1.0, 1.0], "exchangeable": { "var": 1.0, "rho": 0.0 }"#)
        .replace("TASKS", r#"{ "kind": "ideal_free" }"#);
    assert_eq!(config_path(ScenarioConfig::from_json(&two_noises).unwrap_err()), "landscape");
}

#[test]
fn inapplicable_methods_are_rejected() {
    let cfg = ScenarioConfig::from_json(&levins2(r#"{ "kind": "compare", "delta": 1.0, "methods": ["quadrature", "circle"] }"#)).unwrap();
    assert_eq!(config_path(check(&cfg).unwrap_err()), "tasks[0].methods[1]");

    let three = LEVINS2
        .replace(r#""n": 2"#, r#""n": 3"#)
        .replace("[0.3, 0.3]", "[0.3, 0.3, 0.3]")
        .replace("[1.0, 1.0]", "[1.0, 1.0, 1.0]")
        .replace("TASKS", r#"{ "kind": "density", "deltas": [1.0] }"#);
    let cfg = ScenarioConfig::from_json(&three).unwrap();
    assert!(matches!(execute(&cfg, &RunOptions::default()), Err(CliError::Config { .. })));

    let wrong_len = LEVINS2.replace("[0.3, 0.3]", "[0.3]").replace("TASKS", r#"{ "kind": "ideal_free" }"#);
    let cfg = ScenarioConfig::from_json(&wrong_len).unwrap();
    assert_eq!(config_path(check(&cfg).unwrap_err()), "landscape.mu");
}

#[test]
fn model_errors_propagate() {
    let text = LEVINS2
        .replace(r#"{ "kind": "levins", "n": 2 }"#, r#"{ "kind": "explicit", "q": [[-1.0, 1.0], [0.0, 0.0]] }"#)
        .replace("TASKS", r#"{ "kind": "ideal_free" }"#);
    let cfg = ScenarioConfig::from_json(&text).unwrap();
    let err = check(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(matches!(err, CliError::Model { source: patchdrift::Error::Reducible { .. }, .. }));
}

#[test]
fn sweep_columns_follow_methods() {
    let cfg = ScenarioConfig::from_json(&levins2(
        r#"{ "kind": "sweep", "deltas": [1.0, 2.0], "methods": ["quadrature", "mc_logS", "asymptote"], "references": true }"#,
    ))
    .unwrap();
    let out = execute(&cfg, &RunOptions::default()).unwrap();
    let t = out.table("sweep").unwrap();
    assert_eq!(
        t.header,
        ["delta", "quadrature", "mc_logS", "mc_logS_se", "asymptote", "upper_bound", "below_bound", "limit"]
    );
    assert_eq!(t.rows.len(), 4);
    let limit = t.numbers("limit");
    assert_eq!(limit[2], Some(-0.2));
    assert!((limit[3].unwrap() - 0.05).abs() < 1e-15);
    assert_eq!(out.csv_name("sweep"), "t.csv");
}

#[test]
fn default_methods_are_the_applicable_ones() {
    let cfg = ScenarioConfig::from_json(&levins2(r#"{ "kind": "compare", "delta": 5.0 }"#)).unwrap();
    let out = execute(&cfg, &RunOptions::default()).unwrap();
    let r = out.reports()[0];
    let names: Vec<_> = r.estimates.iter().map(|e| e.method).collect();
    assert_eq!(names, ["quadrature", "mc_logS", "mc_moments", "asymptote", "diagonalized"]);
    assert_eq!(r.verdicts.len(), 10);
    assert!(r.method(MethodName::Quadrature).is_some());
}

#[test]
fn normalized_config_round_trips() {
    let cfg = ScenarioConfig::from_path(&scenarios_dir().join("fig1.json")).unwrap();
    let first = execute(&cfg, &RunOptions::default()).unwrap();
    let text = first.config.to_json();
    let again = ScenarioConfig::from_json(&text).unwrap();
    assert_eq!(again, first.config);
    assert_eq!(again.hash(), cfg.hash());
    assert!(matches!(&again.tasks[0], TaskSpec::Sweep { deltas: DeltaGrid::Values(v), .. } if v.len() == 33));
    let second = execute(&again, &RunOptions::default()).unwrap();
    for t in &first.tasks {
        assert_eq!(t.output.table().to_csv(), second.table(&t.id).unwrap().to_csv());
    }
}

#[test]
fn seed_override_changes_hash_and_results() {
    let cfg = ScenarioConfig::from_json(&levins2(r#"{ "kind": "sweep", "deltas": [1.0], "methods": ["mc_logS"] }"#)).unwrap();
    let a = execute(&cfg, &RunOptions::default()).unwrap();
    let b = execute(&cfg, &RunOptions { seed: Some(99), ..Default::default() }).unwrap();
    assert_eq!(b.config.seed, 99);
    assert_ne!(a.config.hash(), b.config.hash());
    assert_ne!(a.table("sweep"), b.table("sweep"));
}

#[test]
fn outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::from_path(&scenarios_dir().join("islands.json")).unwrap();
    let out = execute(&cfg, &RunOptions::default()).unwrap();
    let m = write_outputs(&out, dir.path()).unwrap();
    let names: Vec<_> = m.files.iter().map(|f| f.file.as_str()).collect();
    assert_eq!(
        names,
        ["islands.config.json", "islands.compare.csv", "islands.compare.json", "islands.asymptote.csv"]
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("islands.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"], cfg.hash());
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    let csv = std::fs::read_to_string(dir.path().join("islands.asymptote.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("delta,a,b,chi"));
    for line in csv.lines().skip(1) {
        for cell in line.split(',') {
            let v: f64 = cell.parse().unwrap();
            assert_eq!(format!("{v:?}"), cell);
        }
    }
}

#[test]
fn binary_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let scen = scenarios_dir();

    let v = bin().args(["validate"]).arg(scen.join("fig3_ifd.json")).output().unwrap();
    assert!(v.status.success());
    let normalized: serde_json::Value = serde_json::from_slice(&v.stdout).unwrap();
    assert_eq!(normalized["tasks"][0]["id"], "ideal_free");

    let c = bin()
        .arg("compare")
        .arg(scen.join("ring_n16.json"))
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(c.status.success(), "{}", String::from_utf8_lossy(&c.stderr));
    let verdicts: serde_json::Value = serde_json::from_slice(&c.stdout).unwrap();
    assert_eq!(verdicts[0]["pass"], true);
    assert!(!dir.path().join("ring_n16.sweep.csv").exists());

    let r = bin()
        .arg("run")
        .arg(scen.join("fig3_ifd.json"))
        .args(["--seed", "8", "--out-dir"])
        .arg(dir.path())
        .env("PATCHDRIFT_THREADS", "2")
        .output()
        .unwrap();
    assert!(r.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig3_ifd.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 8);
    let csv = std::fs::read_to_string(dir.path().join("fig3_ifd.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("rho,patch,mu,y,bound"));
    assert_eq!(csv.lines().count(), 1 + 3 * 15);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{ "name": "b", "model": { "kind": "levins", "n": 2 }, "tasks": [] }"#).unwrap();
    let e = bin().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(e.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&e.stderr).contains("config error"));

    let t = bin().arg("run").arg(scen.join("fig3_ifd.json")).args(["--threads", "0"]).output().unwrap();
    assert_eq!(t.status.code(), Some(2));
}
