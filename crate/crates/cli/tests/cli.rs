use std::path::Path;
use std::process::{Command, Output};

fn wpb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wpb"))
        .args(args)
        .env("WPB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn radius_matches_the_oracle() {
    let o = wpb(&["radius", "--alpha", "1", "--beta", "1", "--bigM", "0", "--m", "100", "--d", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: f64 = stdout(&o).trim().parse().unwrap();
    assert!((r - 4.645_230_329_963_502).abs() < 1e-10 * r, "{r}");
}

#[test]
fn invalid_delta_in_config_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.json", r#"{"K": 1, "m": 500, "d": 3, "R": 2, "delta": 1.5, "w1": 0.5}"#);
    let o = wpb(&["bound", "mcallester", "--config", &c]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn unknown_flags_and_fields_are_config_errors() {
    assert_eq!(wpb(&["radius", "--gamma", "1"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.json", r#"{"alpha": 1, "beta": 1, "bigM": 0, "m": 100, "d": 3, "extra": 1}"#);
    assert_eq!(wpb(&["radius", "--config", &c]).status.code(), Some(1));
    assert_eq!(wpb(&["radius", "--alpha", "1"]).status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(wpb(&["--help"]).status.code(), Some(0));
}

#[test]
fn w1_of_a_cloud_with_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "# d=2 n=3\nx0,x1\n0,0\n1,2\n-3,0.5\n");
    let o = wpb(&["estimate-w1", &a, &a]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 0.0);
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.json", r#"{"alpha": 1, "beta": 1, "bigM": 0, "m": 10, "d": 3}"#);
    let from_config: f64 = stdout(&wpb(&["radius", "--config", &c])).trim().parse().unwrap();
    let overridden: f64 = stdout(&wpb(&["radius", "--config", &c, "--m", "100"])).trim().parse().unwrap();
    assert!((overridden - 4.645_230_329_963_502).abs() < 1e-10 * overridden);
    assert!(from_config != overridden);

    let c = write(dir.path(), "b.json", r#"{"K": 1, "m": 500, "d": 3, "R": 2, "delta": 1.5, "w1": 0.5}"#);
    let o = wpb(&["bound", "mcallester", "--config", &c, "--delta", "0.05"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let v = report["value"].as_f64().unwrap();
    assert!((v - 1.506_803_102_306_362).abs() < 1e-10 * v, "{v}");
}

#[test]
fn bound_report_is_written_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = wpb(&[
        "bound", "mcallester", "--K", "1", "--m", "500", "--d", "3", "--R", "2", "--delta", "0.05", "--w1", "0.5",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v, serde_json::from_str::<serde_json::Value>(&stdout(&o)).unwrap());
    assert!(v["components"].is_object());
}

#[test]
fn campaign_seed_flag_is_reproducible_and_persists() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(
        dir.path(),
        "v.json",
        r#"{
            "problem": {"loss": {"name": "bounded_sigmoid_margin", "params": {"x_bound": 1.0}},
                        "data": {"kind": "labeled_ball", "w_star": [1.0, 0.0], "x_bound": 1.0, "label_noise": 0.1},
                        "d": 2, "m": 50},
            "bound": {"name": "constant", "inputs": {"delta": 0.05}, "value": 1e9},
            "posterior": {"variance": 0.5},
            "trials": 3,
            "budgets": {"n_h": 5, "n_test": 10, "n_ot": 16}
        }"#,
    );
    let stem = dir.path().join("camp");
    let a = wpb(&["validate", "--config", &c, "--seed", "7", "--out", stem.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = wpb(&["validate", "--config", &c, "--seed", "7"]);
    assert_eq!(stdout(&a), stdout(&b));
    let s: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(s["violation_count"], 0);
    assert!(dir.path().join("camp.csv").exists() && dir.path().join("camp.json").exists());
}

#[test]
fn bwsgd_and_gibbs_sample_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let pot = r#""potential": {"loss": {"name": "quadratic_plain"},
                  "data": {"kind": "gaussian", "mean": [0.5, 0.5], "std": 1.0},
                  "d": 2, "m": 20, "lambda": 0.3, "prior": {"variance": 2.0}}"#;
    let c = write(
        dir.path(),
        "s.json",
        &format!(r#"{{{pot}, "eta": 0.004, "N": 20, "bigM": 5, "init": {{"variance": 1.0}}, "reference": true}}"#),
    );
    let out = dir.path().join("traj.csv");
    let o = wpb(&["bwsgd", "--config", &c, "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 22, "{text}");

    let g = write(
        dir.path(),
        "g.json",
        &format!(r#"{{{pot}, "ula": {{"n": 50, "step": 0.05, "burn_in": 100, "thinning": 2}}}}"#),
    );
    let cloud = dir.path().join("cloud.csv");
    let o = wpb(&["gibbs-sample", "--config", &g, "--n", "40", "--out", cloud.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c2 = cloud.to_str().unwrap();
    let w = wpb(&["estimate-w1", c2, c2]);
    assert_eq!(stdout(&w).trim(), "0");
    assert!(std::fs::read_to_string(&cloud).unwrap().starts_with("# d=2 n=40"));
}

#[test]
fn convergence_rejects_curvature_above_one() {
    let o = wpb(&["convergence", "--d", "2", "--lambda", "0.6", "--prior-variance", "1", "--seeds", "2", "--N", "5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = wpb(&["convergence", "--d", "2", "--lambda", "0.3", "--prior-variance", "2", "--seeds", "2", "--N", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn shipped_configs_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let cfg = |name: &str| root.join(name).to_str().unwrap().to_string();
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let runs: Vec<Vec<String>> = vec![
        vec!["bound".into(), "mcallester".into(), "--config".into(), cfg("mcallester_bound.json")],
        vec!["validate".into(), "--config".into(), cfg("mcallester.json"), "--trials".into(), "2".into()],
        vec!["validate".into(), "--config".into(), cfg("unbounded_lipschitz.json"), "--trials".into(), "2".into()],
        vec!["sgd-gen".into(), "--config".into(), cfg("sgd_gen.json"), "--trials".into(), "1".into()],
        vec!["convergence".into(), "--config".into(), cfg("convergence.json"), "--seeds".into(), "3".into()],
        vec!["bwsgd".into(), "--config".into(), cfg("bwsgd.json"), "--out".into(), out("t.csv")],
        vec!["gibbs-sample".into(), "--config".into(), cfg("gibbs_sample.json"), "--out".into(), out("g.csv")],
    ];
    for args in runs {
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = wpb(&argv);
        assert_eq!(o.status.code(), Some(0), "{argv:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
