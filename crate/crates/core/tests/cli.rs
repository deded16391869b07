use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn mindiss(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mindiss"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn geodesic_outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = ["geodesic", "--model", "chain", "--N", "6", "--eps-final", "3"];
    let a = mindiss(&args, &dir.path().join("a"));
    let b = mindiss(&args, &dir.path().join("a"));
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let csv = fs::read_to_string(dir.path().join("a/trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,eps,J,ds_dt\n"));
    let summary = json(&dir.path().join("a/summary.json"));
    assert_eq!(summary["version"], mindiss::VERSION);
    assert_eq!(summary["config"]["N"], 6);
    assert_eq!(summary["config"]["model"], "chain");
    assert_eq!(summary["result"]["converged"], true);
}

#[test]
fn chain_trajectories_do_not_depend_on_size() {
    let dir = TempDir::new().unwrap();
    for n in ["5", "50"] {
        let o = mindiss(&["geodesic", "--model", "chain", "--N", n, "--eps-final", "3"], &dir.path().join(n));
        assert_eq!(o.status.code(), Some(0));
    }
    let column = |n: &str| -> Vec<String> {
        fs::read_to_string(dir.path().join(n).join("trajectory.csv"))
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(column("5"), column("50"));
}

#[test]
fn config_file_overrides_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"N": 3, "kind": "nbody", "grid": 10}"#).unwrap();
    let o = mindiss(&["protocol", "--N", "7", "--config", cfg.to_str().unwrap()], &dir.path().join("p"));
    assert_eq!(o.status.code(), Some(0));
    let summary = json(&dir.path().join("p/protocol.json"));
    assert_eq!(summary["config"]["N"], 3);
    assert!(summary["config"].get("config").is_none());
    let table = fs::read_to_string(dir.path().join("p/protocol.csv")).unwrap();
    assert_eq!(table.lines().count(), 12);
    let last: f64 = table.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert_eq!(last, 1.0 - 1e-6);
}

#[test]
fn validation_errors_exit_with_2() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"N": 3, "colour": "red"}"#).unwrap();
    let o = mindiss(&["bounds", "--config", cfg.to_str().unwrap()], &dir.path().join("b"));
    assert_eq!(o.status.code(), Some(2));
    let err = json(&dir.path().join("b/error.json"));
    assert_eq!(err["error"]["kind"], "validation");
    assert!(err["error"]["message"].as_str().unwrap().contains("colour"));

    let o = mindiss(&["decompose", "--N", "13"], &dir.path().join("d"));
    assert_eq!(o.status.code(), Some(2));
    let o = mindiss(&["geodesic", "--eps-final", "-2"], &dir.path().join("g"));
    assert_eq!(o.status.code(), Some(2));
    let o = mindiss(&["sweep", "--model", "nonsense"], &dir.path().join("s"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreachable_target_exits_with_3() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("tight.json");
    // A two-point scan with no refinement cannot bracket the target.
    fs::write(
        &cfg,
        r#"{"model": "all_to_all", "N": 6, "shoot": {"scan": 2, "refine_depth": 0, "j_max": 0.01}}"#,
    )
    .unwrap();
    let o = mindiss(&["geodesic", "--config", cfg.to_str().unwrap()], &dir.path().join("g"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&dir.path().join("g/error.json"))["error"]["kind"], "non_convergence");
}

#[test]
fn pyramid_sweep_table() {
    let dir = TempDir::new().unwrap();
    let o = mindiss(&["sweep", "--model", "pyramid", "--D", "3", "--aperture", "8", "--layers", "2..6"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> =
        table.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        let m = r[0] - 1.0;
        assert_eq!(r[3], 4.0 * m * m * std::f64::consts::PI * std::f64::consts::PI);
    }
    assert_eq!(rows[0][1], 1.0 + 81.0);
}

#[test]
fn decompose_reports_every_order() {
    let dir = TempDir::new().unwrap();
    let o = mindiss(&["decompose", "--N", "6", "--times", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let out = json(&dir.path().join("decompose.json"));
    let orders = out["result"]["snapshots"][0]["max_abs_by_order"].as_array().unwrap();
    assert!(orders[2..].iter().all(|c| c.as_f64().unwrap() > 1e-6));

    let o = mindiss(&["decompose", "--N", "5", "--kind", "local"], &dir.path().join("local"));
    assert_eq!(o.status.code(), Some(0));
    let out = json(&dir.path().join("local/decompose.json"));
    for snap in out["result"]["snapshots"].as_array().unwrap() {
        let orders = snap["max_abs_by_order"].as_array().unwrap();
        assert!(orders[2..].iter().all(|c| c.as_f64().unwrap() < 1e-10));
    }
}

#[test]
fn fit_refits_a_sweep() {
    let dir = TempDir::new().unwrap();
    let o = mindiss(&["sweep", "--model", "local", "--sizes", "5,10,20,40,80"], &dir.path().join("s"));
    assert_eq!(o.status.code(), Some(0));
    let input = dir.path().join("s/sweep.csv");
    let o = mindiss(&["fit", "--input", input.to_str().unwrap()], &dir.path().join("f"));
    assert_eq!(o.status.code(), Some(0));
    let fit = json(&dir.path().join("f/fit.json"));
    assert!((fit["result"]["exponent"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let alpha = fit["result"]["alpha"].as_f64().unwrap();
    assert!((alpha - std::f64::consts::PI.powi(2) / 4.0).abs() < 1e-12);
}

#[test]
fn selftest_passes() {
    let dir = TempDir::new().unwrap();
    let o = mindiss(&["selftest", "--seed", "5"], dir.path());
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert_eq!(o.status.code(), Some(0), "{stderr}");
    assert!(stderr.lines().all(|l| l.starts_with("PASS ")));
}
