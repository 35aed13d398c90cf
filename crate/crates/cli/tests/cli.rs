use std::path::Path;
use std::process::{Command, Output};

fn offdiag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_offdiag")).args(args).env("OFFDIAG_LOG", "error").output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap()
}

const SMALL: &str = r#"{"horizons": {"defect": [1000, 2000], "series": 20000, "levels": 200}}"#;

fn with_small(operator: &str) -> String {
    let mut v: serde_json::Value = serde_json::from_str(SMALL).unwrap();
    v["operator"] = serde_json::from_str(operator).unwrap();
    v.to_string()
}

#[test]
fn analyze_limit_circle_jacobi() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &with_small(r#"{"kind": "jacobi", "a": "0", "b": "n^2"}"#));
    let out = dir.path().join("out");
    let o = offdiag(&["analyze", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["verdict"]["verdict"], "NotESA");
    assert_eq!(r["verdict"]["deficiency"]["n_plus"], 1);
    assert_eq!(r["verdict"]["deficiency"]["n_minus"], 1);
    assert_eq!(r["verdict"]["deficiency"]["confidence"], "Stable");
    assert!(r.get("timing").is_none());
    assert!(out.join("timing.json").exists());
    // every table the report lists exists and has a header row
    for t in r["tables"].as_array().unwrap() {
        let text = std::fs::read_to_string(out.join(t.as_str().unwrap())).unwrap();
        assert!(text.lines().next().unwrap().contains(','), "{t}");
    }
    let ineq = std::fs::read_to_string(out.join("inequalities.csv")).unwrap();
    assert!(ineq.lines().count() > 1);
}

#[test]
fn analyze_carleman_divergent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &with_small(r#"{"kind": "jacobi", "a": "0", "b": "sqrt(n)"}"#));
    let out = dir.path().join("out");
    let o = offdiag(&["analyze", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["verdict"]["verdict"], "ESA");
    assert_eq!(r["verdict"]["provenance"], "carleman");
}

#[test]
fn determinism_and_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &with_small(r#"{"kind": "ncpoly", "expr": "p*q*p"}"#));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (d, w) in [(&a, "1"), (&b, "3")] {
        let o = offdiag(&["analyze", "--config", &cfg, "--out", d.to_str().unwrap(), "--seed", "42", "--workers", w]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let body = std::fs::read(a.join("report.json")).unwrap();
    assert_eq!(body, std::fs::read(b.join("report.json")).unwrap());
    let r = report(&a);
    assert_eq!(r["seed"], 42);
    assert_eq!(r["verdict"]["verdict"], "NotESA");
    // the echo alone reproduces the verdict
    let echo = write(dir.path(), "echo.json", &r["config"].to_string());
    let c = dir.path().join("c");
    assert_eq!(offdiag(&["analyze", "--config", &echo, "--out", c.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(std::fs::read(c.join("report.json")).unwrap(), body);
}

#[test]
fn config_errors_exit_one_and_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("bad_json.json", "{not json"),
        ("non_symmetric.json", r#"{"operator": {"kind": "ncpoly", "expr": "p*q"}}"#),
        ("tolerance.json", r#"{"operator": {"kind": "ncpoly", "expr": "q"}, "tolerances": {"commutator": 1.0}}"#),
        ("two_kinds.json", r#"{"operator": {"kind": "ncpoly", "expr": "q", "a": "0"}}"#),
        ("horizon.json", r#"{"operator": {"kind": "ncpoly", "expr": "q"}, "horizons": {"defect": [0]}}"#),
    ];
    for (name, text) in cases {
        let cfg = write(dir.path(), name, text);
        let o = offdiag(&["analyze", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(name), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let missing = dir.path().join("missing.json");
    let o = offdiag(&["analyze", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
    assert_eq!(offdiag(&["analyze"]).status.code(), Some(1));
    assert_eq!(offdiag(&["bogus"]).status.code(), Some(1));
}

#[test]
fn sweep_in_grid_order_with_failures_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", &with_small(r#"{"kind": "jacobi", "a": "0", "b": "n^alpha"}"#));
    let out = dir.path().join("sweep");
    let o = offdiag(&["sweep", "--config", &cfg, "--grid", "alpha=0.5:3:0.5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&std::fs::read(out.join("sweep.json")).unwrap()).unwrap();
    let values: Vec<f64> = rows.iter().map(|r| r["value"].as_f64().unwrap()).collect();
    assert_eq!(values, vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
    for r in &rows {
        let a = r["value"].as_f64().unwrap();
        let want = if a <= 1.0 { "ESA" } else { "NotESA" };
        assert_eq!(r["verdict"], want, "{r}");
        if a <= 1.0 {
            assert_eq!(r["carleman"], "ESA");
        } else {
            assert_eq!((r["n_plus"].as_u64(), r["n_minus"].as_u64()), (Some(1), Some(1)), "{r}");
        }
        assert_eq!(r["agreement"], true, "{r}");
        assert!(out.join(r["directory"].as_str().unwrap()).join("report.json").exists());
    }
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("param,value,verdict"));

    // a grid point whose operator cannot be evaluated is recorded, the rest still run
    let cfg = write(dir.path(), "f.json", &with_small(r#"{"kind": "jacobi", "a": "0", "b": "n^2 * sqrt(s)"}"#));
    let out = dir.path().join("failing");
    let o = offdiag(&["sweep", "--config", &cfg, "--grid", "s=-1:1:2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&std::fs::read(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0]["error"].as_str().is_some(), "{}", rows[0]);
    assert_eq!(rows[1]["verdict"], "NotESA");

    let o = offdiag(&["sweep", "--config", &cfg, "--grid", "beta=1:2:1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = offdiag(&["sweep", "--config", &cfg, "--grid", "s=1:2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn family_report_includes_joint_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "f.json",
        r#"{"operator": {"kind": "family", "exprs": ["p1", "q2"], "k": 2}, "horizons": {"defect": [1000, 2000], "series": 20000, "levels": 40}}"#,
    );
    let out = dir.path().join("out");
    let o = offdiag(&["analyze", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["nelson"]["verdict"], "JointEsa");
    assert_eq!(r["nelson"]["commutator_residual"], 0.0);
}

#[test]
fn selftest_subset() {
    let o = offdiag(&["selftest", "--only", "2,7"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().all(|l| l.contains("PASS")));
}
