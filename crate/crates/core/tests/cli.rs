use std::process::{Command, Output};

use rdiag::circular::{inf_spec, support_endpoints};

fn rdiag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdiag")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn parse_csv(text: &str) -> (String, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    (header, lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

#[test]
fn density_file_has_unit_mass() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rho.csv");
    let o = rdiag(&["density", "--lambda", "2", "--points", "512", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let (header, rows) = parse_csv(&std::fs::read_to_string(&path).unwrap());
    assert_eq!(header, "t,rho");
    assert_eq!(rows.len(), 512);
    // the emitted nodes are Chebyshev points on [s⁻, s⁺]; rebuild the weights
    let (a, b) = support_endpoints(2.0).unwrap();
    let n = rows.len() as f64;
    let mass: f64 = rows
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let theta = std::f64::consts::PI * (j as f64 + 0.5) / n;
            r[1].parse::<f64>().unwrap() * (b - a) / 2.0 * theta.sin() * std::f64::consts::PI / n
        })
        .sum();
    assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
}

#[test]
fn density_support_and_determinism() {
    let a = rdiag(&["density", "--lambda", "10", "--points", "64"]);
    let b = rdiag(&["density", "--lambda", "10", "--points", "64"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let (lo, hi) = support_endpoints(10.0).unwrap();
    let (_, rows) = parse_csv(&stdout(&a));
    for r in &rows {
        let t: f64 = r[0].parse().unwrap();
        assert!(t > lo && t < hi);
        assert_eq!(r[0].split('e').next().unwrap().trim_start_matches('-').replace('.', "").len(), 17);
    }
    let inv = rdiag(&["density", "--lambda", "10", "--points", "64", "--inverse"]);
    let (_, rows) = parse_csv(&stdout(&inv));
    assert!(rows.iter().all(|r| r[0].parse::<f64>().unwrap() > 1.0 / hi.sqrt() - 1e-12));
}

#[test]
fn density_rejects_lambda_one() {
    let o = rdiag(&["density", "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn moments_example() {
    let o = rdiag(&["moments", "--model", "circular", "--lambda", "2", "--k", "1", "--route", "all"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().nth(2).unwrap().starts_with("1,m_-4,16/81,16/81,"), "{text}");
    assert!(text.contains("max_discrepancy_exact,0\n"));
    for model in ["circular", "haar", "two-atom"] {
        let o = rdiag(&["moments", "--model", model, "--lambda", "5/4", "--k", "0", "--route", "psd"]);
        assert!(stdout(&o).lines().nth(1).unwrap().starts_with("0,m_-2,16/9,"), "{model}");
    }
}

#[test]
fn moments_from_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, r#"{"name": "atoms", "aa_star_measure": {"atoms": [{"x": 0, "w": "1/2"}, {"x": 2, "w": "1/2"}]}}"#).unwrap();
    let a = rdiag(&["moments", "--model", path.to_str().unwrap(), "--lambda", "3/2", "--k", "2"]);
    let b = rdiag(&["moments", "--model", "two-atom", "--lambda", "3/2", "--k", "2"]);
    assert!(a.status.success(), "{a:?}");
    assert_eq!(a.stdout, b.stdout);
    std::fs::write(&path, "{not json").unwrap();
    assert_eq!(rdiag(&["moments", "--model", path.to_str().unwrap(), "--lambda", "2", "--k", "0"]).status.code(), Some(2));
}

#[test]
fn norm_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("norm.csv");
    let o = rdiag(&["norm", "--model", "circular", "--lambda-start", "1.001", "--lambda-end", "2", "--steps", "30", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let (header, rows) = parse_csv(&std::fs::read_to_string(&path).unwrap());
    assert_eq!(header, "lambda,norm,asymptotic,ratio,route");
    assert_eq!(rows.len(), 30);
    let ratio: f64 = rows[0][3].parse().unwrap();
    assert!((ratio - 1.0).abs() < 0.01);
    let last = &rows[29];
    assert_eq!(last[0].parse::<f64>().unwrap(), 2.0);
    let want = inf_spec(2.0).unwrap().powf(-0.5);
    assert!((last[1].parse::<f64>().unwrap() - want).abs() < 1e-9 * want);
    assert_eq!(last[4], "closed-form");
}

#[test]
fn norm_rejects_haar() {
    let o = rdiag(&["norm", "--model", "haar", "--lambda-start", "1.1", "--lambda-end", "2", "--steps", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("v = 0"));
}

#[test]
fn counts() {
    assert_eq!(stdout(&rdiag(&["count", "--what", "nc", "--n", "6"])), "132\n");
    assert_eq!(stdout(&rdiag(&["count", "--what", "tilings", "--k", "3"])), "12\n");
    assert_eq!(stdout(&rdiag(&["count", "--what", "psd", "--k", "1", "--profile", "4,0"])), "1\n");
    let o = rdiag(&["count", "--what", "tilings", "--k", "40"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("enumeration bound"));
}

#[test]
fn verify_reports_and_fault_injection() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let o = rdiag(&["verify", "--suite", "combinatorial", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    let triple = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "triple_route_moments").unwrap();
    assert_eq!(triple["residual"], 0.0);

    let bad = rdiag(&["verify", "--suite", "combinatorial", "--inject-fault"]);
    assert_eq!(bad.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(v["passed"], false);
}

#[test]
fn verify_all_passes() {
    let o = rdiag(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let suites: std::collections::BTreeSet<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["suite"].as_str().unwrap()).collect();
    assert_eq!(suites.len(), 3);
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(rdiag(&["moments", "--model", "circular"]).status.code(), Some(2));
    assert_eq!(rdiag(&["verify", "--suite", "everything"]).status.code(), Some(2));
    assert_eq!(rdiag(&["norm", "--model", "circular", "--lambda-start", "2", "--lambda-end", "1.5", "--steps", "3"]).status.code(), Some(2));
}
