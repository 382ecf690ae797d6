use std::process::{Command, Output};

fn relcm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relcm")).args(args).output().expect("binary runs")
}

fn csv_rows(out: &Output) -> Vec<Vec<String>> {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn gamma_at_origin_is_one() {
    let out = relcm(&["eval", "gamma", "--a-plus", "1", "--a-minus", "1", "--z", "0", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 1);
    assert!((num(&rows[0][6]) - 1.0).abs() < 1e-13 && num(&rows[0][7]).abs() < 1e-13);
}

#[test]
fn json_values_are_pairs() {
    let out = relcm(&["eval", "gamma", "--a-plus", "1", "--a-minus", "1.3", "--z", "0.2-0.1i"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rows"][0]["x"], serde_json::json!([0.2, -0.1]));
    assert_eq!(v["rows"][0]["value"].as_array().unwrap().len(), 2);
    assert!(v["build"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
    assert_eq!(v["quadrature"]["tol"], serde_json::json!(1e-9));
}

#[test]
fn psi_at_upper_scale_is_a_plane_wave() {
    let (ap, am) = (1.0, 1.4);
    let out = relcm(&["eval", "psi", "--b-mode", "a-minus", "--a-plus", "1", "--a-minus", "1.4", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 20);
    for r in rows {
        let (x, y) = (num(&r[1]), num(&r[3]));
        let phase = std::f64::consts::PI * x * y / (ap * am);
        assert!((num(&r[6]) - phase.cos()).abs() < 1e-9 && (num(&r[7]) - phase.sin()).abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn amplitudes_without_scattering() {
    let out = relcm(&["eval", "amplitudes", "--rho", "1", "--kappa", "4", "--n", "0", "--y-range", "0.1,2,5", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let us: Vec<_> = csv_rows(&out).into_iter().filter(|r| r[5] == "u").collect();
    assert_eq!(us.len(), 5);
    for r in us {
        assert!((num(&r[6]) - 1.0).abs() < 1e-10 && num(&r[7]).abs() < 1e-10, "{r:?}");
    }
}

#[test]
fn configuration_errors_exit_2() {
    for args in [
        &["scan", "--rho-kappa-range", "3,2,4"][..],
        &["scan", "--rho-kappa-range", "1,2,0"],
        &["eval", "gamma", "--a-plus", "1", "--a-minus", "1", "--rho", "1", "--kappa", "1", "--z", "0"],
        &["eval", "gamma", "--a-plus", "1", "--a-minus", "1", "--tol", "0", "--z", "0"],
        &["eval", "gamma", "--z", "1+"],
        &["verify", "no-such-suite"],
        &["frobnicate"],
    ] {
        assert_eq!(relcm(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn numerical_failure_exits_3() {
    // a pole of G
    let out = relcm(&["eval", "gamma", "--a-plus", "1", "--a-minus", "1", "--z", "-1i"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_is_deterministic_and_reports_csv() {
    let a = relcm(&["verify", "yang-baxter", "--seed", "7", "--format", "csv"]);
    let b = relcm(&["verify", "yang-baxter", "--seed", "7", "--format", "csv"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("suite,check,value,tol,pass\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
    assert!(String::from_utf8(a.stderr).unwrap().starts_with("PASS yang-baxter"));
}

#[test]
fn scan_rows_follow_the_windows() {
    let dir = std::env::temp_dir().join(format!("relcm-scan-{}", std::process::id()));
    let path = dir.with_extension("csv");
    let out = relcm(&["scan", "--rho-kappa-range", "2,4.5,2", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    // ρκ = 2: bound state, rank-one adjoint defect, E in (0, 2)
    assert_eq!(rows[0][2], "bound_state");
    assert_eq!(rows[0][7], "1");
    let e = num(rows[0][9]);
    assert!(e > 0.0 && e < 2.0);
    assert_eq!(rows[1][2], "unitary");
    assert_eq!(rows[1][7], "0");
    assert!(rows.iter().all(|r| r[10] == "ok"));
}
