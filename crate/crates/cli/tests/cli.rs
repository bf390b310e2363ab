use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use anneal_core::experiments::fixtures::read_matrix_file;
use anneal_core::experiments::validate_extremal;

fn anneal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anneal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = anneal(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn theta_ball_csv() {
    let csv = ok(&["theta-ball", "--n", "4", "--grid", "30"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,s,value"));
    let values: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 30);
    assert!(values.iter().all(|&v| v > 0.0 && v <= 5.0));
}

#[test]
fn separation_table_is_reproducible_and_has_long_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sep.csv");
    let args = [
        "separate",
        "--method",
        "ellipsoid",
        "--no-timing",
        "--seed",
        "3",
        "--out",
        path_str(&out),
    ];
    ok(&args);
    let first = fs::read(&out).unwrap();
    ok(&args);
    assert_eq!(first, fs::read(&out).unwrap());

    let text = String::from_utf8(first).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,objective,oracle_calls"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 10);
    let eighth: Vec<&str> = rows[7].split(',').collect();
    assert_eq!(eighth[0], "extremal_rand_8");
    assert!((eighth[1].parse::<f64>().unwrap() + 6.826558e-2).abs() < 1e-4);

    let long = fs::read_to_string(dir.path().join("sep.long.csv")).unwrap();
    assert!(long.starts_with("name,variable,value\nextremal_rand_1,objective,"));
    assert_eq!(long.lines().count(), 1 + 2 * 10);
}

#[test]
fn generated_extremal_file_feeds_separation() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("gen.txt");
    ok(&[
        "gen-instance",
        "--kind",
        "extremal",
        "--count",
        "2",
        "--seed",
        "11",
        "--out",
        path_str(&file),
    ]);
    let mats = read_matrix_file(&file).unwrap();
    assert_eq!(mats.len(), 2);
    for y in &mats {
        validate_extremal(&y.matrix).unwrap();
    }
    let csv = ok(&[
        "separate",
        "--method",
        "ellipsoid",
        "--fixtures",
        path_str(&file),
    ]);
    assert_eq!(
        csv.lines().next(),
        Some("name,objective,oracle_calls,seconds")
    );
    assert!(csv.contains("extremal_seed_11,"));
}

#[test]
fn objectives_are_unit_json() {
    let json = ok(&[
        "gen-instance",
        "--kind",
        "objective",
        "--m",
        "4",
        "--count",
        "3",
        "--seed",
        "2",
    ]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 3);
    for o in arr {
        let c: Vec<f64> = serde_json::from_value(o["c"].clone()).unwrap();
        assert_eq!(c.len(), 10);
        assert!((c.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn anneal_report_honours_config_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# cube run\noracle = cube\nn = 3\nN = 12\nell = 9\nseed = 4\nphases = 2\n",
    )
    .unwrap();
    let phases = dir.path().join("phases.csv");
    let json = ok(&[
        "anneal",
        "--config",
        path_str(&cfg),
        "--ell",
        "7",
        "--no-timing",
        "--csv",
        path_str(&phases),
    ]);
    let r: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(r["n"], 3);
    assert_eq!(r["n_samples"], 12);
    assert_eq!(r["walk_length"], 7);
    assert_eq!(r["seed"], 4);
    assert_eq!(r["phases"].as_array().unwrap().len(), 2);
    assert_eq!(r["final_point"].as_array().unwrap().len(), 3);
    let csv = fs::read_to_string(&phases).unwrap();
    assert!(csv.starts_with(
        "k,temperature,objective,mean_objective,phase_calls,oracle_calls,covariance_change\n"
    ));
    assert_eq!(csv.lines().count(), 3);

    assert_eq!(
        json,
        ok(&[
            "anneal",
            "--config",
            path_str(&cfg),
            "--ell",
            "7",
            "--no-timing"
        ])
    );
}

#[test]
fn ellipsoid_json() {
    let json = ok(&[
        "ellipsoid",
        "--oracle",
        "ball",
        "--n",
        "4",
        "--objective-seed",
        "1",
        "--tol",
        "1e-6",
    ]);
    let r: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(r["converged"], true);
    assert!((r["value"].as_f64().unwrap() + 1.0).abs() < 1e-5);
}

#[test]
fn small_gap_grid() {
    let csv = ok(&[
        "gap",
        "--m",
        "3",
        "--method",
        "kv",
        "--ell",
        "5",
        "--samples",
        "5,10",
        "--eps-bar",
        "1e-2",
        "--no-timing",
    ]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "m,ell,N,gap,oracle_calls");
    assert_eq!(lines.len(), 3);
    for l in &lines[1..] {
        let gap: f64 = l.split(',').nth(3).unwrap().parse().unwrap();
        assert!(gap > -1e-5 && gap < 2.0, "{l}");
    }
}

#[test]
fn cube_covlab_with_iid_column() {
    let csv = ok(&[
        "covlab",
        "--n",
        "3",
        "--ell",
        "0,5",
        "--samples",
        "50,200",
        "--ref-samples",
        "10",
        "--ref-ell",
        "1",
        "--no-timing",
    ]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "body,size,ell,N,rho");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("cube,3,0,50,"));
}

#[test]
fn bad_input_fails_cleanly() {
    for args in [
        vec!["covlab"],
        vec!["anneal", "--oracle", "sphere", "--n", "3"],
        vec!["anneal", "--oracle", "dnn"],
        vec!["separate", "--repeats", "0"],
    ] {
        let out = anneal(&args);
        assert!(!out.status.success(), "{args:?}");
        assert!(
            String::from_utf8_lossy(&out.stderr).contains("error"),
            "{args:?}"
        );
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "colour = blue\n").unwrap();
    let out = anneal(&["theta-ball", "--config", path_str(&cfg)]);
    assert!(!out.status.success());
}
