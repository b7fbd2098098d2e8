use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gmrf_core::io::{read_field_file, FieldData, KvReport};
use gmrf_core::{estimate_params, kl_univariate, patch_moments, NeighborhoodSpec, UniKLInputs};
use tempfile::TempDir;

fn gmrf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmrf"))
        .args(args)
        .output()
        .unwrap()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(out: &Path, beta: &str, seed: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "simulate",
        "--height",
        "64",
        "--width",
        "64",
        "--mu",
        "0",
        "--sigma2",
        "1",
        "--beta",
        beta,
        "--sweeps",
        "500",
        "--seed",
        seed,
        "-o",
        s(out),
    ];
    args.extend_from_slice(extra);
    gmrf(&args)
}

fn report(out: &Output) -> KvReport {
    KvReport::parse(std::str::from_utf8(&out.stdout).unwrap()).unwrap()
}

#[test]
fn simulate_writes_one_line_per_site() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "f.gmrf");
    let out = simulate(&f, "0.05", "7", &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&f).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("GMRF1 64 64 1"));
    assert_eq!(lines.count(), 4096);
    let summary = report(&out);
    assert_eq!(summary.get("seed"), Some("7"));
    assert_eq!(summary.get("sweeps"), Some("500"));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a"), path(&dir, "b"));
    assert!(simulate(&a, "0.05", "7", &[]).status.success());
    assert!(simulate(&b, "0.05", "7", &[]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn simulate_guards_stability() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "f");
    let out = simulate(&f, "0.2", "7", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stable"));
    assert!(!f.exists());
}

#[test]
fn simulate_unstable_override_diverges() {
    let dir = TempDir::new().unwrap();
    let out = gmrf(&[
        "simulate",
        "--height",
        "16",
        "--width",
        "16",
        "--beta",
        "0.5",
        "--sweeps",
        "400",
        "--allow-unstable",
        "-o",
        s(&path(&dir, "f")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_writes_snapshots() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "f");
    let out = gmrf(&[
        "simulate",
        "--height",
        "8",
        "--width",
        "8",
        "--beta",
        "0.05",
        "--sweeps",
        "10",
        "--snapshot-every",
        "5",
        "-o",
        s(&f),
    ]);
    assert!(out.status.success());
    assert!(dir.path().join("f.0000").exists());
    assert!(dir.path().join("f.0001").exists());
    assert!(!dir.path().join("f.0002").exists());
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(gmrf(&["simulate", "--height", "8"]).status.code(), Some(2));
    assert_eq!(
        gmrf(&["simulate", "--height", "8", "--width", "8", "--sigma2", "-1", "--sweeps", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        gmrf(&[
            "simulate", "--height", "8", "--width", "8", "--mu", "0,0", "--sigma", "1,0,0",
            "--sweeps", "1"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn estimate_round_trips_beta() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "f");
    let out = gmrf(&[
        "simulate",
        "--height",
        "128",
        "--width",
        "128",
        "--beta",
        "0.05",
        "--sweeps",
        "1000",
        "--seed",
        "3",
        "-o",
        s(&f),
    ]);
    assert!(out.status.success());
    let est = gmrf(&["estimate", s(&f)]);
    assert!(est.status.success());
    let r = report(&est);
    assert!((r.get_real("beta").unwrap() - 0.05).abs() <= 0.01);
    assert!(r.get_real("mu").unwrap().abs() < 0.1);
    assert_eq!(r.get("n_sites"), Some("16384"));
}

#[test]
fn estimate_constant_field_exits_four() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "c");
    let mut text = String::from("GMRF1 4 4 1\n");
    for _ in 0..16 {
        text.push_str("1.5\n");
    }
    std::fs::write(&f, text).unwrap();
    assert_eq!(gmrf(&["estimate", s(&f)]).status.code(), Some(4));
}

#[test]
fn estimate_rejects_dim_mismatch_and_bad_files() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "f");
    assert!(simulate(&f, "0.05", "1", &[]).status.success());
    assert_eq!(
        gmrf(&["estimate", s(&f), "--dim", "2"]).status.code(),
        Some(2)
    );
    let junk = path(&dir, "junk");
    std::fs::write(&junk, "not a field\n").unwrap();
    assert_eq!(gmrf(&["estimate", s(&junk)]).status.code(), Some(2));
    assert_eq!(
        gmrf(&["estimate", s(&path(&dir, "missing"))]).status.code(),
        Some(2)
    );
}

#[test]
fn kl_same_file_is_zero() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "f");
    assert!(simulate(&f, "0.05", "7", &[]).status.success());
    let out = gmrf(&["kl", s(&f), s(&f)]);
    assert!(out.status.success());
    assert!(report(&out).get_real("d_sym").unwrap().abs() <= 1e-12);
}

#[test]
fn kl_matches_library_exactly() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a"), path(&dir, "b"));
    assert!(simulate(&a, "0.02", "11", &[]).status.success());
    assert!(simulate(&b, "0.10", "12", &[]).status.success());
    let out = gmrf(&["kl", s(&a), s(&b)]);
    assert!(out.status.success());
    let r = report(&out);

    let spec = NeighborhoodSpec::second_order();
    let load = |p: &Path| match read_field_file(p).unwrap() {
        FieldData::Scalar(f) => f,
        FieldData::Multi(_) => panic!("expected a scalar field"),
    };
    let (fa, fb) = (load(&a), load(&b));
    let lib = kl_univariate(&UniKLInputs::new(
        estimate_params(&fa, &spec).unwrap().params,
        estimate_params(&fb, &spec).unwrap().params,
        patch_moments(&fa, &spec).unwrap(),
        patch_moments(&fb, &spec).unwrap(),
    ))
    .unwrap();
    assert!(lib.d_sym > 0.0);
    assert_eq!(r.get_real("d_pq").unwrap().to_bits(), lib.d_pq.to_bits());
    assert_eq!(r.get_real("d_qp").unwrap().to_bits(), lib.d_qp.to_bits());
    assert_eq!(r.get_real("d_sym").unwrap().to_bits(), lib.d_sym.to_bits());
}

#[test]
fn kl_accepts_moments_files_and_overrides() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a"), path(&dir, "b"));
    let (ma, mb) = (path(&dir, "a.mom"), path(&dir, "b.mom"));
    assert!(simulate(&a, "0.02", "1", &[]).status.success());
    assert!(simulate(&b, "0.08", "2", &[]).status.success());
    assert!(gmrf(&["estimate", s(&a), "--moments-out", s(&ma)])
        .status
        .success());
    assert!(gmrf(&["estimate", s(&b), "--moments-out", s(&mb)])
        .status
        .success());
    let from_fields = report(&gmrf(&["kl", s(&a), s(&b)]));
    let from_moments = report(&gmrf(&["kl", s(&ma), s(&mb)]));
    assert_eq!(from_fields.get("d_pq"), from_moments.get("d_pq"));
    assert!(from_moments.get("total.d_pq").is_none());

    let overridden = report(&gmrf(&[
        "kl",
        s(&ma),
        s(&mb),
        "--beta-p",
        "0.0",
        "--mu-q",
        "-0.5",
    ]));
    assert_ne!(overridden.get("d_pq"), from_moments.get("d_pq"));
}

#[test]
fn kl_multivariate_reports_traces() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a"), path(&dir, "b"));
    for (p, mu, sigma, beta) in [
        (&a, "0,0", "1,0.3,0.3,1", "0.05"),
        (&b, "0.5,-0.25", "1.5,-0.2,-0.2,0.8", "0.1"),
    ] {
        let out = gmrf(&[
            "simulate",
            "--height",
            "32",
            "--width",
            "32",
            "--mu",
            mu,
            "--sigma",
            sigma,
            "--beta",
            beta,
            "--sweeps",
            "100",
            "-o",
            s(p),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let out = gmrf(&["kl", s(&a), s(&b)]);
    assert!(out.status.success());
    let r = report(&out);
    assert!(r.get_real("d_sym").unwrap() > 0.0);
    for key in [
        "pq.trace.own_center",
        "pq.trace.other_cross",
        "qp.trace.mahalanobis",
    ] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn kl_incompatible_inputs_exit_two() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (path(&dir, "a"), path(&dir, "b"), path(&dir, "c"));
    assert!(simulate(&a, "0.05", "1", &[]).status.success());
    assert!(gmrf(&[
        "simulate",
        "--height",
        "32",
        "--width",
        "32",
        "--sweeps",
        "5",
        "-o",
        s(&b)
    ])
    .status
    .success());
    assert!(gmrf(&[
        "simulate",
        "--height",
        "64",
        "--width",
        "64",
        "--mu",
        "0,0",
        "--sweeps",
        "5",
        "-o",
        s(&c)
    ])
    .status
    .success());
    assert_eq!(gmrf(&["kl", s(&a), s(&b)]).status.code(), Some(2));
    assert_eq!(gmrf(&["kl", s(&a), s(&c)]).status.code(), Some(2));
}

#[test]
fn kl_singular_covariance_exits_five() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "s");
    let mut text = String::from("GMRF1 4 4 2\n");
    for i in 0..16 {
        let v = ((i * 7) % 5) as f64;
        text.push_str(&format!("{v} {v}\n"));
    }
    std::fs::write(&f, text).unwrap();
    assert_eq!(gmrf(&["kl", s(&f), s(&f)]).status.code(), Some(5));
}

#[test]
fn validate_equal_models_passes() {
    let out = gmrf(&[
        "validate",
        "--beta-p",
        "0.05",
        "--beta-q",
        "0.05",
        "--mu-q",
        "0",
        "--sigma2-q",
        "1",
        "--height",
        "32",
        "--width",
        "32",
        "--snapshots",
        "20",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(&out);
    assert_eq!(r.get_real("mc_estimate"), Some(0.0));
    assert_eq!(r.get("passed"), Some("true"));
}

#[test]
fn validate_unattainable_tolerance_exits_six() {
    let out = gmrf(&[
        "validate",
        "--tolerance",
        "1e-9",
        "--height",
        "32",
        "--width",
        "32",
        "--snapshots",
        "20",
    ]);
    assert_eq!(out.status.code(), Some(6));
    assert_eq!(report(&out).get("passed"), Some("false"));
}

#[test]
fn validate_multivariate() {
    let out = gmrf(&[
        "validate",
        "--mu-p",
        "0,0",
        "--sigma-p",
        "1,0.3,0.3,1",
        "--mu-q",
        "0.5,-0.25",
        "--sigma-q",
        "1.5,-0.2,-0.2,0.8",
        "--height",
        "64",
        "--width",
        "64",
        "--snapshots",
        "50",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
