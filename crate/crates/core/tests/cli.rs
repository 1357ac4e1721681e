use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fmcw() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fmcw"));
    c.env_remove("FMCW_OUT_DIR");
    c
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    fmcw().args(args).arg("--out").arg(out).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows of a CSV file, split on commas.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn bias_reports_the_fifteen_degree_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("single_target.toml");
    let o = run(&["bias", "-c", cfg.to_str().unwrap(), "--theta-deg", "15"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = &rows(&dir.path().join("bias.csv"))[0];
    assert!((num(&r[1]) - 0.0019).abs() < 5e-5);
    assert!((num(&r[2]) - 0.399).abs() < 5e-4);
    assert!(stderr(&o).contains("config: "));
}

#[test]
fn fft_estimate_carries_the_predicted_bias() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("single_target.toml");
    let o = run(&["estimate", "-c", cfg.to_str().unwrap(), "--algo", "fft2d"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = &rows(&dir.path().join("estimate_fft2d.csv"))[0];
    assert!((num(&r[1]) - 5.0019).abs() < 5e-5, "{r:?}");
    assert!((num(&r[2]) - 15.397).abs() < 5e-3, "{r:?}");
}

#[test]
fn synth_then_mle_from_file_recovers_the_target() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("single_target.toml");
    let cfg = cfg.to_str().unwrap();
    let o = run(&["synth", "-c", cfg], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let header = dir.path().join("measurement.toml");
    assert!(header.exists() && dir.path().join("measurement.bin").exists());
    let o = run(
        &["estimate", "-c", cfg, "--algo", "mle", "--input", header.to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r = &rows(&dir.path().join("estimate_mle.csv"))[0];
    assert!((num(&r[1]) - 5.0).abs() < 1e-6 && (num(&r[2]) - 15.0).abs() < 1e-5, "{r:?}");
    let iters = rows(&dir.path().join("ml_iterations.csv"));
    assert!(!iters.is_empty() && iters.len() <= 101);
}

#[test]
fn spectra_are_written_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("two_targets.toml");
    for algo in ["fft2d", "music2d", "lse"] {
        let o = run(
            &["estimate", "-c", cfg.to_str().unwrap(), "--algo", algo, "--spectrum", "--pad", "2"],
            dir.path(),
        );
        assert!(o.status.success(), "{algo}: {}", stderr(&o));
        let text = fs::read_to_string(dir.path().join(format!("spectrum_{algo}.csv"))).unwrap();
        assert!(text.lines().count() > 100, "{algo}");
    }
}

#[test]
fn output_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = configs().join("two_targets.toml");
    for d in [&a, &b] {
        let o = run(
            &["estimate", "-c", cfg.to_str().unwrap(), "--algo", "lse", "--set", "snr_db=10", "--seed", "4"],
            d.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("estimate_lse.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn crb_decreases_with_snr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("single_target.toml");
    let o = run(&["crb", "-c", cfg.to_str().unwrap(), "--snr-db", "-10:5:30"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&dir.path().join("crb.csv"));
    assert_eq!(r.len(), 9);
    for w in r.windows(2) {
        assert!(num(&w[1][1]) < num(&w[0][1]) && num(&w[1][2]) < num(&w[0][2]));
    }
}

#[test]
fn small_sweep_writes_rmse_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("sweep_single.toml");
    let o = run(
        &[
            "sweep",
            "-c",
            cfg.to_str().unwrap(),
            "--set",
            "sweep.trials=3",
            "--set",
            "sweep.snr_db=[20.0]",
            "--set",
            "sweep.estimators=[\"fft2d\", \"mle\"]",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("override: sweep.trials=3"));
    let r = rows(&dir.path().join("rmse.csv"));
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|row| row[7] == "3"));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = fmcw()
        .args(["bias", "--theta-deg", "-20"])
        .env("FMCW_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let r = &rows(&dir.path().join("bias.csv"))[0];
    assert!(num(&r[1]) < 0.0);
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("single_target.toml");
    let o = run(
        &["estimate", "-c", cfg.to_str().unwrap(), "--set", "estimator.ml.dleta=1e-9"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dleta"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["bias"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["estimate"], dir.path()).status.code(), Some(1));
    assert_eq!(fmcw().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn unresolvable_targets_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("same.toml");
    fs::write(
        &cfg,
        "[[targets]]\nr = 5.0\ntheta_deg = 10.0\n\n[[targets]]\nr = 5.0\ntheta_deg = 10.0\nphi = 2.0\n",
    )
    .unwrap();
    let o = run(&["estimate", "-c", cfg.to_str().unwrap(), "--algo", "mle"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn exact_parking_run_writes_trajectory_and_reference() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["park", "--estimators", "exact"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let traj = rows(&dir.path().join("trajectory_exact_seed1.csv"));
    assert!(traj.len() > 300);
    let last = traj.last().unwrap();
    assert!((num(&last[2]) - num(&last[5])).abs() < 1e-6 && (num(&last[3]) - num(&last[6])).abs() < 1e-6);
    assert!(rows(&dir.path().join("reference_path.csv")).len() > 100);
    assert_eq!(rows(&dir.path().join("park_summary.csv")).len(), 1);
}

#[test]
fn parking_run_cut_short_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["park", "--estimators", "exact", "--set", "simulation.max_frames=20"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(dir.path().join("trajectory_exact_seed1.csv").exists());
}
