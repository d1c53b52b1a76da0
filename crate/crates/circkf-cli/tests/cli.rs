//! End-to-end checks of the binary: row counts, header echoes, override
//! precedence, exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_circkf"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("circkf-cli-test-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn data_rows(path: &Path) -> usize {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("t,") && !l.trim().is_empty())
        .count()
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

#[test]
fn simulate_row_count_and_header() {
    let dir = tmp_dir("simulate");
    let out = dir.join("traj.csv");
    let res = run(bin()
        .args(["simulate", "--kappa-phi", "1", "--kappa-u", "10", "--T", "10"])
        .args(["--dt", "0.01", "--seed", "7", "--out"])
        .arg(&out));
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(data_rows(&out), 1001);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# kind = circular"));
    assert!(text.contains("# seed = 7"));
    // identical invocation reproduces the file bit by bit
    let out2 = dir.join("traj2.csv");
    run(bin()
        .args(["simulate", "--kappa-phi", "1", "--kappa-u", "10", "--T", "10"])
        .args(["--dt", "0.01", "--seed", "7", "--out"])
        .arg(&out2));
    assert_eq!(fs::read(&out).unwrap(), fs::read(&out2).unwrap());
}

#[test]
fn filter_consumes_trajectory_headers() {
    let dir = tmp_dir("filter");
    let traj = dir.join("traj.csv");
    run(bin()
        .args(["simulate", "--kappa-phi", "1", "--kappa-u", "10", "--kappa-z", "5"])
        .args(["--T", "2", "--dt", "0.01", "--seed", "3", "--out"])
        .arg(&traj));
    let trace = dir.join("trace.csv");
    let res = run(bin()
        .args(["filter", "--filter", "circkf", "--init", "calibrated:2", "--traj"])
        .arg(&traj)
        .arg("--out")
        .arg(&trace));
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(data_rows(&trace), 201);
    let text = fs::read_to_string(&trace).unwrap();
    assert!(text.contains("# kappa_z = 5"), "params picked up from the trajectory header");
    assert!(text.contains("t,mu,kappa,r"));
}

#[test]
fn mc_summary_and_override_precedence() {
    let dir = tmp_dir("mc");
    let cfg = dir.join("exp.cfg");
    fs::write(
        &cfg,
        "[model]\nkind = circular\nkappa_phi = 1\nkappa_u = 10\ndt = 0.01\n\n\
         [experiment]\nruns = 5\nT = 0.5\nseed = 11\nfilters = vm_increment\ninit = calibrated:2\n",
    )
    .unwrap();

    // config value used when no flag given
    let out_a = dir.join("a");
    let res = run(bin().args(["mc", "--config"]).arg(&cfg).arg("--out-dir").arg(&out_a));
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = fs::read_to_string(out_a.join("summary.csv")).unwrap();
    assert!(summary.contains("# runs = 5"), "config beats default");
    assert!(summary.contains("# n_runs = 5"));

    // flag beats config
    let out_b = dir.join("b");
    run(bin()
        .args(["mc", "--config"])
        .arg(&cfg)
        .args(["--runs", "3", "--out-dir"])
        .arg(&out_b));
    let summary = fs::read_to_string(out_b.join("summary.csv")).unwrap();
    assert!(summary.contains("# runs = 3"), "flag beats config");

    // default when neither sets the key (runs default = 100)
    let out_c = dir.join("c");
    run(bin()
        .args(["mc", "--kappa-phi", "1", "--kappa-u", "10", "--T", "0.2"])
        .args(["--filters", "vm_increment", "--out-dir"])
        .arg(&out_c));
    let summary = fs::read_to_string(out_c.join("summary.csv")).unwrap();
    assert!(summary.contains("# runs = 100"), "documented default applies");
}

#[test]
fn unknown_config_key_exits_3_with_location() {
    let dir = tmp_dir("badcfg");
    let cfg = dir.join("bad.cfg");
    fs::write(&cfg, "[model]\nnot_a_key = 1\n").unwrap();
    let res = run(bin().args(["mc", "--config"]).arg(&cfg));
    assert_eq!(res.status.code(), Some(3));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 2"), "{err}");
    assert!(err.contains("not_a_key"), "{err}");
    assert!(err.contains("kappa_phi"), "error lists valid keys: {err}");
}

#[test]
fn usage_error_exits_2() {
    let res = run(bin().arg("frobnicate"));
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn io_error_exits_5() {
    let res = run(bin().args([
        "mc",
        "--kappa-phi",
        "1",
        "--kappa-u",
        "10",
        "--T",
        "0.1",
        "--runs",
        "1",
        "--filters",
        "vm_increment",
        "--out-dir",
        "/proc/definitely/not/writable",
    ]));
    assert_eq!(res.status.code(), Some(5));
}

#[test]
fn selftest_passes() {
    let res = run(bin().arg("selftest"));
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    let out = String::from_utf8_lossy(&res.stdout);
    for suite in ["conjugacy-grid", "xi-round-trip", "k1-reduction", "gkbf-steady-state"] {
        assert!(out.contains(suite), "{out}");
    }
    assert!(!out.contains("FAIL"), "{out}");
}

#[test]
fn sweep_writes_per_value_summaries() {
    let dir = tmp_dir("sweep");
    let out = dir.join("out");
    let res = run(bin()
        .args(["sweep", "--kappa-phi", "1", "--kappa-u", "1", "--kappa-z", "1"])
        .args(["--T", "0.3", "--runs", "4", "--filters", "circkf", "--seed", "5"])
        .args(["--param", "kappa_z", "--values", "1,10", "--out-dir"])
        .arg(&out));
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("sweep_kappa_z.csv").exists());
    assert!(out.join("summary_kappa_z_1.csv").exists());
    assert!(out.join("summary_kappa_z_10.csv").exists());
    let text = fs::read_to_string(out.join("sweep_kappa_z.csv")).unwrap();
    assert!(text.contains("value,filter,r_mean_T,r_hat_T,n_runs"));
}

#[test]
fn timing_reports_all_filters() {
    let dir = tmp_dir("timing");
    let out = dir.join("out");
    let res = run(bin()
        .args(["timing", "--kappa-phi", "1", "--kappa-u", "1", "--kappa-z", "10"])
        .args(["--T", "0.5", "--filters", "circkf,pf:100", "--out-dir"])
        .arg(&out));
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(out.join("timing.csv")).unwrap();
    assert!(text.contains("circkf,"));
    assert!(text.contains("pf100,"));
}
