use std::path::PathBuf;
use std::process::{Command, Output};

use disco_isac::config::KEYS;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_disco-isac"))
}

fn reference_cfg() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/reference.cfg")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn mu_bar_prints_default_value() {
    let cfg = reference_cfg();
    let o = run(&["mu-bar", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 1.6078).abs() <= 5e-4, "{v}");
}

#[test]
fn unknown_override_key_exits_1_naming_the_key() {
    let o = run(&["mu-bar", "--set", "dris.n_x=4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dris.n_x"), "{}", stderr(&o));
}

#[test]
fn validation_failures_exit_1() {
    for args in [
        vec!["mu-bar", "--config", "/nonexistent/cfg.toml"],
        vec!["simulate", "sumrate_vs_nd", "--trials", "0", "--quiet"],
        vec!["simulate", "no_such_sweep"],
        vec!["verify", "thm1", "--trials", "10"],
        vec!["verify", "prop1", "--trials", "100"],
        vec!["mu-bar", "--set", "kappa=1.5"],
        vec!["frobnicate"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn unwritable_output_exits_2() {
    let o = run(&["mu-bar", "--output", "/nonexistent-dir/x.txt"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn simulate_is_byte_identical_and_leaves_config_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::copy(reference_cfg(), &cfg).unwrap();
    let before = std::fs::read(&cfg).unwrap();
    let mut outs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("nd_{i}.csv"));
        let o = run(&[
            "simulate",
            "sumrate_vs_nd",
            "--config",
            cfg.to_str().unwrap(),
            "--trials",
            "8",
            "--seed",
            "99",
            "--output",
            out.to_str().unwrap(),
            "--quiet",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        outs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    assert_eq!(std::fs::read(&cfg).unwrap(), before);
    let text = String::from_utf8(outs[0].clone()).unwrap();
    assert!(text.starts_with("sweep_value,curve_name,mean,stderr,trials\n"));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 1 + 4 * 7);
}

#[test]
fn seed_changes_output() {
    let a = run(&["simulate", "sumrate_vs_nd", "--trials", "4", "--seed", "1", "--quiet"]);
    let b = run(&["simulate", "sumrate_vs_nd", "--trials", "4", "--seed", "2", "--quiet"]);
    assert!(a.status.success() && b.status.success());
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn help_lists_every_key() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for (k, unit) in KEYS {
        assert!(text.contains(k), "missing {k}");
        assert!(text.contains(unit), "missing unit for {k}");
    }
}

#[test]
fn spectrum_exports_two_columns() {
    let o = run(&[
        "spectrum",
        "strict-clean",
        "--set",
        "dris.n_h=8",
        "--set",
        "dris.n_v=8",
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("angle_deg,value"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1801);
    assert!(rows.iter().all(|r| r.split(',').count() == 2));
}

#[test]
fn verify_thm1_reports_every_user() {
    let o = run(&[
        "verify",
        "thm1",
        "--set",
        "n_tx=4",
        "--set",
        "n_users=2",
        "--set",
        "frame_len=6",
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.ends_with(",false") || l.ends_with(",true")));
}
