use std::path::Path;
use std::process::{Command, Output};

fn lrscb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrscb"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn run_small(dir: &Path, threads: &str) -> Vec<u8> {
    let out = lrscb(&[
        "run", "--algo", "oful,alb-norm,lr-scb", "--d", "4", "--k", "5", "--t", "512", "--trials", "3",
        "--seed", "9", "--threads", threads, "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::read(dir.join("trials.csv")).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&lrscb(&["--help"])), 0);
    assert_eq!(code(&lrscb(&["--version"])), 0);
}

#[test]
fn usage_and_config_errors_exit_one() {
    assert_eq!(code(&lrscb(&["run", "--no-such-flag"])), 1);
    assert_eq!(code(&lrscb(&[])), 1);
    let dir = tempfile::tempdir().unwrap();
    let out = lrscb(&["run", "--d", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("`d`"));
    assert_eq!(code(&lrscb(&["run", "--algo", "linucb"])), 1);
    assert_eq!(code(&lrscb(&["run", "--preset", "figure-d99"])), 1);
}

#[test]
fn csv_is_identical_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let one = run_small(a.path(), "1");
    let three = run_small(b.path(), "3");
    assert!(!one.is_empty());
    assert_eq!(one, three);
    let again = run_small(a.path(), "1");
    assert_eq!(one, again);
}

#[test]
fn single_oful_trial_has_nine_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = lrscb(&["run", "--algo", "oful", "--t", "256", "--trials", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(dir.path().join("trials.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("trial,algorithm,t,cum_regret"));
    let ts: Vec<&str> = lines.map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(ts, ["1", "2", "4", "8", "16", "32", "64", "128", "256"]);
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn slope_reads_run_output() {
    let dir = tempfile::tempdir().unwrap();
    run_small(dir.path(), "1");
    let csv = dir.path().join("trials.csv");
    let out = lrscb(&["slope", "--input", csv.to_str().unwrap(), "--t-min", "16"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("lr-scb,3,")));
    assert_eq!(code(&lrscb(&["slope", "--input", "/nonexistent/trials.csv"])), 1);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "algorithms = [\"oful\"]\nd = 3\nk = 4\nt = 64\ntrials = 2\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = lrscb(&[
        "run", "--config", cfg.to_str().unwrap(), "--trials", "1", "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 7);

    std::fs::write(&cfg, "d = 3\nunknown_key = 1\n").unwrap();
    assert_eq!(code(&lrscb(&["run", "--config", cfg.to_str().unwrap()])), 1);
}

#[test]
fn shipped_presets_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
    for name in ["figure-d20", "figure-d25", "figure-d30"] {
        let text = std::fs::read_to_string(dir.join(format!("{name}.toml"))).unwrap();
        let parsed = lrscb_core::ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(parsed, lrscb_core::ExperimentConfig::preset(name).unwrap());
    }
}

#[test]
fn audit_exit_codes() {
    assert_eq!(code(&lrscb(&["audit-contexts", "--d", "6"])), 0);
    assert_eq!(code(&lrscb(&["audit-contexts", "--d", "6", "--rho-min", "0.5"])), 2);
    assert_eq!(code(&lrscb(&["audit-contexts", "--d", "6", "--samples", "10"])), 1);
}

#[test]
fn bound_curve_marks_small_horizons_out_of_regime() {
    let out = lrscb(&["bound-curve", "--d", "1", "--k", "2", "--delta", "0.5", "--rho-min", "1", "--t", "100000000"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows[0].ends_with("out-of-regime,,"));
    let last: Vec<&str> = rows[7].split(',').collect();
    assert!(last[3].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn shift_verify_reports_each_check() {
    let out = lrscb(&["shift-verify", "--d", "4", "--k", "4", "--t", "300", "--trials", "30", "--samples", "1000"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("dominance frequency"));
    assert!(text.contains("argmax coincidence"));
    assert!(matches!(code(&out), 0 | 2));
    assert_eq!(code(&lrscb(&["shift-verify", "--trials", "5"])), 1);
}
