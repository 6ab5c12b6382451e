use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = "\
[game]
dynamics = example

[grid]
time_steps = 20
lo = -2 -2
hi = 2 2
nodes = 41 41

[simulate]
t_start = 0
x_start = 0 0.4

[check_pair]
pair = minimax
samples = 200
";

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("game.cfg");
    fs::write(&path, text).unwrap();
    path
}

fn dgnash(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgnash")).args(args).output().unwrap()
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    dgnash(&args)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn oracle_map_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let o = run("oracle", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let map = out.join("oracle_map.txt");
    let o = run("verify", &cfg, &out, &["--map", map.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("verdict: PASS"));
    assert!(out.join("verify_report.txt").exists() && out.join("verify_residuals.csv").exists());
}

#[test]
fn perturbed_map_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    assert_eq!(code(&run("oracle", &cfg, &out, &[])), 0);
    let text = fs::read_to_string(out.join("oracle_map.txt")).unwrap();
    let mut hit = false;
    let bad: Vec<String> = text
        .lines()
        .map(|l| {
            if l.starts_with("0.5 0 0 :") {
                hit = true;
                "0.5 0 0 : 0,3".to_string()
            } else {
                l.to_string()
            }
        })
        .collect();
    assert!(hit);
    let bad_path = dir.path().join("bad_map.txt");
    fs::write(&bad_path, bad.join("\n") + "\n").unwrap();
    let o = run("verify", &cfg, &out, &["--map", bad_path.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    assert!(stdout(&o).contains("verdict: FAIL"));
}

#[test]
fn missing_key_is_named_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("time_steps = 20\n", ""));
    let o = run("solve", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("time_steps"), "{err}");
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(code(&dgnash(&["bogus"])), 1);
    assert_eq!(code(&dgnash(&["solve"])), 1);
    assert_eq!(code(&dgnash(&["--help"])), 0);
    let dir = tempfile::tempdir().unwrap();
    let o = run("verify", &dir.path().join("absent.cfg"), &dir.path().join("out"), &["--map", "absent.txt"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn solve_reports_oracle_error_and_flags_override_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let o = run("solve", &cfg, &out, &["--grid-k", "10", "--grid-res", "21"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("11 slices x 441 nodes"), "{s}");
    assert!(s.contains("max interior error lower2"), "{s}");
    for f in ["lower1", "lower2", "coop1", "coop2"] {
        assert!(out.join(format!("{f}.csv")).exists());
    }
}

#[test]
fn check_pair_accepts_the_minimax_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = run("check-pair", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let o = run("check-pair", &cfg, &dir.path().join("out"), &["--pair", "family", "--spread", "1"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        // The verdict depends on the grid; only the outputs matter here.
        assert_ne!(code(&run("nash", &cfg, out, &["--seed", "5"])), 1);
        assert_ne!(code(&run("simulate", &cfg, out, &["--seed", "5"])), 1);
    }
    for f in ["nash_map.txt", "agreed.csv", "profile_run.csv", "deviations_player1.csv", "deviations_player2.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}
