use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn slln(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slln"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn output_sum(dir: &Path, out: &str, file: &str) -> String {
    let manifest = fs::read_to_string(dir.join(out).join("manifest.ini")).unwrap();
    manifest
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{file} = sha256:")))
        .unwrap_or_else(|| panic!("{file} missing from manifest:\n{manifest}"))
        .to_string()
}

const LFSS_2D: &str = "[generator]\nkind = lfss\nhurst = 0.8, 0.7\nalpha = 1.5\n\n[simulate]\nshape = 256, 256\n";

#[test]
fn empty_config_prints_usage() {
    let t = TempDir::new().unwrap();
    let o = slln(t.path(), &["check-conditions"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    let cfg = write(t.path(), "empty.ini", "# nothing here\n");
    assert_eq!(code(&slln(t.path(), &["slln", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn malformed_config_names_the_line() {
    let t = TempDir::new().unwrap();
    let cfg = write(t.path(), "bad.ini", "[generator]\nkind = stable\nalpha 1.5\n");
    let o = slln(t.path(), &["simulate", "--config", "bad.ini"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    let _ = cfg;
    let o = slln(t.path(), &["simulate", "--config", "bad.ini", "--set", "generator.alpha=x"]);
    assert_eq!(code(&o), 2);
    let cfg = write(t.path(), "typo.ini", "[generator]\nkind = stable\nalhpa = 1.5\n[simulate]\nshape = 4\n");
    let o = slln(t.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("generator.alhpa (line 3)"), "{}", stderr(&o));
}

#[test]
fn simulate_is_reproducible_across_threads() {
    let t = TempDir::new().unwrap();
    write(t.path(), "f.ini", LFSS_2D);
    for (out, threads) in [("a", "1"), ("b", "1"), ("c", "8")] {
        let o = slln(t.path(), &["simulate", "--config", "f.ini", "--seed", "7", "--threads", threads, "--out", out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a = output_sum(t.path(), "a", "field.bin");
    assert_eq!(a, output_sum(t.path(), "b", "field.bin"));
    assert_eq!(a, output_sum(t.path(), "c", "field.bin"));
    assert_eq!(fs::read(t.path().join("a/field.bin")).unwrap(), fs::read(t.path().join("c/field.bin")).unwrap());

    let bytes = fs::read(t.path().join("a/field.bin")).unwrap();
    let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap());
    // d, shape, offset
    assert_eq!(word(0), 2);
    assert_eq!((word(1), word(2)), (256, 256));
    assert_eq!((word(3), word(4)), (1, 1));
    assert_eq!(bytes.len(), 8 + 8 * 7 + 256 * 256 * 8);

    let o = slln(t.path(), &["simulate", "--config", "f.ini", "--seed", "8", "--out", "d"]);
    assert_eq!(code(&o), 0);
    assert_ne!(a, output_sum(t.path(), "d", "field.bin"));
}

#[test]
fn memory_budget_is_refused() {
    let t = TempDir::new().unwrap();
    write(t.path(), "f.ini", LFSS_2D);
    let o = slln(t.path(), &["simulate", "--config", "f.ini", "--set", "simulate.memory_budget=1000"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("need") && stderr(&o).contains("allowed 1000"), "{}", stderr(&o));
    let o = slln(
        t.path(),
        &["simulate", "--set", "generator.kind=gaussian", "--set", "simulate.shape=100,100", "--set", "simulate.memory_budget=100"],
    );
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("need 80000 bytes"), "{}", stderr(&o));
}

#[test]
fn csv_field_output() {
    let t = TempDir::new().unwrap();
    let o = slln(
        t.path(),
        &["simulate", "--set", "generator.kind=constant", "--set", "simulate.shape=2,3", "--set", "simulate.format=csv"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(t.path().join("out/field.csv")).unwrap();
    assert!(text.starts_with("k1,k2,value\n"), "{text}");
    assert_eq!(text.lines().count(), 7);
    assert!(!text.contains('\r'));
}

#[test]
fn manifest_is_a_pure_function_of_the_config() {
    let t = TempDir::new().unwrap();
    write(t.path(), "m.ini", "[generator]\nkind = gaussian\n\n[moments]\ntarget = scalar\np = 2\nreplicates = 20000\n");
    for out in ["x", "y"] {
        let o = slln(t.path(), &["estimate-moments", "--config", "m.ini", "--set", "generator.sigma=2", "--threads", "2", "--out", out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let x = fs::read(t.path().join("x/manifest.ini")).unwrap();
    assert_eq!(x, fs::read(t.path().join("y/manifest.ini")).unwrap());
    let text = String::from_utf8(x).unwrap();
    // defaults are echoed
    assert!(text.contains("\n[generator]\nkind = gaussian\nsigma = 2.0\n"), "{text}");
    let csv = fs::read_to_string(t.path().join("x/moments.csv")).unwrap();
    let value: f64 = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((value / 4.0 - 1.0).abs() < 0.05, "{value}");
}

const DICHOTOMY: &str = "[generator]
kind = lfss
hurst = 0.8
alpha = 1.5

[conditions]
kind = rect
phi = powerlog:0.8,1.1666666666666667
n_max = 10
replicates = 300
plan_check = report
expect = converges
";

#[test]
fn lfss_condition_needs_the_log_factor() {
    let t = TempDir::new().unwrap();
    write(t.path(), "c.ini", DICHOTOMY);
    let o = slln(t.path(), &["check-conditions", "--config", "c.ini", "--out", "log"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("verdict = converges"));
    let o = slln(t.path(), &["check-conditions", "--config", "c.ini", "--set", "conditions.phi=powerlog:0.8,0", "--out", "bare"]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(t.path().join("bare/series.csv").exists());
}

#[test]
fn inadmissible_plan_prints_the_inequality() {
    let t = TempDir::new().unwrap();
    write(t.path(), "c.ini", DICHOTOMY);
    let o = slln(t.path(), &["check-conditions", "--config", "c.ini", "--set", "conditions.plan_check=enforce"]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("is not > max{a, a 2^(p-1)} = 2.000000"), "{err}");
}

#[test]
fn recursion_and_orthogonal_checks() {
    let t = TempDir::new().unwrap();
    let o = slln(
        t.path(),
        &[
            "check-conditions",
            "--set",
            "conditions.kind=recursion",
            "--set",
            "conditions.dim=2",
            "--set",
            "conditions.phi=power:1.2",
            "--set",
            "conditions.n_max=4",
            "--set",
            "conditions.replicates=200",
            "--set",
            "conditions.expect=holds",
        ],
    );
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("violations = 0"));
    let o = slln(
        t.path(),
        &["check-conditions", "--set", "conditions.kind=orthogonal", "--set", "conditions.expect=converges", "--out", "orth"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = slln(
        t.path(),
        &[
            "check-conditions",
            "--set",
            "conditions.kind=orthogonal",
            "--set",
            "conditions.dim=2",
            "--set",
            "conditions.beta=1",
            "--set",
            "conditions.n_max=4096",
            "--set",
            "conditions.expect=converges",
        ],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn slln_expectations() {
    let t = TempDir::new().unwrap();
    let o = slln(
        t.path(),
        &["slln", "--set", "generator.kind=zero", "--set", "slln.phi=power:1", "--set", "slln.checkpoints=4,16,64", "--out", "zero"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(t.path().join("zero/tailsup.csv")).unwrap();
    for line in csv.lines().skip(1) {
        assert!(line.split(',').skip(1).all(|v| v.parse::<f64>().unwrap() == 0.0), "{line}");
    }

    let base = "[generator]\nkind = stable\nalpha = 1.5\n\n[slln]\ndim = 2\ncheckpoints = 16, 64, 256\nreplicates = 16\n";
    write(t.path(), "s.ini", base);
    let o = slln(t.path(), &["slln", "--config", "s.ini", "--set", "slln.phi=powerlog:0.6666666666666666,1.1666666666666667", "--out", "decay"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let o = slln(t.path(), &["slln", "--config", "s.ini", "--set", "slln.phi=power:0.3333333333333333", "--out", "ctrl"]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    let o = slln(
        t.path(),
        &["slln", "--config", "s.ini", "--set", "slln.phi=power:0.3333333333333333", "--set", "slln.negative_control=true", "--out", "ctrl2"],
    );
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn theorem_mode_refuses_before_running() {
    let t = TempDir::new().unwrap();
    let o = slln(
        t.path(),
        &[
            "slln",
            "--set",
            "slln.phi=powerlog:0.6666666666666666,1.1666666666666667",
            "--set",
            "slln.checkpoints=4,8",
            "--set",
            "slln.theorem_mode=enforce",
        ],
    );
    assert_eq!(code(&o), 2);
    assert!(!t.path().join("out/tailsup.csv").exists());
}

#[test]
fn toeplitz_transform_of_harmonic_input() {
    let t = TempDir::new().unwrap();
    let o = slln(t.path(), &["toeplitz", "--set", "toeplitz.phi=power:1", "--set", "toeplitz.n_max=32"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let tail = fs::read_to_string(t.path().join("out/tail.csv")).unwrap();
    let vals: Vec<f64> = tail.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(vals.len(), 6);
    assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");

    // a written field can be fed back in
    let o = slln(
        t.path(),
        &["simulate", "--set", "generator.kind=constant", "--set", "simulate.shape=9", "--out", "f"],
    );
    assert_eq!(code(&o), 0);
    let o = slln(
        t.path(),
        &["toeplitz", "--set", "toeplitz.phi=power:1", "--set", "toeplitz.input=file", "--set", "toeplitz.path=f/field.bin", "--out", "g"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn paper_suite_list_and_forced_failure() {
    let t = TempDir::new().unwrap();
    let o = slln(t.path(), &["paper-suite", "--list"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 11);
    assert!(!t.path().join("out").exists());

    let o = slln(t.path(), &["paper-suite", "--only", "3,10"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("PASS").count(), 2);

    let o = slln(t.path(), &["paper-suite", "--only", "1", "--set", "suite.tolerance_scale=0"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL"));
    assert!(fs::read_to_string(t.path().join("out/manifest.ini")).unwrap().contains("tolerance_scale = 0.0"));

    assert_eq!(code(&slln(t.path(), &["paper-suite", "--only", "12"])), 2);
}

#[test]
fn unknown_flags_are_usage_errors() {
    let t = TempDir::new().unwrap();
    assert_eq!(code(&slln(t.path(), &["simulate", "--bogus"])), 2);
    assert_eq!(code(&slln(t.path(), &[])), 2);
}
