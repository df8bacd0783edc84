//! Command-line behaviour: exit codes, validation messages, determinism of
//! output files across worker counts.

use std::fs;
use std::path::Path;
use std::process::Command;

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path
}

const FAST: &str = r#"
[process]
distribution = "gaussian"
mean = 0.0
std = 1.0
kind = "linear"
coeffs = { "0" = 1.0, "1" = 0.5 }

[kernel]
name = "variance"

[experiment]
n = 120
replications = 40
p = 1.5
n_max = 240
k_max = 4
l_max = 1
n_grid = [40, 80]
checkpoints = [30, 60, 240]
sigma_path_len = 20000
sigma_reps = 4
moment_reps = 4000
"#;

fn run_args(args: &[&str]) -> i32 {
    let mut argv = vec!["ushift".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    ushift_cli::run(argv)
}

#[test]
fn outputs_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), FAST);
    let config = config.to_str().unwrap();
    for cmd in ["simulate", "decompose", "theta", "clt", "lln", "lil", "remainders"] {
        let out1 = tmp.path().join(format!("{cmd}_w1"));
        let out4 = tmp.path().join(format!("{cmd}_w4"));
        for (out, workers) in [(&out1, "1"), (&out4, "4")] {
            let code = run_args(&[
                cmd,
                "--config",
                config,
                "--seed",
                "11",
                "--out",
                out.to_str().unwrap(),
                "--workers",
                workers,
            ]);
            assert_eq!(code, 0, "{cmd} with {workers} workers");
        }
        for suffix in ["csv", "summary.txt"] {
            let name = if suffix == "csv" {
                format!("{cmd}.csv")
            } else {
                format!("{cmd}_summary.txt")
            };
            let a = fs::read(out1.join(&name)).unwrap();
            let b = fs::read(out4.join(&name)).unwrap();
            assert_eq!(a, b, "{name} differs between worker counts");
        }
    }
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), FAST);
    let out1 = tmp.path().join("a");
    let out2 = tmp.path().join("b");
    for out in [&out1, &out2] {
        let code = run_args(&[
            "decompose",
            "--config",
            config.to_str().unwrap(),
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    assert_eq!(
        fs::read(out1.join("decompose.csv")).unwrap(),
        fs::read(out2.join("decompose.csv")).unwrap()
    );
}

#[test]
fn lln_rejects_p_out_of_range_with_named_constraint() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &FAST.replace("p = 1.5", "p = 2.0"));
    let output = Command::new(env!("CARGO_BIN_EXE_ushift"))
        .args(["lln", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("p in [1,2)"), "stderr: {stderr}");
}

#[test]
fn unknown_subcommand_exits_2() {
    let output = Command::new(env!("CARGO_BIN_EXE_ushift"))
        .arg("frobnicate")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn unreadable_config_exits_3_and_names_the_problem() {
    let output = Command::new(env!("CARGO_BIN_EXE_ushift"))
        .args(["clt", "--config", "/nonexistent/nowhere.toml"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));

    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &FAST.replace("[kernel]", "mystery_key = 1\n[kernel]"));
    let output = Command::new(env!("CARGO_BIN_EXE_ushift"))
        .args(["lil", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&output.stderr).contains("mystery_key"));
}

#[test]
fn degenerate_variance_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"
[process]
distribution = "rademacher"
kind = "linear"
coeffs = { "0" = 1.0 }

[kernel]
name = "variance"

[experiment]
n = 100
replications = 10
k_max = 2
sigma_path_len = 10000
sigma_reps = 4
"#,
    );
    let output = Command::new(env!("CARGO_BIN_EXE_ushift"))
        .args(["clt", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&output.stderr).contains("degenerate-variance"));
}

#[test]
fn missing_required_key_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &FAST.replace("n = 120\n", ""));
    let output = Command::new(env!("CARGO_BIN_EXE_ushift"))
        .args(["clt", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&output.stderr).contains("experiment.n"));
}

#[test]
fn env_var_overrides_default_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), FAST);
    let out = tmp.path().join("via_env");
    let output = Command::new(env!("CARGO_BIN_EXE_ushift"))
        .args(["simulate", "--config", config.to_str().unwrap()])
        .env("USHIFT_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(out.join("simulate.csv").exists());
}
