//! End-to-end checks of the command-line interface: output formats, exit
//! codes, config handling, and reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fanova-select"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn table1_emits_reference_csv() {
    let out = run(&[
        "table1", "--sigma", "1", "--eps", "1e-4", "--d", "10,50,100,200", "--k", "2,3",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("k,d,beta,binom,log_binom,eps_power\n"));
    assert!(text.contains("2,10,0.5293,45,3.8067,10000"));
    assert!(text.contains("3,200,0.8728,1313400,14.0881,63096"));
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn solve_extremal_emits_valid_profile() {
    let out = run(&[
        "solve-extremal", "--k", "1", "--sigma", "1", "--eps", "0.1", "--r", "0.05", "--expand",
    ]);
    assert!(out.status.success());
    let profile: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let shells = profile["shells"].as_array().unwrap();
    let weight_sq: f64 = shells
        .iter()
        .map(|s| {
            s["count"].as_f64().unwrap() * s["weight"].as_f64().unwrap().powi(2)
        })
        .sum();
    assert!((weight_sq - 0.5).abs() < 1e-9);
    let freqs = profile["frequencies"].as_array().unwrap();
    assert_eq!(freqs.len(), profile["support_size"].as_u64().unwrap() as usize);
}

#[test]
fn infeasible_radius_exits_3_with_machine_parsable_error() {
    let out = run(&["solve-extremal", "--k", "2", "--sigma", "1", "--eps", "0.1", "--r", "0.9"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.contains("error: kind=infeasible-radius"), "stderr: {err}");
}

#[test]
fn unattainable_target_exits_3() {
    // a boundary level far beyond what any admissible radius reaches
    let out = run(&[
        "dichotomy", "--k", "1", "--eps", "1.0", "--d", "30", "--beta", "0.9", "--margin", "0.3",
        "--J", "2", "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("kind=target-unattainable"), "stderr: {}", stderr(&out));
}

#[test]
fn bad_usage_exits_2() {
    let out = run(&["table2", "--d", "10"]); // missing required --k
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["table1", "--sigma", "1", "--eps", "1e-4", "--d", "4", "--k", "2"]);
    assert_eq!(out.status.code(), Some(2), "invalid sparsity must exit 2");
    assert!(stderr(&out).contains("kind=invalid-argument"));
}

#[test]
fn table2_dry_run_prints_grid() {
    let out = run(&[
        "table2", "--d", "10", "--k", "2", "--alpha", "1", "--dry-run",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("order k=2: d=10 beta=0.5293"));
    assert!(text.contains("node 20:"));
    assert!(text.contains("epsilon=0.5125"), "derived slack missing: {text}");
}

#[test]
fn table2_small_run_emits_csv() {
    let out = run(&[
        "table2", "--d", "10", "--k", "2", "--alpha", "0.5,1", "--J", "2", "--seed", "3",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("k,d,beta,alpha_0.5,alpha_1\n"), "csv: {text}");
    assert!(text.contains("2,10,0.5293,"));
}

#[test]
fn phase_diagram_writes_three_files() {
    let dir = tempdir("phase");
    let out = run(&[
        "--out-dir",
        dir.to_str().unwrap(),
        "phase-diagram",
        "--beta-steps",
        "10",
        "--gamma-steps",
        "10",
    ]);
    assert!(out.status.success());
    for name in ["phase_grid.csv", "phase_boundary_almost_full.csv", "phase_boundary_exact.csv"] {
        let path = dir.join(name);
        assert!(path.exists(), "missing {name}");
    }
    let grid = std::fs::read_to_string(dir.join("phase_grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 101);
    assert!(grid.lines().nth(1).unwrap().split(',').count() == 3);
    cleanup(&dir);
}

#[test]
fn simulate_round_trips_and_is_reproducible() {
    let dir = tempdir("simulate");
    let config_path = dir.join("experiment.json");
    let config = r#"{
  "version": 1,
  "model": {
    "d": 12,
    "orders": { "single": 1 },
    "sigma": 1.0,
    "epsilon_noise": 0.002,
    "components": [
      { "subset": [2], "factors": ["g4"] },
      { "subset": [5], "factors": ["g1"], "scale": 0.5 },
      { "subset": [9], "explicit": [[[1], 0.004], [[-2], 0.003]] }
    ]
  },
  "replicates": 3,
  "seed": 11
}
"#;
    std::fs::write(&config_path, config).unwrap();

    // dry run echoes a normalized config that parses back to itself
    let dry = run(&["simulate", "--config", config_path.to_str().unwrap(), "--dry-run"]);
    assert!(dry.status.success(), "stderr: {}", stderr(&dry));
    let text = stdout(&dry);
    let json_start = text.find('{').unwrap();
    let normalized = &text[json_start..];
    let reparsed: serde_json::Value = serde_json::from_str(normalized).unwrap();
    assert_eq!(reparsed["version"], 1);
    assert_eq!(reparsed["model"]["d"], 12);

    let a = run(&["simulate", "--config", config_path.to_str().unwrap()]);
    assert!(a.status.success(), "stderr: {}", stderr(&a));
    let b = run(&["simulate", "--config", config_path.to_str().unwrap()]);
    assert_eq!(stdout(&a), stdout(&b), "same seed must give identical bytes");
    let report: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(report["replicates"], 3);
    assert!(report["err"].is_number());
    assert!(report.get("wall_time").is_none(), "timing must stay out of reports");

    let c = run(&["simulate", "--config", config_path.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(stdout(&a), stdout(&c));
    cleanup(&dir);
}

#[test]
fn thread_count_does_not_change_output() {
    let args = [
        "table2", "--d", "10", "--k", "2", "--alpha", "0.05,1", "--J", "3", "--seed", "9",
    ];
    let one = bin().args(["--threads", "1"]).args(args).output().unwrap();
    let two = bin().args(["--threads", "2"]).args(args).output().unwrap();
    assert!(one.status.success() && two.status.success());
    assert_eq!(stdout(&one), stdout(&two));
}

#[test]
fn out_dir_env_var_is_honored() {
    let dir = tempdir("envvar");
    let out = bin()
        .args(["boundary", "--beta-steps", "5", "-o", "curves.csv"])
        .env("FANOVA_SELECT_OUT", &dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.join("curves.csv").exists());
    let text = std::fs::read_to_string(dir.join("curves.csv")).unwrap();
    assert!(text.starts_with("beta,gamma_almost_full,gamma_exact\n"));
    cleanup(&dir);
}

fn tempdir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("fanova-cli-test-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn cleanup(dir: &Path) {
    let _ = std::fs::remove_dir_all(dir);
}
