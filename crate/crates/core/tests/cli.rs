use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hsflow::eos::EosParams;
use hsflow::harness::fnv1a;
use hsflow::rng::RngState;
use hsflow::solver::{write_checkpoint, Checkpoint, FluidState, Grid, StepBudget};

const CONFIG: &str = r#"
[grid]
N = 16
L = 1.0

[noise]
K = 4
f0 = 0.3
q = 1.0
alpha = 0.5
seed = 11

[step]
mu = 0.3
lambda = 0.0
cfl = 0.5
guard = 1e-6
dt_max = 0.01

[init]
kind = "perturbed"
rho0 = 0.5
amp = 0.1
mode = 1
velocity = 0.3

[run]
horizon = 0.5
stride = 0.05
ensemble = 4
"#;

fn hsflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn tree(dir: &Path) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fnv1a(&fs::read(&p).unwrap()));
            }
        }
    }
    out
}

#[test]
fn unknown_subcommand_and_flag_print_usage_and_exit_1() {
    let o = hsflow(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = hsflow(&["simulate", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = hsflow(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn invalid_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("N = 16", "N = 2"));
    let o = hsflow(&["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.N"));
    let o = hsflow(&["--config", "/nonexistent/run.toml", "simulate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_twice_gives_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let mut hashes = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = hsflow(&[
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
            "simulate",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        hashes.push(fnv1a(&fs::read(out.join("checkpoints/traj_0000.ckpt")).unwrap()));
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let mut trees = Vec::new();
    for w in ["1", "3"] {
        let out = dir.path().join(format!("w{w}"));
        let o = hsflow(&[
            "report",
            "--config",
            cfg.to_str().unwrap(),
            "--workers",
            w,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        trees.push(tree(&out));
    }
    assert_eq!(trees[0], trees[1]);
    for f in ["manifest.json", "summary.json", "kb.csv", "residuals.csv", "moments_m1.csv", "moments_m2.csv"] {
        assert!(trees[0].contains_key(f), "missing {f}");
    }
}

#[test]
fn moments_emit_matching_time_grids() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("m");
    let o = hsflow(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "moments", "--m", "1", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let a = hsflow::harness::read_moments_csv(&out.join("moments_m1.csv")).unwrap();
    let b = hsflow::harness::read_moments_csv(&out.join("moments_m2.csv")).unwrap();
    assert_eq!(a.times, b.times);
    assert_eq!((a.order, b.order), (1, 2));
    assert_eq!(a.ensemble_size, 4);
}

#[test]
fn check_envelope_names_violating_time() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("s.csv");
    let mut text = String::from("t,mean,stderr,m,ensemble_size\n");
    for j in 0..10 {
        let t = j as f64 * 0.5;
        let mut mean = 2.0 * (-t).exp();
        if j == 6 {
            mean += 1.0;
        }
        text.push_str(&format!("{t},{mean},0.01,1,8\n"));
    }
    fs::write(&series, text).unwrap();
    let s = series.to_str().unwrap();
    let o = hsflow(&["check-envelope", "--Dm", "1.0", "--c1", "0.0", "--c2", "0.1", "--series", s]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("t = 3"), "{}", String::from_utf8_lossy(&o.stderr));
    let o = hsflow(&["check-envelope", "--Dm", "1.0", "--c1", "0.0", "--c2", "1.5", "--series", s]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn kb_and_check_energy_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("kb");
    let o = hsflow(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "kb",
        "--S",
        "0.1",
        "0.2",
        "--tau",
        "0.05",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = hsflow::harness::read_kb_csv(&out.join("kb.csv")).unwrap();
    assert_eq!(rows.len(), 4 * 8 * 2);
    assert!(rows.iter().all(|r| r.value.abs() <= 1.0 && r.gap_value <= 2.0 * 0.05 / r.s + 1e-12));
    let o = hsflow(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "check-energy"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("residuals.csv").exists());
}

#[test]
fn stiffness_failure_is_recorded_and_exits_2() {
    // one cell a single ulp below the guard top, squeezed from both sides
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::new(16, 1.0).unwrap();
    let eos = EosParams::reference();
    let guard = 0.3;
    let top: f64 = 1.0 - guard;
    let mut rho = vec![0.4; 16];
    rho[8] = f64::from_bits(top.to_bits() - 1);
    let mut u = vec![0.0; 17];
    u[8] = 1.0;
    u[9] = -1.0;
    let ck = Checkpoint {
        config_hash: 0,
        grid,
        eos,
        modes: 0,
        f0: 0.0,
        q: 1.0,
        alpha: 0.5,
        seed: 0,
        steps: 0,
        snapshot_index: 0,
        stride: 0.05,
        rng: RngState { s: [1, 2, 3, 4], spare: None },
        budget: StepBudget::default(),
        wiener: vec![],
        state: FluidState { rho, u, t: 0.0 },
    };
    let state_path = dir.path().join("stiff.ckpt");
    write_checkpoint(&state_path, &ck).unwrap();
    let text = CONFIG
        .replace("K = 4", "K = 0")
        .replace("guard = 1e-6", "guard = 0.3")
        .replace(
            "kind = \"perturbed\"\nrho0 = 0.5\namp = 0.1\nmode = 1\nvelocity = 0.3",
            &format!("kind = \"file\"\npath = \"{}\"", state_path.display()),
        )
        .replace("ensemble = 4", "ensemble = 2");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("o");
    let o = hsflow(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "ensemble"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["failed"], 2);
    let rec = &manifest["trajectories"][0];
    assert_eq!(rec["status"], "failed");
    assert!(rec["error"].as_str().unwrap().contains("stiffness"));
    assert_eq!(rec["last_state"]["rho"].as_array().unwrap().len(), 16);
}
