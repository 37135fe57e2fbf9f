//! Command-line front end. Exit codes: 0 success, 1 validation failure
//! (including bad arguments and failed checks), 2 numeric failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{envelope_check, moment_series};
use crate::parallel::Executor;
use crate::{Error, Result};

use super::{
    kb_table, moments, read_moments_csv, residual_table, run_ensemble, summarize, write_ensemble, write_json,
    write_kb_csv, write_moments_csv, write_residual_csv, Ensemble, RunConfig,
};

#[derive(Debug, Parser)]
#[command(name = "hsflow", version, about = "Stochastic hard-sphere Navier–Stokes laboratory")]
struct Cli {
    /// TOML run configuration (built-in defaults when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides noise.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for ensemble execution.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Output directory (overrides run.out; default ./hsflow-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one trajectory with seed split_seed(master, 0).
    Simulate,
    /// Run the whole ensemble.
    Ensemble,
    /// Ensemble moment series E[ℰ^m](t).
    Moments {
        #[arg(long = "m", num_args = 1.., required = true)]
        m: Vec<u32>,
    },
    /// Krylov–Bogoliubov averages and stationarity gaps.
    Kb {
        #[arg(long = "S", num_args = 1.., required = true)]
        s: Vec<f64>,
        #[arg(long = "tau", num_args = 1.., required = true)]
        tau: Vec<f64>,
    },
    /// Energy-inequality residuals; fails if the ensemble mean exceeds
    /// three standard errors.
    CheckEnergy,
    /// Checks E[ℰ^m](t) ≤ e^{−Dm t}(E[ℰ^m](0) + c1) + c2 + 2 stderr.
    CheckEnvelope {
        #[arg(long = "Dm")]
        dm: f64,
        #[arg(long)]
        c1: f64,
        #[arg(long)]
        c2: f64,
        #[arg(long = "m", default_value_t = 1)]
        m: u32,
        /// Check a moments CSV instead of running the ensemble.
        #[arg(long)]
        series: Option<PathBuf>,
    },
    /// Everything: energies, moments (m = 1, 2), residuals, KB table and
    /// summary.json.
    Report,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{}", e.render());
                    1
                }
            };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("hsflow: {e}");
            e.exit_code()
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.noise.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.run.out.clone())
        .unwrap_or_else(|| PathBuf::from("hsflow-out"))
}

fn ensemble_of(cfg: &RunConfig, exec: &Executor, out: &Path, command: &str) -> Result<Ensemble> {
    let ens = run_ensemble(cfg, exec)?;
    write_ensemble(out, cfg, &ens, command)?;
    for m in &ens.members {
        if let Err(f) = &m.outcome {
            eprintln!("hsflow: trajectory {} (seed {}) failed: {}", m.index, m.seed, f.error);
        }
    }
    if ens.failures() == ens.members.len() {
        return Err(Error::Numeric("every trajectory failed; see manifest.json".into()));
    }
    Ok(ens)
}

fn execute(cli: Cli) -> Result<i32> {
    let mut cfg = load(&cli)?;
    let out = out_dir(&cli, &cfg);
    let exec = Executor::new(cli.workers)?;
    match &cli.command {
        Command::Simulate => {
            cfg.run.ensemble = 1;
            let ens = ensemble_of(&cfg, &exec, &out, "simulate")?;
            let t = &ens.trajectories()[0];
            let e = t.energy(t.len() - 1);
            println!(
                "seed {} t {} energy {} mass {} steps {}",
                t.seed(),
                e.t,
                e.total,
                e.mass,
                t.steps(t.len() - 1)
            );
            Ok(0)
        }
        Command::Ensemble => {
            let ens = ensemble_of(&cfg, &exec, &out, "ensemble")?;
            println!("{} of {} trajectories finished", ens.members.len() - ens.failures(), ens.members.len());
            Ok(0)
        }
        Command::Moments { m } => {
            let ens = ensemble_of(&cfg, &exec, &out, "moments")?;
            for s in moments(&ens.trajectories(), m)? {
                let path = out.join(format!("moments_m{}.csv", s.order));
                write_moments_csv(&path, &s)?;
                println!("m = {}: {} times, final mean {}", s.order, s.len(), s.mean[s.len() - 1]);
            }
            Ok(0)
        }
        Command::Kb { s, tau } => {
            let ens = ensemble_of(&cfg, &exec, &out, "kb")?;
            let rows = kb_table(&ens.trajectories(), &cfg.observables, s, tau, &exec)?;
            write_kb_csv(&out.join("kb.csv"), &rows)?;
            println!("{} KB rows", rows.len());
            Ok(0)
        }
        Command::CheckEnergy => {
            let ens = ensemble_of(&cfg, &exec, &out, "check-energy")?;
            let rows = residual_table(&ens.trajectories(), cfg.residual_window())?;
            write_residual_csv(&out.join("residuals.csv"), &rows)?;
            let r: Vec<f64> = rows.iter().map(|r| r.residual).collect();
            let (mean, se) = super::mean_stderr(&r);
            let se = if se.is_nan() { 0.0 } else { se };
            println!("mean residual {mean} stderr {se} over {} windows", r.len());
            if mean > 3.0 * se {
                eprintln!("hsflow: energy inequality violated: mean residual {mean} > 3 stderr ({})", 3.0 * se);
                return Ok(1);
            }
            Ok(0)
        }
        Command::CheckEnvelope { dm, c1, c2, m, series } => {
            let s = match series {
                Some(p) => read_moments_csv(p)?,
                None => {
                    let ens = ensemble_of(&cfg, &exec, &out, "check-envelope")?;
                    let s = moment_series(&ens.trajectories(), *m)?;
                    write_moments_csv(&out.join(format!("moments_m{m}.csv")), &s)?;
                    s
                }
            };
            let v = envelope_check(&s, *dm, *c1, *c2)?;
            if v.pass {
                println!("envelope holds; worst margin {} at t = {}", v.worst_margin, v.worst_time);
                Ok(0)
            } else {
                let times: Vec<String> = v.violations.iter().map(|t| t.to_string()).collect();
                eprintln!(
                    "hsflow: envelope violated at t = {} (worst margin {} at t = {})",
                    times.join(", "),
                    v.worst_margin,
                    v.worst_time
                );
                Ok(1)
            }
        }
        Command::Report => {
            let ens = ensemble_of(&cfg, &exec, &out, "report")?;
            let trajs = ens.trajectories();
            let series = moments(&trajs, &[1, 2])?;
            for s in &series {
                write_moments_csv(&out.join(format!("moments_m{}.csv", s.order)), s)?;
            }
            let residuals = residual_table(&trajs, cfg.residual_window())?;
            write_residual_csv(&out.join("residuals.csv"), &residuals)?;
            let kb = cfg.kb_spec();
            let rows = kb_table(&trajs, &cfg.observables, &kb.horizons, &kb.tau, &exec)?;
            write_kb_csv(&out.join("kb.csv"), &rows)?;
            let summary = summarize(&cfg, &ens, &series, &residuals, &rows);
            write_json(&out.join("summary.json"), &summary)?;
            println!("report written to {}", out.display());
            Ok(0)
        }
    }
}
