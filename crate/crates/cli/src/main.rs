//! `dislo`: run level-set scenarios from TOML configs.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 usage or
//! configuration error, 3 solver failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use dislo_core::oracles::{radial_front, RadialLaw, RadialScenario};

use config::ScenarioConfig;
use scenario::Scenario;

#[derive(Parser)]
#[command(name = "dislo", version, about = "Nonlocal level-set front propagation")]
struct Cli {
    /// Scenario configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads, 0 = one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Override `run.cfl` from the config.
    #[arg(long, global = true)]
    cfl: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve `u_t = c1 |Du|`.
    SolveLocal,
    /// Solve the nonlocal equation by slab-wise Picard iteration.
    SolveNonlocal,
    /// Solve, then audit the estimates; writes `verify.csv`.
    Verify,
    /// Print the exact radius of a radial front.
    Oracle {
        #[arg(value_enum)]
        law: OracleLaw,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        r0: f64,
        /// Times; more than one prints a `t R` table.
        #[arg(long, num_args = 1.., required = true)]
        t: Vec<f64>,
        /// Normal speed for `constant-speed`.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Print the measured constants as JSON.
    Constants,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleLaw {
    VolumeDriven,
    ConstantSpeed,
}

pub enum Failure {
    Check,
    Config(anyhow::Error),
    Solver(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check => 1,
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
        }
    }
}

fn load(cli: &Cli) -> Result<(ScenarioConfig, Scenario), Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Config(anyhow!("--config is required")))?;
    let mut cfg = ScenarioConfig::load(path).map_err(Failure::Config)?;
    if let Some(cfl) = cli.cfl {
        if !(cfl > 0.0) {
            return Err(Failure::Config(anyhow!("--cfl: must be positive, got {cfl}")));
        }
        cfg.run.cfl = cfl;
    }
    let scenario = Scenario::build(&cfg).map_err(Failure::Config)?;
    Ok((cfg, scenario))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::Config(anyhow!("--threads: {e}")))?;
    }
    let io = |e: anyhow::Error| Failure::Solver(e.context("writing outputs"));
    match &cli.command {
        Command::SolveLocal | Command::SolveNonlocal => {
            let (cfg, scenario) = load(cli)?;
            let nonlocal = matches!(cli.command, Command::SolveNonlocal);
            let name = if nonlocal { "solve-nonlocal" } else { "solve-local" };
            let run = commands::solve(&cfg, &scenario, nonlocal)?;
            commands::write_outputs(&cfg, &scenario, &run, name, &cli.out).map_err(io)?;
            log_slabs(&run);
            Ok(())
        }
        Command::Verify => {
            let (cfg, scenario) = load(cli)?;
            let run = commands::solve(&cfg, &scenario, !cfg.is_local())?;
            commands::write_outputs(&cfg, &scenario, &run, "verify", &cli.out).map_err(io)?;
            let reports = commands::verify(&cfg, &scenario, &run).map_err(Failure::Config)?;
            let pass = commands::write_report(&reports, &cli.out).map_err(io)?;
            for r in reports.iter().filter(|r| !r.pass) {
                eprintln!("FAIL {} at t = {}: lhs {:e} > rhs {:e} {}", r.name, r.t, r.lhs, r.rhs, r.context);
            }
            println!("{} checks, {} failed", reports.len(), reports.iter().filter(|r| !r.pass).count());
            if pass {
                Ok(())
            } else {
                Err(Failure::Check)
            }
        }
        Command::Oracle {
            law,
            dim,
            r0,
            t,
            speed,
        } => {
            let law = match law {
                OracleLaw::VolumeDriven => RadialLaw::VolumeDriven,
                OracleLaw::ConstantSpeed => RadialLaw::ConstantSpeed(*speed),
            };
            let sc = RadialScenario::new(*r0, *dim, law).map_err(|e| Failure::Config(e.into()))?;
            for &s in t {
                let r = radial_front(&sc, s).map_err(|e| Failure::Config(e.into()))?;
                if t.len() == 1 {
                    println!("{r:.6}");
                } else {
                    println!("{s} {r:.6}");
                }
            }
            Ok(())
        }
        Command::Constants => {
            let (cfg, scenario) = load(cli)?;
            let k = if cfg.is_local() {
                commands::solve(&cfg, &scenario, false)?.constants
            } else {
                scenario.problem(&cfg).map_err(Failure::Config)?.constants
            };
            let json = serde_json::to_string_pretty(&k)
                .context("serializing constants")
                .map_err(Failure::Solver)?;
            println!("{json}");
            Ok(())
        }
    }
}

fn log_slabs(run: &commands::Run) {
    for s in &run.slabs {
        log::info!(
            "slab {}: [{:.4}, {:.4}], {} iterations, distances {:?}",
            s.slab_index,
            s.theta,
            s.theta + s.tau,
            s.iterations(),
            s.distances
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Check => {}
                Failure::Config(e) => eprintln!("error: {e:#}"),
                Failure::Solver(e) => eprintln!("solver failure: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}
