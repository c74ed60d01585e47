//! Subcommand implementations.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use dislo_core::analysis::{
    all_pass, check_front_containment, check_lower_gradient_bound, estimate_constants, front_radius,
    gronwall_band_check, initial_band_bound, l1_continuity_check, perimeter, perimeter_band_bound, to_csv,
    ConstantContext, EstimateConstants, EstimateReport,
};
use dislo_core::fixedpoint::{indicator, solve_nonlocal, PicardState, SolveOptions};
use dislo_core::grid::BandSpec;
use dislo_core::hj::{solve_local, LocalProblem, Trajectory};
use dislo_core::nonlocal::{check_h5, IndicatorDensity, TimeSeries};
use dislo_core::oracles::radial_front;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;
use crate::scenario::{sign_mode, Scenario};
use crate::Failure;

/// Everything a solve produces.
pub struct Run {
    pub trajectory: Trajectory,
    pub density: IndicatorDensity,
    pub constants: EstimateConstants,
    pub slabs: Vec<PicardState>,
    pub tau: Option<f64>,
    pub tol_fp: Option<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_sha256: String,
    config: String,
    nonlocal: bool,
    output_times: &'a [f64],
    constants: &'a EstimateConstants,
    tau: Option<f64>,
    tol_fp: Option<f64>,
    slabs: &'a [PicardState],
    fields: &'static str,
    indicators: &'static str,
    /// The only field that differs between identical runs.
    timestamp_unix: u64,
}

pub fn config_hash(cfg: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(cfg.canonical().as_bytes()))
}

pub fn solve(cfg: &ScenarioConfig, scenario: &Scenario, nonlocal: bool) -> Result<Run, Failure> {
    let times = &cfg.run.output_times;
    if nonlocal {
        let problem = scenario.problem(cfg).map_err(Failure::Config)?;
        let opts = SolveOptions {
            tol_fp: cfg.run.tol_fp,
            max_iter: cfg.run.max_iter,
            cfl: cfg.run.cfl,
            slab_length: cfg.run.slab_length,
            keep_iterates: false,
        };
        let sol = solve_nonlocal(&problem, times, &opts).map_err(|e| Failure::Solver(e.into()))?;
        Ok(Run {
            trajectory: sol.trajectory,
            density: sol.density,
            constants: sol.constants,
            slabs: sol.slabs,
            tau: Some(sol.tau),
            tol_fp: Some(sol.tol_fp),
        })
    } else {
        let mut constants = local_constants(cfg, scenario).map_err(Failure::Config)?;
        let problem = LocalProblem::new(scenario.u0.clone(), &scenario.c1, cfg.run.horizon)
            .sign_mode(sign_mode(cfg.run.sign_mode))
            .cfl(cfg.run.cfl);
        let trajectory = solve_local(&problem, times).map_err(|e| Failure::Solver(e.into()))?;
        constants
            .refine_with_trajectory(&trajectory)
            .map_err(|e| Failure::Solver(e.into()))?;
        let density = local_indicators(&trajectory, &constants).map_err(Failure::Solver)?;
        Ok(Run {
            trajectory,
            density,
            constants,
            slabs: Vec::new(),
            tau: None,
            tol_fp: None,
        })
    }
}

fn local_constants(cfg: &ScenarioConfig, scenario: &Scenario) -> Result<EstimateConstants> {
    let ctx = ConstantContext {
        eta_override: cfg.run.eta,
        ..ConstantContext::local(scenario.r0, cfg.run.horizon)
    };
    Ok(estimate_constants(std::slice::from_ref(&scenario.c1), &scenario.u0, &ctx)?)
}

fn local_indicators(traj: &Trajectory, k: &EstimateConstants) -> Result<IndicatorDensity> {
    let dens = traj.iter().map(|(t, u)| indicator(u, k.r0 + k.cbar * t)).collect();
    Ok(IndicatorDensity::new(traj.times.clone(), dens, k.r0, k.cbar)?)
}

pub fn write_outputs(cfg: &ScenarioConfig, scenario: &Scenario, run: &Run, command: &str, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    run.trajectory.export(out.join("fields"), "u")?;
    let indicators = Trajectory::new(run.density.times().to_vec(), run.density.densities().to_vec())?;
    indicators.export(out.join("indicators"), "rho")?;

    let manifest = Manifest {
        command,
        config_sha256: config_hash(cfg),
        config: cfg.canonical(),
        nonlocal: !cfg.is_local(),
        output_times: &run.trajectory.times,
        constants: &run.constants,
        tau: run.tau,
        tol_fp: run.tol_fp,
        slabs: &run.slabs,
        fields: "fields/index.txt",
        indicators: "indicators/index.txt",
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    };
    std::fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;

    if scenario.is_radial(cfg) {
        let oracle = scenario.radial_oracle(cfg);
        let mut csv = String::from("t,radius,oracle\n");
        for (t, u) in run.trajectory.iter() {
            let r = front_radius(u)?;
            let exact = oracle
                .as_ref()
                .and_then(|sc| radial_front(sc, t).ok())
                .map(|x| format!("{x:?}"))
                .unwrap_or_default();
            csv.push_str(&format!("{t:?},{r:?},{exact}\n"));
        }
        std::fs::write(out.join("front_radius.csv"), csv)?;
    }
    Ok(())
}

/// Audit the estimates on a finished run.
pub fn verify(cfg: &ScenarioConfig, scenario: &Scenario, run: &Run) -> Result<Vec<EstimateReport>> {
    let k = &run.constants;
    let traj = &run.trajectory;
    let mut reports = check_front_containment(traj, k.r0, k.cbar);
    reports.extend(check_lower_gradient_bound(traj, k.eta, k.gamma, k.c)?);

    let eta_bar = k.eta_bar();
    let (a, b) = match cfg.verify.band {
        Some([a, b]) => (a, b),
        None => (-0.4 * eta_bar, 0.4 * eta_bar),
    };
    let eps = cfg.verify.epsilon.unwrap_or((b - a) / 8.0);
    let band = BandSpec::new(a, b, eps)?;
    reports.extend(gronwall_band_check(traj, band, k.l4, k.eta)?);
    for (t, u) in traj.iter() {
        reports.push(initial_band_bound(u, band, k, t)?);
        reports.push(perimeter_band_bound(traj.initial(), u, t, (a, b), k)?);
    }

    let max_per = run
        .density
        .densities()
        .iter()
        .map(perimeter)
        .collect::<dislo_core::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    reports.extend(l1_continuity_check(&run.density, k.cbar * max_per)?);

    if !cfg.is_local() {
        let c1 = TimeSeries::steady(scenario.c1.clone());
        reports.extend(check_h5(&scenario.kernel, &c1, &traj.times));
    }
    Ok(reports)
}

pub fn write_report(reports: &[EstimateReport], out: &Path) -> Result<bool> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("verify.csv"), to_csv(reports))?;
    Ok(all_pass(reports))
}
