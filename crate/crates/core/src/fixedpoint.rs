//! Slab-wise Picard iteration for `u_t = c[1_{u >= 0}] |Du|`.
//!
//! On a slab `[theta, theta + tau]` the map `Psi` sends a density `rho`,
//! sampled at the slab's sample times, to the indicators `1_{u >= 0}` of the
//! local solution driven by `c[rho]`. Between two samples the velocity is
//! the average of `c0 * rho` at both ends plus `c1` at the midpoint. Iteration starts from the time-frozen indicator of the slab's
//! initial field and stops once successive iterates are within `tol_fp` in
//! the max-over-samples L1 distance. Slabs are chained through the terminal
//! field.

use std::borrow::Cow;

use log::{debug, warn};
use serde::Serialize;

use crate::analysis::constants::{assemble_constants, front_ball_measure, global_semiconvexity};
use crate::analysis::{measure_eta0, ConstantContext, EstimateConstants};
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::hj::{advance, cfl_dt, output_schedule, SignMode, Trajectory, DEFAULT_CFL, TOL_SIGN};
use crate::nonlocal::{Convolver, IndicatorDensity, Kernel, TimeSeries};
use crate::oracles::unit_ball_volume;

/// Safety factor in the first slab-length candidate.
pub const SLAB_SAFETY: f64 = 1.1;
/// Minimum slab length in CFL steps.
pub const MIN_SLAB_STEPS: f64 = 20.0;
/// Cells the front must keep from the box faces when containment is checked at run time.
pub const BOUNDARY_MARGIN_CELLS: usize = 4;

/// `1` where `u >= 0` and `|x| <= support_radius`, else `0`.
pub fn indicator(u: &ScalarField, support_radius: f64) -> ScalarField {
    let g = *u.grid();
    let limit = support_radius * (1.0 + 1e-12);
    let values = u
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| if v >= 0.0 && g.node_norm(i) <= limit { 1.0 } else { 0.0 })
        .collect();
    let mut f = ScalarField::from_values(g, values).expect("indicator values are finite");
    f.set_time(u.time());
    f
}

/// Largest `|x|` over nodes with `u >= 0` (`0` for an empty set).
pub fn front_extent(u: &ScalarField) -> f64 {
    let g = u.grid();
    u.values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= 0.0)
        .map(|(i, _)| g.node_norm(i))
        .fold(0.0, f64::max)
}

fn keeps_margin(u: &ScalarField, cells: usize) -> bool {
    let g = u.grid();
    u.values().iter().enumerate().all(|(i, &v)| {
        if v < 0.0 {
            return true;
        }
        let m = g.multi_index(i);
        (0..g.dim()).all(|a| m[a] >= cells && m[a] + cells < g.n()[a])
    })
}

/// Slab length from the contraction argument:
/// `min(deltabar / (2 lip e^{gamma T} |c0|_T safety), 1/(2 C_contr), T)` with
/// `C_contr = 2 L5 e^{gamma T} lip L^N(B(0, R0 + 1)) sup|c0| / eta`.
/// Rejects a result not above `tol`.
pub fn select_slab_length(constants: &EstimateConstants, deltabar: f64, lip_u0: f64, tol: f64) -> Result<f64> {
    let k = constants;
    if !(deltabar > 0.0 && deltabar < k.eta / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "deltabar = {deltabar} must lie in (0, eta/2 = {})",
            k.eta / 2.0
        )));
    }
    if !(lip_u0 > 0.0) {
        return Err(Error::InvalidArgument(format!("Lipschitz constant {lip_u0} must be positive")));
    }
    let growth = (k.gamma * k.horizon).exp();
    let first = if k.c0_l1 == 0.0 {
        f64::INFINITY
    } else {
        deltabar / (2.0 * lip_u0 * growth * k.c0_l1 * SLAB_SAFETY)
    };
    let c_contr = 2.0 * k.l5 * growth * lip_u0 * unit_ball_volume(k.dim) * (k.r0 + 1.0).powi(k.dim as i32) * k.c0_sup / k.eta;
    let second = if c_contr == 0.0 { f64::INFINITY } else { 1.0 / (2.0 * c_contr) };
    let tau = first.min(second).min(k.horizon);
    if !(tau > tol) {
        return Err(Error::InvalidArgument(format!(
            "degenerate slab length {tau:e} (candidates {first:e}, {second:e})"
        )));
    }
    Ok(tau)
}

/// Nonlocal problem data.
#[derive(Debug, Clone)]
pub struct DislocationProblem {
    pub kernel: Kernel,
    pub c1: TimeSeries,
    pub u0: ScalarField,
    pub horizon: f64,
    pub r0: f64,
    pub constants: EstimateConstants,
    pub sign_mode: SignMode,
    /// Accept velocities outside the nonnegativity assumption (volume-driven
    /// growth). Containment is then checked at run time against the box.
    pub allow_h5_violation: bool,
}

impl DislocationProblem {
    pub fn new(kernel: Kernel, c1: TimeSeries, u0: ScalarField, horizon: f64, r0: f64) -> Result<Self> {
        Self::build(kernel, c1, u0, horizon, r0, None, false)
    }

    /// As [`new`](Self::new) with the nonnegativity assumption waived.
    pub fn new_unchecked_sign(kernel: Kernel, c1: TimeSeries, u0: ScalarField, horizon: f64, r0: f64) -> Result<Self> {
        Self::build(kernel, c1, u0, horizon, r0, None, true)
    }

    /// Recompute the constants with a user-supplied `eta`.
    pub fn with_eta(self, eta: f64) -> Result<Self> {
        Self::build(self.kernel, self.c1, self.u0, self.horizon, self.r0, Some(eta), self.allow_h5_violation)
    }

    fn build(
        kernel: Kernel,
        c1: TimeSeries,
        u0: ScalarField,
        horizon: f64,
        r0: f64,
        eta: Option<f64>,
        allow_h5_violation: bool,
    ) -> Result<Self> {
        if !(horizon > 0.0) || !(r0 > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon {horizon} and radius {r0} must be positive")));
        }
        let g = *u0.grid();
        if !c1.grid().same_nodes(&g) {
            return Err(Error::GridMismatch("external field and u0 grids differ".into()));
        }
        // validates the kernel layout against the data grid
        Convolver::new(&g, &kernel)?;
        for (i, &v) in u0.values().iter().enumerate() {
            if v >= 0.0 && g.node_norm(i) > r0 * (1.0 + 1e-12) {
                return Err(Error::Containment(format!(
                    "u0 >= 0 at |x| = {} outside the ball of radius {r0}",
                    g.node_norm(i)
                )));
            }
        }
        let constants = nonlocal_constants(&kernel, &c1, &u0, r0, horizon, eta)?;
        if !allow_h5_violation {
            let reach = r0 + constants.cbar * horizon;
            if !g.contains_ball(reach, BOUNDARY_MARGIN_CELLS) {
                return Err(Error::Containment(format!(
                    "box does not contain the ball of radius {reach} with a {BOUNDARY_MARGIN_CELLS}-cell margin"
                )));
            }
        }
        Ok(DislocationProblem {
            kernel,
            c1,
            u0,
            horizon,
            r0,
            constants,
            sign_mode: SignMode::Nonnegative,
            allow_h5_violation,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.u0.grid()
    }

    pub fn support_radius(&self, t: f64) -> f64 {
        self.r0 + self.constants.cbar * t
    }
}

/// Constants of the velocity family `c[rho]`, `0 <= rho <= 1`: Lipschitz and
/// semiconvexity constants of `c0`, `c1` scaled by `1 + M`, speed bound
/// `cbar = |c0|_T + sup|c1|`.
pub fn nonlocal_constants(
    kernel: &Kernel,
    c1: &TimeSeries,
    u0: &ScalarField,
    r0: f64,
    horizon: f64,
    eta: Option<f64>,
) -> Result<EstimateConstants> {
    let mut l1 = 0.0f64;
    let mut l2 = 0.0f64;
    for f in kernel.series().fields().iter().chain(c1.fields()) {
        l1 = l1.max(f.lipschitz_estimate());
        l2 = l2.max(global_semiconvexity(f, 1)?);
    }
    let l1p = c1.fields().iter().map(|f| f.sup_norm()).fold(0.0, f64::max);
    let cbar = kernel.l1_bound() + l1p;
    let m = front_ball_measure(u0.grid().dim(), r0, cbar, horizon);
    let ctx = ConstantContext {
        r0,
        horizon,
        c0_l1: kernel.l1_bound(),
        c0_sup: kernel.sup_bound(),
        eta_override: eta,
    };
    let gamma = l1 * (1.0 + m);
    assemble_constants(u0, &ctx, gamma, cbar, l2 * (1.0 + m), cbar, gamma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Picard stopping tolerance; defaults to `max(1e-3 |B(0,R0)|, 5 vol)`.
    pub tol_fp: Option<f64>,
    pub max_iter: usize,
    pub cfl: f64,
    /// Use this slab length instead of the contraction formula.
    pub slab_length: Option<f64>,
    /// Keep every Picard iterate in the slab reports.
    pub keep_iterates: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_fp: None,
            max_iter: 30,
            cfl: DEFAULT_CFL,
            slab_length: None,
            keep_iterates: false,
        }
    }
}

/// Per-slab record of the iteration.
#[derive(Debug, Clone, Serialize)]
pub struct PicardState {
    pub slab_index: usize,
    pub theta: f64,
    pub tau: f64,
    pub sample_times: Vec<f64>,
    /// `|rho_{k+1} - rho_k|` per iteration.
    pub distances: Vec<f64>,
    pub converged: bool,
    /// Largest `max|x|` over `{u >= 0}` minus the support radius, over samples.
    pub containment_excess: f64,
    /// Lipschitz constant of the slab's initial field.
    pub lip_start: f64,
    /// `eta0` measured on the slab's initial field.
    pub eta0_start: f64,
    /// Transform evaluations and sparse updates spent on the slab.
    pub convolutions: usize,
    pub sparse_updates: usize,
    #[serde(skip)]
    pub iterates: Vec<IndicatorDensity>,
}

impl PicardState {
    pub fn iterations(&self) -> usize {
        self.distances.len()
    }

    /// `d_{k+1} / d_k` for successive nonzero distances.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.distances
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct NonlocalSolution {
    /// `u` at the output schedule (0, requested times, horizon).
    pub trajectory: Trajectory,
    /// Indicators at the same times.
    pub density: IndicatorDensity,
    pub slabs: Vec<PicardState>,
    pub tau: f64,
    pub tol_fp: f64,
    pub constants: EstimateConstants,
}

fn slab_samples(theta: f64, end: f64, spacing: f64, outputs: &[f64]) -> Vec<f64> {
    let len = end - theta;
    let n = ((len / spacing) - 1e-9).ceil().max(1.0) as usize;
    let mut s: Vec<f64> = (0..=n).map(|k| theta + len * k as f64 / n as f64).collect();
    s[n] = end;
    s.extend(outputs.iter().copied().filter(|&t| t > theta && t < end));
    s.sort_by(f64::total_cmp);
    s.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    s
}

struct VelocityCache {
    rho: ScalarField,
    conv: ScalarField,
    t: f64,
}

struct SlabRun {
    /// `u` at every sample time of the slab.
    fields: Vec<ScalarField>,
    /// `Psi(rho)` at every sample time.
    indicators: Vec<ScalarField>,
    containment_excess: f64,
}

struct SlabSolver<'a> {
    problem: &'a DislocationProblem,
    convolver: &'a Convolver,
    cfl: f64,
    convolutions: usize,
    sparse_updates: usize,
}

impl<'a> SlabSolver<'a> {
    fn convolution(
        &mut self,
        rho: &ScalarField,
        t: f64,
        previous: Option<&VelocityCache>,
        last: Option<&VelocityCache>,
    ) -> Result<VelocityCache> {
        let differing = |c: &VelocityCache| c.rho.values().iter().zip(rho.values()).filter(|(a, b)| a != b).count();
        let mut best: Option<(&VelocityCache, usize)> = None;
        for c in [previous, last].into_iter().flatten() {
            let d = differing(c);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((c, d));
            }
        }
        let conv = match best {
            Some((c, 0)) if self.convolver.kernel().series().index_at(c.t) == self.convolver.kernel().series().index_at(t) => {
                c.conv.clone()
            }
            Some((c, _)) => {
                self.sparse_updates += 1;
                self.convolver.update(&c.rho, &c.conv, c.t, rho, t)?
            }
            None => {
                self.convolutions += 1;
                self.convolver.convolve(rho, t)?
            }
        };
        Ok(VelocityCache {
            rho: rho.clone(),
            conv,
            t,
        })
    }

    /// March the slab with `c[rho]`, returning `u` and `Psi(rho)` at the samples.
    fn march(&mut self, v: &ScalarField, samples: &[f64], rho: &[ScalarField], cache: &mut [Option<VelocityCache>]) -> Result<SlabRun> {
        let p = self.problem;
        let g = *v.grid();
        let mut u = v.clone();
        let mut fields = vec![u.clone()];
        let mut indicators = vec![indicator(&u, p.support_radius(samples[0]))];
        let mut excess = front_extent(&u) - p.support_radius(samples[0]);
        let n = samples.len();
        let mut cur = self.convolution(&rho[0], samples[0], cache[0].as_ref(), None)?;
        for j in 0..n - 1 {
            let (s0, s1) = (samples[j], samples[j + 1]);
            let next = self.convolution(&rho[j + 1], s1, cache[j + 1].as_ref(), Some(&cur))?;
            let mid = 0.5 * (s0 + s1);
            // trapezoid in time over the sample interval
            let mut c = cur.conv.zip_with(&next.conv, |a, b| 0.5 * (a + b))?;
            c = c.zip_with(p.c1.field_at(mid), |a, b| a + b)?;
            c.set_time(Some(mid));
            if p.sign_mode == SignMode::Nonnegative && !p.allow_h5_violation {
                let (i, val) = c.argmin();
                if val < -TOL_SIGN {
                    return Err(Error::H5Violation {
                        t: s0,
                        value: val,
                        location: g.node(i)[..g.dim()].to_vec(),
                    });
                }
            }
            let sign_mode = if p.allow_h5_violation { SignMode::Unrestricted } else { p.sign_mode };
            advance(&mut u, s0, s1, self.cfl, sign_mode, |_| Ok(Cow::Borrowed(&c)))?;
            if p.allow_h5_violation && !keeps_margin(&u, BOUNDARY_MARGIN_CELLS) {
                return Err(Error::Containment(format!(
                    "front came within {BOUNDARY_MARGIN_CELLS} cells of the box at t = {s1}"
                )));
            }
            excess = excess.max(front_extent(&u) - p.support_radius(s1));
            indicators.push(indicator(&u, p.support_radius(s1)));
            fields.push(u.clone());
            cache[j] = Some(std::mem::replace(&mut cur, next));
        }
        cache[n - 1] = Some(cur);
        Ok(SlabRun {
            fields,
            indicators,
            containment_excess: excess,
        })
    }
}

fn max_l1_distance(a: &[ScalarField], b: &[ScalarField]) -> Result<f64> {
    let mut d = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        d = d.max(x.zip_with(y, |p, q| p - q)?.l1_norm());
    }
    Ok(d)
}

/// Default Picard tolerance `max(1e-3 L^N(B(0,R0)), 5 vol)`.
pub fn default_tol_fp(grid: &Grid, r0: f64) -> f64 {
    let ball = unit_ball_volume(grid.dim()) * r0.powi(grid.dim() as i32);
    (1e-3 * ball).max(5.0 * grid.cell_volume())
}

/// Apply `Psi` once on a slab: solve the local problem driven by `c[rho]`
/// from `v` and return the indicators at the sample times.
pub fn picard_map(problem: &DislocationProblem, v: &ScalarField, rho: &IndicatorDensity, cfl: f64) -> Result<IndicatorDensity> {
    let convolver = Convolver::new(problem.grid(), &problem.kernel)?;
    let mut solver = SlabSolver {
        problem,
        convolver: &convolver,
        cfl,
        convolutions: 0,
        sparse_updates: 0,
    };
    let samples = rho.times().to_vec();
    let mut cache: Vec<Option<VelocityCache>> = (0..samples.len()).map(|_| None).collect();
    let run = solver.march(v, &samples, rho.densities(), &mut cache)?;
    IndicatorDensity::new(samples, run.indicators, problem.r0, problem.constants.cbar)
}

/// Solve the nonlocal problem on `[0, T]` slab by slab.
pub fn solve_nonlocal(problem: &DislocationProblem, output_times: &[f64], opts: &SolveOptions) -> Result<NonlocalSolution> {
    let g = *problem.grid();
    let k = problem.constants;
    let horizon = problem.horizon;
    if opts.max_iter < 2 {
        return Err(Error::InvalidArgument("max_iter must be at least 2".into()));
    }
    let tol_fp = opts.tol_fp.unwrap_or_else(|| default_tol_fp(&g, problem.r0));
    if !(tol_fp > 0.0) {
        return Err(Error::InvalidArgument(format!("tol_fp = {tol_fp} must be positive")));
    }
    let schedule = output_schedule(output_times, horizon)?;
    let convolver = Convolver::new(&g, &problem.kernel)?;

    // sample spacing and slab floor follow the uniform speed bound, or the
    // measured speed at each slab start when the bound does not apply
    let speed_at = |v: &ScalarField, t: f64| -> Result<f64> {
        let rho = indicator(v, problem.support_radius(t));
        let c = convolver.convolve(&rho, t)?.zip_with(problem.c1.field_at(t), |a, b| a + b)?;
        Ok(c.sup_norm())
    };
    let bound_dt = cfl_dt(k.cbar, &g, opts.cfl);
    let tau_formula = match opts.slab_length {
        Some(tau) if tau > 0.0 => Ok(tau),
        Some(tau) => Err(Error::InvalidArgument(format!("slab length {tau} must be positive"))),
        None => select_slab_length(&k, 0.9 * k.eta / 2.0, k.lip_u0.max(f64::MIN_POSITIVE), 0.0),
    };
    let tau_formula = match tau_formula {
        Ok(t) => Some(t),
        Err(e) if problem.allow_h5_violation && opts.slab_length.is_none() => {
            warn!("slab length formula unusable without the sign assumption ({e}); using the floor");
            None
        }
        Err(e) => return Err(e),
    };

    let mut v = problem.u0.clone().with_time(0.0);
    let mut theta = 0.0;
    let mut slabs = Vec::new();
    let mut out_fields = vec![v.clone()];
    let mut out_indicators = vec![indicator(&v, problem.support_radius(0.0))];
    let mut next_out = 1;
    let mut tau_used = f64::INFINITY;

    while horizon - theta > 1e-12 * horizon {
        let dt = if problem.allow_h5_violation {
            cfl_dt(speed_at(&v, theta)?, &g, opts.cfl)
        } else {
            bound_dt
        };
        let floor = MIN_SLAB_STEPS * dt;
        let mut tau = match tau_formula {
            Some(t) => t,
            None => floor,
        };
        if tau < floor && opts.slab_length.is_none() {
            if tau_formula.is_some() && slabs.is_empty() {
                warn!("slab length {tau:e} below {MIN_SLAB_STEPS} CFL steps; flooring at {floor:e}");
            }
            tau = floor;
        }
        tau_used = tau_used.min(tau);
        let mut end = (theta + tau).min(horizon);
        // avoid a sliver slab at the end
        if horizon - end < 0.25 * tau {
            end = horizon;
        }
        let spacing = (tau / 8.0).min(dt);
        let samples = slab_samples(theta, end, spacing, &schedule);
        let slab_index = slabs.len();
        let frozen = indicator(&v, problem.support_radius(theta));
        let mut rho: Vec<ScalarField> = samples.iter().map(|_| frozen.clone()).collect();
        let mut cache: Vec<Option<VelocityCache>> = (0..samples.len()).map(|_| None).collect();
        let mut solver = SlabSolver {
            problem,
            convolver: &convolver,
            cfl: opts.cfl,
            convolutions: 0,
            sparse_updates: 0,
        };
        let mut distances = Vec::new();
        let mut iterates = Vec::new();
        let run = loop {
            let run = solver.march(&v, &samples, &rho, &mut cache)?;
            let d = max_l1_distance(&run.indicators, &rho)?;
            distances.push(d);
            debug!("slab {slab_index}: iteration {} distance {d:e}", distances.len());
            if opts.keep_iterates {
                iterates.push(IndicatorDensity::new(samples.clone(), run.indicators.clone(), problem.r0, k.cbar)?);
            }
            if d <= tol_fp {
                break run;
            }
            if distances.len() >= opts.max_iter {
                return Err(Error::NoConvergence {
                    slab: slab_index,
                    iterations: distances.len(),
                    distances,
                });
            }
            rho = run.indicators;
        };
        if !problem.allow_h5_violation && run.containment_excess > 2.0 * g.max_spacing() {
            return Err(Error::Containment(format!(
                "front exceeds the support radius by {} on slab {slab_index}",
                run.containment_excess
            )));
        }
        for (s, (u, ind)) in samples.iter().zip(run.fields.iter().zip(&run.indicators)).skip(1) {
            while next_out < schedule.len() && (schedule[next_out] - s).abs() <= 1e-12 * (1.0 + s.abs()) {
                out_fields.push(u.clone().with_time(schedule[next_out]));
                out_indicators.push(ind.clone().with_time(schedule[next_out]));
                next_out += 1;
            }
        }
        slabs.push(PicardState {
            slab_index,
            theta,
            tau: end - theta,
            sample_times: samples.clone(),
            converged: true,
            containment_excess: run.containment_excess,
            lip_start: v.lipschitz_estimate(),
            eta0_start: measure_eta0(&v),
            convolutions: solver.convolutions,
            sparse_updates: solver.sparse_updates,
            iterates,
            distances,
        });
        v = run.fields.last().expect("slab has samples").clone().with_time(end);
        theta = end;
    }
    debug_assert_eq!(next_out, schedule.len());
    let trajectory = Trajectory::new(schedule.clone(), out_fields)?;
    let density = IndicatorDensity::new(schedule, out_indicators, problem.r0, k.cbar)?;
    Ok(NonlocalSolution {
        trajectory,
        density,
        slabs,
        tau: tau_used,
        tol_fp,
        constants: k,
    })
}
