//! Audits of the a-priori estimates on computed trajectories.
//!
//! Every check returns [`EstimateReport`]s with `lhs <= rhs` expected. The
//! schemes are first order, so each check carries a multiplicative 5% slack
//! plus an additive grid-dependent budget documented on the function.

use crate::error::{Error, Result};
use crate::grid::{BandSpec, ScalarField};
use crate::hj::{upwind_gradient_norm, Trajectory, Upwind, VelocityField};
use crate::nonlocal::IndicatorDensity;

use super::constants::EstimateConstants;
use super::mollifier::MollifiedIndicator;
use super::perimeter::{perimeter, superlevel_perimeter};
use super::report::EstimateReport;

/// Multiplicative slack shared by the inequality checks.
pub const REL_SLACK: f64 = 0.05;
/// Quadrature sub-intervals per output interval for time integrals.
const TIME_SUBSTEPS: usize = 16;

fn same_times(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::InvalidArgument("trajectories sampled at different times".into()));
    }
    if !a.grid().same_nodes(b.grid()) {
        return Err(Error::GridMismatch("trajectories on different grids".into()));
    }
    Ok(())
}

/// `sup|u1 - u2|(t) <= lip_u0 e^{L1 t} int_0^t sup|c1 - c2| ds` at every
/// common output time; slack `5% rhs + 5 h lip_u0`.
pub fn check_solution_difference(
    u1: &Trajectory,
    u2: &Trajectory,
    c1: &dyn VelocityField,
    c2: &dyn VelocityField,
    lip_u0: f64,
    l1: f64,
) -> Result<Vec<EstimateReport>> {
    same_times(u1, u2)?;
    let h = u1.grid().max_spacing();
    let gap = |s: f64| -> Result<f64> { Ok(c1.at(s).zip_with(&c2.at(s), |a, b| a - b)?.sup_norm()) };
    let mut integral = 0.0;
    let mut prev_t = u1.times[0];
    let mut prev_gap = gap(prev_t)?;
    let mut out = Vec::with_capacity(u1.times.len());
    for (k, &t) in u1.times.iter().enumerate() {
        if k > 0 {
            let dt = (t - prev_t) / TIME_SUBSTEPS as f64;
            for j in 1..=TIME_SUBSTEPS {
                let s = prev_t + j as f64 * dt;
                let g = gap(s)?;
                integral += 0.5 * dt * (prev_gap + g);
                prev_gap = g;
            }
            prev_t = t;
        }
        let lhs = u1.snapshots[k].zip_with(&u2.snapshots[k], |a, b| a - b)?.sup_norm();
        let rhs = lip_u0 * (l1 * t).exp() * integral;
        out.push(EstimateReport::new(
            "solution_difference",
            t,
            lhs,
            rhs,
            REL_SLACK * rhs + 5.0 * h * lip_u0,
        ));
    }
    Ok(out)
}

/// `max_{B(x0, 2 delta/eta0)} v >= v(x0) + delta`, reported with
/// `lhs = v(x0) + delta`, `rhs` the node maximum, slack `Lip(v) h`.
pub fn increase_principle_check(v: &ScalarField, eta0: f64, delta: f64, x0: usize) -> Result<EstimateReport> {
    let g = v.grid();
    if !(eta0 > 0.0 && delta > 0.0 && delta < eta0 / 2.0) {
        return Err(Error::InvalidArgument(format!("need 0 < delta < eta0/2, got delta = {delta}, eta0 = {eta0}")));
    }
    if x0 >= g.len() {
        return Err(Error::InvalidArgument(format!("node {x0} outside the grid")));
    }
    let v0 = v.get(x0);
    if v0.abs() > delta {
        return Err(Error::InvalidArgument(format!("|v(x0)| = {} exceeds delta = {delta}", v0.abs())));
    }
    let radius = 2.0 * delta / eta0;
    let x = g.node(x0);
    let dim = g.dim();
    for a in 0..dim {
        if x[a] - radius < g.lo()[a] || x[a] + radius > g.hi()[a] {
            return Err(Error::InvalidArgument(format!("ball of radius {radius} around {:?} leaves the box", &x[..dim])));
        }
    }
    let mut best = f64::NEG_INFINITY;
    for i in 0..g.len() {
        let y = g.node(i);
        let d2: f64 = (0..dim).map(|a| (y[a] - x[a]).powi(2)).sum();
        if d2 <= radius * radius * (1.0 + 1e-12) {
            best = best.max(v.get(i));
        }
    }
    Ok(EstimateReport::new("increase_principle", v.time().unwrap_or(0.0), v0 + delta, best, v.lipschitz_estimate() * g.max_spacing())
        .with_context(format!("x0 = {:?}, radius = {radius}", &x[..dim])))
}

/// Largest `|x|` over nodes of `{u >= 0}`; `0` for an empty set.
pub fn superlevel_extent(u: &ScalarField) -> f64 {
    crate::fixedpoint::front_extent(u)
}

/// `{u(., t) >= 0}` inside `B(0, R0 + speed_bound t)` up to `2h`.
pub fn check_front_containment(traj: &Trajectory, r0: f64, speed_bound: f64) -> Vec<EstimateReport> {
    let h = traj.grid().max_spacing();
    traj.iter()
        .map(|(t, u)| EstimateReport::new("front_containment", t, superlevel_extent(u), r0 + speed_bound * t, 2.0 * h))
        .collect()
}

/// Nodes whose expanding upwind gradient differs from the centered one by
/// more than half: kinks of the solution where a.e. statements say nothing.
pub fn kink_mask(u: &ScalarField) -> Vec<bool> {
    let up = upwind_gradient_norm(u, Upwind::Expanding);
    (0..u.grid().len())
        .map(|i| {
            let a = up.get(i);
            let c = u.centered_gradient_norm(i);
            (a - c).abs() > 0.5 * a.max(c)
        })
        .collect()
}

/// `|Du(x, t)| >= sqrt(2 eta) e^{-gamma t/2}` on `{|u| < eta/2}` away from
/// kinks; `lhs` is the bound, `rhs` the smallest upwind gradient, slack
/// `10 h c_semi` with `c_semi` the solution's semiconvexity constant.
/// Times with no admissible node pass vacuously (`rhs = +inf`).
pub fn check_lower_gradient_bound(traj: &Trajectory, eta: f64, gamma: f64, c_semi: f64) -> Result<Vec<EstimateReport>> {
    if !(eta > 0.0) || !(gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!("need eta > 0 and gamma >= 0, got {eta}, {gamma}")));
    }
    let h = traj.grid().max_spacing();
    Ok(traj
        .iter()
        .map(|(t, u)| {
            let grad = upwind_gradient_norm(u, Upwind::Expanding);
            let kinks = kink_mask(u);
            let min = (0..u.grid().len())
                .filter(|&i| u.get(i).abs() < eta / 2.0 && !kinks[i])
                .map(|i| grad.get(i))
                .fold(f64::INFINITY, f64::min);
            let bound = (2.0 * eta).sqrt() * (-gamma * t / 2.0).exp();
            EstimateReport::new("lower_gradient_bound", t, bound, min, 10.0 * h * c_semi)
        })
        .collect())
}

fn band_budget(u: &ScalarField, a: f64, b: f64) -> f64 {
    u.grid().max_spacing() * (superlevel_perimeter(u, a) + superlevel_perimeter(u, b))
}

/// The band inequalities without the hypothesis on the band position:
/// `int phi(u(t)) <= e^{L4 t} int phi(u0)` and
/// `|{a <= u(t) <= b}| <= e^{L4 t} |{a <= u0 <= b}|`; slack `5% rhs`
/// plus `h` times the perimeters of the two band edges at time `t`.
pub fn gronwall_band_inequality(traj: &Trajectory, band: BandSpec, l4: f64) -> Result<Vec<EstimateReport>> {
    let phi = MollifiedIndicator::new(band);
    let u0 = traj.initial();
    let phi0 = phi.integral(u0);
    let m0 = u0.band_measure(band.a, band.b)?;
    let mut out = Vec::new();
    for (t, u) in traj.iter() {
        let growth = (l4 * t).exp();
        let budget = band_budget(u, band.a - band.epsilon, band.b + band.epsilon);
        let rhs = growth * phi0;
        out.push(EstimateReport::new("gronwall_phi", t, phi.integral(u), rhs, REL_SLACK * rhs + budget));
        let rhs = growth * m0;
        let budget = band_budget(u, band.a, band.b);
        out.push(EstimateReport::new("gronwall_band", t, u.band_measure(band.a, band.b)?, rhs, REL_SLACK * rhs + budget));
    }
    Ok(out)
}

/// [`gronwall_band_inequality`] under its hypothesis
/// `-eta/2 < a - eps < b + eps < eta/2`.
pub fn gronwall_band_check(traj: &Trajectory, band: BandSpec, l4: f64, eta: f64) -> Result<Vec<EstimateReport>> {
    if !(-eta / 2.0 < band.a - band.epsilon && band.b + band.epsilon < eta / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "band [{}, {}] widened by {} leaves (-eta/2, eta/2) with eta = {eta}",
            band.a, band.b, band.epsilon
        )));
    }
    gronwall_band_inequality(traj, band, l4)
}

/// `|{a <= u(t) <= b}| <= C0 e^{L4 t} (b - a + 2 eps) / eta * |B(0, R0 + 1)|`
/// for `u = u(., t)`; requires `-eta/2 < a < b < eta/2`.
pub fn initial_band_bound(u: &ScalarField, band: BandSpec, constants: &EstimateConstants, t: f64) -> Result<EstimateReport> {
    let k = constants;
    if !(-k.eta / 2.0 < band.a && band.b < k.eta / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "band [{}, {}] outside (-eta/2, eta/2) with eta = {}",
            band.a, band.b, k.eta
        )));
    }
    let ball = crate::oracles::unit_ball_volume(k.dim) * (k.r0 + 1.0).powi(k.dim as i32);
    let rhs = k.l5_at(t) * (band.width() + 2.0 * band.epsilon) / k.eta * ball;
    let lhs = u.band_measure(band.a, band.b)?;
    Ok(EstimateReport::new("initial_band", t, lhs, rhs, REL_SLACK * rhs + band_budget(u, band.a, band.b))
        .with_context("L5 = C0 exp(L4 t) from the proof of the estimate"))
}

/// `|{a <= u(t) <= b}| <= 3^N e^{L4 t} (b - a) / eta0 * per({u0 >= b})`
/// for `-eta_bar < a < b < eta_bar`.
pub fn perimeter_band_bound(
    u0: &ScalarField,
    u: &ScalarField,
    t: f64,
    band: (f64, f64),
    constants: &EstimateConstants,
) -> Result<EstimateReport> {
    let (a, b) = band;
    let k = constants;
    let eta_bar = k.eta_bar();
    if !(-eta_bar < a && a < b && b < eta_bar) {
        return Err(Error::InvalidArgument(format!("band [{a}, {b}] outside (-eta_bar, eta_bar) with eta_bar = {eta_bar}")));
    }
    u0.check_same_grid(u)?;
    let per = superlevel_perimeter(u0, b);
    let rhs = 3f64.powi(k.dim as i32) * (k.l4 * t).exp() * (b - a) / k.eta0 * per;
    let lhs = u.band_measure(a, b)?;
    Ok(EstimateReport::new("perimeter_band", t, lhs, rhs, REL_SLACK * rhs + band_budget(u, a, b))
        .with_context(format!("per(u0 >= b) = {per}")))
}

/// Adjacent-sample `(dt, |rho_{k+1} - rho_k|_{L1})`.
pub fn l1_continuity_modulus(indicators: &IndicatorDensity) -> Result<Vec<(f64, f64)>> {
    let times = indicators.times();
    if times.len() < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let d = indicators.densities();
    (1..times.len())
        .map(|k| Ok((times[k] - times[k - 1], d[k].zip_with(&d[k - 1], |x, y| x - y)?.l1_norm())))
        .collect()
}

/// Empirical slope `max jump / dt` of the modulus.
pub fn modulus_slope(modulus: &[(f64, f64)]) -> f64 {
    modulus.iter().filter(|(dt, _)| *dt > 0.0).map(|(dt, j)| j / dt).fold(0.0, f64::max)
}

/// Largest adjacent-sample jump.
pub fn max_jump(modulus: &[(f64, f64)]) -> f64 {
    modulus.iter().map(|m| m.1).fold(0.0, f64::max)
}

/// Each jump is at most `rate * dt`. Slack `5% rhs` plus a counting
/// budget of `2 vol sqrt(per / h)` cells for the discrete front.
pub fn l1_continuity_check(indicators: &IndicatorDensity, rate: f64) -> Result<Vec<EstimateReport>> {
    let modulus = l1_continuity_modulus(indicators)?;
    let g = *indicators.densities()[0].grid();
    let per = indicators
        .densities()
        .iter()
        .map(perimeter)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let counting = 2.0 * g.cell_volume() * (per / g.min_spacing()).sqrt();
    Ok(modulus
        .iter()
        .zip(&indicators.times()[1..])
        .map(|(&(dt, jump), &t)| {
            let rhs = rate * dt;
            EstimateReport::new("l1_continuity", t, jump, rhs, REL_SLACK * rhs + counting)
        })
        .collect())
}
