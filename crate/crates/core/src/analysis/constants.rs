//! Measured constants.
//!
//! Lipschitz and sup bounds come from one-sided difference quotients of the
//! velocity snapshots, semiconvexity constants from second differences.
//! The curvature constants of the data (`c0_semi` for the initial datum,
//! `c` for the solution) are measured in the band `{|u| < eta/2}` around the
//! front, which is where the band estimates consume them; a cone tip far
//! from the front would otherwise dominate with a `1/h` kink.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::hj::{upwind_gradient_norm, Trajectory, Upwind};
use crate::oracles::unit_ball_volume;

/// Safety factor applied to the largest admissible `eta`.
pub const ETA_SAFETY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateConstants {
    /// Spatial Lipschitz constant of the velocity.
    pub l1: f64,
    /// Sup bound of the velocity.
    pub l1p: f64,
    /// Semiconvexity constant of the velocity.
    pub l2: f64,
    /// Semiconvexity constant of the initial datum (global, k = 2).
    pub l3: f64,
    pub l4: f64,
    pub l5: f64,
    pub eta0: f64,
    pub gamma: f64,
    pub eta: f64,
    /// Semiconvexity constant of the solution near its front.
    pub c: f64,
    /// Semiconvexity constant of the initial datum near its front (k = 4).
    pub c0_semi: f64,
    /// Uniform speed bound `|c0|_T + L1'`.
    pub cbar: f64,
    /// Measure of the ball of radius `r0 + cbar T`.
    pub m: f64,
    /// `sup_t |c0(., t)|_{L1}`
    pub c0_l1: f64,
    /// `sup |c0|`
    pub c0_sup: f64,
    pub lip_u0: f64,
    pub r0: f64,
    pub horizon: f64,
    pub dim: usize,
}

/// Inputs that are not measured from fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantContext {
    pub r0: f64,
    pub horizon: f64,
    pub c0_l1: f64,
    pub c0_sup: f64,
    /// Use this `eta` instead of the empirical estimate.
    pub eta_override: Option<f64>,
}

impl ConstantContext {
    pub fn local(r0: f64, horizon: f64) -> Self {
        ConstantContext {
            r0,
            horizon,
            c0_l1: 0.0,
            c0_sup: 0.0,
            eta_override: None,
        }
    }
}

/// `min |u| + |Du|` over all nodes with the expanding upwind gradient.
pub fn measure_eta0(u0: &ScalarField) -> f64 {
    let g = upwind_gradient_norm(u0, Upwind::Expanding);
    u0.values()
        .iter()
        .zip(g.values())
        .map(|(u, d)| u.abs() + d)
        .fold(f64::INFINITY, f64::min)
}

/// Largest `eta <= eta0` such that `min{|Du| : |u| < eta/2} >= sqrt(2 eta) e^{-gamma T/2}`,
/// multiplied by [`ETA_SAFETY`].
pub fn estimate_eta(u0: &ScalarField, eta0: f64, gamma: f64, horizon: f64) -> f64 {
    let g = upwind_gradient_norm(u0, Upwind::Expanding);
    let mut nodes: Vec<(f64, f64)> = u0
        .values()
        .iter()
        .zip(g.values())
        .map(|(u, d)| (u.abs(), *d))
        .collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let decay = (-gamma * horizon / 2.0).exp();
    // admissible iff the min gradient over {|u| < eta/2} reaches sqrt(2 eta) decay,
    // i.e. eta <= (gmin / decay)^2 / 2; scan candidate band edges in |u| order
    let cap = |gmin: f64| {
        if decay == 0.0 {
            f64::INFINITY
        } else {
            (gmin / decay).powi(2) / 2.0
        }
    };
    let mut best = 0.0f64;
    let mut gmin = f64::INFINITY;
    let mut k = 0;
    while k < nodes.len() {
        let level = nodes[k].0;
        // eta in (2 * previous level, 2 * level] sees exactly nodes[..k]
        let candidate = (2.0 * level).min(cap(gmin)).min(eta0);
        best = best.max(candidate);
        if cap(gmin) < 2.0 * level || 2.0 * level >= eta0 {
            break;
        }
        while k < nodes.len() && nodes[k].0 == level {
            gmin = gmin.min(nodes[k].1);
            k += 1;
        }
    }
    if k == nodes.len() {
        best = best.max(cap(gmin).min(eta0));
    }
    ETA_SAFETY * best
}

/// `max(0, -min second difference)` over nodes with `|u| < half_band`.
pub fn band_semiconvexity(u: &ScalarField, half_band: f64, k: usize) -> Result<f64> {
    let d2 = u.second_difference_min_where(k, |i| u.get(i).abs() < half_band)?;
    Ok(if d2.is_finite() { (-d2).max(0.0) } else { 0.0 })
}

/// `max(0, -second_difference_min(k))`
pub fn global_semiconvexity(u: &ScalarField, k: usize) -> Result<f64> {
    Ok((-u.second_difference_min(k)?).max(0.0))
}

impl EstimateConstants {
    /// Gradient-growth rate used by the Gronwall band estimate.
    pub fn l4_formula(l1: f64, l1p: f64, c: f64, gamma: f64, eta: f64, horizon: f64) -> f64 {
        l1 + (gamma * horizon / 2.0).exp() * l1p * c / (2.0 * eta).sqrt()
    }

    /// `L5 = C0 e^{L4 t}`
    pub fn l5_at(&self, t: f64) -> f64 {
        self.c0_semi * (self.l4 * t).exp()
    }

    /// `eta_bar = min(eta/2, eta0/2, eta0^2/(4 C0))`
    pub fn eta_bar(&self) -> f64 {
        let curv = if self.c0_semi > 0.0 {
            self.eta0 * self.eta0 / (4.0 * self.c0_semi)
        } else {
            f64::INFINITY
        };
        (self.eta / 2.0).min(self.eta0 / 2.0).min(curv)
    }

    fn finish(&mut self) {
        self.l4 = Self::l4_formula(self.l1, self.l1p, self.c, self.gamma, self.eta, self.horizon);
        self.l5 = self.l5_at(self.horizon);
    }

    /// Re-measure the solution semiconvexity `C` on a computed trajectory and
    /// update `L4`, `L5`.
    pub fn refine_with_trajectory(&mut self, traj: &Trajectory) -> Result<()> {
        let mut c = 0.0f64;
        for (_, u) in traj.iter() {
            c = c.max(band_semiconvexity(u, self.eta / 2.0, 2)?);
        }
        self.c = c;
        self.finish();
        Ok(())
    }
}

/// `L^N(B(0, r0 + cbar T))`
pub fn front_ball_measure(dim: usize, r0: f64, cbar: f64, horizon: f64) -> f64 {
    unit_ball_volume(dim) * (r0 + cbar * horizon).powi(dim as i32)
}

/// Shared tail: data constants measured on `u0`, speed constants supplied.
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble_constants(
    u0: &ScalarField,
    ctx: &ConstantContext,
    l1: f64,
    l1p: f64,
    l2: f64,
    cbar: f64,
    gamma: f64,
) -> Result<EstimateConstants> {
    let dim = u0.grid().dim();
    let eta0 = measure_eta0(u0);
    if !(eta0 > 0.0) {
        return Err(Error::H3Violation(eta0));
    }
    let m = front_ball_measure(dim, ctx.r0, cbar, ctx.horizon);
    let eta = match ctx.eta_override {
        Some(e) if e > 0.0 => e,
        Some(e) => return Err(Error::InvalidArgument(format!("eta override {e} must be positive"))),
        None => estimate_eta(u0, eta0, gamma, ctx.horizon),
    };
    let c0_semi = band_semiconvexity(u0, eta / 2.0, 4)?;
    let mut k = EstimateConstants {
        l1,
        l1p,
        l2,
        l3: global_semiconvexity(u0, 2)?,
        l4: 0.0,
        l5: 0.0,
        eta0,
        gamma,
        eta,
        c: c0_semi,
        c0_semi,
        cbar,
        m,
        c0_l1: ctx.c0_l1,
        c0_sup: ctx.c0_sup,
        lip_u0: u0.lipschitz_estimate(),
        r0: ctx.r0,
        horizon: ctx.horizon,
        dim,
    };
    k.finish();
    Ok(k)
}

/// Constants of a local problem measured from velocity snapshots and the
/// initial datum. The solution constant `C` starts at the initial datum's
/// value; call [`EstimateConstants::refine_with_trajectory`] once solved.
pub fn estimate_constants(c_snapshots: &[ScalarField], u0: &ScalarField, ctx: &ConstantContext) -> Result<EstimateConstants> {
    if c_snapshots.is_empty() {
        return Err(Error::InvalidArgument("no velocity snapshots".into()));
    }
    let mut l1 = 0.0f64;
    let mut l1p = 0.0f64;
    let mut l2 = 0.0f64;
    for c in c_snapshots {
        u0.check_same_grid(c)?;
        l1 = l1.max(c.lipschitz_estimate());
        l1p = l1p.max(c.sup_norm());
        l2 = l2.max(global_semiconvexity(c, 2)?);
    }
    let cbar = ctx.c0_l1 + l1p;
    let m = front_ball_measure(u0.grid().dim(), ctx.r0, cbar, ctx.horizon);
    assemble_constants(u0, ctx, l1, l1p, l2, cbar, l1 * (1.0 + m))
}
