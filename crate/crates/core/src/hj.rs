//! Monotone upwind solver for the local level-set equation `u_t = c(x,t)|Du|`.
//!
//! First-order Godunov (Rouy–Tourin) upwinding with forward Euler. With
//! `c >= 0` the solution at a node can only grow, and the information comes
//! from larger neighbours; with `c <= 0` it comes from smaller ones. Under the
//! CFL restriction the update is nondecreasing in every nodal value, so the
//! discrete comparison principle holds exactly.

use std::borrow::Cow;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{write_field, Grid, ScalarField};

pub const DEFAULT_CFL: f64 = 0.5;
pub const MAX_CFL: f64 = 0.9;
pub const TOL_SIGN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignMode {
    Nonnegative,
    Nonpositive,
    Unrestricted,
}

impl SignMode {
    /// Check a velocity snapshot against this mode.
    pub fn check(self, c: &ScalarField) -> Result<()> {
        let violation = match self {
            SignMode::Unrestricted => None,
            SignMode::Nonnegative => {
                let (i, v) = c.argmin();
                (v < -TOL_SIGN).then_some((i, v))
            }
            SignMode::Nonpositive => c
                .values()
                .iter()
                .copied()
                .enumerate()
                .find(|&(_, v)| v > TOL_SIGN),
        };
        match violation {
            None => Ok(()),
            Some((i, v)) => Err(Error::SignViolation {
                mode: self,
                value: v,
                location: c.grid().node(i)[..c.grid().dim()].to_vec(),
            }),
        }
    }
}

/// Which neighbours an upwind gradient reads from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Upwind {
    /// Larger neighbours; matches `c >= 0` where level sets move outward.
    Expanding,
    /// Smaller neighbours; matches `c <= 0`.
    Contracting,
}

#[inline]
fn upwind_norm_at(values: &[f64], grid: &Grid, strides: &[usize; 3], idx: usize, dir: Upwind) -> f64 {
    let mut sq = 0.0;
    let mut rem = idx;
    for a in 0..grid.dim() {
        let n = grid.n()[a];
        let m = rem / strides[a];
        rem %= strides[a];
        let h = grid.h()[a];
        let u = values[idx];
        let fwd = if m + 1 < n { (values[idx + strides[a]] - u) / h } else { 0.0 };
        let bwd = if m > 0 { (u - values[idx - strides[a]]) / h } else { 0.0 };
        let g = match dir {
            Upwind::Expanding => fwd.max(-bwd).max(0.0),
            Upwind::Contracting => bwd.max(-fwd).max(0.0),
        };
        sq += g * g;
    }
    sq.sqrt()
}

pub fn upwind_gradient_norm(u: &ScalarField, dir: Upwind) -> ScalarField {
    let grid = *u.grid();
    let strides = grid.strides();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| upwind_norm_at(u.values(), &grid, &strides, i, dir))
        .collect();
    ScalarField::from_values(grid, values)
        .expect("finite input gives finite gradients")
        .with_time_of(u)
}

trait WithTimeOf {
    fn with_time_of(self, other: &ScalarField) -> Self;
}

impl WithTimeOf for ScalarField {
    fn with_time_of(mut self, other: &ScalarField) -> Self {
        self.set_time(other.time());
        self
    }
}

/// Explicit step restricted by the CFL number; effectively unbounded when the
/// speed vanishes.
pub fn cfl_dt(c_sup: f64, grid: &Grid, cfl: f64) -> f64 {
    cfl * grid.min_spacing() / (grid.dim() as f64 * c_sup.max(1e-300))
}

/// One forward Euler step of `u_t = c|Du|`.
pub fn step(u: &ScalarField, c: &ScalarField, dt: f64, sign_mode: SignMode) -> Result<ScalarField> {
    u.check_same_grid(c)?;
    if !(dt >= 0.0) {
        return Err(Error::InvalidArgument(format!("time step {dt} is negative")));
    }
    sign_mode.check(c)?;
    let grid = *u.grid();
    let limit = cfl_dt(c.sup_norm(), &grid, 1.0);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, required: limit });
    }
    let strides = grid.strides();
    let uv = u.values();
    let cv = c.values();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let ci = cv[i];
            if ci > 0.0 {
                uv[i] + dt * ci * upwind_norm_at(uv, &grid, &strides, i, Upwind::Expanding)
            } else if ci < 0.0 {
                uv[i] + dt * ci * upwind_norm_at(uv, &grid, &strides, i, Upwind::Contracting)
            } else {
                uv[i]
            }
        })
        .collect();
    ScalarField::from_values(grid, values)
}

/// Time-indexed velocity `c(., t)`.
pub trait VelocityField: Sync {
    fn at(&self, t: f64) -> Cow<'_, ScalarField>;
}

impl VelocityField for ScalarField {
    fn at(&self, _t: f64) -> Cow<'_, ScalarField> {
        Cow::Borrowed(self)
    }
}

/// Velocity sampled from a closure `f(x, t)` on demand.
pub struct FnVelocity<F> {
    grid: Grid,
    f: F,
}

impl<F: Fn(&[f64], f64) -> f64 + Sync> FnVelocity<F> {
    pub fn new(grid: Grid, f: F) -> Self {
        FnVelocity { grid, f }
    }
}

impl<F: Fn(&[f64], f64) -> f64 + Sync> VelocityField for FnVelocity<F> {
    fn at(&self, t: f64) -> Cow<'_, ScalarField> {
        let g = self.grid;
        let values = (0..g.len())
            .into_par_iter()
            .map(|i| {
                let x = g.node(i);
                (self.f)(&x[..g.dim()], t)
            })
            .collect();
        Cow::Owned(
            ScalarField::from_values(g, values)
                .expect("velocity closure returned a non-finite value")
                .with_time(t),
        )
    }
}

pub struct LocalProblem<'a> {
    pub u0: ScalarField,
    pub velocity: &'a dyn VelocityField,
    pub horizon: f64,
    pub sign_mode: SignMode,
    pub cfl: f64,
}

impl<'a> LocalProblem<'a> {
    pub fn new(u0: ScalarField, velocity: &'a dyn VelocityField, horizon: f64) -> Self {
        LocalProblem {
            u0,
            velocity,
            horizon,
            sign_mode: SignMode::Nonnegative,
            cfl: DEFAULT_CFL,
        }
    }

    pub fn sign_mode(mut self, mode: SignMode) -> Self {
        self.sign_mode = mode;
        self
    }

    pub fn cfl(mut self, cfl: f64) -> Self {
        self.cfl = cfl;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<ScalarField>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, snapshots: Vec<ScalarField>) -> Result<Self> {
        if times.len() != snapshots.len() || times.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{} times for {} snapshots",
                times.len(),
                snapshots.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("trajectory times must increase".into()));
        }
        Ok(Trajectory { times, snapshots })
    }

    pub fn grid(&self) -> &Grid {
        self.snapshots[0].grid()
    }

    pub fn initial(&self) -> &ScalarField {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &ScalarField {
        self.snapshots.last().expect("non-empty trajectory")
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &ScalarField)> {
        self.times.iter().copied().zip(&self.snapshots)
    }

    /// Snapshot at a stored time (within `1e-12`).
    pub fn at(&self, t: f64) -> Option<&ScalarField> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * (1.0 + t.abs()))
            .map(|i| &self.snapshots[i])
    }

    /// Write one field file per snapshot plus `index.txt` (`time file` lines).
    pub fn export(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut index = String::new();
        for (k, (t, f)) in self.iter().enumerate() {
            let name = format!("{stem}_{k:04}.txt");
            write_field(&f.clone().with_time(t), dir.join(&name))?;
            index.push_str(&format!("{t:?} {name}\n"));
        }
        std::fs::write(dir.join("index.txt"), index)?;
        Ok(())
    }
}

/// Normalize requested output times: inside `[0, horizon]`, sorted, deduplicated,
/// always including both ends.
pub fn output_schedule(output_times: &[f64], horizon: f64) -> Result<Vec<f64>> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be positive")));
    }
    let mut times = vec![0.0, horizon];
    for &t in output_times {
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "output time {t} outside [0, {horizon}]"
            )));
        }
        times.push(t);
    }
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    Ok(times)
}

/// Advance `u` from `t0` to exactly `t1` with CFL-limited sub-steps, sampling
/// the velocity at each sub-step midpoint. Returns the number of sub-steps.
pub fn advance<'v>(
    u: &mut ScalarField,
    t0: f64,
    t1: f64,
    cfl: f64,
    sign_mode: SignMode,
    mut velocity: impl FnMut(f64) -> Result<Cow<'v, ScalarField>>,
) -> Result<usize> {
    if !(cfl > 0.0 && cfl <= MAX_CFL) {
        return Err(Error::InvalidArgument(format!("CFL number {cfl} not in (0, {MAX_CFL}]")));
    }
    let grid = *u.grid();
    let mut t = t0;
    let mut steps = 0;
    while t1 - t > 1e-14 * (1.0 + t1.abs()) {
        let remaining = t1 - t;
        let c_left = velocity(t)?;
        let mut dt = cfl_dt(c_left.sup_norm(), &grid, cfl).min(remaining);
        drop(c_left);
        let mut c = velocity(t + dt / 2.0)?;
        // the speed may grow across the sub-step; shrink until the midpoint
        // velocity satisfies the same CFL number
        for _ in 0..4 {
            let allowed = cfl_dt(c.sup_norm(), &grid, cfl);
            if dt <= allowed * (1.0 + 1e-12) {
                break;
            }
            dt = allowed;
            c = velocity(t + dt / 2.0)?;
        }
        let landing = remaining - dt <= 1e-14 * (1.0 + t1.abs());
        *u = step(u, &c, dt, sign_mode)?;
        t = if landing { t1 } else { t + dt };
        steps += 1;
    }
    u.set_time(Some(t1));
    Ok(steps)
}

/// Solve the local problem and return snapshots at `output_times` (plus 0
/// and the horizon).
pub fn solve_local(problem: &LocalProblem<'_>, output_times: &[f64]) -> Result<Trajectory> {
    let times = output_schedule(output_times, problem.horizon)?;
    let grid = *problem.u0.grid();
    let mut u = problem.u0.clone().with_time(0.0);
    let mut snapshots = vec![u.clone()];
    for w in times.windows(2) {
        advance(&mut u, w[0], w[1], problem.cfl, problem.sign_mode, |t| {
            let c = problem.velocity.at(t);
            if !c.grid().same_nodes(&grid) {
                return Err(Error::GridMismatch("velocity and u0 live on different grids".into()));
            }
            Ok(c)
        })?;
        snapshots.push(u.clone());
    }
    Trajectory::new(times, snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{euclidean_norm, sample};
    use approx::assert_abs_diff_eq;

    fn cone(g: &Grid) -> ScalarField {
        sample(g, |x| 1.0 - euclidean_norm(x)).unwrap()
    }

    #[test]
    fn gradient_of_constant_and_linear() {
        let g = Grid::cube(2, -1.0, 1.0, 16).unwrap();
        let c = ScalarField::constant(g, 3.0);
        for dir in [Upwind::Expanding, Upwind::Contracting] {
            assert_eq!(upwind_gradient_norm(&c, dir).sup_norm(), 0.0);
        }
        let lin = sample(&g, |x| 3.0 * x[0] + 4.0 * x[1]).unwrap();
        for dir in [Upwind::Expanding, Upwind::Contracting] {
            let gn = upwind_gradient_norm(&lin, dir);
            for idx in 0..g.len() {
                let m = g.multi_index(idx);
                if (1..15).contains(&m[0]) && (1..15).contains(&m[1]) {
                    assert_abs_diff_eq!(gn.get(idx), 5.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradient_of_cone() {
        let g = Grid::cube(2, -2.0, 2.0, 80).unwrap();
        let h = g.h()[0];
        let gn = upwind_gradient_norm(&cone(&g), Upwind::Expanding);
        for idx in 0..g.len() {
            let x = g.node(idx);
            let m = g.multi_index(idx);
            let interior = (1..79).contains(&m[0]) && (1..79).contains(&m[1]);
            let r = euclidean_norm(&x[..2]);
            // one-sided differences of 1 - r err by about h / r
            if interior && r > 4.0 * h {
                assert!((gn.get(idx) - 1.0).abs() <= h / r, "at {x:?}: {}", gn.get(idx));
            }
        }
        // the tip is a local maximum: nothing larger to read from
        let tip = g.nearest_node(&[h / 2.0, h / 2.0]);
        assert_eq!(gn.get(tip), 0.0);
    }

    #[test]
    fn cfl_examples() {
        let g = Grid::cube(2, 0.0, 1.0, 10).unwrap();
        assert_abs_diff_eq!(cfl_dt(1.0, &g, 0.5), 0.025, epsilon = 1e-15);
        let g2 = Grid::new(&[0.0, 0.0], &[1.0, 2.0], &[10, 10]).unwrap();
        assert_abs_diff_eq!(cfl_dt(2.0, &g2, 0.5), 0.0125, epsilon = 1e-15);
        assert!(cfl_dt(0.0, &g, 0.5) > 1e100);
    }

    #[test]
    fn zero_velocity_step_is_identity() {
        let g = Grid::cube(2, -2.0, 2.0, 32).unwrap();
        let u = cone(&g);
        let v = step(&u, &ScalarField::zeros(g), 0.01, SignMode::Nonnegative).unwrap();
        assert_eq!(v.values(), u.values());
    }

    #[test]
    fn unit_speed_step_matches_exact_solution() {
        // exact solution R0 + t - |x| away from the tip
        let g = Grid::cube(2, -2.0, 2.0, 128).unwrap();
        let h = g.h()[0];
        let dt = cfl_dt(1.0, &g, 0.5);
        let u = step(&cone(&g), &ScalarField::constant(g, 1.0), dt, SignMode::Nonnegative).unwrap();
        for idx in 0..g.len() {
            let m = g.multi_index(idx);
            let r = g.node_norm(idx);
            if (1..127).contains(&m[0]) && (1..127).contains(&m[1]) && r > 3.0 * h {
                let exact = 1.0 + dt - r;
                assert!((u.get(idx) - exact).abs() <= dt * h / r, "r = {r}");
            }
        }
    }

    #[test]
    fn step_rejects_cfl_violation_and_sign() {
        let g = Grid::cube(2, -1.0, 1.0, 16).unwrap();
        let u = cone(&g);
        let c = ScalarField::constant(g, 1.0);
        let limit = cfl_dt(1.0, &g, 1.0);
        match step(&u, &c, 2.0 * limit, SignMode::Nonnegative) {
            Err(Error::Cfl { required, .. }) => assert_abs_diff_eq!(required, limit),
            other => panic!("expected CFL rejection, got {other:?}"),
        }
        let neg = ScalarField::constant(g, -1.0);
        assert!(matches!(
            step(&u, &neg, 0.001, SignMode::Nonnegative),
            Err(Error::SignViolation { .. })
        ));
        assert!(step(&u, &c, 0.001, SignMode::Nonpositive).is_err());
        assert!(step(&u, &neg, 0.001, SignMode::Nonpositive).is_ok());
    }

    #[test]
    fn step_is_monotone() {
        let g = Grid::cube(2, -1.0, 1.0, 24).unwrap();
        let u = sample(&g, |x| (3.0 * x[0]).sin() * x[1]).unwrap();
        let v = u.map(|a| a + 0.05);
        let w = u.zip_with(&v, |a, b| if a > 0.2 { b } else { a }).unwrap();
        let c = sample(&g, |x| x[0] - 0.3 * x[1]).unwrap();
        let dt = cfl_dt(c.sup_norm(), &g, 0.9);
        let su = step(&u, &c, dt, SignMode::Unrestricted).unwrap();
        let sw = step(&w, &c, dt, SignMode::Unrestricted).unwrap();
        assert!(su.values().iter().zip(sw.values()).all(|(a, b)| a <= b));
    }

    #[test]
    fn solve_local_expanding_ball() {
        let g = Grid::cube(2, -3.0, 3.0, 128).unwrap();
        let h = g.h()[0];
        let c = ScalarField::constant(g, 1.0);
        let p = LocalProblem::new(cone(&g), &c, 1.0);
        let traj = solve_local(&p, &[0.5]).unwrap();
        assert_eq!(traj.times, vec![0.0, 0.5, 1.0]);
        // radius along the first axis from the sign change
        let u = traj.last();
        let row: Vec<(f64, f64)> = (0..g.len())
            .filter(|&i| g.multi_index(i)[1] == 64)
            .map(|i| (g.node(i)[0], u.get(i)))
            .collect();
        let crossing = row
            .windows(2)
            .filter(|w| w[0].0 > 0.0 && w[0].1 >= 0.0 && w[1].1 < 0.0)
            .map(|w| w[0].0 + w[0].1 / (w[0].1 - w[1].1) * h)
            .next()
            .unwrap();
        assert!((crossing - 2.0).abs() <= 1.5 * h, "{crossing}");
    }

    #[test]
    fn solve_local_zero_velocity_is_constant() {
        let g = Grid::cube(2, -2.0, 2.0, 32).unwrap();
        let c = ScalarField::zeros(g);
        let p = LocalProblem::new(cone(&g), &c, 1.0);
        let traj = solve_local(&p, &[0.3, 0.6]).unwrap();
        for (_, f) in traj.iter() {
            assert_eq!(f.values(), traj.initial().values());
        }
    }

    #[test]
    fn time_dependent_speed_front() {
        // radial characteristic ODE: R(2) = 1 + int_0^2 max(0, 1 - t) dt = 1.5
        // (the closed form is evaluated in the oracle tests)
        let g = Grid::cube(1, -3.0, 3.0, 600).unwrap();
        let h = g.h()[0];
        let vel = FnVelocity::new(g, |_x, t| (1.0 - t).max(0.0));
        let p = LocalProblem::new(cone(&g), &vel, 2.0);
        let traj = solve_local(&p, &[]).unwrap();
        let u = traj.last();
        let r = (0..g.len())
            .filter(|&i| u.get(i) >= 0.0)
            .map(|i| g.node(i)[0])
            .fold(0.0f64, f64::max);
        assert!((r - 1.5).abs() <= 2.0 * h, "{r}");
    }

    #[test]
    fn output_schedule_validation() {
        assert_eq!(output_schedule(&[0.5, 0.5, 1.0], 1.0).unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(output_schedule(&[1.5], 1.0).is_err());
        assert!(output_schedule(&[], 0.0).is_err());
    }
}
