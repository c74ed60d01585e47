//! Reference solutions: the Oleinik–Lax formula for constant speed, radial
//! front laws, and exact measures of balls and annuli.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::grid::euclidean_norm;

/// Fraction of the blow-up time beyond which volume-driven queries are refused.
pub const BLOWUP_WINDOW: f64 = 0.95;

/// Measure of the unit ball in dimension 1, 2 or 3.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => panic!("dimension {dim} not supported"),
    }
}

/// Measure of `{r_in <= |x| <= r_out}`.
pub fn annulus_measure(r_in: f64, r_out: f64, dim: usize) -> Result<f64> {
    if !(0.0 <= r_in && r_in <= r_out) {
        return Err(Error::InvalidArgument(format!("annulus radii ({r_in}, {r_out})")));
    }
    let n = dim as i32;
    Ok(unit_ball_volume(dim) * (r_out.powi(n) - r_in.powi(n)))
}

fn lattice(dim: usize) -> usize {
    match dim {
        1 => 4001,
        2 => 241,
        _ => 41,
    }
}

fn project_to_ball(y: &mut [f64], center: &[f64], radius: f64) {
    let d: Vec<f64> = y.iter().zip(center).map(|(a, b)| a - b).collect();
    let r = euclidean_norm(&d);
    if r > radius {
        for (k, v) in y.iter_mut().enumerate() {
            *v = center[k] + d[k] * radius / r;
        }
    }
}

/// Area of the union of two disks of radius `r` whose centers are `d` apart.
pub fn two_ball_union_area(r: f64, d: f64) -> f64 {
    let disk = PI * r * r;
    if d >= 2.0 * r {
        return 2.0 * disk;
    }
    let lens = 2.0 * r * r * (d / (2.0 * r)).acos() - 0.5 * d * (4.0 * r * r - d * d).sqrt();
    2.0 * disk - lens
}

/// `max { u0(y) : |y - x| <= cbar t }`, the solution of `u_t = cbar |Du|`.
///
/// Dense lattice sampling of the ball followed by a compass search from the
/// best candidates.
pub fn oleinik_lax(u0: impl Fn(&[f64]) -> f64, cbar: f64, x: &[f64], t: f64) -> f64 {
    let radius = cbar * t;
    if radius <= 0.0 {
        return u0(x);
    }
    let dim = x.len();
    let n = lattice(dim);
    let step = 2.0 * radius / (n - 1) as f64;
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
    let total = n.pow(dim as u32);
    let mut y = vec![0.0; dim];
    for flat in 0..total {
        let mut rem = flat;
        for a in 0..dim {
            y[a] = x[a] - radius + (rem % n) as f64 * step;
            rem /= n;
        }
        let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        if euclidean_norm(&d) > radius * (1.0 + 1e-12) {
            continue;
        }
        candidates.push((u0(&y), y.clone()));
    }
    // the lattice may miss the center
    candidates.push((u0(x), x.to_vec()));
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    candidates.truncate(8);

    let mut best = f64::NEG_INFINITY;
    for (mut value, mut y) in candidates {
        let mut s = step;
        while s > 1e-10 * radius.max(1e-300) {
            let mut improved = false;
            for a in 0..dim {
                for sign in [1.0, -1.0] {
                    let mut z = y.clone();
                    z[a] += sign * s;
                    project_to_ball(&mut z, x, radius);
                    let v = u0(&z);
                    if v > value {
                        value = v;
                        y = z;
                        improved = true;
                    }
                }
            }
            if !improved {
                s /= 2.0;
            }
        }
        best = best.max(value);
    }
    best
}

/// Normal-speed law of a radially symmetric front.
pub enum RadialLaw {
    ConstantSpeed(f64),
    /// Speed depending on time only.
    TimeSpeed(Box<dyn Fn(f64) -> f64 + Send + Sync>),
    /// Speed equal to the measure of the enclosed ball: `R' = C_N R^N`.
    VolumeDriven,
}

impl fmt::Debug for RadialLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialLaw::ConstantSpeed(c) => write!(f, "ConstantSpeed({c})"),
            RadialLaw::TimeSpeed(_) => write!(f, "TimeSpeed(..)"),
            RadialLaw::VolumeDriven => write!(f, "VolumeDriven"),
        }
    }
}

#[derive(Debug)]
pub struct RadialScenario {
    pub r0: f64,
    pub dim: usize,
    pub law: RadialLaw,
}

impl RadialScenario {
    pub fn new(r0: f64, dim: usize, law: RadialLaw) -> Result<Self> {
        if !(r0 > 0.0) || !(1..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("radial scenario r0 = {r0}, dim = {dim}")));
        }
        Ok(RadialScenario { r0, dim, law })
    }

    /// `t* = 1/((N-1) C_N R0^{N-1})` for the volume-driven law in `N >= 2`.
    pub fn blowup_time(&self) -> Option<f64> {
        match self.law {
            RadialLaw::VolumeDriven if self.dim >= 2 => {
                let n = self.dim as f64;
                Some(1.0 / ((n - 1.0) * unit_ball_volume(self.dim) * self.r0.powf(n - 1.0)))
            }
            _ => None,
        }
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f((a + b) / 2.0) + f(b))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> f64 {
    let m = (a + b) / 2.0;
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_simpson(f, a, m, left, tol / 2.0, depth - 1) + adaptive_simpson(f, m, b, right, tol / 2.0, depth - 1)
}

/// `int_a^b f` by adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // subdivide first so kinks inside the interval are bracketed
    let pieces = 64;
    let w = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * w, a + (k + 1) as f64 * w);
            adaptive_simpson(f, lo, hi, simpson(f, lo, hi), tol / pieces as f64, 40)
        })
        .sum()
}

/// Front radius `R(t)`.
pub fn radial_front(scenario: &RadialScenario, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time {t} is negative")));
    }
    let r0 = scenario.r0;
    match &scenario.law {
        RadialLaw::ConstantSpeed(c) => Ok(r0 + c * t),
        RadialLaw::TimeSpeed(c) => Ok(r0 + integrate(c.as_ref(), 0.0, t, 1e-10)),
        RadialLaw::VolumeDriven => {
            let cn = unit_ball_volume(scenario.dim);
            match scenario.blowup_time() {
                None => Ok(r0 * (cn * t).exp()),
                Some(t_star) => {
                    if t >= BLOWUP_WINDOW * t_star {
                        return Err(Error::ValidityWindow(format!(
                            "t = {t} is not below {BLOWUP_WINDOW} t* = {}: there is a blow-up at t* = {t_star}",
                            BLOWUP_WINDOW * t_star
                        )));
                    }
                    Ok(r0 / (1.0 - t / t_star).powf(1.0 / (scenario.dim as f64 - 1.0)))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cone(y: &[f64]) -> f64 {
        1.0 - euclidean_norm(y)
    }

    #[test]
    fn oleinik_lax_examples() {
        assert_eq!(oleinik_lax(cone, 1.0, &[0.3, 0.4], 0.0), 0.5);
        for x in [[1.5, 0.0], [0.6, -1.2], [2.0, 2.0]] {
            let t = 0.5;
            let exact = 1.0 + t - euclidean_norm(&x);
            assert_abs_diff_eq!(oleinik_lax(cone, 1.0, &x, t), exact, epsilon = 1e-6);
        }
        assert_abs_diff_eq!(oleinik_lax(cone, 1.0, &[0.2, 0.1], 0.5), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(oleinik_lax(|_| 3.0, 2.0, &[0.0, 1.0], 1.0), 3.0);
        assert_abs_diff_eq!(oleinik_lax(|y| -y[0].abs(), 1.0, &[2.0], 0.5), -1.5, epsilon = 1e-6);
        let x3 = [1.0, 1.0, 1.0];
        assert_abs_diff_eq!(oleinik_lax(cone, 0.5, &x3, 1.0), 1.5 - 3f64.sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn radial_examples() {
        let s = RadialScenario::new(0.5, 2, RadialLaw::VolumeDriven).unwrap();
        let t_star = s.blowup_time().unwrap();
        assert_abs_diff_eq!(t_star, 2.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(radial_front(&s, t_star / 2.0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(matches!(radial_front(&s, 0.95 * t_star), Err(Error::ValidityWindow(_))));
        let s1 = RadialScenario::new(1.0, 1, RadialLaw::VolumeDriven).unwrap();
        assert_abs_diff_eq!(radial_front(&s1, 0.5).unwrap(), std::f64::consts::E, epsilon = 1e-12);
        let c = RadialScenario::new(1.0, 2, RadialLaw::ConstantSpeed(1.0)).unwrap();
        assert_eq!(radial_front(&c, 0.75).unwrap(), 1.75);
        let ts = RadialScenario::new(1.0, 2, RadialLaw::TimeSpeed(Box::new(|t| (1.0 - t).max(0.0)))).unwrap();
        assert_abs_diff_eq!(radial_front(&ts, 2.0).unwrap(), 1.5, epsilon = 1e-10);
    }

    #[test]
    fn annulus_examples() {
        assert_eq!(annulus_measure(0.7, 0.7, 3).unwrap(), 0.0);
        assert_abs_diff_eq!(annulus_measure(0.8, 1.2, 2).unwrap(), 0.8 * PI, epsilon = 1e-12);
        assert_eq!(annulus_measure(0.0, 1.0, 1).unwrap(), 2.0);
        assert!(annulus_measure(1.0, 0.5, 2).is_err());
    }

    proptest! {
        #[test]
        fn volume_driven_solves_its_ode(r0 in 0.2f64..1.0, dim in 1usize..=3, frac in 0.0f64..0.9) {
            let s = RadialScenario::new(r0, dim, RadialLaw::VolumeDriven).unwrap();
            let t = frac * s.blowup_time().unwrap_or(1.0);
            let dt = 1e-5;
            let r = radial_front(&s, t + dt).unwrap();
            let l = if t >= dt { radial_front(&s, t - dt).unwrap() } else { radial_front(&s, t).unwrap() };
            let denom = if t >= dt { 2.0 * dt } else { dt };
            let r_dot = (r - l) / denom;
            let rt = radial_front(&s, t).unwrap();
            let rhs = unit_ball_volume(dim) * rt.powi(dim as i32);
            let err = (r_dot - rhs).abs();
            let tol = if t >= dt { 1e-8 } else { 1e-3 } * (1.0 + rhs * rhs);
            prop_assert!(err <= tol, "residual {err}");
        }

        #[test]
        fn oleinik_lax_monotone_in_time(x0 in -2.0f64..2.0, x1 in -2.0f64..2.0, t1 in 0.0f64..1.0, dt in 0.0f64..1.0) {
            let u0 = |y: &[f64]| (2.0 * y[0]).sin() - 0.5 * euclidean_norm(y);
            let a = oleinik_lax(u0, 1.0, &[x0, x1], t1);
            let b = oleinik_lax(u0, 1.0, &[x0, x1], t1 + dt);
            prop_assert!(b >= a - 1e-9);
        }

        #[test]
        fn time_speed_recovers_constant_speed(c in 0.0f64..3.0, t in 0.0f64..2.0) {
            let a = RadialScenario::new(1.0, 2, RadialLaw::ConstantSpeed(c)).unwrap();
            let b = RadialScenario::new(1.0, 2, RadialLaw::TimeSpeed(Box::new(move |_| c))).unwrap();
            prop_assert!((radial_front(&a, t).unwrap() - radial_front(&b, t).unwrap()).abs() <= 1e-12);
        }
    }
}
