//! Level-set functions built from unions of balls, and discrete
//! verification of the interior ball property.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

use super::report::EstimateReport;

/// Ball profile `r^2 - d^2` for `d <= 2r`, continued by its tangent line.
fn profile(r: f64, d: f64) -> f64 {
    if d <= 2.0 * r {
        r * r - d * d
    } else {
        -3.0 * r * r - 4.0 * r * (d - 2.0 * r)
    }
}

/// `v(x) = max_y phi_y(x)` over the centers `y`: nonnegative exactly on the
/// union of the closed balls `B(y, r)`, semiconvex with constant 2 and
/// Lipschitz.
pub fn interior_ball_construct(points: &[Vec<f64>], r: f64, grid: &Grid) -> Result<ScalarField> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius {r} must be positive")));
    }
    if points.is_empty() {
        return Err(Error::InvalidArgument("no ball centers".into()));
    }
    let dim = grid.dim();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::InvalidArgument(format!("center {p:?} is not {dim}-dimensional")));
    }
    crate::grid::sample(grid, |x| {
        points
            .iter()
            .map(|y| {
                let d = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                profile(r, d)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    })
}

/// Certified interior-ball radius `eta0 / C`.
pub fn interior_ball_radius_bound(c: f64, eta0: f64) -> Result<f64> {
    if !(c > 0.0 && eta0 > 0.0) {
        return Err(Error::InvalidArgument(format!("need C > 0 and eta0 > 0, got {c}, {eta0}")));
    }
    Ok(eta0 / c)
}

/// Nodes of `{v >= 0}` with a grid neighbor outside.
pub fn boundary_nodes(v: &ScalarField) -> Vec<usize> {
    let g = v.grid();
    (0..g.len())
        .filter(|&i| {
            v.get(i) >= 0.0
                && (0..g.dim()).any(|a| {
                    [true, false]
                        .into_iter()
                        .any(|fwd| g.neighbor(i, a, fwd).is_some_and(|j| v.get(j) < 0.0))
                })
        })
        .collect()
}

/// `count` boundary nodes spread evenly along the boundary list.
pub fn probe_boundary(v: &ScalarField, count: usize) -> Vec<usize> {
    let all = boundary_nodes(v);
    if all.len() <= count {
        return all;
    }
    (0..count).map(|k| all[k * all.len() / count]).collect()
}

fn ball_fits(v: &ScalarField, center: &[f64], radius: f64) -> bool {
    let g = v.grid();
    let dim = g.dim();
    let h = g.h();
    // node index range covering the ball
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..dim {
        let f = |x: f64| (x - g.lo()[a]) / h[a] - 0.5;
        let l = f(center[a] - radius).ceil();
        let u = f(center[a] + radius).floor();
        if l < 0.0 || u > (g.n()[a] - 1) as f64 {
            return false;
        }
        lo[a] = l as usize;
        hi[a] = u.max(l) as usize;
    }
    for i in lo[0]..=hi[0] {
        for j in lo[1]..=hi[1] {
            for k in lo[2]..=hi[2] {
                let idx = g.linear_index([i, j, k]);
                let x = g.node(idx);
                let d2: f64 = (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum();
                if d2 <= radius * radius && v.get(idx) < 0.0 {
                    return false;
                }
            }
        }
    }
    true
}

/// Largest radius (to `h/8`) of a ball inside `{v >= 0}` whose boundary
/// passes within `h` of node `p`, with the center placed along the inward
/// normal `-Dv/|Dv|`.
pub fn fitted_interior_radius(v: &ScalarField, p: usize, max_radius: f64) -> f64 {
    let g = v.grid();
    let dim = g.dim();
    let h = g.max_spacing();
    let mut grad = [0.0; 3];
    let mut norm = 0.0;
    for (a, slot) in grad.iter_mut().enumerate().take(dim) {
        let f = g.neighbor(p, a, true).map_or(v.get(p), |j| v.get(j));
        let b = g.neighbor(p, a, false).map_or(v.get(p), |j| v.get(j));
        *slot = (f - b) / (2.0 * g.h()[a]);
        norm += *slot * *slot;
    }
    let norm = norm.sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let x = g.node(p);
    let fits = |rho: f64| {
        // inward normal is +grad: v increases into the set
        let c: Vec<f64> = (0..dim).map(|a| x[a] + rho * grad[a] / norm).collect();
        ball_fits(v, &c, rho - h)
    };
    let (mut lo, mut hi) = (0.0, max_radius);
    if fits(hi) {
        return hi;
    }
    while hi - lo > h / 8.0 {
        let mid = 0.5 * (lo + hi);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Ball fitting: at each probed boundary node a ball of radius
/// `bound - 2h` fits inside `{v >= 0}`. One report per probe with
/// `lhs = bound - 2h`, `rhs` the fitted radius.
pub fn interior_ball_radius_check(v: &ScalarField, bound: f64, probes: usize) -> Vec<EstimateReport> {
    let h = v.grid().max_spacing();
    let required = bound - 2.0 * h;
    probe_boundary(v, probes)
        .into_iter()
        .map(|p| {
            let fitted = fitted_interior_radius(v, p, (required + 4.0 * h).max(h));
            let x = v.grid().node(p);
            EstimateReport::new("interior_ball_radius", 0.0, required, fitted, 0.0)
                .with_context(format!("probe at {:?}", &x[..v.grid().dim()]))
        })
        .collect()
}

/// `-second_difference_min(v, k) <= bound` at each step `k`.
pub fn interior_ball_semiconvexity_check(v: &ScalarField, ks: &[usize], bound: f64, tolerance: f64) -> Result<Vec<EstimateReport>> {
    ks.iter()
        .map(|&k| {
            let semi = -v.second_difference_min(k)?;
            Ok(EstimateReport::new("interior_ball_semiconvexity", 0.0, semi, bound, tolerance).with_context(format!("k = {k}")))
        })
        .collect()
}
