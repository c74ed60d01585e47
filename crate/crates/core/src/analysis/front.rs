//! Radius of an origin-centred front.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::ScalarField;

fn directions(dim: usize) -> Vec<[f64; 3]> {
    match dim {
        1 => vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        2 => (0..360)
            .map(|k| {
                let a = 2.0 * PI * (k as f64 + 0.5) / 360.0;
                [a.cos(), a.sin(), 0.0]
            })
            .collect(),
        _ => {
            // Fibonacci sphere
            let n = 400;
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    [r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
    }
}

/// Outermost zero crossing of the angular-average profile
/// `r -> mean_d u(r d)` (multilinear interpolation, radial step `h/4`, rays
/// up to the largest ball inside the node hull). `0` when the profile is
/// negative everywhere.
pub fn front_radius(u: &ScalarField) -> Result<f64> {
    let g = u.grid();
    let dim = g.dim();
    let reach = (0..dim)
        .map(|a| (-g.lo()[a] - 0.5 * g.h()[a]).min(g.hi()[a] - 0.5 * g.h()[a]))
        .fold(f64::INFINITY, f64::min);
    if !(reach > 0.0) {
        return Err(Error::InvalidArgument("the origin is not inside the grid".into()));
    }
    let dirs = directions(dim);
    let step = g.min_spacing() / 4.0;
    let profile = |r: f64| {
        dirs.iter()
            .map(|d| {
                let x: Vec<f64> = (0..dim).map(|a| r * d[a]).collect();
                u.interpolate(&x)
            })
            .sum::<f64>()
            / dirs.len() as f64
    };
    let n = (reach / step).floor() as usize;
    let mut last = None;
    let mut prev = profile(0.0);
    for k in 1..=n {
        let r = k as f64 * step;
        let cur = profile(r);
        if prev >= 0.0 && cur < 0.0 {
            last = Some(r - step + step * prev / (prev - cur));
        }
        prev = cur;
    }
    if prev >= 0.0 {
        return Err(Error::Containment("the averaged profile is nonnegative at the box".into()));
    }
    Ok(last.unwrap_or(0.0))
}
