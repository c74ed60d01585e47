//! Perimeter of a discrete set given by its indicator.
//!
//! The indicator is first averaged over `3^N` node blocks (edge-replicated,
//! so the box faces never count as boundary) and the `1/2` level set of the
//! result is measured: crossing count in 1-D, marching squares in 2-D,
//! marching tetrahedra in 3-D. Averaging turns the staircase of a binary
//! field into a piecewise-linear contour whose length converges to the
//! perimeter at first order.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, MAX_DIM};

const ISO: f64 = 0.5;

fn box_average(ind: &ScalarField) -> Vec<f64> {
    let g = ind.grid();
    let mut cur = ind.values().to_vec();
    let strides = g.strides();
    for a in 0..g.dim() {
        let mut next = vec![0.0; cur.len()];
        for (i, out) in next.iter_mut().enumerate() {
            let m = g.multi_index(i)[a];
            let lo = if m > 0 { i - strides[a] } else { i };
            let hi = if m + 1 < g.n()[a] { i + strides[a] } else { i };
            *out = (cur[lo] + cur[i] + cur[hi]) / 3.0;
        }
        cur = next;
    }
    cur
}

fn crossing(p: [f64; 3], q: [f64; 3], fp: f64, fq: f64) -> [f64; 3] {
    let s = (ISO - fp) / (fq - fp);
    [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1]), p[2] + s * (q[2] - p[2])]
}

fn dist(p: [f64; 3], q: [f64; 3]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

fn corner(g: &Grid, base: [usize; MAX_DIM], offset: [usize; MAX_DIM]) -> (usize, [f64; 3]) {
    let m = [base[0] + offset[0], base[1] + offset[1], base[2] + offset[2]];
    let idx = g.linear_index(m);
    let x = g.node(idx);
    (idx, [x[0], x[1], x[2]])
}

fn marching_squares(g: &Grid, f: &[f64]) -> f64 {
    let n = g.n();
    let mut total = 0.0;
    for i in 0..n[0] - 1 {
        for j in 0..n[1] - 1 {
            // counter-clockwise corners
            let cs = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]].map(|o| corner(g, [i, j, 0], o));
            let v = cs.map(|(idx, _)| f[idx]);
            let inside = v.map(|x| x >= ISO);
            let mut pts = Vec::with_capacity(4);
            for e in 0..4 {
                let k = (e + 1) % 4;
                if inside[e] != inside[k] {
                    pts.push(crossing(cs[e].1, cs[k].1, v[e], v[k]));
                }
            }
            match pts.len() {
                2 => total += dist(pts[0], pts[1]),
                4 => {
                    // saddle: connect so the centre value decides which corners join
                    let centre = v.iter().sum::<f64>() / 4.0;
                    if (centre >= ISO) == inside[0] {
                        total += dist(pts[0], pts[1]) + dist(pts[2], pts[3]);
                    } else {
                        total += dist(pts[3], pts[0]) + dist(pts[1], pts[2]);
                    }
                }
                _ => {}
            }
        }
    }
    total
}

fn triangle_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let x = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Cube corners in binary order and its split into six tetrahedra around the 0-7 diagonal.
const CUBE: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];
const TETS: [[usize; 4]; 6] = [[0, 1, 3, 7], [0, 3, 2, 7], [0, 2, 6, 7], [0, 6, 4, 7], [0, 4, 5, 7], [0, 5, 1, 7]];

fn marching_tetrahedra(g: &Grid, f: &[f64]) -> f64 {
    let n = g.n();
    let mut total = 0.0;
    for i in 0..n[0] - 1 {
        for j in 0..n[1] - 1 {
            for k in 0..n[2] - 1 {
                let cs = CUBE.map(|o| corner(g, [i, j, k], o));
                let v = cs.map(|(idx, _)| f[idx]);
                if v.iter().all(|&x| x >= ISO) || v.iter().all(|&x| x < ISO) {
                    continue;
                }
                for t in TETS {
                    let (ins, outs): (Vec<usize>, Vec<usize>) = t.iter().partition(|&&c| v[c] >= ISO);
                    let cut = |p: usize, q: usize| crossing(cs[p].1, cs[q].1, v[p], v[q]);
                    match (ins.len(), outs.len()) {
                        (1, 3) => total += triangle_area(cut(ins[0], outs[0]), cut(ins[0], outs[1]), cut(ins[0], outs[2])),
                        (3, 1) => total += triangle_area(cut(outs[0], ins[0]), cut(outs[0], ins[1]), cut(outs[0], ins[2])),
                        (2, 2) => {
                            let p = [cut(ins[0], outs[0]), cut(ins[0], outs[1]), cut(ins[1], outs[1]), cut(ins[1], outs[0])];
                            total += triangle_area(p[0], p[1], p[2]) + triangle_area(p[0], p[2], p[3]);
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    total
}

/// `H^{N-1}` of the boundary of `{indicator = 1}` inside the box (a point
/// count in 1-D).
pub fn perimeter(indicator: &ScalarField) -> Result<f64> {
    if let Some((i, &v)) = indicator.values().iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidArgument(format!("indicator takes value {v} at node {i}")));
    }
    let g = indicator.grid();
    let f = box_average(indicator);
    Ok(match g.dim() {
        1 => f.windows(2).filter(|w| (w[0] >= ISO) != (w[1] >= ISO)).count() as f64,
        2 => marching_squares(g, &f),
        _ => marching_tetrahedra(g, &f),
    })
}

/// Perimeter of `{u >= level}`.
pub fn superlevel_perimeter(u: &ScalarField, level: f64) -> f64 {
    perimeter(&u.map(|v| if v >= level { 1.0 } else { 0.0 })).expect("binary by construction")
}
