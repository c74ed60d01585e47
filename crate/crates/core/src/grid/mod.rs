//! Uniform cell-centered Cartesian grids in dimension 1 to 3, scalar fields
//! living on their nodes, and the discrete measures used by the estimates.
//!
//! Nodes sit at cell centers `lo + (i + 1/2) h`. Values are stored row-major
//! (last axis fastest). Set measures are plain cell counts times the cell
//! volume, so every measured area carries an `O(h * perimeter)` error.

mod io;

pub use io::{read_field, read_field_from, write_field, write_field_to};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    lo: [f64; MAX_DIM],
    hi: [f64; MAX_DIM],
    n: [usize; MAX_DIM],
    h: [f64; MAX_DIM],
}

impl Grid {
    pub fn new(lo: &[f64], hi: &[f64], n: &[usize]) -> Result<Self> {
        let dim = n.len();
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "bounds have lengths {}/{} for dimension {dim}",
                lo.len(),
                hi.len()
            )));
        }
        let mut g = Grid {
            dim,
            lo: [0.0; MAX_DIM],
            hi: [0.0; MAX_DIM],
            n: [1; MAX_DIM],
            h: [1.0; MAX_DIM],
        };
        for a in 0..dim {
            if n[a] < MIN_CELLS {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} has {} cells, need at least {MIN_CELLS}",
                    n[a]
                )));
            }
            if !(lo[a].is_finite() && hi[a].is_finite()) || hi[a] <= lo[a] {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} bounds [{}, {}] are not an interval",
                    lo[a], hi[a]
                )));
            }
            g.lo[a] = lo[a];
            g.hi[a] = hi[a];
            g.n[a] = n[a];
            g.h[a] = (hi[a] - lo[a]) / n[a] as f64;
        }
        Ok(g)
    }

    /// Same bounds and cell count on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        Grid::new(&vec![lo; dim], &vec![hi; dim], &vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.dim]
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi[..self.dim]
    }

    pub fn n(&self) -> &[usize] {
        &self.n[..self.dim]
    }

    pub fn h(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    pub fn min_spacing(&self) -> f64 {
        self.h().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.h().iter().copied().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().iter().product()
    }

    pub fn total_measure(&self) -> f64 {
        (0..self.dim).map(|a| self.hi[a] - self.lo[a]).product()
    }

    pub fn strides(&self) -> [usize; MAX_DIM] {
        [self.n[1] * self.n[2], self.n[2], 1]
    }

    pub fn multi_index(&self, idx: usize) -> [usize; MAX_DIM] {
        let s = self.strides();
        [idx / s[0], (idx / s[1]) % self.n[1], idx % self.n[2]]
    }

    pub fn linear_index(&self, m: [usize; MAX_DIM]) -> usize {
        let s = self.strides();
        m[0] * s[0] + m[1] * s[1] + m[2] * s[2]
    }

    /// Node coordinates; components beyond `dim` are zero.
    pub fn node(&self, idx: usize) -> [f64; MAX_DIM] {
        let m = self.multi_index(idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.lo[a] + (m[a] as f64 + 0.5) * self.h[a];
        }
        x
    }

    pub fn node_norm(&self, idx: usize) -> f64 {
        let x = self.node(idx);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    /// Neighbor of `idx` one cell away along `axis` (`forward` or backward).
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> Option<usize> {
        let m = self.multi_index(idx)[axis];
        let s = self.strides()[axis];
        if forward {
            (m + 1 < self.n[axis]).then(|| idx + s)
        } else {
            (m > 0).then(|| idx - s)
        }
    }

    /// Whether the two grids describe the same nodes.
    pub fn same_nodes(&self, other: &Grid) -> bool {
        if self.dim != other.dim || self.n != other.n {
            return false;
        }
        (0..self.dim).all(|a| {
            let tol = 1e-9 * self.h[a];
            (self.lo[a] - other.lo[a]).abs() <= tol && (self.hi[a] - other.hi[a]).abs() <= tol
        })
    }

    /// Whether the closed ball of `radius` around the origin stays at least
    /// `margin_cells` cells away from every face.
    pub fn contains_ball(&self, radius: f64, margin_cells: usize) -> bool {
        (0..self.dim).all(|a| {
            let margin = margin_cells as f64 * self.h[a];
            self.lo[a] + margin <= -radius && radius <= self.hi[a] - margin
        })
    }

    /// Nearest node to a point (clamped to the box).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut m = [0usize; MAX_DIM];
        for a in 0..self.dim {
            let f = ((x[a] - self.lo[a]) / self.h[a] - 0.5).round();
            m[a] = f.clamp(0.0, (self.n[a] - 1) as f64) as usize;
        }
        self.linear_index(m)
    }
}

/// Sum with Neumaier compensation, so reductions do not depend on the
/// magnitude ordering of the summands beyond rounding.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    time: Option<f64>,
}

impl ScalarField {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: grid.node(i)[..grid.dim()].to_vec(),
                value: values[i],
            });
        }
        Ok(ScalarField {
            grid,
            values,
            time: None,
        })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        ScalarField {
            grid,
            values: vec![value; grid.len()],
            time: None,
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        ScalarField::constant(grid, 0.0)
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn set_time(&mut self, t: Option<f64>) {
        self.time = t;
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index and value of the smallest node value.
    pub fn argmin(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            time: self.time,
        }
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        self.check_same_grid(other)?;
        Ok(ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            time: self.time,
        })
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.same_nodes(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "fields on {:?} and {:?}",
                self.grid.n(),
                other.grid.n()
            )))
        }
    }

    /// max over nodes of |value|
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l1_norm(&self) -> f64 {
        self.grid.cell_volume() * compensated_sum(self.values.iter().map(|v| v.abs()))
    }

    /// Cell-count measure of `{a <= value <= b}`.
    pub fn band_measure(&self, a: f64, b: f64) -> Result<f64> {
        if a > b {
            return Err(Error::InvalidArgument(format!("band [{a}, {b}] is empty")));
        }
        let count = self.values.iter().filter(|&&v| a <= v && v <= b).count();
        Ok(count as f64 * self.grid.cell_volume())
    }

    /// Cell-count measure of `{value >= level}`.
    pub fn superlevel_measure(&self, level: f64) -> f64 {
        self.values.iter().filter(|&&v| v >= level).count() as f64 * self.grid.cell_volume()
    }

    /// Minimum over interior nodes and axes of the normalized second
    /// difference `(v(x+kh) - 2v(x) + v(x-kh)) / (kh)^2`. Its negative is the
    /// empirical semiconvexity constant.
    pub fn second_difference_min(&self, k: usize) -> Result<f64> {
        self.second_difference_min_where(k, |_| true)
    }

    /// As [`second_difference_min`](Self::second_difference_min), restricted
    /// to centre nodes accepted by `mask`. Returns `+inf` if no admissible
    /// node is selected.
    pub fn second_difference_min_where(&self, k: usize, mask: impl Fn(usize) -> bool) -> Result<f64> {
        if k == 0 {
            return Err(Error::InvalidArgument("second difference step must be >= 1".into()));
        }
        let g = &self.grid;
        if g.n().iter().any(|&n| n <= 2 * k) {
            return Err(Error::InvalidGrid(format!(
                "no interior nodes at offset {k} on a {:?} grid",
                g.n()
            )));
        }
        let strides = g.strides();
        let mut best = f64::INFINITY;
        for idx in 0..g.len() {
            if !mask(idx) {
                continue;
            }
            let m = g.multi_index(idx);
            for a in 0..g.dim() {
                if m[a] < k || m[a] + k >= g.n[a] {
                    continue;
                }
                let s = strides[a] * k;
                let kh = k as f64 * g.h[a];
                let d2 = (self.values[idx + s] - 2.0 * self.values[idx] + self.values[idx - s]) / (kh * kh);
                best = best.min(d2);
            }
        }
        Ok(best)
    }

    /// Forward difference along `axis`, zero at the last node.
    pub fn forward_difference(&self, idx: usize, axis: usize) -> f64 {
        match self.grid.neighbor(idx, axis, true) {
            Some(j) => (self.values[j] - self.values[idx]) / self.grid.h[axis],
            None => 0.0,
        }
    }

    /// Backward difference along `axis`, zero at the first node.
    pub fn backward_difference(&self, idx: usize, axis: usize) -> f64 {
        match self.grid.neighbor(idx, axis, false) {
            Some(j) => (self.values[idx] - self.values[j]) / self.grid.h[axis],
            None => 0.0,
        }
    }

    /// Euclidean norm of the centered difference gradient (one-sided at faces).
    pub fn centered_gradient_norm(&self, idx: usize) -> f64 {
        let g = &self.grid;
        let mut sq = 0.0;
        for a in 0..g.dim() {
            let fwd = g.neighbor(idx, a, true);
            let bwd = g.neighbor(idx, a, false);
            let d = match (bwd, fwd) {
                (Some(b), Some(f)) => (self.values[f] - self.values[b]) / (2.0 * g.h[a]),
                (None, Some(f)) => (self.values[f] - self.values[idx]) / g.h[a],
                (Some(b), None) => (self.values[idx] - self.values[b]) / g.h[a],
                (None, None) => 0.0,
            };
            sq += d * d;
        }
        sq.sqrt()
    }

    /// Largest one-sided difference quotient over all nodes and axes.
    pub fn lipschitz_estimate(&self) -> f64 {
        let mut best = 0.0f64;
        for idx in 0..self.grid.len() {
            for a in 0..self.grid.dim() {
                best = best.max(self.forward_difference(idx, a).abs());
            }
        }
        best
    }

    /// Multilinear interpolation at `x`, clamped to the node hull.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for a in 0..g.dim() {
            let s = ((x[a] - g.lo[a]) / g.h[a] - 0.5).clamp(0.0, (g.n[a] - 1) as f64);
            let i = (s.floor() as usize).min(g.n[a] - 2);
            base[a] = i;
            frac[a] = s - i as f64;
        }
        let strides = g.strides();
        let corners = 1usize << g.dim();
        let mut acc = 0.0;
        for c in 0..corners {
            let mut w = 1.0;
            let mut idx = 0;
            for a in 0..g.dim() {
                let bit = (c >> a) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                idx += (base[a] + bit) * strides[a];
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }
}

/// Sample `f` at every node center.
pub fn sample(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<ScalarField> {
    let mut values = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let x = grid.node(idx);
        let v = f(&x[..grid.dim()]);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                location: x[..grid.dim()].to_vec(),
                value: v,
            });
        }
        values.push(v);
    }
    Ok(ScalarField {
        grid: *grid,
        values,
        time: None,
    })
}

pub fn euclidean_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Band `[a, b]` together with the mollification width of its smoothed
/// indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
}

impl BandSpec {
    pub fn new(a: f64, b: f64, epsilon: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidArgument(format!("band needs a < b, got [{a}, {b}]")));
        }
        if !(epsilon > 0.0) || epsilon > (b - a) / 4.0 {
            return Err(Error::InvalidArgument(format!(
                "mollification width {epsilon} must lie in (0, (b - a)/4]"
            )));
        }
        Ok(BandSpec { a, b, epsilon })
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }
}
