//! Nonlocal velocity `c[rho](x,t) = (c0 * rho)(x,t) + c1(x,t)`.
//!
//! The product `*` is evaluated as `(c0 * rho)(x) = int c0(y - x) rho(y) dy`,
//! which is a correlation when `c0` is not even. Kernels live on their own
//! small grid with the data spacing and nodes at integer multiples of `h`,
//! so offsets `y - x` between data nodes land exactly on kernel nodes.
//! Zero padding makes the transform path free-space, never periodic.

use std::borrow::Cow;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::analysis::EstimateReport;
use crate::error::{Error, Result};
use crate::grid::{compensated_sum, euclidean_norm, Grid, ScalarField, MAX_DIM};
use crate::hj::{VelocityField, TOL_SIGN};

/// Fields sampled at increasing times, read piecewise-constant from the left.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    fields: Vec<ScalarField>,
}

impl TimeSeries {
    pub fn steady(field: ScalarField) -> Self {
        TimeSeries {
            times: vec![0.0],
            fields: vec![field],
        }
    }

    pub fn new(times: Vec<f64>, fields: Vec<ScalarField>) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() {
            return Err(Error::InvalidArgument(format!(
                "{} sample times for {} fields",
                times.len(),
                fields.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("sample times must increase".into()));
        }
        for f in &fields[1..] {
            if !f.grid().same_nodes(fields[0].grid()) {
                return Err(Error::GridMismatch("time samples on different grids".into()));
            }
        }
        Ok(TimeSeries { times, fields })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }

    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }

    /// Index of the sample in force at `t`; times before the first sample
    /// read the first one.
    pub fn index_at(&self, t: f64) -> usize {
        let slack = 1e-12 * (1.0 + t.abs());
        self.times.partition_point(|&s| s <= t + slack).saturating_sub(1)
    }

    pub fn field_at(&self, t: f64) -> &ScalarField {
        &self.fields[self.index_at(t)]
    }

    pub fn is_steady(&self) -> bool {
        self.fields.len() == 1
    }
}

impl VelocityField for TimeSeries {
    fn at(&self, t: f64) -> Cow<'_, ScalarField> {
        Cow::Borrowed(self.field_at(t))
    }
}

/// Grid for a kernel with spacing `h` of `data` and nodes at `k h`,
/// `|k| <= m`, with one node layer beyond `half_width` on every axis
/// (`m >= 2`).
pub fn kernel_grid(data: &Grid, half_width: f64) -> Result<Grid> {
    if !(half_width >= 0.0) || !half_width.is_finite() {
        return Err(Error::InvalidArgument(format!("kernel half-width {half_width}")));
    }
    let d = data.dim();
    let mut lo = Vec::with_capacity(d);
    let mut hi = Vec::with_capacity(d);
    let mut n = Vec::with_capacity(d);
    for a in 0..d {
        let h = data.h()[a];
        let m = ((half_width / h + 1e-9).floor() as usize + 1).max(2);
        lo.push(-(m as f64 + 0.5) * h);
        hi.push((m as f64 + 0.5) * h);
        n.push(2 * m + 1);
    }
    Grid::new(&lo, &hi, &n)
}

fn kernel_half_counts(kernel: &Grid, data: &Grid) -> Result<[usize; MAX_DIM]> {
    if kernel.dim() != data.dim() {
        return Err(Error::GridMismatch(format!(
            "kernel is {}-D, data is {}-D",
            kernel.dim(),
            data.dim()
        )));
    }
    let mut m = [0usize; MAX_DIM];
    for a in 0..kernel.dim() {
        let (hk, hd) = (kernel.h()[a], data.h()[a]);
        if (hk - hd).abs() > 1e-9 * hd {
            return Err(Error::GridMismatch(format!(
                "kernel spacing {hk} differs from data spacing {hd} on axis {a}"
            )));
        }
        let n = kernel.n()[a];
        if n.is_multiple_of(2) || (kernel.lo()[a] + kernel.hi()[a]).abs() > 1e-9 * hd {
            return Err(Error::GridMismatch(format!(
                "kernel grid must have an odd node count centered at 0 on axis {a}"
            )));
        }
        m[a] = n / 2;
    }
    Ok(m)
}

/// How a Gaussian kernel is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianScale {
    /// Peak value.
    Amplitude(f64),
    /// Discrete integral `vol * sum c0`.
    Mass(f64),
}

/// Interaction kernel `c0`, possibly time dependent.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    series: TimeSeries,
    l1_bound: f64,
    sup_bound: f64,
}

impl Kernel {
    pub fn new(series: TimeSeries) -> Result<Self> {
        let g = series.grid();
        // validates the layout against itself
        kernel_half_counts(g, g)?;
        let l1_bound = series.fields().iter().map(|f| f.l1_norm()).fold(0.0, f64::max);
        let sup_bound = series.fields().iter().map(|f| f.sup_norm()).fold(0.0, f64::max);
        Ok(Kernel {
            series,
            l1_bound,
            sup_bound,
        })
    }

    pub fn steady(field: ScalarField) -> Result<Self> {
        Kernel::new(TimeSeries::steady(field))
    }

    pub fn from_fn(data: &Grid, half_width: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let g = kernel_grid(data, half_width)?;
        Kernel::steady(crate::grid::sample(&g, f)?)
    }

    pub fn zero(data: &Grid) -> Result<Self> {
        Kernel::from_fn(data, 0.0, |_| 0.0)
    }

    /// Single node of mass one at the origin: the identity for even fields.
    pub fn delta(data: &Grid) -> Result<Self> {
        let g = kernel_grid(data, 0.0)?;
        let mut values = vec![0.0; g.len()];
        values[g.len() / 2] = 1.0 / g.cell_volume();
        Kernel::steady(ScalarField::from_values(g, values)?)
    }

    /// Gaussian of width `sigma`, truncated at `5 sigma`.
    pub fn gaussian(data: &Grid, sigma: f64, scale: GaussianScale) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("gaussian width {sigma} must be positive")));
        }
        let cut = 5.0 * sigma;
        let shape = |x: &[f64]| {
            let r = euclidean_norm(x);
            if r <= cut {
                (-r * r / (2.0 * sigma * sigma)).exp()
            } else {
                0.0
            }
        };
        let g = kernel_grid(data, cut)?;
        let raw = crate::grid::sample(&g, shape)?;
        let factor = match scale {
            GaussianScale::Amplitude(a) => a,
            GaussianScale::Mass(m) => m / raw.l1_norm(),
        };
        Kernel::steady(raw.map(|v| factor * v))
    }

    /// Smooth bump `amplitude * exp(1 - 1/(1 - (r/radius)^2))` supported in
    /// the ball of `radius`.
    pub fn bump(data: &Grid, radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("bump radius {radius} must be positive")));
        }
        Kernel::from_fn(data, radius, |x| {
            let s = euclidean_norm(x) / radius;
            if s < 1.0 {
                amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp()
            } else {
                0.0
            }
        })
    }

    /// `value` on the cube `[-half_width, half_width]^N`.
    pub fn constant(data: &Grid, value: f64, half_width: f64) -> Result<Self> {
        let cut = half_width * (1.0 + 1e-12);
        Kernel::from_fn(data, half_width, |z| {
            if z.iter().all(|c| c.abs() <= cut) {
                value
            } else {
                0.0
            }
        })
    }

    pub fn series(&self) -> &TimeSeries {
        &self.series
    }

    pub fn grid(&self) -> &Grid {
        self.series.grid()
    }

    pub fn field_at(&self, t: f64) -> &ScalarField {
        self.series.field_at(t)
    }

    pub fn l1_norm_at(&self, t: f64) -> f64 {
        self.field_at(t).l1_norm()
    }

    /// `sup_t |c0(., t)|_{L1}`
    pub fn l1_bound(&self) -> f64 {
        self.l1_bound
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// Largest half-width `m h` of the kernel box.
    pub fn reach(&self) -> f64 {
        let g = self.grid();
        (0..g.dim())
            .map(|a| (g.n()[a] / 2) as f64 * g.h()[a])
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.sup_bound == 0.0
    }
}

fn check_support(rho: &ScalarField) -> Result<()> {
    let g = rho.grid();
    for (idx, &v) in rho.values().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let m = g.multi_index(idx);
        if (0..g.dim()).any(|a| m[a] == 0 || m[a] + 1 == g.n()[a]) {
            return Err(Error::SupportOverflow(format!(
                "density is nonzero on the outer node layer at {:?}",
                &g.node(idx)[..g.dim()]
            )));
        }
    }
    Ok(())
}

/// Direct-sum evaluation of `vol * sum_y c0(y - x) rho(y)`; the reference path.
pub fn convolve_direct(c0: &ScalarField, rho: &ScalarField) -> Result<ScalarField> {
    let g = *rho.grid();
    let m = kernel_half_counts(c0.grid(), &g)?;
    check_support(rho)?;
    let kg = *c0.grid();
    let ks = kg.strides();
    let vol = g.cell_volume();
    let support: Vec<usize> = (0..g.len()).filter(|&i| rho.get(i) != 0.0).collect();
    let values: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|p| {
            let mp = g.multi_index(p);
            let terms = support.iter().filter_map(|&q| {
                let mq = g.multi_index(q);
                let mut kidx = 0;
                for a in 0..g.dim() {
                    let d = mq[a] as i64 - mp[a] as i64;
                    if d.unsigned_abs() as usize > m[a] {
                        return None;
                    }
                    kidx += (d + m[a] as i64) as usize * ks[a];
                }
                Some(c0.get(kidx) * rho.get(q))
            });
            vol * compensated_sum(terms)
        })
        .collect();
    ScalarField::from_values(g, values)
}

fn fast_len(min: usize) -> usize {
    let mut n = min.max(1);
    loop {
        let mut r = n;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return n;
        }
        n += 1;
    }
}

/// Zero-padded transform correlation against a fixed kernel on a fixed data
/// grid. Kernel spectra are computed once per kernel time sample.
pub struct Convolver {
    data: Grid,
    half: [usize; MAX_DIM],
    padded: [usize; MAX_DIM],
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    spectra: Vec<Vec<Complex<f64>>>,
    kernel: Kernel,
}

impl Convolver {
    pub fn new(data: &Grid, kernel: &Kernel) -> Result<Self> {
        let half = kernel_half_counts(kernel.grid(), data)?;
        let mut padded = [1usize; MAX_DIM];
        let mut planner = FftPlanner::new();
        let mut forward = Vec::new();
        let mut inverse = Vec::new();
        for a in 0..data.dim() {
            padded[a] = fast_len(data.n()[a] + 2 * half[a]);
            forward.push(planner.plan_fft_forward(padded[a]));
            inverse.push(planner.plan_fft_inverse(padded[a]));
        }
        let mut conv = Convolver {
            data: *data,
            half,
            padded,
            forward,
            inverse,
            spectra: Vec::new(),
            kernel: kernel.clone(),
        };
        if !kernel.is_zero() {
            conv.spectra = kernel
                .series()
                .fields()
                .iter()
                .map(|k| conv.kernel_spectrum(k))
                .collect();
        }
        Ok(conv)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn data_grid(&self) -> &Grid {
        &self.data
    }

    fn padded_len(&self) -> usize {
        self.padded.iter().product()
    }

    fn padded_strides(&self) -> [usize; MAX_DIM] {
        [self.padded[1] * self.padded[2], self.padded[2], 1]
    }

    fn kernel_spectrum(&self, k: &ScalarField) -> Vec<Complex<f64>> {
        // reversed kernel: entry i holds the value at offset m - i
        let kg = k.grid();
        let ps = self.padded_strides();
        let mut buf = vec![Complex::new(0.0, 0.0); self.padded_len()];
        for idx in 0..kg.len() {
            let mi = kg.multi_index(idx);
            let mut pidx = 0;
            for a in 0..kg.dim() {
                pidx += (kg.n()[a] - 1 - mi[a]) * ps[a];
            }
            buf[pidx] = Complex::new(k.get(idx), 0.0);
        }
        self.transform(&mut buf, false);
        buf
    }

    fn transform(&self, buf: &mut [Complex<f64>], inverse: bool) {
        let ps = self.padded_strides();
        for a in 0..self.data.dim() {
            let plan = if inverse { &self.inverse[a] } else { &self.forward[a] };
            let len = self.padded[a];
            if a == MAX_DIM - 1 || ps[a] == 1 {
                buf.par_chunks_mut(len).for_each(|line| plan.process(line));
                continue;
            }
            let stride = ps[a];
            let outer = buf.len() / (len * stride);
            let lines: Vec<Vec<Complex<f64>>> = (0..outer * stride)
                .into_par_iter()
                .map(|l| {
                    let base = (l / stride) * len * stride + l % stride;
                    let mut line: Vec<Complex<f64>> = (0..len).map(|k| buf[base + k * stride]).collect();
                    plan.process(&mut line);
                    line
                })
                .collect();
            for (l, line) in lines.into_iter().enumerate() {
                let base = (l / stride) * len * stride + l % stride;
                for (k, v) in line.into_iter().enumerate() {
                    buf[base + k * stride] = v;
                }
            }
        }
    }

    /// `(c0(., t) * rho)` on the data grid.
    pub fn convolve(&self, rho: &ScalarField, t: f64) -> Result<ScalarField> {
        if !rho.grid().same_nodes(&self.data) {
            return Err(Error::GridMismatch("density and convolver grids differ".into()));
        }
        check_support(rho)?;
        let g = self.data;
        if self.kernel.is_zero() || rho.values().iter().all(|&v| v == 0.0) {
            return Ok(ScalarField::zeros(g));
        }
        let ps = self.padded_strides();
        let mut buf = vec![Complex::new(0.0, 0.0); self.padded_len()];
        for idx in 0..g.len() {
            let v = rho.get(idx);
            if v != 0.0 {
                let m = g.multi_index(idx);
                buf[m[0] * ps[0] + m[1] * ps[1] + m[2] * ps[2]] = Complex::new(v, 0.0);
            }
        }
        self.transform(&mut buf, false);
        let spectrum = &self.spectra[self.kernel.series().index_at(t)];
        buf.par_iter_mut().zip(spectrum.par_iter()).for_each(|(b, k)| *b *= k);
        self.transform(&mut buf, true);
        let scale = g.cell_volume() / self.padded_len() as f64;
        let values: Vec<f64> = (0..g.len())
            .map(|idx| {
                let m = g.multi_index(idx);
                let mut p = 0;
                for a in 0..g.dim() {
                    p += (m[a] + self.half[a]) * ps[a];
                }
                buf[p].re * scale
            })
            .collect();
        ScalarField::from_values(g, values)
    }
}

impl Convolver {
    /// `convolve(rho, t)` obtained from an earlier `base_out = convolve(base_rho, base_t)`
    /// by a direct sum over the nodes where the two densities differ. Falls
    /// back to the transform when the difference is not sparse or the kernel
    /// sample changed in between.
    pub fn update(
        &self,
        base_rho: &ScalarField,
        base_out: &ScalarField,
        base_t: f64,
        rho: &ScalarField,
        t: f64,
    ) -> Result<ScalarField> {
        base_rho.check_same_grid(rho)?;
        base_out.check_same_grid(rho)?;
        let series = self.kernel.series();
        if series.index_at(base_t) != series.index_at(t) {
            return self.convolve(rho, t);
        }
        let diff: Vec<(usize, f64)> = rho
            .values()
            .iter()
            .zip(base_rho.values())
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, (a, b))| (i, a - b))
            .collect();
        if diff.is_empty() {
            let mut out = base_out.clone();
            out.set_time(None);
            return Ok(out);
        }
        let g = self.data;
        let kg = *self.kernel.grid();
        let per_node: usize = (0..g.dim()).map(|a| (2 * self.half[a] + 1).min(g.n()[a])).product();
        let p = self.padded_len() as f64;
        if (diff.len() * per_node) as f64 > 4.0 * p * p.log2() {
            return self.convolve(rho, t);
        }
        check_support(rho)?;
        let k = self.kernel.field_at(t);
        let vol = g.cell_volume();
        let strides = g.strides();
        let ks = kg.strides();
        let mut values = base_out.values().to_vec();
        for (q, dr) in diff {
            let mq = g.multi_index(q);
            // output nodes p with |mq - mp| <= half on every axis
            let mut lo = [0usize; MAX_DIM];
            let mut hi = [0usize; MAX_DIM];
            for a in 0..MAX_DIM {
                if a < g.dim() {
                    lo[a] = mq[a].saturating_sub(self.half[a]);
                    hi[a] = (mq[a] + self.half[a]).min(g.n()[a] - 1);
                }
            }
            for p0 in lo[0]..=hi[0] {
                for p1 in lo[1]..=hi[1] {
                    let kb = (mq[0] + self.half[0] - p0) * ks[0] + (mq[1] + self.half[1] - p1) * ks[1];
                    let pb = p0 * strides[0] + p1 * strides[1];
                    for p2 in lo[2]..=hi[2] {
                        let kidx = kb + (mq[2] + self.half[2] - p2) * ks[2];
                        values[pb + p2] += vol * dr * k.get(kidx);
                    }
                }
            }
        }
        ScalarField::from_values(g, values)
    }
}

/// Convenience one-shot transform correlation.
pub fn convolve(c0: &ScalarField, rho: &ScalarField) -> Result<ScalarField> {
    let kernel = Kernel::steady(c0.clone())?;
    Convolver::new(rho.grid(), &kernel)?.convolve(rho, 0.0)
}

/// Time-sampled density `rho` with `0 <= rho <= 1`, zero outside the ball of
/// radius `r0 + cbar t`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorDensity {
    series: TimeSeries,
    r0: f64,
    cbar: f64,
}

impl IndicatorDensity {
    pub fn new(times: Vec<f64>, densities: Vec<ScalarField>, r0: f64, cbar: f64) -> Result<Self> {
        let series = TimeSeries::new(times, densities)?;
        let d = IndicatorDensity { series, r0, cbar };
        for (t, f) in d.series.times().iter().zip(d.series.fields()) {
            let radius = d.support_radius(*t);
            for (idx, &v) in f.values().iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidArgument(format!("density value {v} outside [0, 1]")));
                }
                if v != 0.0 && f.grid().node_norm(idx) > radius * (1.0 + 1e-12) {
                    return Err(Error::Containment(format!(
                        "density nonzero at |x| = {} beyond support radius {radius} at t = {t}",
                        f.grid().node_norm(idx)
                    )));
                }
            }
        }
        Ok(d)
    }

    pub fn support_radius(&self, t: f64) -> f64 {
        self.r0 + self.cbar * t
    }

    pub fn times(&self) -> &[f64] {
        self.series.times()
    }

    pub fn densities(&self) -> &[ScalarField] {
        self.series.fields()
    }

    pub fn at(&self, t: f64) -> &ScalarField {
        self.series.field_at(t)
    }

    pub fn index_at(&self, t: f64) -> usize {
        self.series.index_at(t)
    }

    /// `max_k |rho(t_k) - other(t_k)|_{L1}` over shared sample times.
    pub fn distance(&self, other: &IndicatorDensity) -> Result<f64> {
        if self.times().len() != other.times().len() {
            return Err(Error::InvalidArgument("densities sampled at different times".into()));
        }
        let mut best = 0.0f64;
        for (a, b) in self.densities().iter().zip(other.densities()) {
            best = best.max(a.zip_with(b, |x, y| x - y)?.l1_norm());
        }
        Ok(best)
    }
}

/// `c[rho](., t) = (c0(., t) * rho(., t)) + c1(., t)` with `rho` read
/// piecewise-constant from the left. When `require_nonnegative` is set a
/// value below `-TOL_SIGN` is reported with the worst node.
pub fn assemble_velocity(
    convolver: &Convolver,
    c1: &dyn VelocityField,
    rho: &ScalarField,
    t: f64,
    require_nonnegative: bool,
) -> Result<ScalarField> {
    let conv = convolver.convolve(rho, t)?;
    let c1t = c1.at(t);
    let mut c = conv.zip_with(&c1t, |a, b| a + b)?;
    c.set_time(Some(t));
    if require_nonnegative {
        let (i, v) = c.argmin();
        if v < -TOL_SIGN {
            return Err(Error::H5Violation {
                t,
                value: v,
                location: c.grid().node(i)[..c.grid().dim()].to_vec(),
            });
        }
    }
    Ok(c)
}

/// `assemble_velocity` reading the density from a time-sampled `rho`.
pub fn assemble_velocity_at(
    convolver: &Convolver,
    c1: &dyn VelocityField,
    rho: &IndicatorDensity,
    t: f64,
    require_nonnegative: bool,
) -> Result<ScalarField> {
    assemble_velocity(convolver, c1, rho.at(t), t, require_nonnegative)
}

/// Per time: `lhs = |c0(., t)|_{L1}`, `rhs = min c1(., t)`; passes iff
/// `min c1 - |c0|_{L1} >= -TOL_SIGN`.
pub fn check_h5(kernel: &Kernel, c1: &dyn VelocityField, times: &[f64]) -> Vec<EstimateReport> {
    times
        .iter()
        .map(|&t| {
            let lhs = kernel.l1_norm_at(t);
            let rhs = c1.at(t).min();
            EstimateReport::new("h5", t, lhs, rhs, TOL_SIGN)
                .with_context("min c1 against kernel L1 norm")
        })
        .collect()
}
