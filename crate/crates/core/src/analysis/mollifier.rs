//! Smoothed indicator of a band `[a, b]`.

use crate::grid::{compensated_sum, BandSpec, ScalarField};

/// Quintic smoothstep `6s^5 - 15s^4 + 10s^3`, `C^2` at both ends.
fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (s * (6.0 * s - 15.0) + 10.0)
}

/// Primitive of [`smoothstep`] on `[0, 1]`, vanishing at `0`.
fn smoothstep_primitive(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s.powi(4) * (s * (s - 3.0) + 2.5)
}

/// `phi`: `0` below `a - eps`, rises on `(a - eps, a)`, `1` on `[a, b]`,
/// falls on `(b, b + eps)`, `0` above `b + eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifiedIndicator {
    pub band: BandSpec,
}

impl MollifiedIndicator {
    pub fn new(band: BandSpec) -> Self {
        MollifiedIndicator { band }
    }

    pub fn phi(&self, r: f64) -> f64 {
        let BandSpec { a, b, epsilon: e } = self.band;
        if r <= a - e || r >= b + e {
            0.0
        } else if r < a {
            smoothstep((r - (a - e)) / e)
        } else if r <= b {
            1.0
        } else {
            1.0 - smoothstep((r - b) / e)
        }
    }

    /// `Phi(r) = int_{-inf}^r phi`
    pub fn primitive(&self, r: f64) -> f64 {
        let BandSpec { a, b, epsilon: e } = self.band;
        if r <= a - e {
            0.0
        } else if r < a {
            e * smoothstep_primitive((r - (a - e)) / e)
        } else if r <= b {
            0.5 * e + (r - a)
        } else {
            let s = ((r - b) / e).min(1.0);
            0.5 * e + (b - a) + e * (s - smoothstep_primitive(s))
        }
    }

    /// `b - a + 2 eps`, an upper bound of `Phi`.
    pub fn primitive_bound(&self) -> f64 {
        self.band.width() + 2.0 * self.band.epsilon
    }

    /// `int phi(u(x)) dx` as a cell sum.
    pub fn integral(&self, u: &ScalarField) -> f64 {
        u.grid().cell_volume() * compensated_sum(u.values().iter().map(|&v| self.phi(v)))
    }
}
