//! Turn a [`ScenarioConfig`] into solver inputs.

use anyhow::{bail, Context, Result};
use dislo_core::analysis::interior_ball_construct;
use dislo_core::fixedpoint::DislocationProblem;
use dislo_core::grid::{euclidean_norm, read_field, sample, Grid, ScalarField};
use dislo_core::hj::SignMode;
use dislo_core::nonlocal::{GaussianScale, Kernel, TimeSeries};
use dislo_core::oracles::{RadialLaw, RadialScenario};

use crate::config::{InitialConfig, KernelConfig, ScenarioConfig, SignModeConfig, VelocityConfig};

pub struct Scenario {
    pub grid: Grid,
    pub u0: ScalarField,
    pub c1: ScalarField,
    pub kernel: Kernel,
    /// Radius of a ball containing `{u0 >= 0}`.
    pub r0: f64,
}

impl Scenario {
    pub fn build(cfg: &ScenarioConfig) -> Result<Self> {
        let g = &cfg.grid;
        let grid = Grid::cube(g.dim, g.lo, g.hi, g.n).context("grid")?;
        let (u0, r0) = match &cfg.initial {
            InitialConfig::Cone { r0, slope } => (sample(&grid, |x| slope * (r0 - euclidean_norm(x)))?, *r0),
            InitialConfig::BallSdf { r0 } => (sample(&grid, |x| r0 - euclidean_norm(x))?, *r0),
            InitialConfig::UnionOfBalls { centers, r } => {
                let reach = centers.iter().map(|c| euclidean_norm(c)).fold(0.0, f64::max) + r;
                (interior_ball_construct(centers, *r, &grid).context("initial")?, reach)
            }
            InitialConfig::File { path, r0 } => {
                let f = read_field(path).with_context(|| format!("initial.path {}", path.display()))?;
                if !f.grid().same_nodes(&grid) {
                    bail!("initial.path: field grid does not match [grid]");
                }
                (f, *r0)
            }
        };
        let c1 = match &cfg.c1 {
            VelocityConfig::Constant { value } => ScalarField::constant(grid, *value),
            VelocityConfig::Sine {
                offset,
                amplitude,
                wavenumber,
            } => sample(&grid, |x| offset + amplitude * x.iter().map(|v| (wavenumber * v).sin()).product::<f64>())?,
            VelocityConfig::File { path } => {
                let f = read_field(path).with_context(|| format!("c1.path {}", path.display()))?;
                if !f.grid().same_nodes(&grid) {
                    bail!("c1.path: field grid does not match [grid]");
                }
                f
            }
        };
        let kernel = match &cfg.kernel {
            KernelConfig::Zero => Kernel::zero(&grid),
            KernelConfig::Delta => Kernel::delta(&grid),
            KernelConfig::Gaussian { sigma, mass, amplitude } => {
                let scale = match (mass, amplitude) {
                    (Some(m), None) => GaussianScale::Mass(*m),
                    (None, Some(a)) => GaussianScale::Amplitude(*a),
                    _ => bail!("kernel: gaussian needs exactly one of `mass` and `amplitude`"),
                };
                Kernel::gaussian(&grid, *sigma, scale)
            }
            KernelConfig::Bump { radius, amplitude } => Kernel::bump(&grid, *radius, *amplitude),
            KernelConfig::Constant { value, half_width } => {
                Kernel::constant(&grid, *value, half_width.unwrap_or(cfg.grid.hi - cfg.grid.lo))
            }
        }
        .context("kernel")?;
        Ok(Scenario { grid, u0, c1, kernel, r0 })
    }

    pub fn problem(&self, cfg: &ScenarioConfig) -> Result<DislocationProblem> {
        let c1 = TimeSeries::steady(self.c1.clone());
        let build = if cfg.run.allow_h5_violation {
            DislocationProblem::new_unchecked_sign
        } else {
            DislocationProblem::new
        };
        let mut p = build(self.kernel.clone(), c1, self.u0.clone(), cfg.run.horizon, self.r0)?;
        if let Some(eta) = cfg.run.eta {
            p = p.with_eta(eta)?;
        }
        p.sign_mode = sign_mode(cfg.run.sign_mode);
        Ok(p)
    }

    /// Origin-centred ball data, for which a front radius is meaningful.
    pub fn is_radial(&self, cfg: &ScenarioConfig) -> bool {
        matches!(cfg.initial, InitialConfig::Cone { .. } | InitialConfig::BallSdf { .. })
    }

    /// Exact front law when the scenario is an origin-centred ball moving
    /// with a known radial law.
    pub fn radial_oracle(&self, cfg: &ScenarioConfig) -> Option<RadialScenario> {
        let r0 = match cfg.initial {
            InitialConfig::Cone { r0, .. } | InitialConfig::BallSdf { r0 } => r0,
            _ => return None,
        };
        let law = match (&cfg.kernel, &cfg.c1) {
            (KernelConfig::Zero, VelocityConfig::Constant { value }) if *value >= 0.0 => RadialLaw::ConstantSpeed(*value),
            (KernelConfig::Constant { value, half_width }, VelocityConfig::Constant { value: c1 })
                if *value == 1.0 && *c1 == 0.0 && half_width.is_none_or(|w| w >= cfg.grid.hi - cfg.grid.lo) =>
            {
                RadialLaw::VolumeDriven
            }
            _ => return None,
        };
        RadialScenario::new(r0, self.grid.dim(), law).ok()
    }
}

pub fn sign_mode(s: SignModeConfig) -> SignMode {
    match s {
        SignModeConfig::Nonnegative => SignMode::Nonnegative,
        SignModeConfig::Nonpositive => SignMode::Nonpositive,
        SignModeConfig::Unrestricted => SignMode::Unrestricted,
    }
}
