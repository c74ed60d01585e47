//! Scenario configuration (TOML). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub c1: VelocityConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    /// Box `[lo, hi]^dim`.
    pub lo: f64,
    pub hi: f64,
    /// Nodes per axis.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// `slope (r0 - |x|)`
    Cone {
        r0: f64,
        #[serde(default = "one")]
        slope: f64,
    },
    /// Signed distance `r0 - |x|` to the sphere.
    BallSdf { r0: f64 },
    /// Union of balls of radius `r` around `centers`.
    UnionOfBalls { centers: Vec<Vec<f64>>, r: f64 },
    /// Field snapshot file; `r0` bounds `{u0 >= 0}`.
    File { path: PathBuf, r0: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    #[default]
    Zero,
    /// Unit mass at the origin.
    Delta,
    /// Truncated gaussian with either `mass` (L1 norm) or peak `amplitude`.
    Gaussian {
        sigma: f64,
        mass: Option<f64>,
        amplitude: Option<f64>,
    },
    Bump { radius: f64, amplitude: f64 },
    /// `value` on the cube `|z_a| <= half_width`; omit `half_width` to cover the box diameter.
    Constant { value: f64, half_width: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityConfig {
    Constant { value: f64 },
    /// `offset + amplitude prod_a sin(wavenumber x_a)`
    Sine { offset: f64, amplitude: f64, wavenumber: f64 },
    File { path: PathBuf },
}

impl Default for VelocityConfig {
    fn default() -> Self {
        VelocityConfig::Constant { value: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignModeConfig {
    Nonnegative,
    Nonpositive,
    Unrestricted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: f64,
    #[serde(default)]
    pub output_times: Vec<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_sign")]
    pub sign_mode: SignModeConfig,
    #[serde(default)]
    pub allow_h5_violation: bool,
    pub tol_fp: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    pub slab_length: Option<f64>,
    /// Override of the empirical `eta`.
    pub eta: Option<f64>,
}

fn default_cfl() -> f64 {
    dislo_core::hj::DEFAULT_CFL
}

fn default_sign() -> SignModeConfig {
    SignModeConfig::Nonnegative
}

fn default_max_iter() -> usize {
    30
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Band `[a, b]` for the band estimates; defaults to `0.4 eta_bar` around 0.
    pub band: Option<[f64; 2]>,
    /// Mollification width; defaults to a quarter of the band half-width.
    pub epsilon: Option<f64>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| anyhow::anyhow!("{e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(1..=3).contains(&g.dim) {
            bail!("grid.dim: must be 1, 2 or 3, got {}", g.dim);
        }
        if !(g.lo < g.hi) {
            bail!("grid.lo/grid.hi: need lo < hi, got {} and {}", g.lo, g.hi);
        }
        let r = &self.run;
        if !(r.horizon > 0.0) {
            bail!("run.horizon: must be positive, got {}", r.horizon);
        }
        if !(r.cfl > 0.0) {
            bail!("run.cfl: must be positive, got {}", r.cfl);
        }
        if let Some(t) = r.output_times.iter().find(|t| !(**t > 0.0 && **t <= r.horizon)) {
            bail!("run.output_times: {t} outside (0, horizon]");
        }
        if let InitialConfig::UnionOfBalls { centers, .. } = &self.initial {
            if let Some(c) = centers.iter().find(|c| c.len() != g.dim) {
                bail!("initial.centers: {c:?} does not have {} coordinates", g.dim);
            }
        }
        if let KernelConfig::Gaussian { mass, amplitude, .. } = &self.kernel {
            if mass.is_some() == amplitude.is_some() {
                bail!("kernel: gaussian needs exactly one of `mass` and `amplitude`");
            }
        }
        if let Some([a, b]) = self.verify.band {
            if !(a < b) {
                bail!("verify.band: need a < b, got [{a}, {b}]");
            }
        }
        Ok(())
    }

    /// Canonical text used for hashing: the parsed config re-serialized.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn is_local(&self) -> bool {
        matches!(self.kernel, KernelConfig::Zero)
    }
}
