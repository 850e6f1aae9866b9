//! Experiment configuration: a sectioned TOML file with units in key names.
//!
//! ```toml
//! seed = 7
//! out_dir = "runs/demo"
//!
//! [radar]
//! n_positions = 16
//! position_start_m = 1.824
//! position_step_m = 0.02
//! n_freqs = 64
//! freq_lo_hz = 1e9
//! freq_hi_hz = 3e9
//!
//! [wall]
//! thickness_m = 0.2
//! relative_permittivity = 4.5
//! standoff_m = 1.2
//! reverb_count = 3
//!
//! [scene]
//! n_x = 32
//! n_z = 32
//! crossrange_m = [1.0, 4.1]
//! downrange_m = [1.5, 4.6]
//! schemes = ["direct"]
//!
//! [[targets]]
//! x_m = 2.6
//! z_m = 4.0
//! ```
//!
//! Optional sections: `[noise]`, `[solver]`, `[eval]`, `[sweep]`. Unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::DEFAULT_RADIUS;
use crate::forward::{MirrorPlane, MultipathScheme, Point, RadarConfig, SceneGrid, Target, TargetSpec, WallSpec};
use crate::linalg::c;
use crate::noise::{NoiseSpec, NoiseStructure, OutlierSpec, OutlierStructure};
use crate::solvers::{Method, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub radar: RadarSection,
    pub wall: WallSection,
    pub scene: SceneSection,
    #[serde(default)]
    pub targets: Vec<TargetSection>,
    #[serde(default)]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarSection {
    pub n_positions: usize,
    pub position_start_m: f64,
    pub position_step_m: f64,
    pub n_freqs: usize,
    pub freq_lo_hz: f64,
    pub freq_hi_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallSection {
    pub thickness_m: f64,
    pub relative_permittivity: f64,
    pub standoff_m: f64,
    /// Reverberations of amplitude `0.7^k`, `k = 1..=reverb_count`.
    #[serde(default = "default_reverbs")]
    pub reverb_count: usize,
    /// Per-position relative amplitude jitter of the wall returns.
    #[serde(default)]
    pub jitter: f64,
}

fn default_reverbs() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub n_x: usize,
    pub n_z: usize,
    pub crossrange_m: [f64; 2],
    pub downrange_m: [f64; 2],
    /// `direct`, `side-wall@<x_m>`, `back-wall@<z_m>` or `ringing-<order>`.
    #[serde(default = "default_schemes")]
    pub schemes: Vec<String>,
}

fn default_schemes() -> Vec<String> {
    vec!["direct".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub x_m: f64,
    pub z_m: f64,
    /// `[re, im]` pairs, one per scheme or a single one for all.
    #[serde(default)]
    pub amplitudes: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub structure: NoiseStructure,
    pub dof: f64,
    pub snr_db: f64,
    #[serde(default)]
    pub outliers: usize,
    #[serde(default = "default_outlier_structure")]
    pub outlier_structure: OutlierStructure,
}

fn default_outlier_structure() -> OutlierStructure {
    OutlierStructure::Point
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub name: String,
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    pub eta: f64,
    pub huber_c: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub pgd_step: Option<f64>,
    pub tol: f64,
    pub dual_balancing: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            name: "krpca".into(),
            lambda: d.lambda,
            mu: d.mu,
            nu: d.nu,
            eta: d.eta,
            huber_c: d.huber_c,
            outer_iters: d.outer_iters,
            inner_iters: d.inner_iters,
            pgd_step: d.pgd_step,
            tol: d.tol,
            dual_balancing: d.dual_balancing,
        }
    }
}

impl SolverSection {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            mu: self.mu,
            nu: self.nu,
            eta: self.eta,
            huber_c: self.huber_c,
            outer_iters: self.outer_iters,
            inner_iters: self.inner_iters,
            pgd_step: self.pgd_step,
            tol: self.tol,
            dual_balancing: self.dual_balancing,
        }
    }

    pub fn method(&self) -> Result<Method> {
        self.name.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub radius_px: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            radius_px: DEFAULT_RADIUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_trials() -> usize {
    1
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse_scheme(s: &str) -> Result<MultipathScheme> {
    let bad = || Error::input(format!("unknown multipath scheme '{s}'"));
    if s == "direct" {
        return Ok(MultipathScheme::Direct);
    }
    if let Some(v) = s.strip_prefix("side-wall@") {
        return Ok(MultipathScheme::InteriorBounce(MirrorPlane::Crossrange(
            v.parse().map_err(|_| bad())?,
        )));
    }
    if let Some(v) = s.strip_prefix("back-wall@") {
        return Ok(MultipathScheme::InteriorBounce(MirrorPlane::Downrange(
            v.parse().map_err(|_| bad())?,
        )));
    }
    if let Some(v) = s.strip_prefix("ringing-") {
        return Ok(MultipathScheme::WallRinging(v.parse().map_err(|_| bad())?));
    }
    Err(bad())
}

impl ExperimentConfig {
    /// Parses and validates; errors carry the 1-based line of the offending key.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            msg: e.message().to_string(),
        })?;
        cfg.validate().map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::Config {
                line: 0,
                msg: other.to_string(),
            },
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            line: 0,
            msg: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let wall = self.wall_spec();
        wall.validate()?;
        self.radar_config().validate()?;
        self.grid()?.validate(&wall)?;
        if self.wall.jitter < 0.0 || !self.wall.jitter.is_finite() {
            return Err(Error::input("wall.jitter must be nonnegative"));
        }
        self.target_spec();
        if let Some(n) = self.noise_spec(self.seed) {
            n.validate()?;
        }
        self.solver.to_config().validate()?;
        self.solver.method()?;
        if !(self.eval.radius_px >= 0.0) {
            return Err(Error::input("eval.radius_px must be nonnegative"));
        }
        if let Some(s) = &self.sweep {
            if s.lambda.is_empty() || s.mu.is_empty() {
                return Err(Error::input("sweep grid must be nonempty"));
            }
            if s.trials == 0 {
                return Err(Error::input("sweep.trials must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn radar_config(&self) -> RadarConfig {
        let r = &self.radar;
        RadarConfig::with_band_hz(
            r.n_positions,
            r.position_start_m,
            r.position_step_m,
            r.n_freqs,
            r.freq_lo_hz,
            r.freq_hi_hz,
        )
    }

    pub fn wall_spec(&self) -> WallSpec {
        WallSpec::with_default_reverbs(
            self.wall.thickness_m,
            self.wall.relative_permittivity,
            self.wall.standoff_m,
            self.wall.reverb_count,
        )
    }

    pub fn grid(&self) -> Result<SceneGrid> {
        let schemes = self
            .scene
            .schemes
            .iter()
            .map(|s| parse_scheme(s))
            .collect::<Result<_>>()?;
        Ok(SceneGrid {
            n_x: self.scene.n_x,
            n_z: self.scene.n_z,
            crossrange: (self.scene.crossrange_m[0], self.scene.crossrange_m[1]),
            downrange: (self.scene.downrange_m[0], self.scene.downrange_m[1]),
            schemes,
        })
    }

    pub fn target_spec(&self) -> TargetSpec {
        TargetSpec {
            targets: self
                .targets
                .iter()
                .map(|t| Target {
                    position: Point::new(t.x_m, t.z_m),
                    amplitudes: if t.amplitudes.is_empty() {
                        vec![c(1.0, 0.0)]
                    } else {
                        t.amplitudes.iter().map(|a| c(a[0], a[1])).collect()
                    },
                })
                .collect(),
        }
    }

    /// Noise model seeded with `seed`, or `None` for noiseless data.
    pub fn noise_spec(&self, seed: u64) -> Option<NoiseSpec> {
        self.noise.as_ref().map(|n| NoiseSpec {
            structure: n.structure,
            dof: n.dof,
            snr_db: n.snr_db,
            outliers: OutlierSpec {
                count: n.outliers,
                structure: n.outlier_structure,
            },
            seed,
        })
    }
}
