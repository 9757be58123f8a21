//! Pipeline configuration file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bonsai_core::fit::{FitConfig, FitProblem};
use bonsai_core::model::Theta;
use bonsai_core::{AssignmentMode, GrowthParams, Palette, RigSettings, SizingParams};
use serde::Deserialize;

use crate::Failure;

/// Reference for every key, printed by `--help`.
pub const KEYS_HELP: &str = "\
CONFIGURATION (TOML; every key optional, defaults shown)

  seed = 42                      master seed; named sub-streams drive attractors,
                                 sampling, cameras and fitting

  [growth]
  domain_radius = 1.0            crown radius R; the crown is the ellipsoid with
                                 centre (0,0,R) and semi-axes (R, R, R/2)
  n_attractors = 2000            attractors sampled in the crown
  delta_l = 0.03                 branch length
  d_kill = 0.09                  attractor removal radius (strict <)
  d_influence = 0.3              attraction radius (strict <);
                                 requires delta_l < d_kill < d_influence
  theta = [1.0, 0.0, 0.0, 0.0]   attraction weights [omega, fall, trop, reserved]
  max_iterations = 500           growth iteration cap
  stall_limit = 10               stop after this many progress-free iterations
  assignment = \"closest\"         \"closest\" or \"all_in_range\"
  uniform_volume = false         sample attractor radii volume-uniformly

  [sizing]
  r_e = 0.004                    extremity (tip) radius
  i_g = 2.0                      inverted growth factor, >= 1
  ring_segments = 8              vertices per tube ring, >= 3

  [sampling]
  density = 1500.0               surface points per unit area

  [gaussians]
  opacity = 0.9                  initial opacity, in (0, 1]
  trunk_color = [0.40, 0.26, 0.13]
  extremity_color = [0.33, 0.55, 0.20]

  [render]
  views = 4                      cameras in the rig
  width = 512
  height = 512
  vertical_fov = 50.0            degrees
  distance_range = [2.5, 4.0]    camera distance in scene radii
  elevation_range = [-15.0, 45.0]  degrees

  [fit]
  theta_init = [1.0, 0.0, 0.0, 0.0]
  theta_lo = [0.1, 0.0, 0.0, 0.0]
  theta_hi = [4.0, 6.0, 6.0, 0.0]
  step_sigma = 1.0               initial mutation scale
  budget = 200                   objective evaluations
  views = 4                      silhouettes rendered per evaluation
  resolution = 64                silhouette width and height in pixels

  [output]
  dir = \"out\"                    default output directory

EXIT STATUS
  0 success, 1 I/O error, 2 invalid configuration or input
";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    #[serde(default)]
    pub growth: GrowthSection,
    #[serde(default)]
    pub sizing: SizingSection,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub gaussians: GaussianSection,
    #[serde(default)]
    pub render: RenderSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrowthSection {
    pub domain_radius: f64,
    pub n_attractors: usize,
    pub delta_l: f64,
    pub d_kill: f64,
    pub d_influence: f64,
    pub theta: [f64; 4],
    pub max_iterations: usize,
    pub stall_limit: usize,
    pub assignment: AssignmentMode,
    pub uniform_volume: bool,
}

impl Default for GrowthSection {
    fn default() -> Self {
        let p = GrowthParams::default();
        Self {
            domain_radius: p.domain_radius,
            n_attractors: p.n_attractors,
            delta_l: p.delta_l,
            d_kill: p.d_kill,
            d_influence: p.d_influence,
            theta: p.theta.0,
            max_iterations: p.max_iterations,
            stall_limit: p.stall_limit,
            assignment: p.assignment,
            uniform_volume: p.uniform_volume,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SizingSection {
    pub r_e: f64,
    pub i_g: f64,
    pub ring_segments: usize,
}

impl Default for SizingSection {
    fn default() -> Self {
        let s = SizingParams::default();
        Self { r_e: s.r_e, i_g: s.i_g, ring_segments: s.ring_segments }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSection {
    pub density: f64,
}

impl Default for SamplingSection {
    fn default() -> Self {
        Self { density: 1500.0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaussianSection {
    pub opacity: f64,
    pub trunk_color: [f64; 3],
    pub extremity_color: [f64; 3],
}

impl Default for GaussianSection {
    fn default() -> Self {
        let p = Palette::default();
        Self { opacity: 0.9, trunk_color: p.trunk, extremity_color: p.extremity }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSection {
    pub views: usize,
    pub width: usize,
    pub height: usize,
    pub vertical_fov: f64,
    pub distance_range: [f64; 2],
    pub elevation_range: [f64; 2],
}

impl Default for RenderSection {
    fn default() -> Self {
        let r = RigSettings::default();
        Self {
            views: r.n_views,
            width: r.width,
            height: r.height,
            vertical_fov: r.vertical_fov,
            distance_range: [r.distance_range.0, r.distance_range.1],
            elevation_range: [r.elevation_range.0, r.elevation_range.1],
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub theta_init: [f64; 4],
    pub theta_lo: [f64; 4],
    pub theta_hi: [f64; 4],
    pub step_sigma: f64,
    pub budget: usize,
    pub views: usize,
    pub resolution: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        let f = FitConfig::default();
        Self {
            theta_init: f.theta_init,
            theta_lo: f.theta_lo,
            theta_hi: f.theta_hi,
            step_sigma: f.step_sigma,
            budget: f.budget,
            views: f.views,
            resolution: 64,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl Config {
    /// Reads `path`, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| Failure::Invalid(format!("config {}: {e}", path.display())))
            .map_err(anyhow::Error::from)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(42)
    }

    pub fn growth(&self) -> Result<GrowthParams> {
        let g = &self.growth;
        let params = GrowthParams {
            domain_radius: g.domain_radius,
            n_attractors: g.n_attractors,
            delta_l: g.delta_l,
            d_kill: g.d_kill,
            d_influence: g.d_influence,
            theta: Theta(g.theta),
            max_iterations: g.max_iterations,
            stall_limit: g.stall_limit,
            seed: self.seed(),
            assignment: g.assignment,
            uniform_volume: g.uniform_volume,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn sizing(&self) -> Result<SizingParams> {
        let s = &self.sizing;
        let sp = SizingParams { r_e: s.r_e, i_g: s.i_g, ring_segments: s.ring_segments };
        sp.validate()?;
        Ok(sp)
    }

    pub fn density(&self) -> Result<f64> {
        let d = self.sampling.density;
        if !(d > 0.0 && d.is_finite()) {
            bail!(Failure::Invalid(format!("sampling.density must be positive, got {d}")));
        }
        Ok(d)
    }

    pub fn palette(&self) -> Palette {
        Palette { trunk: self.gaussians.trunk_color, extremity: self.gaussians.extremity_color }
    }

    pub fn rig(&self) -> Result<RigSettings> {
        let r = &self.render;
        let rig = RigSettings {
            n_views: r.views,
            distance_range: (r.distance_range[0], r.distance_range[1]),
            elevation_range: (r.elevation_range[0], r.elevation_range[1]),
            vertical_fov: r.vertical_fov,
            width: r.width,
            height: r.height,
        };
        rig.validate()?;
        Ok(rig)
    }

    pub fn fit(&self) -> Result<(FitConfig, FitProblem)> {
        let f = &self.fit;
        let cfg = FitConfig {
            theta_init: f.theta_init,
            theta_lo: f.theta_lo,
            theta_hi: f.theta_hi,
            step_sigma: f.step_sigma,
            budget: f.budget,
            views: f.views,
            seed: self.seed(),
        };
        cfg.validate()?;
        if f.resolution == 0 {
            bail!(Failure::Invalid("fit.resolution must be positive".into()));
        }
        let rig = RigSettings { n_views: f.views, width: f.resolution, height: f.resolution, ..self.rig()? };
        let problem = FitProblem { growth: self.growth()?, sizing: self.sizing()?, rig };
        Ok((cfg, problem))
    }
}
