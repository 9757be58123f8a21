//! Fitting the learnable growth weights against 2D silhouette statistics.
//!
//! The objective grows a tree with candidate weights, renders its silhouette
//! from a seeded camera rig, summarizes each view with [`SilhouetteStats`] and
//! compares the mean summary with the mean of the target summaries, each
//! component scaled by the targets' spread. A (1+1) evolution strategy with
//! the one-fifth success rule searches the box-constrained weight space.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::attractor::sample_attractors;
use crate::colonize::grow;
use crate::error::{Error, Result};
use crate::model::{GrowthParams, SizingParams, Theta};
use crate::render::{default_camera_rig, render_mesh, scene_bounds, DepthImage, MeshRef, RigSettings};
use crate::gaussian::Palette;
use crate::rng;
use crate::scalar::Real;
use crate::solid::{build_mesh, compute_sizes};

pub const PROFILE_BINS: usize = 16;
pub const FEATURES: usize = PROFILE_BINS + 3;
/// Floor on the per-feature target spread used for normalization.
pub const STD_FLOOR: f64 = 1e-3;

/// Binary foreground mask, row-major, row 0 at the top.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width * height, "mask buffer size");
        Self { width, height, data }
    }

    /// Foreground where the 8-bit value exceeds 127.
    pub fn from_gray(width: usize, height: usize, gray: &[u8]) -> Self {
        Self::new(width, height, gray.iter().map(|&g| g > 127).collect())
    }

    /// Foreground wherever the depth image has a finite hit.
    pub fn from_depth<T: Real>(depth: &DepthImage<T>) -> Self {
        Self::new(depth.width, depth.height, depth.data.iter().map(|d| d.is_finite()).collect())
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn to_gray(&self) -> Vec<u8> {
        self.data.iter().map(|&f| if f { 255 } else { 0 }).collect()
    }
}

/// Scale-free silhouette descriptors computed inside the foreground
/// bounding box.
#[derive(Clone, Debug, PartialEq)]
pub struct SilhouetteStats {
    /// Box height over box width.
    pub aspect_ratio: f64,
    /// Foreground fraction of the box.
    pub fill_ratio: f64,
    /// Per-band foreground fraction, 16 equal row bands from top to bottom.
    pub vertical_profile: [f64; PROFILE_BINS],
    /// Share of the foreground in the bottom quarter of the box.
    pub trunk_fraction: f64,
}

impl SilhouetteStats {
    pub fn features(&self) -> [f64; FEATURES] {
        let mut f = [0.0; FEATURES];
        f[0] = self.aspect_ratio;
        f[1] = self.fill_ratio;
        f[2..2 + PROFILE_BINS].copy_from_slice(&self.vertical_profile);
        f[FEATURES - 1] = self.trunk_fraction;
        f
    }
}

pub fn stats_from_mask(mask: &Mask) -> Result<SilhouetteStats> {
    let (mut x0, mut x1, mut y0, mut y1) = (usize::MAX, 0, usize::MAX, 0);
    let mut total = 0usize;
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) {
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
                total += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::EmptyForeground);
    }
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
    let mut band_fg = [0usize; PROFILE_BINS];
    let mut band_rows = [0usize; PROFILE_BINS];
    let mut bottom = 0usize;
    for r in 0..h {
        let row = (x0..=x1).filter(|&x| mask.get(x, y0 + r)).count();
        let band = r * PROFILE_BINS / h;
        band_fg[band] += row;
        band_rows[band] += 1;
        // Rows whose distance from the box bottom is under a quarter height.
        if 4 * (h - 1 - r) < h {
            bottom += row;
        }
    }
    let mut profile = [0.0; PROFILE_BINS];
    for b in 0..PROFILE_BINS {
        if band_rows[b] > 0 {
            profile[b] = band_fg[b] as f64 / (band_rows[b] * w) as f64;
        }
    }
    Ok(SilhouetteStats {
        aspect_ratio: h as f64 / w as f64,
        fill_ratio: total as f64 / (w * h) as f64,
        vertical_profile: profile,
        trunk_fraction: bottom as f64 / total as f64,
    })
}

/// Mean and floored standard deviation of a set of silhouette summaries.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetSummary {
    pub mean: [f64; FEATURES],
    pub std: [f64; FEATURES],
}

impl TargetSummary {
    pub fn new(targets: &[SilhouetteStats]) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InvalidParameter("at least one target silhouette is required".into()));
        }
        let mean = feature_mean(targets);
        let n = targets.len() as f64;
        let mut std = [0.0; FEATURES];
        for t in targets {
            for (s, (f, m)) in std.iter_mut().zip(t.features().iter().zip(mean)) {
                *s += (f - m) * (f - m);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt().max(STD_FLOOR);
        }
        Ok(Self { mean, std })
    }

    /// Mean squared z-score of the mean of `generated` against the targets.
    pub fn discrepancy(&self, generated: &[SilhouetteStats]) -> f64 {
        let g = feature_mean(generated);
        let sum: f64 = (0..FEATURES).map(|k| ((g[k] - self.mean[k]) / self.std[k]).powi(2)).sum();
        sum / FEATURES as f64
    }
}

fn feature_mean(stats: &[SilhouetteStats]) -> [f64; FEATURES] {
    let mut mean = [0.0; FEATURES];
    for s in stats {
        for (m, f) in mean.iter_mut().zip(s.features()) {
            *m += f;
        }
    }
    mean.map(|m| m / stats.len() as f64)
}

/// Everything the objective needs besides the candidate weights.
#[derive(Clone, Debug, PartialEq)]
pub struct FitProblem {
    pub growth: GrowthParams<f64>,
    pub sizing: SizingParams<f64>,
    pub rig: RigSettings<f64>,
}

impl Default for FitProblem {
    fn default() -> Self {
        Self {
            growth: GrowthParams { n_attractors: 600, delta_l: 0.05, d_kill: 0.12, d_influence: 0.4, ..Default::default() },
            sizing: SizingParams { r_e: 0.008, i_g: 2.0, ring_segments: 6 },
            rig: RigSettings { width: 64, height: 64, ..Default::default() },
        }
    }
}

/// Grows, sizes, meshes and renders the candidate; one silhouette per view.
pub fn render_silhouettes(problem: &FitProblem, theta: &Theta<f64>, seed: u64) -> Result<Vec<Mask>> {
    let params = GrowthParams { theta: *theta, seed, ..problem.growth.clone() };
    let field = sample_attractors(
        params.domain_radius,
        params.n_attractors,
        &mut rng::stream(seed, rng::ATTRACTORS),
        params.uniform_volume,
    );
    let grown = grow(field, &params)?;
    let sized = compute_sizes(&grown.skeleton, &problem.sizing)?;
    let mesh = build_mesh(&sized, &problem.sizing)?;
    let (center, radius) = scene_bounds(mesh.vertices.iter().copied());
    let cams = default_camera_rig(center, radius, &problem.rig, &mut rng::stream(seed, rng::CAMERAS))?;
    let palette = Palette::default();
    cams.iter()
        .map(|cam| render_mesh(MeshRef::from(&mesh), cam, &palette).map(|(_, d)| Mask::from_depth(&d)))
        .collect()
}

pub fn silhouette_stats(problem: &FitProblem, theta: &Theta<f64>, seed: u64) -> Result<Vec<SilhouetteStats>> {
    render_silhouettes(problem, theta, seed)?.iter().map(stats_from_mask).collect()
}

/// Discrepancy between the candidate's silhouettes and the targets.
pub fn loss(problem: &FitProblem, theta: &Theta<f64>, targets: &[SilhouetteStats], seed: u64) -> Result<f64> {
    let summary = TargetSummary::new(targets)?;
    Ok(summary.discrepancy(&silhouette_stats(problem, theta, seed)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub theta_init: [f64; 4],
    pub theta_lo: [f64; 4],
    pub theta_hi: [f64; 4],
    pub step_sigma: f64,
    /// Number of objective evaluations, the initial one included.
    pub budget: usize,
    pub views: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            theta_init: [1.0, 0.0, 0.0, 0.0],
            theta_lo: [0.1, 0.0, 0.0, 0.0],
            theta_hi: [4.0, 6.0, 6.0, 0.0],
            step_sigma: 1.0,
            budget: 200,
            views: 4,
            seed: 42,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        for k in 0..4 {
            let (lo, init, hi) = (self.theta_lo[k], self.theta_init[k], self.theta_hi[k]);
            if !(lo <= init && init <= hi) {
                return Err(Error::InvalidParameter(format!(
                    "theta[{k}]: bounds must satisfy lo <= init <= hi, got {lo} <= {init} <= {hi}"
                )));
            }
        }
        if self.theta_lo[0] <= 0.0 {
            return Err(Error::NonPositive("theta_lo[0] (omega)"));
        }
        if !(self.step_sigma > 0.0) {
            return Err(Error::NonPositive("step_sigma"));
        }
        if self.budget == 0 {
            return Err(Error::NonPositive("budget"));
        }
        if self.views == 0 {
            return Err(Error::NonPositive("views"));
        }
        Ok(())
    }

    fn clamp(&self, t: [f64; 4]) -> [f64; 4] {
        std::array::from_fn(|k| t[k].clamp(self.theta_lo[k], self.theta_hi[k]))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitRecord {
    pub evaluation: usize,
    pub theta: [f64; 4],
    pub loss: f64,
    pub accepted: bool,
    /// Loss of the incumbent after this evaluation.
    pub best_loss: f64,
    /// Mutation scale used to propose this candidate.
    pub step_sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub best_theta: [f64; 4],
    pub best_loss: f64,
    pub initial_loss: f64,
    pub trace: Vec<FitRecord>,
}

impl FitResult {
    /// `evaluation,omega,fall,trop,reserved,loss,accepted,best_loss,step_sigma`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("evaluation,omega,fall,trop,reserved,loss,accepted,best_loss,step_sigma\n");
        for r in &self.trace {
            let t = r.theta.map(crate::skeleton_json::fmt_num);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.evaluation,
                t[0],
                t[1],
                t[2],
                t[3],
                crate::skeleton_json::fmt_num(r.loss),
                u8::from(r.accepted),
                crate::skeleton_json::fmt_num(r.best_loss),
                crate::skeleton_json::fmt_num(r.step_sigma),
            ));
        }
        out
    }

    pub fn accepted_losses(&self) -> impl Iterator<Item = f64> + '_ {
        self.trace.iter().filter(|r| r.accepted).map(|r| r.loss)
    }
}

/// (1+1)-ES on an arbitrary objective over the box `[theta_lo, theta_hi]`.
///
/// A candidate replaces the incumbent when its loss is no worse. The step
/// grows by `e^(1/3)` after a strict improvement and shrinks by `e^(−1/12)`
/// otherwise, which balances at a one-in-five success rate.
pub fn fit_objective(cfg: &FitConfig, mut objective: impl FnMut(&[f64; 4]) -> Result<f64>) -> Result<FitResult> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, rng::FITTING);
    let max_sigma = (0..4).map(|k| cfg.theta_hi[k] - cfg.theta_lo[k]).fold(0.0, f64::max).max(1e-6);
    let mut theta = cfg.clamp(cfg.theta_init);
    let mut current = objective(&theta)?;
    let initial_loss = current;
    let mut sigma = cfg.step_sigma;
    let mut trace = vec![FitRecord {
        evaluation: 1,
        theta,
        loss: current,
        accepted: true,
        best_loss: current,
        step_sigma: sigma,
    }];
    for evaluation in 2..=cfg.budget {
        let step: [f64; 4] = std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal));
        let cand = cfg.clamp(std::array::from_fn(|k| theta[k] + sigma * step[k]));
        let l = objective(&cand)?;
        let improved = l < current;
        let accepted = l <= current;
        let used_sigma = sigma;
        if accepted {
            theta = cand;
            current = l;
        }
        sigma = if improved { sigma * (1.0f64 / 3.0).exp() } else { sigma * (-1.0f64 / 12.0).exp() };
        sigma = sigma.clamp(1e-6, max_sigma);
        trace.push(FitRecord { evaluation, theta: cand, loss: l, accepted, best_loss: current, step_sigma: used_sigma });
    }
    Ok(FitResult { best_theta: theta, best_loss: current, initial_loss, trace })
}

/// Fits the growth weights of `problem` to `targets`.
pub fn fit(cfg: &FitConfig, problem: &FitProblem, targets: &[SilhouetteStats]) -> Result<FitResult> {
    let summary = TargetSummary::new(targets)?;
    let problem = FitProblem { rig: RigSettings { n_views: cfg.views, ..problem.rig }, ..problem.clone() };
    fit_objective(cfg, |t| {
        let stats = silhouette_stats(&problem, &Theta(*t), cfg.seed)?;
        Ok(summary.discrepancy(&stats))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize) -> Mask {
        Mask::new(n, n, vec![true; n * n])
    }

    #[test]
    fn full_frame_square() {
        let s = stats_from_mask(&square(64)).unwrap();
        assert_eq!(s.aspect_ratio, 1.0);
        assert_eq!(s.fill_ratio, 1.0);
        assert_eq!(s.trunk_fraction, 0.25);
        assert!(s.vertical_profile.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn single_column() {
        let mut m = Mask::new(5, 12, vec![false; 60]);
        for y in 0..12 {
            m.data[y * 5 + 2] = true;
        }
        let s = stats_from_mask(&m).unwrap();
        assert_eq!(s.fill_ratio, 1.0);
        assert_eq!(s.aspect_ratio, 12.0);
    }

    #[test]
    fn empty_mask_errors() {
        let m = Mask::new(4, 4, vec![false; 16]);
        assert!(matches!(stats_from_mask(&m), Err(Error::EmptyForeground)));
    }

    #[test]
    fn gray_threshold() {
        let m = Mask::from_gray(4, 1, &[0, 127, 128, 255]);
        assert_eq!(m.data, vec![false, false, true, true]);
    }

    #[test]
    fn budget_one_returns_init() {
        let cfg = FitConfig { budget: 1, theta_init: [1.5, 0.5, 0.2, 0.0], ..Default::default() };
        let r = fit_objective(&cfg, |t| Ok(t[1] * t[1])).unwrap();
        assert_eq!(r.best_theta, [1.5, 0.5, 0.2, 0.0]);
        assert_eq!(r.best_loss, 0.25);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn es_descends_a_quadratic_within_bounds() {
        let cfg = FitConfig { budget: 300, step_sigma: 0.5, ..Default::default() };
        let target = [2.0, 1.0, 3.0, 0.0];
        let r = fit_objective(&cfg, |t| Ok((0..4).map(|k| (t[k] - target[k]).powi(2)).sum())).unwrap();
        assert!(r.best_loss < 1e-2 * r.initial_loss, "{} vs {}", r.best_loss, r.initial_loss);
        let accepted: Vec<f64> = r.accepted_losses().collect();
        assert!(accepted.windows(2).all(|w| w[1] <= w[0]));
        for rec in &r.trace {
            for k in 0..4 {
                assert!(rec.theta[k] >= cfg.theta_lo[k] && rec.theta[k] <= cfg.theta_hi[k]);
            }
        }
    }

    #[test]
    fn config_bounds_are_checked() {
        let cfg = FitConfig { theta_init: [5.0, 0.0, 0.0, 0.0], ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = FitConfig { budget: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
