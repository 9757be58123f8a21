use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bonsai_core::attractor::sample_attractors;
use bonsai_core::colonize::grow as grow_skeleton;
use bonsai_core::fit::{self, SilhouetteStats};
use bonsai_core::gaussian::init_gaussians;
use bonsai_core::io;
use bonsai_core::render::{default_camera_rig, render_views, scene_bounds, MeshRef, Scene};
use bonsai_core::skeleton_json::{deserialize_skeleton, round9, serialize_skeleton};
use bonsai_core::solid::{build_mesh, compute_sizes, sample_surface};
use bonsai_core::{rng, ColorImage, DepthImage, GaussianCloud, Skeleton, SurfaceCloud, TubeMesh};
use serde_json::json;

use crate::config::Config;
use crate::{Common, Failure};

fn load_config(common: &Common) -> Result<Config> {
    let mut cfg = Config::load(common.config.as_deref())?;
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    Ok(cfg)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    io::write_file(path, bytes)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = io::read_file(path)?;
    String::from_utf8(bytes).map_err(|_| Failure::Invalid(format!("{}: not UTF-8 text", path.display())).into())
}

fn read_skeleton(path: &Path) -> Result<Skeleton> {
    let bytes = io::read_file(path)?;
    deserialize_skeleton(&bytes).with_context(|| format!("reading skeleton {}", path.display()))
}

/// Returns the skeleton sized, running the sizing pass only when allowed.
fn ensure_sized(cfg: &Config, skel: Skeleton, auto_size: bool) -> Result<Skeleton> {
    if skel.is_sized() {
        return Ok(skel);
    }
    if !auto_size {
        return Err(bonsai_core::Error::UnsizedSkeleton).context("pass --auto-size to size it");
    }
    Ok(compute_sizes(&skel, &cfg.sizing()?)?)
}

fn out_dir(cfg: &Config, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| cfg.output.dir.clone())
}

struct Grown {
    skeleton: Skeleton,
    trace_csv: String,
    attractors_ply: String,
}

fn run_growth(cfg: &Config) -> Result<Grown> {
    let params = cfg.growth()?;
    let field = sample_attractors(
        params.domain_radius,
        params.n_attractors,
        &mut rng::stream(params.seed, rng::ATTRACTORS),
        params.uniform_volume,
    );
    let out = grow_skeleton(field, &params)?;
    let killed = out.attractors.len() - out.attractors.alive_count();
    println!(
        "grew {} nodes in {} iterations; attractors killed {}/{}, alive {}",
        out.skeleton.len(),
        out.trace.iterations(),
        killed,
        out.attractors.len(),
        out.attractors.alive_count()
    );
    let alive: Vec<_> = out.attractors.alive_points().map(|(_, p)| p).collect();
    Ok(Grown { skeleton: out.skeleton, trace_csv: out.trace.to_csv(), attractors_ply: io::points_to_ply(&alive) })
}

pub fn grow(common: &Common, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(common)?;
    let grown = run_growth(&cfg)?;
    let dir = out_dir(&cfg, out);
    write(&dir.join("skeleton.json"), &serialize_skeleton(&grown.skeleton))?;
    write(&dir.join("growth_trace.csv"), grown.trace_csv.as_bytes())?;
    write(&dir.join("attractors.ply"), grown.attractors_ply.as_bytes())?;
    Ok(())
}

fn print_mesh_counts(mesh: &TubeMesh, branches: usize) {
    println!(
        "mesh: N_b = {branches}, S = {}, N_v = {}, N_f = {}",
        mesh.ring_segments,
        mesh.vertex_count(),
        mesh.face_count()
    );
}

pub fn mesh(common: &Common, input: &Path, out: &Path, auto_size: bool, sized_out: Option<&Path>) -> Result<()> {
    let cfg = load_config(common)?;
    let skel = ensure_sized(&cfg, read_skeleton(input)?, auto_size)?;
    let mesh = build_mesh(&skel, &cfg.sizing()?)?;
    print_mesh_counts(&mesh, skel.branch_count());
    write(out, io::mesh_to_obj(&mesh).as_bytes())?;
    if let Some(path) = sized_out {
        write(path, &serialize_skeleton(&skel))?;
    }
    Ok(())
}

fn sample_cloud(cfg: &Config, mesh: &TubeMesh, density: f64) -> Result<SurfaceCloud> {
    let cloud = sample_surface(mesh, density, &mut rng::stream(cfg.seed(), rng::SAMPLING))?;
    println!("sampled {} points over area {:.6}", cloud.len(), mesh.total_area());
    Ok(cloud)
}

pub fn sample(common: &Common, input: &Path, out: &Path, auto_size: bool, density: Option<f64>) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(d) = density {
        cfg.sampling.density = d;
    }
    let skel = ensure_sized(&cfg, read_skeleton(input)?, auto_size)?;
    let mesh = build_mesh(&skel, &cfg.sizing()?)?;
    print_mesh_counts(&mesh, skel.branch_count());
    let cloud = sample_cloud(&cfg, &mesh, cfg.density()?)?;
    write(out, io::cloud_to_ply(&cloud).as_bytes())
}

fn splat_cloud(cfg: &Config, cloud: &SurfaceCloud) -> Result<GaussianCloud> {
    let g = init_gaussians(cloud, cfg.gaussians.opacity, &cfg.palette())?;
    println!("initialized {} gaussians", g.len());
    Ok(g)
}

pub fn gaussians(common: &Common, input: &Path, out: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    let cloud = io::parse_cloud_ply(&read_text(input)?).with_context(|| format!("reading {}", input.display()))?;
    let g = splat_cloud(&cfg, &cloud)?;
    write(out, io::gaussians_to_ply(&g).as_bytes())
}

enum Loaded {
    Gaussians(GaussianCloud),
    Mesh(io::ObjMesh<f64>),
}

fn write_views(
    dir: &Path,
    views: &[(ColorImage, DepthImage)],
    preview: bool,
    masks: bool,
) -> Result<()> {
    for (i, (color, depth)) in views.iter().enumerate() {
        write(&dir.join(format!("view{i}_color.ppm")), &io::color_to_ppm(color))?;
        write(&dir.join(format!("view{i}_depth.pfm")), &io::depth_to_pfm(depth))?;
        if preview {
            write(&dir.join(format!("view{i}_depth.pgm")), &io::depth_to_pgm16(depth))?;
        }
        if masks {
            write(&dir.join(format!("view{i}_mask.pgm")), &io::mask_to_pgm(&fit::Mask::from_depth(depth)))?;
        }
        println!("view {i}: {} of {} pixels covered", depth.coverage_count(), depth.data.len());
    }
    Ok(())
}

fn render_scene(cfg: &Config, scene: Scene<'_, f64>, points: &[bonsai_core::Vec3]) -> Result<Vec<(ColorImage, DepthImage)>> {
    let rig = cfg.rig()?;
    let (center, radius) = scene_bounds(points.iter().copied());
    let cams = default_camera_rig(center, radius, &rig, &mut rng::stream(cfg.seed(), rng::CAMERAS))?;
    Ok(render_views(scene, &cams, &cfg.palette())?)
}

pub fn render(
    common: &Common,
    input: &Path,
    out: &Path,
    views: Option<usize>,
    preview: bool,
    masks: bool,
) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(v) = views {
        cfg.render.views = v;
    }
    let text = read_text(input)?;
    let ext = input.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let loaded = match ext.as_str() {
        "ply" => Loaded::Gaussians(io::parse_gaussians_ply(&text)?),
        "obj" => Loaded::Mesh(io::parse_obj(&text)?),
        _ => bail!(Failure::Invalid(format!("{}: expected a .ply or .obj input", input.display()))),
    };
    let rendered = match &loaded {
        Loaded::Gaussians(g) => {
            let centers: Vec<_> = g.splats.iter().map(|s| s.mu).collect();
            render_scene(&cfg, Scene::Gaussians(g), &centers)?
        }
        Loaded::Mesh(m) => {
            let mesh = MeshRef { vertices: &m.vertices, faces: &m.faces, labels: None };
            render_scene(&cfg, Scene::Mesh(mesh), &m.vertices)?
        }
    };
    write_views(out, &rendered, preview, masks)
}

fn mask_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).with_context(|| format!("reading mask directory {}", dir.display()))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.with_context(|| format!("listing {}", dir.display()))?.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn load_targets(dir: &Path) -> Result<Vec<SilhouetteStats>> {
    let mut targets = Vec::new();
    for path in mask_files(dir)? {
        match io::load_mask(&path).and_then(|m| fit::stats_from_mask(&m)) {
            Ok(stats) => targets.push(stats),
            Err(e) => {
                log::warn!("skipping mask {}: {e}", path.display());
                eprintln!("warning: skipping mask {}: {e}", path.display());
            }
        }
    }
    if targets.is_empty() {
        bail!(Failure::Invalid(format!("no valid masks in {}", dir.display())));
    }
    Ok(targets)
}

pub fn fit(common: &Common, masks: &Path, budget: Option<usize>, out: &Path) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(b) = budget {
        cfg.fit.budget = b;
    }
    let targets = load_targets(masks)?;
    let (fit_cfg, problem) = cfg.fit()?;
    println!("fitting to {} masks with budget {}", targets.len(), fit_cfg.budget);
    let res = fit::fit(&fit_cfg, &problem, &targets)?;
    println!("initial loss {:.6}", res.initial_loss);
    println!("final loss {:.6}", res.best_loss);
    println!("best theta {:?}", res.best_theta);
    let report = json!({
        "best_loss": round9(res.best_loss),
        "evaluations": res.trace.len(),
        "initial_loss": round9(res.initial_loss),
        "seed": fit_cfg.seed,
        "theta": res.best_theta.map(round9),
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write(&out.join("best_theta.json"), text.as_bytes())?;
    write(&out.join("fit_trace.csv"), res.trace_csv().as_bytes())
}

pub fn pipeline(common: &Common, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(common)?;
    let dir = out_dir(&cfg, out);
    let sizing = cfg.sizing()?;
    let density = cfg.density()?;
    cfg.rig()?;

    let grown = run_growth(&cfg)?;
    let skel = compute_sizes(&grown.skeleton, &sizing)?;
    let mesh = build_mesh(&skel, &sizing)?;
    print_mesh_counts(&mesh, skel.branch_count());
    let cloud = sample_cloud(&cfg, &mesh, density)?;
    let g = splat_cloud(&cfg, &cloud)?;
    let centers: Vec<_> = g.splats.iter().map(|s| s.mu).collect();
    let rendered = render_scene(&cfg, Scene::Gaussians(&g), &centers)?;

    write(&dir.join("skeleton.json"), &serialize_skeleton(&skel))?;
    write(&dir.join("growth_trace.csv"), grown.trace_csv.as_bytes())?;
    write(&dir.join("attractors.ply"), grown.attractors_ply.as_bytes())?;
    write(&dir.join("mesh.obj"), io::mesh_to_obj(&mesh).as_bytes())?;
    write(&dir.join("cloud.ply"), io::cloud_to_ply(&cloud).as_bytes())?;
    write(&dir.join("gaussians.ply"), io::gaussians_to_ply(&g).as_bytes())?;
    write_views(&dir, &rendered, true, false)
}
