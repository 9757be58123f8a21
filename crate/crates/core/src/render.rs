//! Pinhole cameras and the two forward renderers: Gaussian splatting with
//! depth-sorted compositing, and z-buffered triangle rasterization.
//!
//! Depth is the Euclidean distance from the eye along the pixel ray. Pixel
//! `(x, y)` samples its centre `(x + 0.5, y + 0.5)`, `y` growing downward.
//! Work is split into fixed tiles whose results do not depend on how many
//! threads render them.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{composite_ray, Fragment, GaussianCloud, Mat3, Palette, Rgb};
use crate::rng::StageRng;
use crate::scalar::Real;
use crate::solid::{Label, TubeMesh};
use crate::vec3::Vec3;

/// Expected depth is reported only where accumulated coverage reaches this.
pub const MIN_COVERAGE: f64 = 1e-4;
/// Screen-space variance added to projected splats (pixels²).
pub const SPLAT_DILATION: f64 = 0.3;
const NEAR: f64 = 1e-6;
const TILE: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera<T> {
    pub eye: Vec3<T>,
    pub target: Vec3<T>,
    pub up: Vec3<T>,
    /// Vertical field of view in degrees.
    pub vertical_fov: T,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Copy, Debug)]
struct Basis<T> {
    right: Vec3<T>,
    up: Vec3<T>,
    forward: Vec3<T>,
    focal: T,
}

impl<T: Real> Camera<T> {
    pub fn look_at(eye: Vec3<T>, target: Vec3<T>, vertical_fov: T, width: usize, height: usize) -> Self {
        Self { eye, target, up: Vec3::unit_z(), vertical_fov, width, height }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidParameter(m));
        if !(self.eye.is_finite() && self.target.is_finite() && self.up.is_finite()) {
            return invalid("camera vectors must be finite".into());
        }
        if self.eye.distance(self.target) <= T::zero() {
            return invalid("camera eye coincides with its target".into());
        }
        if !(self.vertical_fov > T::zero() && self.vertical_fov < T::lit(180.0)) {
            return invalid(format!("vertical fov must lie in (0, 180) degrees, got {}", self.vertical_fov));
        }
        if self.width == 0 || self.height == 0 {
            return invalid("image dimensions must be positive".into());
        }
        let f = (self.target - self.eye).normalize();
        if f.cross(self.up).norm() < T::lit(1e-9) {
            return invalid("camera up vector is parallel to the view direction".into());
        }
        Ok(())
    }

    fn basis(&self) -> Basis<T> {
        let forward = (self.target - self.eye).normalize();
        let right = forward.cross(self.up).normalize();
        let up = right.cross(forward);
        let half = (self.vertical_fov.to_radians() / T::lit(2.0)).tan();
        let focal = T::lit(self.height as f64 / 2.0) / half;
        Basis { right, up, forward, focal }
    }

    /// Camera-frame coordinates `(x right, y up, z forward)` of `p`.
    pub fn to_camera(&self, p: Vec3<T>) -> Vec3<T> {
        let b = self.basis();
        let d = p - self.eye;
        Vec3::new(d.dot(b.right), d.dot(b.up), d.dot(b.forward))
    }

    /// Pixel coordinates and forward depth of `p`, if it lies in front.
    pub fn project(&self, p: Vec3<T>) -> Option<(T, T, T)> {
        let b = self.basis();
        project_with(self, &b, p)
    }

    /// Unit world-space ray through the centre of pixel `(x, y)`.
    pub fn ray(&self, x: usize, y: usize) -> Vec3<T> {
        ray_with(self, &self.basis(), x, y)
    }
}

fn project_with<T: Real>(cam: &Camera<T>, b: &Basis<T>, p: Vec3<T>) -> Option<(T, T, T)> {
    let d = p - cam.eye;
    let z = d.dot(b.forward);
    if z <= T::lit(NEAR) {
        return None;
    }
    let u = T::lit(cam.width as f64 / 2.0) + b.focal * d.dot(b.right) / z;
    let v = T::lit(cam.height as f64 / 2.0) - b.focal * d.dot(b.up) / z;
    Some((u, v, z))
}

fn ray_with<T: Real>(cam: &Camera<T>, b: &Basis<T>, x: usize, y: usize) -> Vec3<T> {
    let sx = (T::lit(x as f64 + 0.5) - T::lit(cam.width as f64 / 2.0)) / b.focal;
    let sy = -(T::lit(y as f64 + 0.5) - T::lit(cam.height as f64 / 2.0)) / b.focal;
    (b.right * sx + b.up * sy + b.forward).normalize()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage<T> {
    pub width: usize,
    pub height: usize,
    /// Row-major distances; `+∞` marks background.
    pub data: Vec<T>,
}

impl<T: Real> DepthImage<T> {
    pub fn background(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![T::infinity(); width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn coverage_count(&self) -> usize {
        self.data.iter().filter(|d| d.is_finite()).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColorImage<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<Rgb<T>>,
}

impl<T: Real> ColorImage<T> {
    pub fn filled(width: usize, height: usize, c: Rgb<T>) -> Self {
        Self { width, height, data: vec![c; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb<T> {
        self.data[y * self.width + x]
    }
}

/// Borrowed triangle soup, optionally labelled per face for colouring.
#[derive(Clone, Copy, Debug)]
pub struct MeshRef<'a, T> {
    pub vertices: &'a [Vec3<T>],
    pub faces: &'a [[usize; 3]],
    pub labels: Option<&'a [Label]>,
}

impl<'a, T: Real> From<&'a TubeMesh<T>> for MeshRef<'a, T> {
    fn from(m: &'a TubeMesh<T>) -> Self {
        Self { vertices: &m.vertices, faces: &m.faces, labels: Some(&m.face_label) }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Scene<'a, T> {
    Gaussians(&'a GaussianCloud<T>),
    Mesh(MeshRef<'a, T>),
}

/// Renders colour and depth for every camera.
pub fn render_views<T: Real>(
    scene: Scene<'_, T>,
    cameras: &[Camera<T>],
    palette: &Palette<T>,
) -> Result<Vec<(ColorImage<T>, DepthImage<T>)>> {
    if cameras.is_empty() {
        return Err(Error::InvalidParameter("at least one camera is required".into()));
    }
    cameras
        .iter()
        .map(|cam| match scene {
            Scene::Gaussians(g) => render_gaussians(g, cam),
            Scene::Mesh(m) => render_mesh(m, cam, palette),
        })
        .collect()
}

struct TileGrid {
    cols: usize,
    rows: usize,
    width: usize,
    height: usize,
}

impl TileGrid {
    fn new(width: usize, height: usize) -> Self {
        Self { cols: width.div_ceil(TILE), rows: height.div_ceil(TILE), width, height }
    }

    fn count(&self) -> usize {
        self.cols * self.rows
    }

    /// Pixel range `[x0, x1) × [y0, y1)` of tile `t`.
    fn bounds(&self, t: usize) -> (usize, usize, usize, usize) {
        let (tx, ty) = (t % self.cols, t / self.cols);
        let x0 = tx * TILE;
        let y0 = ty * TILE;
        (x0, (x0 + TILE).min(self.width), y0, (y0 + TILE).min(self.height))
    }

    /// Appends `item` to every tile overlapped by the inclusive pixel box.
    fn bin(&self, bins: &mut [Vec<usize>], item: usize, (x0, x1, y0, y1): (usize, usize, usize, usize)) {
        for ty in y0 / TILE..=y1 / TILE {
            for tx in x0 / TILE..=x1 / TILE {
                bins[ty * self.cols + tx].push(item);
            }
        }
    }

    /// Stitches per-tile row-major buffers into one image buffer.
    fn assemble<P: Copy>(&self, tiles: Vec<Vec<P>>, fill: P) -> Vec<P> {
        let mut out = vec![fill; self.width * self.height];
        for (t, buf) in tiles.into_iter().enumerate() {
            let (x0, x1, y0, y1) = self.bounds(t);
            let w = x1 - x0;
            for y in y0..y1 {
                out[y * self.width + x0..y * self.width + x1].copy_from_slice(&buf[(y - y0) * w..(y - y0 + 1) * w]);
            }
        }
        out
    }
}

/// Inclusive pixel range whose centres fall in `[lo, hi]`, clipped to `[0, n)`.
fn pixel_span<T: Real>(lo: T, hi: T, n: usize) -> Option<(usize, usize)> {
    let first = (lo - T::lit(0.5)).ceil().max(T::zero());
    let last = (hi - T::lit(0.5)).floor().min(T::lit(n as f64 - 1.0));
    if !(first <= last) {
        return None;
    }
    Some((first.to_usize()?, last.to_usize()?))
}

struct ProjectedSplat<T> {
    u: T,
    v: T,
    /// Inverse of the 2×2 screen covariance `[a b; b c]`.
    conic: (T, T, T),
    depth: T,
    opacity: T,
    color: Rgb<T>,
}

fn project_splat<T: Real>(cam: &Camera<T>, b: &Basis<T>, s: &crate::gaussian::Splat<T>) -> Option<(ProjectedSplat<T>, (usize, usize, usize, usize))> {
    let (u, v, z) = project_with(cam, b, s.mu)?;
    let d = s.mu - cam.eye;
    let (x, y) = (d.dot(b.right), d.dot(b.up));
    let w = Mat3::from_rows(b.right, b.up, b.forward);
    let cov_cam = w.mul(&s.cov).mul(&w.transpose());
    // Jacobian of (x, y, z) ↦ (u, v) at the splat centre.
    let f = b.focal;
    let j0 = Vec3::new(f / z, T::zero(), -f * x / (z * z));
    let j1 = Vec3::new(T::zero(), -f / z, f * y / (z * z));
    let dil = T::lit(SPLAT_DILATION);
    let a = j0.dot(cov_cam.mul_vec(j0)) + dil;
    let bb = j0.dot(cov_cam.mul_vec(j1));
    let c = j1.dot(cov_cam.mul_vec(j1)) + dil;
    let det = a * c - bb * bb;
    if !(det > T::zero()) {
        return None;
    }
    let conic = (c / det, -bb / det, a / det);
    let mid = (a + c) / T::lit(2.0);
    let lambda_max = mid + (mid * mid - det).max(T::zero()).sqrt();
    let radius = T::lit(3.0) * lambda_max.sqrt();
    let (x0, x1) = pixel_span(u - radius, u + radius, cam.width)?;
    let (y0, y1) = pixel_span(v - radius, v + radius, cam.height)?;
    let p = ProjectedSplat { u, v, conic, depth: d.norm(), opacity: s.opacity, color: s.color };
    Some((p, (x0, x1, y0, y1)))
}

/// Splats every Gaussian whose 3σ screen footprint covers a pixel centre,
/// composites front to back and reports the coverage-weighted depth.
pub fn render_gaussians<T: Real>(g: &GaussianCloud<T>, cam: &Camera<T>) -> Result<(ColorImage<T>, DepthImage<T>)> {
    cam.validate()?;
    let b = cam.basis();
    let grid = TileGrid::new(cam.width, cam.height);
    let projected: Vec<Option<_>> = g.splats.par_iter().map(|s| project_splat(cam, &b, s)).collect();
    let mut bins = vec![Vec::new(); grid.count()];
    let mut splats = Vec::with_capacity(projected.len());
    for (p, bbox) in projected.into_iter().flatten() {
        grid.bin(&mut bins, splats.len(), bbox);
        splats.push(p);
    }
    let min_cov = T::lit(MIN_COVERAGE);
    let tiles: Vec<Vec<(Rgb<T>, T)>> = (0..grid.count())
        .into_par_iter()
        .map(|t| {
            let (x0, x1, y0, y1) = grid.bounds(t);
            let mut out = Vec::with_capacity((x1 - x0) * (y1 - y0));
            let mut frags: Vec<(usize, Fragment<T>)> = Vec::new();
            for y in y0..y1 {
                for x in x0..x1 {
                    frags.clear();
                    let (px, py) = (T::lit(x as f64 + 0.5), T::lit(y as f64 + 0.5));
                    for &i in &bins[t] {
                        let s = &splats[i];
                        let (dx, dy) = (px - s.u, py - s.v);
                        let (ca, cb, cc) = s.conic;
                        let m = ca * dx * dx + T::lit(2.0) * cb * dx * dy + cc * dy * dy;
                        if m <= T::lit(9.0) {
                            let sigma = s.opacity * (-m / T::lit(2.0)).exp();
                            frags.push((i, Fragment { depth: s.depth, sigma, color: s.color }));
                        }
                    }
                    frags.sort_by(|(ia, a), (ib, b)| {
                        a.depth.partial_cmp(&b.depth).unwrap_or(std::cmp::Ordering::Equal).then(ia.cmp(ib))
                    });
                    let list: Vec<Fragment<T>> = frags.iter().map(|&(_, f)| f).collect();
                    let c = composite_ray(&list);
                    out.push((c.color, c.expected_depth(min_cov)));
                }
            }
            out
        })
        .collect();
    let zero = [T::zero(); 3];
    let pixels = grid.assemble(tiles, (zero, T::infinity()));
    let color = ColorImage { width: cam.width, height: cam.height, data: pixels.iter().map(|p| p.0).collect() };
    let depth = DepthImage { width: cam.width, height: cam.height, data: pixels.iter().map(|p| p.1).collect() };
    Ok((color, depth))
}

struct RasterTriangle<T> {
    a: Vec3<T>,
    b: Vec3<T>,
    c: Vec3<T>,
    normal: Vec3<T>,
    /// Screen positions, present when every vertex is in front of the eye.
    screen: Option<[(T, T); 3]>,
    color: Rgb<T>,
    /// Inclusive pixel bounds `(x0, x1, y0, y1)`.
    bbox: (usize, usize, usize, usize),
}

#[inline]
fn edge<T: Real>(a: (T, T), b: (T, T), p: (T, T)) -> T {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// Möller–Trumbore ray/triangle distance, used for triangles that cross the
/// eye plane and cannot be projected.
fn ray_triangle<T: Real>(origin: Vec3<T>, dir: Vec3<T>, a: Vec3<T>, b: Vec3<T>, c: Vec3<T>) -> Option<T> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < T::lit(1e-14) {
        return None;
    }
    let inv = T::one() / det;
    let s = origin - a;
    let u = s.dot(p) * inv;
    if u < T::zero() || u > T::one() {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < T::zero() || u + v > T::one() {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > T::zero()).then_some(t)
}

impl<T: Real> RasterTriangle<T> {
    /// Ray distance to this triangle through pixel `(x, y)`, if it is hit.
    fn hit(&self, cam: &Camera<T>, b: &Basis<T>, x: usize, y: usize) -> Option<T> {
        let dir = ray_with(cam, b, x, y);
        match self.screen {
            Some([sa, sb, sc]) => {
                let p = (T::lit(x as f64 + 0.5), T::lit(y as f64 + 0.5));
                let (w0, w1, w2) = (edge(sb, sc, p), edge(sc, sa, p), edge(sa, sb, p));
                let inside = (w0 >= T::zero() && w1 >= T::zero() && w2 >= T::zero())
                    || (w0 <= T::zero() && w1 <= T::zero() && w2 <= T::zero());
                if !inside {
                    return None;
                }
                let denom = self.normal.dot(dir);
                if denom == T::zero() {
                    return None;
                }
                let t = self.normal.dot(self.a - cam.eye) / denom;
                (t > T::zero()).then_some(t)
            }
            None => ray_triangle(cam.eye, dir, self.a, self.b, self.c),
        }
    }
}

/// Z-buffered rasterization; depth is the distance to the nearest hit along
/// each pixel ray, ties kept by the lower face index.
pub fn render_mesh<T: Real>(mesh: MeshRef<'_, T>, cam: &Camera<T>, palette: &Palette<T>) -> Result<(ColorImage<T>, DepthImage<T>)> {
    cam.validate()?;
    let b = cam.basis();
    let grid = TileGrid::new(cam.width, cam.height);
    let full = (0, cam.width - 1, 0, cam.height - 1);
    let mut bins = vec![Vec::new(); grid.count()];
    let mut tris = Vec::with_capacity(mesh.faces.len());
    for (f, face) in mesh.faces.iter().enumerate() {
        let [a, bv, c] = face.map(|i| mesh.vertices[i]);
        let normal = (bv - a).cross(c - a);
        if normal.norm_squared() == T::zero() {
            continue;
        }
        let color = palette.color(mesh.labels.map_or(Label::Trunk, |l| l[f]));
        let proj = [a, bv, c].map(|p| project_with(cam, &b, p));
        let (screen, bbox) = if proj.iter().all(Option::is_some) {
            let s = proj.map(|p| {
                let (u, v, _) = p.expect("checked");
                (u, v)
            });
            if edge(s[0], s[1], s[2]) == T::zero() {
                continue;
            }
            let lo = (s[0].0.min(s[1].0).min(s[2].0), s[0].1.min(s[1].1).min(s[2].1));
            let hi = (s[0].0.max(s[1].0).max(s[2].0), s[0].1.max(s[1].1).max(s[2].1));
            match (pixel_span(lo.0, hi.0, cam.width), pixel_span(lo.1, hi.1, cam.height)) {
                (Some((x0, x1)), Some((y0, y1))) => (Some(s), (x0, x1, y0, y1)),
                _ => continue,
            }
        } else {
            (None, full)
        };
        grid.bin(&mut bins, tris.len(), bbox);
        tris.push(RasterTriangle { a, b: bv, c, normal, screen, color, bbox });
    }
    let tiles: Vec<Vec<(Rgb<T>, T)>> = (0..grid.count())
        .into_par_iter()
        .map(|t| {
            let (x0, x1, y0, y1) = grid.bounds(t);
            let tw = x1 - x0;
            let mut zbuf = vec![(T::infinity(), usize::MAX); tw * (y1 - y0)];
            // Ascending face order with a strict test keeps the lower index on ties.
            for &i in &bins[t] {
                let (bx0, bx1, by0, by1) = tris[i].bbox;
                for y in by0.max(y0)..=by1.min(y1 - 1) {
                    for x in bx0.max(x0)..=bx1.min(x1 - 1) {
                        if let Some(d) = tris[i].hit(cam, &b, x, y) {
                            let slot = &mut zbuf[(y - y0) * tw + (x - x0)];
                            if d < slot.0 {
                                *slot = (d, i);
                            }
                        }
                    }
                }
            }
            let mut out = Vec::with_capacity(zbuf.len());
            for y in y0..y1 {
                for x in x0..x1 {
                    let best = zbuf[(y - y0) * tw + (x - x0)];
                    let color = if best.1 == usize::MAX {
                        [T::zero(); 3]
                    } else {
                        let tri = &tris[best.1];
                        let facing = tri.normal.normalize().dot(ray_with(cam, &b, x, y)).abs();
                        let shade = T::lit(0.35) + T::lit(0.65) * facing;
                        tri.color.map(|c| c * shade)
                    };
                    out.push((color, best.0));
                }
            }
            out
        })
        .collect();
    let pixels = grid.assemble(tiles, ([T::zero(); 3], T::infinity()));
    let color = ColorImage { width: cam.width, height: cam.height, data: pixels.iter().map(|p| p.0).collect() };
    let depth = DepthImage { width: cam.width, height: cam.height, data: pixels.iter().map(|p| p.1).collect() };
    Ok((color, depth))
}

/// Camera placement: random azimuth, bounded elevation, distance a multiple
/// of the scene radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigSettings<T> {
    pub n_views: usize,
    /// Distance range as multiples of the scene radius.
    pub distance_range: (T, T),
    /// Elevation range in degrees.
    pub elevation_range: (T, T),
    pub vertical_fov: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Real> Default for RigSettings<T> {
    fn default() -> Self {
        Self {
            n_views: 4,
            distance_range: (T::lit(2.5), T::lit(4.0)),
            elevation_range: (T::lit(-15.0), T::lit(45.0)),
            vertical_fov: T::lit(50.0),
            width: 512,
            height: 512,
        }
    }
}

impl<T: Real> RigSettings<T> {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.distance_range;
        if self.n_views == 0 {
            return Err(Error::NonPositive("n_views"));
        }
        if !(lo > T::zero() && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!("distance range [{lo}, {hi}] must satisfy 0 < lo <= hi")));
        }
        let (elo, ehi) = self.elevation_range;
        if !(elo <= ehi && elo > T::lit(-90.0) && ehi < T::lit(90.0)) {
            return Err(Error::InvalidParameter(format!("elevation range [{elo}, {ehi}] must lie inside (-90, 90)")));
        }
        if !(self.vertical_fov > T::zero() && self.vertical_fov < T::lit(180.0)) {
            return Err(Error::InvalidParameter(format!("vertical fov {} outside (0, 180)", self.vertical_fov)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("image dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Cameras looking at `target` from distances uniform in
/// `distance_range · scene_radius`, azimuth uniform in `[0, 2π)` and
/// elevation uniform in `elevation_range`.
pub fn default_camera_rig<T: Real>(
    target: Vec3<T>,
    scene_radius: T,
    settings: &RigSettings<T>,
    rng: &mut StageRng,
) -> Result<Vec<Camera<T>>> {
    settings.validate()?;
    if !(scene_radius > T::zero()) {
        return Err(Error::NonPositive("scene_radius"));
    }
    let (lo, hi) = (settings.distance_range.0.as_f64(), settings.distance_range.1.as_f64());
    let (elo, ehi) = (settings.elevation_range.0.as_f64(), settings.elevation_range.1.as_f64());
    (0..settings.n_views)
        .map(|_| {
            let dist = scene_radius * T::lit(lo + (hi - lo) * rng.random::<f64>());
            let azimuth = std::f64::consts::TAU * rng.random::<f64>();
            let elevation = (elo + (ehi - elo) * rng.random::<f64>()).to_radians();
            let dir = Vec3::from_f64([
                elevation.cos() * azimuth.cos(),
                elevation.cos() * azimuth.sin(),
                elevation.sin(),
            ]);
            let cam = Camera::look_at(target + dir * dist, target, settings.vertical_fov, settings.width, settings.height);
            cam.validate().map(|_| cam)
        })
        .collect()
}

/// Bounding-box centre and the radius of the enclosing sphere about it.
/// An empty or single-point set gets radius 1.
pub fn scene_bounds<T: Real>(points: impl IntoIterator<Item = Vec3<T>> + Clone) -> (Vec3<T>, T) {
    let mut it = points.clone().into_iter();
    let Some(first) = it.next() else {
        return (Vec3::zero(), T::one());
    };
    let (lo, hi) = it.fold((first, first), |(lo, hi), p| (lo.component_min(p), hi.component_max(p)));
    let center = (lo + hi) / T::lit(2.0);
    let radius = points.into_iter().map(|p| p.distance(center)).fold(T::zero(), T::max);
    (center, if radius > T::zero() { radius } else { T::one() })
}
