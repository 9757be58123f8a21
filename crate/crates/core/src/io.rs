//! File formats: OBJ meshes, ASCII PLY point sets, PPM/PFM/PGM images and
//! silhouette masks.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fit::Mask;
use crate::gaussian::{GaussianCloud, Splat};
use crate::render::{ColorImage, DepthImage};
use crate::scalar::Real;
use crate::skeleton_json::fmt_num;
use crate::solid::{Label, SurfaceCloud, TubeMesh};
use crate::vec3::Vec3;

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn num<T: Real>(v: T) -> String {
    fmt_num(v.as_f64())
}

fn vec_str<T: Real>(v: Vec3<T>) -> String {
    format!("{} {} {}", num(v.x), num(v.y), num(v.z))
}

/// Wavefront OBJ with `v` and 1-based `f` records.
pub fn mesh_to_obj<T: Real>(mesh: &TubeMesh<T>) -> String {
    let mut out = String::with_capacity(32 * (mesh.vertex_count() + mesh.face_count()));
    for v in &mesh.vertices {
        out.push_str(&format!("v {}\n", vec_str(*v)));
    }
    for f in &mesh.faces {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    out
}

/// Plain triangle soup read back from OBJ.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub faces: Vec<[usize; 3]>,
}

/// Reads `v` and `f` records; polygons are fan-triangulated and
/// `v/vt/vn` references reduced to the vertex index.
pub fn parse_obj<T: Real>(text: &str) -> Result<ObjMesh<T>> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it.take(3).map(parse_f64).collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(Error::Parse(format!("obj line {}: vertex needs 3 coordinates", ln + 1)));
                }
                vertices.push(Vec3::from_f64([c[0], c[1], c[2]]));
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|tok| {
                        let head = tok.split('/').next().unwrap_or("");
                        let i: i64 = head
                            .parse()
                            .map_err(|_| Error::Parse(format!("obj line {}: bad face index `{tok}`", ln + 1)))?;
                        let n = vertices.len() as i64;
                        let i = if i < 0 { n + i } else { i - 1 };
                        if i < 0 || i >= n {
                            return Err(Error::Parse(format!("obj line {}: face index {tok} out of range", ln + 1)));
                        }
                        Ok(i as usize)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(Error::Parse(format!("obj line {}: face needs 3 vertices", ln + 1)));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(ObjMesh { vertices, faces })
}

fn parse_f64(tok: &str) -> Result<f64> {
    tok.parse().map_err(|_| Error::Parse(format!("bad number `{tok}`")))
}

fn ply_header(count: usize, props: &[(&str, &str)]) -> String {
    let mut h = format!("ply\nformat ascii 1.0\nelement vertex {count}\n");
    for (ty, name) in props {
        h.push_str(&format!("property {ty} {name}\n"));
    }
    h.push_str("end_header\n");
    h
}

/// Point set as ASCII PLY with `x y z`.
pub fn points_to_ply<T: Real>(points: &[Vec3<T>]) -> String {
    let mut out = ply_header(points.len(), &[("double", "x"), ("double", "y"), ("double", "z")]);
    for p in points {
        out.push_str(&vec_str(*p));
        out.push('\n');
    }
    out
}

/// Surface samples as ASCII PLY with `x y z nx ny nz label`.
pub fn cloud_to_ply<T: Real>(cloud: &SurfaceCloud<T>) -> String {
    let props = [
        ("double", "x"),
        ("double", "y"),
        ("double", "z"),
        ("double", "nx"),
        ("double", "ny"),
        ("double", "nz"),
        ("uchar", "label"),
    ];
    let mut out = ply_header(cloud.points.len(), &props);
    for ((p, n), l) in cloud.points.iter().zip(&cloud.normals).zip(&cloud.labels) {
        out.push_str(&format!("{} {} {}\n", vec_str(*p), vec_str(*n), l.code()));
    }
    out
}

/// Isotropic splats as ASCII PLY with `x y z sigma r g b opacity`.
pub fn gaussians_to_ply<T: Real>(g: &GaussianCloud<T>) -> String {
    let props = [
        ("double", "x"),
        ("double", "y"),
        ("double", "z"),
        ("double", "sigma"),
        ("double", "r"),
        ("double", "g"),
        ("double", "b"),
        ("double", "opacity"),
    ];
    let mut out = ply_header(g.len(), &props);
    for s in &g.splats {
        out.push_str(&format!(
            "{} {} {} {} {} {}\n",
            vec_str(s.mu),
            num(s.sigma()),
            num(s.color[0]),
            num(s.color[1]),
            num(s.color[2]),
            num(s.opacity)
        ));
    }
    out
}

/// Vertex rows of an ASCII PLY, keyed by property name.
struct PlyTable {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl PlyTable {
    fn column(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Parse(format!("ply is missing property `{name}`")))
    }
}

fn parse_ply(text: &str) -> Result<PlyTable> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::Parse("missing `ply` magic".into()));
    }
    let mut count = None;
    let mut names = Vec::new();
    let mut in_vertex = false;
    loop {
        let line = lines.next().ok_or_else(|| Error::Parse("ply header is not terminated".into()))?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", fmt, ..] if *fmt != "ascii" => {
                return Err(Error::Parse(format!("unsupported ply format `{fmt}`")));
            }
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|_| Error::Parse(format!("bad vertex count `{n}`")))?);
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", "list", ..] => {
                if in_vertex {
                    return Err(Error::Parse("list properties on vertices are not supported".into()));
                }
            }
            ["property", _, name] if in_vertex => names.push((*name).to_string()),
            ["end_header"] => break,
            _ => {}
        }
    }
    let count = count.ok_or_else(|| Error::Parse("ply has no vertex element".into()))?;
    let mut rows = Vec::with_capacity(count);
    for i in 0..count {
        let line = lines.next().ok_or_else(|| Error::Parse(format!("ply ends after {i} of {count} vertices")))?;
        let row: Vec<f64> = line.split_whitespace().map(parse_f64).collect::<Result<_>>()?;
        if row.len() != names.len() {
            return Err(Error::Parse(format!("ply vertex {i} has {} values, expected {}", row.len(), names.len())));
        }
        rows.push(row);
    }
    Ok(PlyTable { names, rows })
}

pub fn parse_points_ply<T: Real>(text: &str) -> Result<Vec<Vec3<T>>> {
    let t = parse_ply(text)?;
    let (x, y, z) = (t.column("x")?, t.column("y")?, t.column("z")?);
    Ok(t.rows.iter().map(|r| Vec3::from_f64([r[x], r[y], r[z]])).collect())
}

/// Reads a labelled surface cloud; `source_face` is not stored and comes
/// back empty.
pub fn parse_cloud_ply<T: Real>(text: &str) -> Result<SurfaceCloud<T>> {
    let t = parse_ply(text)?;
    let c: Vec<usize> = ["x", "y", "z", "nx", "ny", "nz", "label"].iter().map(|n| t.column(n)).collect::<Result<_>>()?;
    let mut cloud = SurfaceCloud { points: vec![], normals: vec![], source_face: vec![], labels: vec![] };
    for r in &t.rows {
        cloud.points.push(Vec3::from_f64([r[c[0]], r[c[1]], r[c[2]]]));
        cloud.normals.push(Vec3::from_f64([r[c[3]], r[c[4]], r[c[5]]]));
        let code = r[c[6]];
        let label = (code.fract() == 0.0 && (0.0..=255.0).contains(&code))
            .then(|| Label::from_code(code as u8))
            .flatten()
            .ok_or_else(|| Error::Parse(format!("bad label {code}")))?;
        cloud.labels.push(label);
    }
    Ok(cloud)
}

pub fn parse_gaussians_ply<T: Real>(text: &str) -> Result<GaussianCloud<T>> {
    let t = parse_ply(text)?;
    let c: Vec<usize> =
        ["x", "y", "z", "sigma", "r", "g", "b", "opacity"].iter().map(|n| t.column(n)).collect::<Result<_>>()?;
    let splats = t
        .rows
        .iter()
        .map(|r| {
            if !(r[c[3]] > 0.0) {
                return Err(Error::Parse(format!("splat sigma must be positive, got {}", r[c[3]])));
            }
            Ok(Splat::isotropic(
                Vec3::from_f64([r[c[0]], r[c[1]], r[c[2]]]),
                T::lit(r[c[3]]),
                [T::lit(r[c[4]]), T::lit(r[c[5]]), T::lit(r[c[6]])],
                T::lit(r[c[7]]),
            ))
        })
        .collect::<Result<_>>()?;
    Ok(GaussianCloud { splats })
}

/// Binary PPM (P6), colors clamped to [0, 1].
pub fn color_to_ppm<T: Real>(img: &ColorImage<T>) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    for px in &img.data {
        for c in px {
            out.push((c.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

/// Single-channel little-endian PFM, rows stored bottom to top; background
/// pixels keep their `+inf`.
pub fn depth_to_pfm<T: Real>(img: &DepthImage<T>) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    for y in (0..img.height).rev() {
        for x in 0..img.width {
            out.extend_from_slice(&(img.get(x, y).as_f64() as f32).to_le_bytes());
        }
    }
    out
}

/// Reads a single-channel PFM of either byte order.
pub fn parse_pfm(bytes: &[u8]) -> Result<DepthImage<f32>> {
    let (header, body) = split_header(bytes, 3)?;
    if header[0] != "Pf" {
        return Err(Error::Parse(format!("expected `Pf`, found `{}`", header[0])));
    }
    let dims: Vec<usize> = header[1]
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad pfm size `{t}`"))))
        .collect::<Result<_>>()?;
    let [width, height] = dims[..] else {
        return Err(Error::Parse("pfm size needs width and height".into()));
    };
    let scale: f64 = parse_f64(header[2].trim())?;
    if body.len() != 4 * width * height {
        return Err(Error::Parse(format!("pfm body has {} bytes, expected {}", body.len(), 4 * width * height)));
    }
    let mut data = vec![0.0f32; width * height];
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if scale < 0.0 { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let (row, x) = (i / width, i % width);
        data[(height - 1 - row) * width + x] = v;
    }
    Ok(DepthImage { width, height, data })
}

/// 16-bit big-endian PGM preview: nearest hit brightest, background black.
pub fn depth_to_pgm16<T: Real>(img: &DepthImage<T>) -> Vec<u8> {
    let finite = img.data.iter().map(|d| d.as_f64()).filter(|d| d.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
    let mut out = format!("P5\n{} {}\n65535\n", img.width, img.height).into_bytes();
    for d in &img.data {
        let d = d.as_f64();
        let v: u16 = if !d.is_finite() {
            0
        } else if hi > lo {
            1 + ((hi - d) / (hi - lo) * 65534.0).round() as u16
        } else {
            u16::MAX
        };
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// 8-bit PGM of a mask, 255 for foreground.
pub fn mask_to_pgm(mask: &Mask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    out.extend(mask.to_gray());
    out
}

/// Loads a PNG or PGM/PPM mask; gray values above 127 are foreground.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let bytes = read_file(path)?;
    let img = image::load_from_memory(&bytes).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let gray = img.to_luma8();
    Ok(Mask::from_gray(gray.width() as usize, gray.height() as usize, gray.as_raw()))
}

/// Splits off `n` newline-terminated header lines.
fn split_header(bytes: &[u8], n: usize) -> Result<(Vec<String>, &[u8])> {
    let mut lines = Vec::with_capacity(n);
    let mut rest = bytes;
    for _ in 0..n {
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Parse("truncated image header".into()))?;
        lines.push(String::from_utf8_lossy(&rest[..end]).trim().to_string());
        rest = &rest[end + 1..];
    }
    Ok((lines, rest))
}
