//! Giving the branch graph volume: inverted-growth sizing, ring meshing and
//! area-weighted surface sampling.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{SizingParams, Skeleton};
use crate::rng::StageRng;
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Surface class used to colour samples and splats.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Trunk,
    Extremity,
}

impl Label {
    pub fn code(self) -> u8 {
        match self {
            Label::Trunk => 0,
            Label::Extremity => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Label::Trunk),
            1 => Some(Label::Extremity),
            _ => None,
        }
    }

    /// Extremity when `size` does not exceed the extremity size `r_e`.
    pub fn for_size<T: Real>(size: T, r_e: T) -> Self {
        if size <= r_e * T::lit(1.0 + 1e-9) {
            Label::Extremity
        } else {
            Label::Trunk
        }
    }
}

/// Sizes every node: extremities get `r_e`, inner nodes the `i_g`-norm of
/// their children's sizes, computed children first.
pub fn compute_sizes<T: Real>(skeleton: &Skeleton<T>, sp: &SizingParams<T>) -> Result<Skeleton<T>> {
    sp.validate()?;
    let mut out = skeleton.clone();
    let inv = T::one() / sp.i_g;
    for &id in skeleton.topological_order().iter().rev() {
        let node = out.node(id);
        let size = if node.children.is_empty() {
            sp.r_e
        } else {
            let sum: T = node.children.iter().map(|&c| out.node(c).size.powf(sp.i_g)).sum();
            sum.powf(inv)
        };
        out.set_size(id, size);
    }
    Ok(out)
}

/// Tube mesh with one ring of `S` vertices per node.
#[derive(Clone, Debug, PartialEq)]
pub struct TubeMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub faces: Vec<[usize; 3]>,
    pub ring_segments: usize,
    /// `ring_of_node[id]` lists the vertex indices of node `id`'s ring.
    pub ring_of_node: Vec<Vec<usize>>,
    /// Node whose incoming branch produced each face.
    pub face_node: Vec<usize>,
    pub face_label: Vec<Label>,
}

impl<T: Real> TubeMesh<T> {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle(&self, f: usize) -> [Vec3<T>; 3] {
        self.faces[f].map(|i| self.vertices[i])
    }

    pub fn face_area(&self, f: usize) -> T {
        triangle_area(self.triangle(f))
    }

    pub fn total_area(&self) -> T {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }
}

pub fn triangle_area<T: Real>([a, b, c]: [Vec3<T>; 3]) -> T {
    (b - a).cross(c - a).norm() / T::lit(2.0)
}

/// Unit vector perpendicular to `dir`: global x projected onto the plane,
/// falling back to global y when `dir` is (nearly) parallel to x.
fn seed_frame<T: Real>(dir: Vec3<T>) -> Vec3<T> {
    let tol = T::lit(1e-6);
    let project = |a: Vec3<T>| (a - dir * a.dot(dir)).try_normalize(tol);
    project(Vec3::unit_x()).or_else(|| project(Vec3::unit_y())).expect("x or y is off-axis")
}

/// Carries the ring reference vector `u` from direction `from` to `to` by the
/// minimal rotation between them, then re-orthogonalizes against `to`.
fn transport<T: Real>(u: Vec3<T>, from: Vec3<T>, to: Vec3<T>) -> Vec3<T> {
    let axis = from.cross(to);
    let sin = axis.norm();
    let cos = from.dot(to);
    let rotated = if sin > T::lit(1e-12) {
        // Rodrigues rotation about axis/|axis| by the angle between `from` and `to`.
        let k = axis / sin;
        u * cos + k.cross(u) * sin + k * (k.dot(u) * (T::one() - cos))
    } else {
        // Parallel keeps u; antiparallel is a half-turn about u, which also keeps it.
        u
    };
    (rotated - to * rotated.dot(to)).try_normalize(T::lit(1e-9)).unwrap_or_else(|| seed_frame(to))
}

/// Builds the tube mesh of a sized skeleton.
///
/// Every node, the root included, gets a ring of `S` vertices of radius equal
/// to its size in the plane perpendicular to its direction. Each branch joins
/// its parent's ring to its own with `2S` triangles, giving
/// `(N_b + 1)·S` vertices and `2·N_b·S` faces. No end caps.
pub fn build_mesh<T: Real>(skeleton: &Skeleton<T>, sp: &SizingParams<T>) -> Result<TubeMesh<T>> {
    sp.validate()?;
    if !skeleton.is_sized() {
        return Err(Error::UnsizedSkeleton);
    }
    let s = sp.ring_segments;
    let n = skeleton.len();
    let mut frames = vec![Vec3::zero(); n];
    let mut ring_of_node = vec![Vec::new(); n];
    let mut vertices = Vec::with_capacity(n * s);
    let angles: Vec<(T, T)> = (0..s)
        .map(|k| {
            let a = T::TAU() * T::lit(k as f64) / T::lit(s as f64);
            (a.cos(), a.sin())
        })
        .collect();

    for id in skeleton.topological_order() {
        let node = skeleton.node(id);
        let u = match node.parent {
            None => seed_frame(node.direction),
            Some(p) => transport(frames[p], skeleton.node(p).direction, node.direction),
        };
        frames[id] = u;
        let v = node.direction.cross(u);
        let ring: Vec<usize> = angles
            .iter()
            .map(|&(c, sn)| {
                vertices.push(node.position + (u * c + v * sn) * node.size);
                vertices.len() - 1
            })
            .collect();
        ring_of_node[id] = ring;
    }

    let mut faces = Vec::with_capacity(2 * skeleton.branch_count() * s);
    let mut face_node = Vec::with_capacity(faces.capacity());
    let mut face_label = Vec::with_capacity(faces.capacity());
    for node in skeleton.nodes() {
        let Some(p) = node.parent else { continue };
        let lower = &ring_of_node[p];
        let upper = &ring_of_node[node.id];
        let label = Label::for_size(node.size, sp.r_e);
        for k in 0..s {
            let k1 = (k + 1) % s;
            faces.push([lower[k], lower[k1], upper[k1]]);
            faces.push([lower[k], upper[k1], upper[k]]);
            face_node.extend([node.id, node.id]);
            face_label.extend([label, label]);
        }
    }
    Ok(TubeMesh { vertices, faces, ring_segments: s, ring_of_node, face_node, face_label })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceCloud<T> {
    pub points: Vec<Vec3<T>>,
    pub normals: Vec<Vec3<T>>,
    pub source_face: Vec<usize>,
    pub labels: Vec<Label>,
}

impl<T: Real> SurfaceCloud<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Area-weighted uniform sampling of `round(density · area)` surface points.
pub fn sample_surface<T: Real>(mesh: &TubeMesh<T>, density: T, rng: &mut StageRng) -> Result<SurfaceCloud<T>> {
    if !(density > T::zero()) {
        return Err(Error::NonPositive("density"));
    }
    // Running sum in face order keeps the draw independent of any parallelism.
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = T::zero();
    for f in 0..mesh.faces.len() {
        total = total + mesh.face_area(f);
        cumulative.push(total);
    }
    if mesh.faces.is_empty() || !(total > T::zero()) {
        return Err(Error::EmptyMesh);
    }
    let count = (density * total).round().to_usize().unwrap_or(0);
    let mut cloud = SurfaceCloud {
        points: Vec::with_capacity(count),
        normals: Vec::with_capacity(count),
        source_face: Vec::with_capacity(count),
        labels: Vec::with_capacity(count),
    };
    for _ in 0..count {
        let target = total * T::lit(rng.random::<f64>());
        let f = cumulative.partition_point(|&c| c <= target).min(mesh.faces.len() - 1);
        let (r1, r2) = fold_barycentric(rng.random::<f64>(), rng.random::<f64>());
        let [a, b, c] = mesh.triangle(f);
        let point = a + (b - a) * T::lit(r1) + (c - a) * T::lit(r2);
        let normal = (b - a).cross(c - a).normalize();
        cloud.points.push(point);
        cloud.normals.push(normal);
        cloud.source_face.push(f);
        cloud.labels.push(mesh.face_label[f]);
    }
    Ok(cloud)
}

/// Maps a uniform draw on the unit square to uniform barycentric weights
/// `(r1, r2)` with `r1 + r2 ≤ 1` by reflecting the upper half.
fn fold_barycentric(u: f64, v: f64) -> (f64, f64) {
    if u + v > 1.0 {
        (1.0 - u, 1.0 - v)
    } else {
        (u, v)
    }
}
