//! Independent reference implementations and generators shared by the
//! integration tests.
#![allow(dead_code)]

use bonsai_core::attractor::AttractorField;
use bonsai_core::gaussian::{Fragment, Splat};
use bonsai_core::model::{GrowthParams, Skeleton, Theta};
use bonsai_core::render::Camera;
use bonsai_core::vec3::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit(rng: &mut impl Rng) -> Vec3<f64> {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Random tree with `n` nodes, each new node hanging off a uniformly chosen
/// earlier node.
pub fn random_skeleton(rng: &mut impl Rng, n: usize) -> Skeleton<f64> {
    let mut s = Skeleton::with_root(GrowthParams::default());
    for _ in 1..n {
        let parent = rng.random_range(0..s.len());
        let mut dir = random_unit(rng);
        dir.z = dir.z.abs() + 0.2;
        s.push_child(parent, dir);
    }
    s
}

/// Number of childless nodes reachable below `id`, counted recursively.
pub fn leaves_below(s: &Skeleton<f64>, id: usize) -> usize {
    let node = s.node(id);
    if node.children.is_empty() {
        1
    } else {
        node.children.iter().map(|&c| leaves_below(s, c)).sum()
    }
}

/// Every alive attractor pulled by `node`, by exhaustive search.
pub fn brute_force_kills(field: &AttractorField<f64>, nodes: &[Vec3<f64>], d_kill: f64) -> Vec<usize> {
    (0..field.len())
        .filter(|&i| field.alive[i] && nodes.iter().any(|n| n.distance(field.points[i]) < d_kill))
        .collect()
}

/// Nearest node strictly inside `d_influence` for each alive attractor,
/// lowest id winning ties.
pub fn brute_force_assignment(
    field: &AttractorField<f64>,
    nodes: &[Vec3<f64>],
    d_influence: f64,
) -> std::collections::BTreeMap<usize, Vec<usize>> {
    let mut out = std::collections::BTreeMap::<usize, Vec<usize>>::new();
    for (i, &p) in field.points.iter().enumerate() {
        if !field.alive[i] {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, n) in nodes.iter().enumerate() {
            let d = n.distance(p);
            if d < d_influence && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, _)) = best {
            out.entry(j).or_default().push(i);
        }
    }
    out
}

/// Unevaluated sum of two doubles with an exact error term.
#[derive(Clone, Copy, Debug)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Self { hi: s, lo: err }
    }

    fn quick(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Self { hi: s, lo: lo - (s - hi) }
    }

    pub fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        Self::quick(s.hi, s.lo + self.lo + o.lo)
    }

    pub fn mul(self, o: Self) -> Self {
        let p = self.hi * o.hi;
        let err = self.hi.mul_add(o.hi, -p);
        Self::quick(p, err + self.hi * o.lo + self.lo * o.hi)
    }

    pub fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self.add(o.mul(Self::from(-q1)));
        let q2 = r.hi / o.hi;
        Self::quick(q1, q2)
    }

    pub fn sqrt(self) -> Self {
        let x = self.hi.sqrt();
        if x == 0.0 {
            return Self::from(0.0);
        }
        // One Newton step from the double estimate.
        let xx = Self::from(x).mul(Self::from(x));
        let corr = self.add(Self::from(-xx.hi)).add(Self::from(-xx.lo)).hi / (2.0 * x);
        Self::quick(x, corr)
    }

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Weighted-mean growth direction evaluated in double-double arithmetic,
/// written as a straight-line loop with no shared code.
pub fn direction_oracle(node: Vec3<f64>, attractors: &[Vec3<f64>], theta: [f64; 4], d_influence: f64) -> Option<[f64; 3]> {
    let dd = DoubleDouble::from;
    let mut acc = [dd(0.0), dd(0.0), dd(0.0)];
    for a in attractors {
        let v = [dd(a.x).add(dd(-node.x)), dd(a.y).add(dd(-node.y)), dd(a.z).add(dd(-node.z))];
        let len = v[0].mul(v[0]).add(v[1].mul(v[1])).add(v[2].mul(v[2])).sqrt();
        if len.hi == 0.0 {
            continue;
        }
        let up = v[2].div(len).value().max(0.0);
        let w = (theta[0] * (-theta[1] * len.value() / d_influence).exp() * (1.0 + theta[2] * up)).max(0.0);
        for k in 0..3 {
            acc[k] = acc[k].add(v[k].div(len).mul(dd(w)));
        }
    }
    let n = dd(attractors.len() as f64);
    let mean = acc.map(|c| c.div(n));
    let norm = mean[0].mul(mean[0]).add(mean[1].mul(mean[1])).add(mean[2].mul(mean[2])).sqrt();
    if norm.value() < 1e-12 {
        return None;
    }
    Some(mean.map(|c| c.div(norm).value()))
}

pub fn random_theta(rng: &mut impl Rng) -> Theta<f64> {
    Theta([rng.random_range(0.1..3.0), rng.random_range(0.0..3.0), rng.random_range(0.0..3.0), 0.0])
}

/// Kernel value from an explicit linear solve `Σ y = x`.
pub fn kernel_oracle(cov: [[f64; 3]; 3], x: [f64; 3]) -> f64 {
    let m = nalgebra::Matrix3::from_fn(|i, j| cov[i][j]);
    let v = nalgebra::Vector3::from_column_slice(&x);
    let y = m.lu().solve(&v).expect("nonsingular");
    (-0.5 * v.dot(&y)).exp()
}

/// Random symmetric positive definite matrix `A Aᵀ + εI`.
pub fn random_spd(rng: &mut impl Rng) -> [[f64; 3]; 3] {
    let a: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let s: f64 = (0..3).map(|k| a[i][k] * a[j][k]).sum();
            s + if i == j { 0.1 } else { 0.0 }
        })
    })
}

/// Front-to-back compositing with each transmittance recomputed from
/// scratch.
pub fn composite_oracle(fragments: &[Fragment<f64>]) -> [f64; 3] {
    let mut color = [0.0; 3];
    for (i, f) in fragments.iter().enumerate() {
        let mut transmittance = 1.0;
        for g in &fragments[..i] {
            transmittance *= 1.0 - g.sigma;
        }
        for k in 0..3 {
            color[k] += f.color[k] * f.sigma * transmittance;
        }
    }
    color
}

pub fn isotropic_splat(mu: Vec3<f64>, sigma: f64) -> Splat<f64> {
    Splat::isotropic(mu, sigma, [0.5, 0.5, 0.5], 0.9)
}

/// Per-pixel ray cast: pinhole rays rebuilt from the camera description,
/// plane intersection then barycentric containment.
pub fn raycast_depth(cam: &Camera<f64>, vertices: &[Vec3<f64>], faces: &[[usize; 3]]) -> Vec<f64> {
    let forward = (cam.target - cam.eye).normalize();
    let right = forward.cross(cam.up).normalize();
    let up = right.cross(forward);
    let focal = cam.height as f64 / 2.0 / (cam.vertical_fov.to_radians() / 2.0).tan();
    let mut out = Vec::with_capacity(cam.width * cam.height);
    for y in 0..cam.height {
        for x in 0..cam.width {
            let px = (x as f64 + 0.5 - cam.width as f64 / 2.0) / focal;
            let py = (cam.height as f64 / 2.0 - y as f64 - 0.5) / focal;
            let dir = (right * px + up * py + forward).normalize();
            let mut best = f64::INFINITY;
            for f in faces {
                let [a, b, c] = f.map(|i| vertices[i]);
                let n = (b - a).cross(c - a);
                let denom = n.dot(dir);
                if denom.abs() < 1e-15 {
                    continue;
                }
                let t = n.dot(a - cam.eye) / denom;
                if t <= 0.0 {
                    continue;
                }
                let p = cam.eye + dir * t;
                let nn = n.norm_squared();
                let wa = (c - b).cross(p - b).dot(n) / nn;
                let wb = (a - c).cross(p - c).dot(n) / nn;
                let wc = 1.0 - wa - wb;
                let eps = -1e-12;
                if wa >= eps && wb >= eps && wc >= eps && t < best {
                    best = t;
                }
            }
            out.push(best);
        }
    }
    out
}

/// A handful of random triangles scattered around the origin.
pub fn random_soup(rng: &mut impl Rng, n: usize) -> (Vec<Vec3<f64>>, Vec<[usize; 3]>) {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for f in 0..n {
        let center = Vec3::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6));
        for _ in 0..3 {
            vertices.push(center + random_unit(rng) * rng.random_range(0.1..0.5));
        }
        faces.push([3 * f, 3 * f + 1, 3 * f + 2]);
    }
    (vertices, faces)
}
