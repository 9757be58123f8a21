//! Attraction points ("leaves") inside the crown domain.
//!
//! The crown is the solid half-height ellipsoid centred at `(0, 0, R)` with
//! semi-axes `(R, R, R/2)`: the region between the surfaces
//! `z = R ± sqrt(R² − x² − y²) / 2` over the disc `x² + y² ≤ R²`.

use rand::Rng;
use rayon::prelude::*;

use crate::model::Skeleton;
use crate::rng::StageRng;
use crate::scalar::Real;
use crate::spatial::PointGrid;
use crate::vec3::Vec3;

#[derive(Clone, Debug, PartialEq)]
pub struct AttractorField<T> {
    pub points: Vec<Vec3<T>>,
    pub alive: Vec<bool>,
    pub domain_radius: T,
}

impl<T: Real> AttractorField<T> {
    /// Wraps explicit points, all alive. Points are not checked against the
    /// crown domain, which lets tests place attractors anywhere.
    pub fn from_points(points: Vec<Vec3<T>>, domain_radius: T) -> Self {
        let alive = vec![true; points.len()];
        Self { points, alive, domain_radius }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn alive_points(&self) -> impl Iterator<Item = (usize, Vec3<T>)> + '_ {
        self.points.iter().copied().enumerate().filter(|&(i, _)| self.alive[i])
    }
}

/// Centre of the crown domain.
pub fn domain_center<T: Real>(r: T) -> Vec3<T> {
    Vec3::new(T::zero(), T::zero(), r)
}

/// Membership test for the crown domain of radius `r`.
pub fn domain_contains<T: Real>(p: Vec3<T>, r: T) -> bool {
    let radial = p.x * p.x + p.y * p.y;
    if radial > r * r {
        return false;
    }
    let half = r / T::lit(2.0);
    let dz = (p.z - r) / half;
    radial / (r * r) + dz * dz <= T::one()
}

/// Candidate leaf position `center + direction * magnitude`.
pub fn place_attractor<T: Real>(direction: Vec3<T>, magnitude: T, r: T) -> Vec3<T> {
    domain_center(r) + direction * magnitude
}

/// Uniform direction on the unit sphere from two uniform draws in `[0, 1)`.
pub fn sphere_direction<T: Real>(u: f64, v: f64) -> Vec3<T> {
    let z = 1.0 - 2.0 * u;
    let rho = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * std::f64::consts::PI * v;
    Vec3::from_f64([rho * phi.cos(), rho * phi.sin(), z])
}

/// Draws `n` attractors inside the crown of radius `r`.
///
/// Each candidate is `center + D·d` with `D` uniform on the unit sphere and
/// `d` uniform in `[0, r]` (or `r·u^(1/3)` with `uniform_volume`), redrawn
/// until it lies in the domain. Acceptance is at least the probability of
/// `d ≤ r/2`, so rejection terminates quickly.
pub fn sample_attractors<T: Real>(r: T, n: usize, rng: &mut StageRng, uniform_volume: bool) -> AttractorField<T> {
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let dir = sphere_direction(rng.random::<f64>(), rng.random::<f64>());
        let u: f64 = rng.random();
        let frac = if uniform_volume { u.cbrt() } else { u };
        let p = place_attractor(dir, r * T::lit(frac), r);
        if domain_contains(p, r) {
            points.push(p);
        }
    }
    AttractorField::from_points(points, r)
}

/// Marks dead every alive attractor strictly closer than `d_kill` to any node.
/// Returns the indices newly killed, ascending.
pub fn kill_pass<T: Real>(field: &mut AttractorField<T>, skeleton: &Skeleton<T>, d_kill: T) -> Vec<usize> {
    let grid = PointGrid::from_points(d_kill, skeleton.positions());
    kill_with_index(field, &grid, d_kill)
}

pub(crate) fn kill_with_index<T: Real>(field: &mut AttractorField<T>, nodes: &PointGrid<T>, d_kill: T) -> Vec<usize> {
    let doomed: Vec<usize> = field
        .points
        .par_iter()
        .enumerate()
        .filter(|&(i, p)| field.alive[i] && nodes.any_within(*p, d_kill))
        .map(|(i, _)| i)
        .collect();
    for &i in &doomed {
        field.alive[i] = false;
    }
    doomed
}
