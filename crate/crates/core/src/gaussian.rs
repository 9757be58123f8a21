//! Gaussian splats initialized from a surface cloud, the Gaussian kernel and
//! front-to-back alpha compositing.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solid::{Label, SurfaceCloud};
use crate::spatial::KdTree;
use crate::vec3::Vec3;

pub type Rgb<T> = [T; 3];

/// Row-major 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

impl<T: Real> Mat3<T> {
    pub fn identity() -> Self {
        Self::scaled_identity(T::one())
    }

    pub fn scaled_identity(s: T) -> Self {
        let z = T::zero();
        Self([[s, z, z], [z, s, z], [z, z, s]])
    }

    pub fn from_rows(r0: Vec3<T>, r1: Vec3<T>, r2: Vec3<T>) -> Self {
        Self([r0.to_array(), r1.to_array(), r2.to_array()])
    }

    pub fn row(&self, i: usize) -> Vec3<T> {
        let r = self.0[i];
        Vec3::new(r[0], r[1], r[2])
    }

    pub fn transpose(&self) -> Self {
        let m = self.0;
        Self(std::array::from_fn(|i| std::array::from_fn(|j| m[j][i])))
    }

    pub fn mul(&self, o: &Self) -> Self {
        let (a, b) = (self.0, o.0);
        Self(std::array::from_fn(|i| std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j])))
    }

    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        let m = self.0;
        (m[0][1] - m[1][0]).abs() <= tol && (m[0][2] - m[2][0]).abs() <= tol && (m[1][2] - m[2][1]).abs() <= tol
    }

    /// Lower Cholesky factor, or `None` unless the matrix is symmetric
    /// positive definite.
    pub fn cholesky(&self) -> Option<[[T; 3]; 3]> {
        let a = self.0;
        let scale = a.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs()));
        if !self.is_symmetric(scale * T::lit(1e-12)) {
            return None;
        }
        let mut l = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..=i {
                let mut s = a[i][j];
                for k in 0..j {
                    s = s - l[i][k] * l[j][k];
                }
                if i == j {
                    if !(s > T::zero()) || !s.is_finite() {
                        return None;
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        Some(l)
    }

    /// `xᵀ M⁻¹ x` through the Cholesky factor.
    pub fn inverse_quadratic_form(&self, x: Vec3<T>) -> Option<T> {
        let l = self.cholesky()?;
        // Solve L y = x; then xᵀM⁻¹x = |y|².
        let y0 = x.x / l[0][0];
        let y1 = (x.y - l[1][0] * y0) / l[1][1];
        let y2 = (x.z - l[2][0] * y0 - l[2][1] * y1) / l[2][2];
        Some(y0 * y0 + y1 * y1 + y2 * y2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Splat<T> {
    pub mu: Vec3<T>,
    pub cov: Mat3<T>,
    pub color: Rgb<T>,
    pub opacity: T,
}

impl<T: Real> Splat<T> {
    /// Isotropic splat with standard deviation `sigma`.
    pub fn isotropic(mu: Vec3<T>, sigma: T, color: Rgb<T>, opacity: T) -> Self {
        Self { mu, cov: Mat3::scaled_identity(sigma * sigma), color, opacity }
    }

    /// Standard deviation along x, meaningful for isotropic splats.
    pub fn sigma(&self) -> T {
        self.cov.0[0][0].sqrt()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GaussianCloud<T> {
    pub splats: Vec<Splat<T>>,
}

impl<T: Real> GaussianCloud<T> {
    pub fn len(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Palette<T> {
    pub trunk: Rgb<T>,
    pub extremity: Rgb<T>,
}

impl<T: Real> Default for Palette<T> {
    fn default() -> Self {
        Self { trunk: [0.40, 0.26, 0.13].map(T::lit), extremity: [0.33, 0.55, 0.20].map(T::lit) }
    }
}

impl<T: Real> Palette<T> {
    pub fn color(&self, label: Label) -> Rgb<T> {
        match label {
            Label::Trunk => self.trunk,
            Label::Extremity => self.extremity,
        }
    }
}

/// One isotropic splat per sample. The scale is the mean distance to the 3
/// nearest other samples, floored at `sqrt(eps)` so coincident samples still
/// get a positive definite covariance.
pub fn init_gaussians<T: Real>(cloud: &SurfaceCloud<T>, opacity0: T, palette: &Palette<T>) -> Result<GaussianCloud<T>> {
    if cloud.len() < 4 {
        return Err(Error::TooFewPoints(cloud.len()));
    }
    if !(opacity0 > T::zero() && opacity0 <= T::one()) {
        return Err(Error::InvalidParameter(format!("opacity must lie in (0, 1], got {opacity0}")));
    }
    let tree = KdTree::build(&cloud.points);
    let floor = T::epsilon().sqrt();
    let splats = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let nn = tree.knn_excluding(i, 3);
            let sigma = (nn.iter().map(|&(_, d)| d).sum::<T>() / T::lit(3.0)).max(floor);
            Splat::isotropic(cloud.points[i], sigma, palette.color(cloud.labels[i]), opacity0)
        })
        .collect();
    Ok(GaussianCloud { splats })
}

/// `exp(−½ xᵀ Σ⁻¹ x)` for `x` relative to the splat centre.
pub fn eval_gaussian<T: Real>(splat: &Splat<T>, x_rel: Vec3<T>) -> Result<T> {
    let q = splat.cov.inverse_quadratic_form(x_rel).ok_or(Error::SingularCovariance)?;
    Ok((-q / T::lit(2.0)).exp())
}

/// A splat's contribution along one ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fragment<T> {
    pub depth: T,
    /// Effective opacity `α·G(x)` at the ray.
    pub sigma: T,
    pub color: Rgb<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Composite<T> {
    pub color: Rgb<T>,
    /// Remaining transmittance `Π(1 − σ_j)` after all fragments.
    pub transmittance: T,
    /// `Σ σ_i Π_{j<i}(1 − σ_j)`, equal to `1 − transmittance` up to rounding.
    pub coverage: T,
    /// Coverage-weighted depth sum; divide by `coverage` for expected depth.
    pub depth_sum: T,
}

impl<T: Real> Composite<T> {
    /// Expected depth, or `+∞` when coverage is below `min_coverage`.
    pub fn expected_depth(&self, min_coverage: T) -> T {
        if self.coverage < min_coverage {
            T::infinity()
        } else {
            self.depth_sum / self.coverage
        }
    }
}

/// Front-to-back compositing `C = Σ c_i σ_i Π_{j<i}(1 − σ_j)` over fragments
/// already sorted by increasing depth.
pub fn composite_ray<T: Real>(fragments: &[Fragment<T>]) -> Composite<T> {
    let mut color = [T::zero(); 3];
    let mut t = T::one();
    let mut coverage = T::zero();
    let mut depth_sum = T::zero();
    for f in fragments {
        let w = f.sigma * t;
        for (acc, c) in color.iter_mut().zip(f.color) {
            *acc = *acc + c * w;
        }
        coverage = coverage + w;
        depth_sum = depth_sum + f.depth * w;
        t = t * (T::one() - f.sigma);
    }
    Composite { color, transmittance: t, coverage, depth_sum }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frag(sigma: f64, color: Rgb<f64>) -> Fragment<f64> {
        Fragment { depth: 1.0, sigma, color }
    }

    #[test]
    fn kernel_peak_and_unit_distance() {
        let s = Splat::isotropic(Vec3::zero(), 1.0, [1.0; 3], 1.0);
        assert_eq!(eval_gaussian(&s, Vec3::zero()).unwrap(), 1.0);
        let g = eval_gaussian(&s, Vec3::new(0.6, 0.0, 0.8)).unwrap();
        assert!((g - (-0.5f64).exp()).abs() < 1e-15);
        assert!((g - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn singular_covariance_is_rejected() {
        let mut s = Splat::isotropic(Vec3::zero(), 1.0, [1.0; 3], 1.0);
        s.cov.0[2][2] = 0.0;
        assert!(matches!(eval_gaussian(&s, Vec3::unit_x()), Err(Error::SingularCovariance)));
        s.cov = Mat3([[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(eval_gaussian(&s, Vec3::unit_x()).is_err());
    }

    #[test]
    fn opaque_front_splat_wins() {
        let c = composite_ray(&[frag(1.0, [0.2, 0.4, 0.6]), frag(0.7, [1.0, 1.0, 1.0])]);
        assert_eq!(c.color, [0.2, 0.4, 0.6]);
        assert_eq!(c.transmittance, 0.0);
    }

    #[test]
    fn two_half_splats() {
        let c1 = [1.0, 0.0, 0.5];
        let c2 = [0.0, 1.0, 0.25];
        let c = composite_ray(&[frag(0.5, c1), frag(0.5, c2)]);
        for k in 0..3 {
            assert_eq!(c.color[k], 0.5 * c1[k] + 0.25 * c2[k]);
        }
        assert_eq!(c.transmittance, 0.25);
    }

    #[test]
    fn empty_ray_is_background() {
        let c = composite_ray::<f64>(&[]);
        assert_eq!(c.transmittance, 1.0);
        assert!(c.expected_depth(1e-4).is_infinite());
    }

    #[test]
    fn tetrahedron_gets_unit_sigma() {
        let h = 1.0 / (2.0 * 2f64.sqrt());
        let points = vec![
            Vec3::new(0.5, 0.0, -h),
            Vec3::new(-0.5, 0.0, -h),
            Vec3::new(0.0, 0.5, h),
            Vec3::new(0.0, -0.5, h),
        ];
        let cloud = SurfaceCloud {
            normals: vec![Vec3::unit_z(); 4],
            source_face: vec![0; 4],
            labels: vec![Label::Trunk, Label::Extremity, Label::Trunk, Label::Trunk],
            points,
        };
        let palette = Palette::default();
        let g = init_gaussians(&cloud, 0.8, &palette).unwrap();
        for sp in &g.splats {
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((sp.cov.0[i][j] - want).abs() < 1e-12);
                }
            }
            assert_eq!(sp.opacity, 0.8);
        }
        assert_eq!(g.splats[0].color, palette.trunk);
        assert_eq!(g.splats[1].color, palette.extremity);
    }

    #[test]
    fn too_few_points() {
        let cloud = SurfaceCloud::<f64> {
            points: vec![Vec3::zero(); 3],
            normals: vec![Vec3::unit_z(); 3],
            source_face: vec![0; 3],
            labels: vec![Label::Trunk; 3],
        };
        assert!(matches!(init_gaussians(&cloud, 0.5, &Palette::default()), Err(Error::TooFewPoints(3))));
    }
}
