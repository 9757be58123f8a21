//! Procedural bonsai structure priors.
//!
//! A tree skeleton is grown by 3D space colonization inside a half-height
//! ellipsoidal crown, thickened into tube meshes with pipe-model sizing,
//! sampled into labelled surface points and turned into isotropic 3D
//! Gaussians that can be depth-rendered from a seeded camera rig. The
//! growth weights can be fitted so that rendered silhouettes match target
//! masks.
//!
//! The geometric core is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.
//!
//! ```
//! use bonsai_core::{attractor, colonize, rng, GrowthParams};
//!
//! let params = GrowthParams { n_attractors: 300, ..Default::default() };
//! let field = attractor::sample_attractors(1.0, 300, &mut rng::stream(7, rng::ATTRACTORS), false);
//! let grown = colonize::grow(field, &params).unwrap();
//! assert!(grown.skeleton.len() > 1);
//! ```

// Negated comparisons are how parameter checks reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attractor;
pub mod colonize;
pub mod error;
pub mod fit;
pub mod gaussian;
pub mod io;
pub mod model;
pub mod render;
pub mod rng;
pub mod scalar;
pub mod skeleton_json;
pub mod solid;
pub mod spatial;
pub mod vec3;

pub use error::{Error, Result};
pub use model::AssignmentMode;
pub use scalar::Real;
pub use solid::Label;

pub type Vec3 = vec3::Vec3<f64>;
pub type Theta = model::Theta<f64>;
pub type GrowthParams = model::GrowthParams<f64>;
pub type SizingParams = model::SizingParams<f64>;
pub type BranchNode = model::BranchNode<f64>;
pub type Skeleton = model::Skeleton<f64>;
pub type AttractorField = attractor::AttractorField<f64>;
pub type GrowthOutcome = colonize::GrowthOutcome<f64>;
pub type TubeMesh = solid::TubeMesh<f64>;
pub type SurfaceCloud = solid::SurfaceCloud<f64>;
pub type Splat = gaussian::Splat<f64>;
pub type GaussianCloud = gaussian::GaussianCloud<f64>;
pub type Palette = gaussian::Palette<f64>;
pub type Camera = render::Camera<f64>;
pub type DepthImage = render::DepthImage<f64>;
pub type ColorImage = render::ColorImage<f64>;
pub type RigSettings = render::RigSettings<f64>;
