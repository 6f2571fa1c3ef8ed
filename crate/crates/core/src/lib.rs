//! Convex C¹ and C^{1,ω} extension of 1-jets given on finite subsets of ℝⁿ.
//!
//! The crate decides whether prescribed values and gradients on a finite
//! carrier admit a convex differentiable extension, builds one on a sampled
//! grid when they do, and uses the construction to interpolate point clouds
//! by boundaries of convex bodies with prescribed outer normals.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`). The aliases
//! at the bottom of this file pin the common `f64` instantiations.

// Index loops mirror the matrix algebra; negated float comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bodies;
pub mod c1;
pub mod c1omega;
pub mod conditions;
pub mod contour;
pub mod envelope;
pub mod error;
pub mod field;
pub mod grid;
pub mod jet;
pub mod linalg;
pub mod minimal;
pub mod modulus;
pub mod sampling;
pub mod scalar;
pub mod whitney;

pub use error::{Error, Result};
pub use scalar::Real;

/// Version tag written into every JSON report.
pub const SCHEMA_VERSION: u32 = 1;

pub type Jet = jet::Jet1<f64>;
pub type Modulus = modulus::Modulus<f64>;
pub type ScalarGrid = grid::ScalarGrid<f64>;
pub type GridSpec = grid::GridSpec<f64>;
pub type ExtensionField = field::ExtensionField<f64>;
pub type ConditionReport = conditions::ConditionReport<f64>;
pub type PiecewiseAffineMax = minimal::PiecewiseAffineMax<f64>;
pub type Factorization = minimal::Factorization<f64>;
pub type ClosedSet = whitney::ClosedSetApprox<f64>;
pub type CubeDecomposition = whitney::CubeDecomposition<f64>;
pub type Corrector = whitney::Corrector<f64>;
pub type EnvelopeResult = envelope::EnvelopeResult<f64>;
pub type NormalData = bodies::NormalData<f64>;
pub type BodyResult = bodies::BodyResult<f64>;
