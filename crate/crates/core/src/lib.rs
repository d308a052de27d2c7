//! Long-run growth rate of a population spread over patches with
//! correlated environmental noise and linear dispersal.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod error;
pub mod estimate;
pub mod ideal_free;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod scalar;
pub mod sde;
pub mod structured;
pub mod twopatch;

pub use error::{Error, Result};
pub use estimate::Method;
pub use scalar::Scalar;
pub use sde::Scheme;
pub use structured::CyclicProductGroup;

pub type Matrix = linalg::Matrix<f64>;
pub type Landscape = model::Landscape<f64>;
pub type PatchDistribution = model::PatchDistribution<f64>;
pub type DispersalMatrix = model::DispersalMatrix<f64>;
pub type GrowthEstimate = estimate::GrowthEstimate<f64>;
pub type SimConfig = sde::SimConfig<f64>;
pub type Dispersal = sde::Dispersal<f64>;
pub type TwoPatchParams = twopatch::TwoPatchParams<f64>;
pub type IdealFreeSolution = ideal_free::IdealFreeSolution<f64>;
pub type HighDispersalExpansion = asymptotics::HighDispersalExpansion<f64>;
pub type MultiScaleSpec = structured::MultiScaleSpec<f64>;
