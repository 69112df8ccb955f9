//! K-means solution landscapes.
//!
//! Local minima of the sum-of-squares cost are sampled from uniform random
//! starts; neighbouring minima are linked through minimum-energy crossing
//! points located with a penalty surrogate; the resulting network supports
//! rates, fastest paths, disconnectivity graphs and frustration profiles.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision case.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod analysis;
pub mod dataset;
pub mod kmeans;
pub mod landscape;
pub mod lbfgs;
pub mod matrix;
pub mod network;
pub mod scalar;
pub mod transition;

pub use dataset::{Dataset, DatasetError, FeatureStats};
pub use kmeans::{Assignment, Candidate, InsertOutcome, MinimaStore, MinimumRecord};
pub use landscape::{Landscape, TransitionStateRecord};
pub use matrix::{Centres, Matrix};
pub use scalar::Scalar;
pub use transition::{SearchConfig, SurrogateParams};

pub type Dataset64 = Dataset<f64>;
pub type Centres64 = Centres<f64>;
pub type MinimaStore64 = MinimaStore<f64>;
pub type Landscape64 = Landscape<f64>;
