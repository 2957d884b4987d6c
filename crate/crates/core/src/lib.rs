//! Botnet flow detection: preprocessing, robust feature scoring, genetic
//! feature selection with eagle-style refinement, swarm-guided annealing for
//! hyperparameters, and a voting ensemble of tree models.
//!
//! Numeric code is generic over [`num::Real`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`.

pub mod error;
pub mod evalharness;
pub mod featstats;
pub mod flowdata;
pub mod metrics;
pub mod models;
pub mod num;
pub mod preprocess;
pub mod rng;
pub mod selector;
pub mod tuner;

pub use error::{Error, Result};
pub use num::Real;

pub type FlowDataset = flowdata::FlowDataset<f64>;
pub type Samples = flowdata::Samples<f64>;
pub type Ensemble = models::Ensemble<f64>;
pub type ModelBundle = evalharness::ModelBundle<f64>;
pub type PreprocessState = preprocess::PreprocessState<f64>;
pub type EagleGaState = selector::EagleGaState<f64>;

pub type FlowDatasetF32 = flowdata::FlowDataset<f32>;
pub type SamplesF32 = flowdata::Samples<f32>;
