//! Genetic feature selection with eagle-style local refinement.

mod eagle;
mod ga;
mod mask;

pub use eagle::{
    eagle_select, eagle_spiral, eagle_swoop, mean_position, select_move, spiral_coefficients, spiral_move,
    swoop_coefficients, swoop_move, EagleGaState, EagleParams,
};
pub use ga::{cv_error, fitness, select_features, FitnessCache, GaParams, GenerationStats};
pub use mask::FeatureMask;
