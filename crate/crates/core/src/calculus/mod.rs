//! Directional derivatives, Lipschitz estimates and Pansu differentiability.

pub mod derivative;
pub mod field;
pub mod mean_value;
pub mod pansu;

pub use derivative::{
    curve_directional_consistency, default_steps, derivative_1d, directional_derivative, lipschitz_estimate, ConsistencyReport,
    DerivativeEstimate, LipschitzEstimate, Region,
};
pub use field::ScalarField;
pub use mean_value::{mean_value_search, verify_mean_value, MeanValueInstance, MeanValueResult};
pub use pansu::{almost_maximal_pair_check, pansu_residual, pansu_residual_sampled, Decision, PairCheck, PansuReport};
