//! Symmetric α-stable sampling, the linear fractional stable sheet and the
//! model fields used by the corollary checks.

mod kernel;
mod model;
mod operator;
mod sampler;
mod simulate;

pub use kernel::{
    kappa_1d, kernel_alpha_mass, kernel_g, kernel_g1, normalize_kappa, pos_pow, power_difference, ConvMethod,
    IncrementKernel, LfssConfig, DEFAULT_DELTA, DEFAULT_NEAR_UNITS, DEFAULT_STEP, DEFAULT_TRUNCATION_MAX,
};
pub use model::{generate_model_field, CovarianceModel, IidLaw, VarianceMap};
pub use operator::{check_operator_scaling, quantile_band, QuantileRow, ScalingCheck, ScalingReport};
pub use sampler::{sample_sas, standard_sas, StableParams};
pub use simulate::{
    increment_weights, resolve_truncation, sheet_from_increments, simulate_increment_field, AxisOperator,
    IncrementWeights, LfssSimulator, Truncation, DEFAULT_MEMORY_BUDGET,
};
