//! Normalizers, doubling bounds, base selection, recursion constants and
//! Toeplitz weights.

mod base;
mod function;
mod toeplitz;

pub use base::{
    base_inequality, d_ap, strictly_greater, doubling_bounds, doubling_bounds_with, recursion_constants, select_base, BasePlan,
    DoublingBounds, RecursionConstants, DEFAULT_A_MAX, DEFAULT_DOUBLING_POINTS,
};
pub use function::ScalingFunction;
pub use toeplitz::{ToeplitzTransform, ToeplitzWeights};
