//! Monte Carlo Shapley estimators.
//!
//! Every estimator here is an instance of `φ = T·E[a_S v(S)] + b`; the
//! named functions are specialised, faster paths for the common rows.

mod config;
mod estimators;
mod sampling;

pub use config::{Bias, SubsetDomain, TableRow, Transform, UnifiedStochasticConfig, MASS_TOLERANCE};
pub use estimators::{
    estimate_kernelshap, estimate_kernelshap_unbiased, estimate_kernelshap_with, estimate_permutation,
    estimate_semivalue, estimate_semivalue_mc, estimate_unified, kernel_second_moment,
    kernelshap_full_enumeration, simshap_target, unbiased_kernelshap_solve, EstimatorSpec, KernelShapOptions,
    KernelSolve,
};
pub use sampling::{sample_kernel_subset, KernelDraw};
