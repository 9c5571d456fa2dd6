//! Shapley value estimation: exact oracles, stochastic estimators under a
//! unified `(p, a, T, b)` form, amortized explainers and evaluation tools.
//!
//! Players are indexed from 0. Games are [`CoalitionGame`]s over at most
//! [`MAX_PLAYERS`] players; exact enumeration is limited further per method.

pub mod amortized;
pub mod error;
pub mod eval;
pub mod exact;
pub mod game;
pub mod kernel;
pub mod models;
pub mod nn;
pub mod numeric;
pub mod rng;
pub mod stochastic;
pub mod subset;

pub use amortized::{
    additive_efficient_normalization, amortized_inference, train_fastshap, train_simshap, Checkpoint,
    ExplainerNet, LossHistory, MetricMatrix, Objective, TrainConfig, TrainingSet,
};
pub use error::{Result, ShapError};
pub use eval::{attribution_distance, convergence_probe, insertion_deletion, CurveMode, CurveReport, DistanceReport};
pub use exact::{exact_least_squares, exact_random_order, exact_shapley, exact_unified_expectation};
pub use game::{Attribution, CoalitionGame, Method};
pub use kernel::{kernel_normalizer, shapley_kernel_weight, KernelWeights};
pub use models::{
    linear_model_shapley, masked_game, synthetic_game, Dataset, MaskingRule, SyntheticKind, TabularKind,
    TabularModel,
};
pub use nn::{Activation, OptimizerKind};
pub use rng::RandomSource;
pub use stochastic::{
    estimate_kernelshap, estimate_kernelshap_unbiased, estimate_permutation, estimate_semivalue,
    estimate_unified, simshap_target, EstimatorSpec, TableRow, UnifiedStochasticConfig,
};
pub use subset::{enumerate_subsets, FeatureSubset, MAX_PLAYERS};
