//! Cost model, convergence bounds and estimators of their constants.

mod bounds;
mod estimate;
mod problem;
mod speedup;
mod verify;

pub use bounds::{sgd_bound, theorem1_bound, BoundInputs};
pub use estimate::{estimate_lipschitz, estimate_second_moment, gram_spectral_norm, logistic_lipschitz, LipschitzEstimate, SAFETY_FACTOR};
pub use problem::{LogisticRegression, Quadratic, SmoothProblem};
pub use speedup::{counted_speedup, speedup_ratio, visit_counts};
pub use verify::{approximate_optimum, multirate_trajectory, verify_bound, BoundCheckConfig, BoundReport};

#[cfg(test)]
mod tests;
