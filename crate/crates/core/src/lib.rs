//! Linear encoders and predictors trained with stop-gradient (SG), an
//! exponential-moving-average target (EMA), or plain gradient descent.
//!
//! The encoder is `f(x) = Ax`, the target encoder `f(y) = Cy` and the
//! predictor `g(z) = Bz`. Everything depends on the data only through the
//! second moments `[xxᵀ]`, `[yxᵀ]`, `[yyᵀ]`.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod gradients;
pub mod m1;
pub mod matrix;
pub mod model;
pub mod montecarlo;
pub mod spectrum;
pub mod verify;

pub use analysis::{
    balance_residual, collapse_bound_check, empirical_stability_probe, integrability_defect, linearize,
    ProbeRecord, StabilityReport,
};
pub use dynamics::{
    flow_rhs, flow_rhs_norm, integrate_flow, integrate_flow_with, iterate_discrete, step_discrete, AlgoKind, Diagnostics, Scheme,
    Trajectory,
};
pub use error::{Error, Result};
pub use gradients::{eval_objectives, grad_e, grad_p, grad_pq, grad_q, residual, GradPair, Objectives};
pub use m1::{
    classify_limit, critical_coincidence, materialize_equilibrium, solve_equilibria, EquilibriumSet, LimitClass,
    ScalarMoments,
};
pub use matrix::Mat;
pub use model::{
    moments_from_samples, random_state, AlphaSchedule, DataMoments, Dims, HyperParams, ModelState, Seed,
};
pub use montecarlo::{run_monte_carlo, AlgoStats, TrialConfig, TrialStats};
pub use spectrum::Eigenvalue;
