//! Adaptive bridge Monte Carlo for functionals of killed Lévy processes.
//!
//! The crate estimates `E[F(X_1) 1{τ > 1}]`, where `τ` is the first exit of
//! a Lévy process from an interval `(a, b)`, with a discretization bias
//! bounded by a user tolerance `γ`. Paths are represented by adaptive dyadic
//! skeletons refined until the computable bound on the bridge exit
//! probability error is below `γ·ΔT` on every interval.

// `!(x > 0.0)` style guards are deliberate: they reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod error;
pub mod estimator;
pub mod exit;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod skeleton;
pub mod validation;

pub use bridge::{bridge_density, envelope_constant, sample_bridge_midpoint, BridgeSampleStats};
pub use error::{Error, Result};
pub use estimator::{
    convergence_sweep, estimate_adaptive, estimate_uniform, McResult, Payoff, Schedule, SweepRow, SweepTable,
};
pub use exit::{error_bound_cauchy, error_bound_general, exit_estimate, p_tilde, Domain, ExitEstimate};
pub use model::{LevyModel, LevyModelSpec, ModelKind, TruncationQuantities};
pub use numerics::{density_inversion_oracle, tail_quadrature, QuadratureConfig};
pub use skeleton::{
    bias_contribution, generate_skeleton, survival_weight, verify_skeleton, DyadicTime, EngineConfig, Skeleton,
};
