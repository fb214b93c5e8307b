//! Default contagion in a two-layer random network of bank holdings.
//!
//! Every bank is a holding with two subsidiaries. Subsidiaries of the same
//! type trade with each other through a directed Erdős–Rényi layer, and the
//! holding couples the two layers by supporting a distressed subsidiary down
//! to a support level `x ≤ 0`. The crate provides
//!
//! * [`capital`]: the capital grid, holding types and default-region algebra,
//! * [`kernels`]: log-space Poisson kernels,
//! * [`analytic`]: the cascade functionals `f_l`, their derivatives and the
//!   boundary-mass matrix,
//! * [`fixed_point`]: the least joint root and the resilience classification,
//! * [`network`]: finite-network cascades and Monte Carlo estimation,
//! * [`scenarios`]: Bernoulli-shock case studies, ex-post shocks and
//!   support-level sweeps.
//!
//! The analytic layer is generic over [`Scalar`] (`f64` or `f32`); the
//! aliases below fix the scalar to `f64`, which is what the simulator and
//! the scenarios use.

pub mod analytic;
pub mod capital;
pub mod fixed_point;
pub mod kernels;
pub mod network;
pub mod scalar;
pub mod scenarios;

pub use analytic::{AnalyticError, AnalyticModel, AnalyticPoint, BoundaryMatrix, LayerParams};
pub use capital::{
    canonicalize_support, CapitalError, CapitalGrid, CapitalPoint, HoldingType,
    JointCapitalDistribution, Layer, RegionTable, SupportLevel,
};
pub use fixed_point::{
    classify_resilience, direction_feasibility, least_joint_root, DirectionSign,
    ResilienceVerdict, RootResult, SolveError, SolverOptions, Verdict,
};
pub use kernels::{joint_pmf, pmf, sf, KernelError, PoissonRate};
pub use network::{
    monte_carlo_estimate, run_cascade_rounds, run_sequential_exploration, sample_network,
    CascadeOutcome, MonteCarloConfig, MonteCarloReport, NetworkInstance, SimError,
};
pub use scalar::Scalar;

/// Joint capital distribution over `f64` masses.
pub type Distribution64 = JointCapitalDistribution<f64>;
/// Joint capital distribution over `f32` masses.
pub type Distribution32 = JointCapitalDistribution<f32>;
/// Layer parameters in `f64`.
pub type LayerParams64 = LayerParams<f64>;
/// Evaluated point of the analytic map in `f64`.
pub type AnalyticPoint64 = AnalyticPoint<f64>;
/// Boundary-mass matrix in `f64`.
pub type BoundaryMatrix64 = BoundaryMatrix<f64>;
/// Least-joint-root result in `f64`.
pub type RootResult64 = RootResult<f64>;
/// Resilience verdict in `f64`.
pub type ResilienceVerdict64 = ResilienceVerdict<f64>;
/// Solver options in `f64`.
pub type SolverOptions64 = SolverOptions<f64>;
