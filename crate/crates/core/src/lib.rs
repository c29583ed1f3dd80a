//! Exact piecewise-polynomial analysis of one-hidden-layer ReLU networks on an interval.
//!
//! The crate computes the weighted L² risk, its generalized gradient and Hessian in closed
//! form, builds explicit zero-risk parameters and charts of the minima manifold, and runs
//! gradient descent and gradient flow on top of those primitives.
//!
//! Everything is generic over a [`Scalar`] (`f32` or `f64`); the `*64` aliases below cover
//! the common case.

pub mod dynamics;
pub mod error;
pub mod hessian;
pub mod linalg;
pub mod minima;
pub mod network;
pub mod optim;
pub mod piecewise;
pub mod quad;
pub mod risk;
pub mod scalar;
pub mod verify;

pub use dynamics::{
    fit_rate, gd_run, gf_run, multistart_run, sum_estimate_check, FitOutcome, GdConfig,
    MultiStartResult, RateFit, RunStatus, TrajectoryRecord, TrajectoryRow,
};
pub use error::{Error, Result};
pub use hessian::{
    det_product_formula, eigen_extremes, entry_bound, hessian, minor_det_positive,
    moment_matrix, EigenExtremes, HessianReport, MomentMatrix,
};
pub use minima::{
    bound_b, chart_to_params, distance_to_manifold, gamma_threshold, pad_width, witness,
    ManifoldChart,
};
pub use network::{ActiveInterval, Kink, ParamVec};
pub use piecewise::{DensitySpec, PiecewisePoly, Poly, TargetSpec};
pub use risk::{generalized_gradient, risk, smoothed_gradient, smoothed_risk, Problem, Smoothing};
pub use scalar::Scalar;

pub type Poly64 = Poly<f64>;
pub type PiecewisePoly64 = PiecewisePoly<f64>;
pub type TargetSpec64 = TargetSpec<f64>;
pub type ParamVec64 = ParamVec<f64>;
pub type Problem64 = Problem<f64>;
pub type HessianReport64 = HessianReport<f64>;
pub type ManifoldChart64 = ManifoldChart<f64>;
pub type TrajectoryRecord64 = TrajectoryRecord<f64>;

pub type Problem32 = Problem<f32>;
pub type ParamVec32 = ParamVec<f32>;
