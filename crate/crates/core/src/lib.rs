//! Numerical laboratory for the ergodic dividend-control diffusion
//! `dX = (mu - a(X)) dt + dW` with `0 <= a <= M`, `a = 0` on `x <= 0`.
//!
//! Everything is generic over the scalar type. Simulation, densities and
//! Bellman residuals need a [`Real`] (`f32`/`f64`); the closed-form
//! occupation arithmetic in [`stationary::ThresholdBalance`] only needs a
//! [`Scalar`] and runs exactly on rationals. The `*64` aliases below cover
//! the common case.

// `!(x > y)` rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ergodic;
pub mod error;
pub mod hjb;
pub mod model;
pub mod scalar;
pub mod sde;
pub mod stationary;
pub mod stats;
pub mod strategy;

pub use error::{Error, Result, Rule};
pub use model::ModelParams;
pub use scalar::{Real, Scalar};
pub use sde::{simulate_ensemble, simulate_path, EnsembleStats, SimConfig, Trajectory};
pub use stationary::Convention;
pub use strategy::Strategy;

pub type Rational = num_rational::Ratio<i64>;

pub type ModelParams64 = ModelParams<f64>;
pub type Strategy64 = Strategy<f64>;
pub type SimConfig64 = SimConfig<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type EnsembleStats64 = EnsembleStats<f64>;
pub type Density64 = stationary::PiecewiseExpDensity<f64>;
pub type GridDensity64 = stationary::GridDensity<f64>;
pub type HjbCandidate64 = hjb::HjbCandidate<f64>;
pub type Bellman64 = hjb::BellmanEquation<f64>;
pub type ExactBalance = stationary::ThresholdBalance<Rational>;
pub type ExactSplit = stationary::OccupationSplit<Rational>;
