//! Invariant densities of threshold strategies.
//!
//! With constant drift `b` on a half-line, the stationary equation
//! `(s2 / 2) p'' - (b p)' = 0` with zero flux gives `p ~ exp(2 b x / s2)`,
//! so each side of the threshold decays at rate `2 |b| / s2`. The model's
//! own noise has `s2 = 1`. [`Convention::PaperNotation`] uses `s2 = 2`,
//! under which the decay rates read `mu` and `(c - 1) mu` and the symmetric
//! case has `p(x0) = mu / 2`. Occupation probabilities and the stationary
//! reward only depend on the ratio of the rates and agree in both.

mod balance;
mod density;
mod fokker_planck;
mod tridiagonal;

pub use balance::{OccupationSplit, ThresholdBalance};
pub use density::{closed_form_density, occupation_probabilities, stationary_reward, ExpSegment, PiecewiseExpDensity};
pub use fokker_planck::{solve_fokker_planck, GridDensity};
pub use tridiagonal::solve_tridiagonal;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// Unit noise variance, generator `(1/2) d^2/dx^2`.
    #[default]
    SdeConsistent,
    /// Noise variance `2`, generator `d^2/dx^2`.
    PaperNotation,
}

impl Convention {
    pub fn noise_variance<T: Scalar>(self) -> T {
        match self {
            Convention::SdeConsistent => T::one(),
            Convention::PaperNotation => T::two(),
        }
    }

    /// Exponential decay rate of the invariant density under constant drift `b`.
    pub fn decay_rate<T: Scalar>(self, drift: T) -> T {
        T::two() * drift.abs() / self.noise_variance::<T>()
    }
}
