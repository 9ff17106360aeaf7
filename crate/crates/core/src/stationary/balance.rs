use serde::Serialize;

use super::Convention;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Closed-form bookkeeping for `a(x) = c mu 1(x > x0)` that needs only field
/// operations, so it runs on exact rationals as well as on floats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdBalance<T> {
    mu: T,
    multiple: T,
    /// Decay rate on the left of the threshold (drift `mu`).
    rate_left: T,
    /// Decay rate on the right of the threshold (drift `-(c - 1) mu`).
    rate_right: T,
    convention: Convention,
}

impl<T: Scalar> ThresholdBalance<T> {
    pub fn new(mu: T, multiple: T, convention: Convention) -> Result<Self> {
        if !(mu > T::zero()) {
            return Err(Error::InvalidParams(format!("mu must be > 0, got {mu:?}")));
        }
        if !(multiple > T::one()) {
            return Err(Error::Transient(format!(
                "withdrawal multiple c = {multiple:?} <= 1 leaves non-negative drift above the threshold"
            )));
        }
        Ok(Self {
            mu,
            multiple,
            rate_left: convention.decay_rate(mu),
            rate_right: convention.decay_rate((multiple - T::one()) * mu),
            convention,
        })
    }

    pub fn rate_left(&self) -> T {
        self.rate_left
    }

    pub fn rate_right(&self) -> T {
        self.rate_right
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// Normalizing density value at the threshold.
    pub fn p_at_anchor(&self) -> T {
        self.rate_right * self.rate_left / (self.rate_right + self.rate_left)
    }

    pub fn split(&self) -> OccupationSplit<T> {
        let p0 = self.p_at_anchor();
        OccupationSplit { p_minus: p0 / self.rate_left, p_plus: p0 / self.rate_right }
    }

    /// `0 * p_minus + c mu * p_plus`.
    pub fn reward(&self) -> T {
        self.multiple * self.mu * self.split().p_plus
    }
}

/// Stationary mass on `(-inf, x0]` and `(x0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OccupationSplit<T> {
    pub p_minus: T,
    pub p_plus: T,
}

impl<T: Serialize> OccupationSplit<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}
