//! Model parameters of the controlled reserve diffusion
//! `dX = (mu - a(X)) dt + dW`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Premium rate `mu`, withdrawal cap `M` and the threshold `x0` used by the
/// threshold strategy families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams<T> {
    mu: T,
    cap: T,
    x0: T,
}

impl<T: Scalar> ModelParams<T> {
    pub fn new(mu: T, cap: T, x0: T) -> Result<Self> {
        if !(mu > T::zero()) {
            return Err(Error::InvalidParams(format!("mu must be > 0, got {mu:?}")));
        }
        if !(cap > mu) {
            return Err(Error::InvalidParams(format!(
                "cap M must exceed mu, got M = {cap:?}, mu = {mu:?}"
            )));
        }
        if !(x0 >= T::zero()) {
            return Err(Error::InvalidParams(format!("x0 must be >= 0, got {x0:?}")));
        }
        Ok(Self { mu, cap, x0 })
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn cap(&self) -> T {
        self.cap
    }

    pub fn x0(&self) -> T {
        self.x0
    }

    /// Same model with a different threshold.
    pub fn with_x0(&self, x0: T) -> Result<Self> {
        Self::new(self.mu, self.cap, x0)
    }

    /// Drift `mu - a` for a withdrawal rate `a`.
    #[inline]
    pub fn drift(&self, withdrawal: T) -> T {
        self.mu - withdrawal
    }
}
