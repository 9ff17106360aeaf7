//! Scalar abstractions.
//!
//! [`Scalar`] is the minimal field-like bound used by the closed-form
//! occupation arithmetic, which also runs on exact rationals. [`Real`] adds
//! the transcendental functions and Gaussian sampling needed by the
//! simulator, the density evaluator and the Bellman residuals.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Ordered signed field element: `f32`, `f64`, `Ratio<i64>`, ...
pub trait Scalar: Num + Signed + Copy + PartialOrd + Debug + Send + Sync + 'static {
    fn two() -> Self {
        Self::one() + Self::one()
    }
}

impl<T> Scalar for T where T: Num + Signed + Copy + PartialOrd + Debug + Send + Sync + 'static {}

/// Floating-point scalar usable everywhere in the crate.
pub trait Real: Scalar + Float + FromPrimitive + ToPrimitive + Display + Default + serde::Serialize {
    /// One draw from N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Converts an `f64` literal. Panics only if the literal is not
    /// representable at all, which cannot happen for `f32`/`f64`.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }
}

impl Real for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Real for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}
