use std::io::Write;

use serde::Serialize;

use super::{Convention, OccupationSplit, ThresholdBalance};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Real;
use crate::strategy::{Strategy, Threshold};

/// `p(x) = amplitude * exp(rate * (x - anchor))` on `(lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpSegment<T> {
    pub lower: T,
    pub upper: T,
    pub amplitude: T,
    pub rate: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseExpDensity<T> {
    pub segments: Vec<ExpSegment<T>>,
    pub anchor: T,
    pub p_at_anchor: T,
    pub convention: Convention,
    mu: T,
    source: Threshold<T>,
    balance_split: OccupationSplit<T>,
}

/// Invariant density of `a(x) = c mu 1(x > x0)` with `1 < c` and `c mu <= M`.
pub fn closed_form_density<T: Real>(
    params: &ModelParams<T>,
    strategy: &Strategy<T>,
    convention: Convention,
) -> Result<PiecewiseExpDensity<T>> {
    strategy.ensure_admissible(params, &[])?;
    let Some(th) = strategy.as_threshold() else {
        if strategy.is_zero() {
            return Err(Error::Transient("a = 0 drifts to +inf".into()));
        }
        return Err(Error::UnsupportedStrategy(format!(
            "'{}' is not of the form c*mu*1(x > x0)",
            strategy.label()
        )));
    };
    let mu = params.mu();
    let balance = ThresholdBalance::new(mu, th.rate / mu, convention)?;
    let p0 = balance.p_at_anchor();
    let segments = vec![
        ExpSegment { lower: T::neg_infinity(), upper: th.level, amplitude: p0, rate: balance.rate_left() },
        ExpSegment { lower: th.level, upper: T::infinity(), amplitude: p0, rate: -balance.rate_right() },
    ];
    Ok(PiecewiseExpDensity {
        segments,
        anchor: th.level,
        p_at_anchor: p0,
        convention,
        mu,
        source: th,
        balance_split: balance.split(),
    })
}

impl<T: Real> PiecewiseExpDensity<T> {
    fn segment(&self, x: T) -> &ExpSegment<T> {
        // The anchor itself belongs to the left segment; both agree there.
        let i = self.segments.partition_point(|s| s.upper < x);
        &self.segments[i.min(self.segments.len() - 1)]
    }

    pub fn pdf(&self, x: T) -> T {
        let s = self.segment(x);
        s.amplitude * (s.rate * (x - self.anchor)).exp()
    }

    /// `p'` off the anchor.
    pub fn derivative(&self, x: T) -> T {
        self.segment(x).rate * self.pdf(x)
    }

    /// `p''` off the anchor.
    pub fn second_derivative(&self, x: T) -> T {
        let k = self.segment(x).rate;
        k * k * self.pdf(x)
    }

    /// Generating strategy `rate * 1(x > level)`.
    pub fn source(&self) -> Threshold<T> {
        self.source
    }

    /// Drift `mu - a(x)` of the generating strategy.
    pub fn drift(&self, x: T) -> T {
        if x > self.source.level {
            self.mu - self.source.rate
        } else {
            self.mu
        }
    }

    /// `(s2/2) p'' - (b p)'` at a point off the anchor, from the analytic
    /// derivatives of the segment.
    pub fn stationarity_residual(&self, x: T) -> T {
        let half_var = self.convention.noise_variance::<T>() / T::two();
        half_var * self.second_derivative(x) - self.drift(x) * self.derivative(x)
    }

    pub fn mass_between(&self, lo: T, hi: T) -> T {
        let mut total = T::zero();
        for s in &self.segments {
            let l = lo.max(s.lower);
            let h = hi.min(s.upper);
            if l < h {
                let e = |x: T| (s.rate * (x - self.anchor)).exp();
                total = total + s.amplitude / s.rate * (e(h) - e(l));
            }
        }
        total
    }

    pub fn total_mass(&self) -> T {
        self.mass_between(T::neg_infinity(), T::infinity())
    }

    pub fn rate_left(&self) -> T {
        self.segments[0].rate
    }

    pub fn rate_right(&self) -> T {
        -self.segments[1].rate
    }

    /// Truncation half-width `40 / min(rate_left, rate_right)`.
    pub fn default_half_width(&self) -> T {
        T::lit(40.0) / self.rate_left().min(self.rate_right())
    }

    /// CSV with header `x,p` on the given grid.
    pub fn write_csv<W: Write>(&self, grid: &[T], mut w: W) -> Result<()> {
        writeln!(w, "x,p")?;
        for &x in grid {
            writeln!(w, "{},{}", x, self.pdf(x))?;
        }
        Ok(())
    }
}

/// `p_plus = p(x0) / rate_right`, `p_minus = p(x0) / rate_left`.
pub fn occupation_probabilities<T: Real>(density: &PiecewiseExpDensity<T>) -> OccupationSplit<T> {
    density.balance_split
}

/// `int a(y) p(y) dy` for the strategy that generated `density`, integrated
/// piece by piece against the closed-form segments.
pub fn stationary_reward<T: Real>(density: &PiecewiseExpDensity<T>, strategy: &Strategy<T>) -> Result<T> {
    if strategy.as_threshold() != Some(density.source) {
        return Err(Error::StrategyMismatch(format!(
            "density was built for {:?}, got '{}'",
            density.source,
            strategy.label()
        )));
    }
    let s = strategy.simplified();
    let (breakpoints, values) = s.as_piecewise().expect("threshold strategies are piecewise");
    let mut lower = T::neg_infinity();
    let mut total = T::zero();
    for (i, &v) in values.iter().enumerate() {
        let upper = breakpoints.get(i).copied().unwrap_or(T::infinity());
        if v != T::zero() {
            total = total + v * density.mass_between(lower, upper);
        }
        lower = upper;
    }
    Ok(total)
}
