//! Stationary Markov withdrawal strategies `a(x)` and their admissibility.
//!
//! Two representations exist. Step functions are stored as sorted
//! breakpoints and one value per piece; every piece is closed on the right,
//! so the value *at* a breakpoint comes from the piece on its left. This
//! makes `rate * 1(x > x0)` evaluate to `0` at `x0` itself. General
//! strategies wrap an arbitrary closure and can only be checked by sampling.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result, Rule};
use crate::model::ModelParams;
use crate::scalar::Real;

type Withdrawal<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Clone)]
pub enum Representation<T> {
    Piecewise { breakpoints: Vec<T>, values: Vec<T> },
    General(Withdrawal<T>),
}

#[derive(Clone)]
pub struct Strategy<T> {
    repr: Representation<T>,
    label: String,
}

/// `a(x) = rate * 1(x > level)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold<T> {
    pub level: T,
    pub rate: T,
}

impl<T: Real> Strategy<T> {
    /// Step function with `values.len() == breakpoints.len() + 1`. The first
    /// value applies on `(-inf, b1]`.
    pub fn piecewise(breakpoints: Vec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidStrategy(format!(
                "expected {} values for {} breakpoints, got {}",
                breakpoints.len() + 1,
                breakpoints.len(),
                values.len()
            )));
        }
        if let Some(b) = breakpoints.iter().find(|b| !b.is_finite()) {
            return Err(Error::InvalidStrategy(format!("non-finite breakpoint {b}")));
        }
        if let Some(w) = breakpoints.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidStrategy(format!(
                "breakpoints must be strictly increasing ({} then {})",
                breakpoints[w],
                breakpoints[w + 1]
            )));
        }
        let label = format!("piecewise{:?}", values);
        Ok(Self { repr: Representation::Piecewise { breakpoints, values }, label })
    }

    /// `a(x) = rate * 1(x > threshold)`, checked against the cap of `params`.
    pub fn threshold(params: &ModelParams<T>, rate: T, threshold: T) -> Result<Self> {
        if !(rate >= T::zero() && rate <= params.cap()) {
            return Err(Error::InvalidStrategy(format!(
                "rate {rate} outside [0, {}]",
                params.cap()
            )));
        }
        if !(threshold >= T::zero()) {
            return Err(Error::InvalidStrategy(format!(
                "threshold {threshold} is negative; withdrawal would be positive on ({threshold}, 0]"
            )));
        }
        if rate == T::zero() {
            return Ok(Self::zero());
        }
        Ok(Self {
            repr: Representation::Piecewise {
                breakpoints: vec![threshold],
                values: vec![T::zero(), rate],
            },
            label: format!("{rate}*1(x > {threshold})"),
        })
    }

    /// `a(x) = c * mu * 1(x > x0)` with `x0` taken from `params`.
    pub fn proportional_threshold(params: &ModelParams<T>, multiple: T) -> Result<Self> {
        Self::threshold(params, multiple * params.mu(), params.x0())
    }

    pub fn zero() -> Self {
        Self {
            repr: Representation::Piecewise { breakpoints: Vec::new(), values: vec![T::zero()] },
            label: "0".to_string(),
        }
    }

    pub fn general(label: impl Into<String>, f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self { repr: Representation::General(Arc::new(f)), label: label.into() }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn representation(&self) -> &Representation<T> {
        &self.repr
    }

    #[inline]
    pub fn evaluate(&self, x: T) -> T {
        match &self.repr {
            Representation::Piecewise { breakpoints, values } => {
                values[breakpoints.partition_point(|b| *b < x)]
            }
            Representation::General(f) => f(x),
        }
    }

    pub fn as_piecewise(&self) -> Option<(&[T], &[T])> {
        match &self.repr {
            Representation::Piecewise { breakpoints, values } => Some((breakpoints, values)),
            Representation::General(_) => None,
        }
    }

    /// Merges adjacent pieces with equal values.
    pub fn simplified(&self) -> Self {
        let Some((breakpoints, values)) = self.as_piecewise() else {
            return self.clone();
        };
        let mut bs = Vec::with_capacity(breakpoints.len());
        let mut vs = vec![values[0]];
        for (b, v) in breakpoints.iter().zip(&values[1..]) {
            if *v != *vs.last().unwrap() {
                bs.push(*b);
                vs.push(*v);
            }
        }
        Self { repr: Representation::Piecewise { breakpoints: bs, values: vs }, label: self.label.clone() }
    }

    /// Recognizes `rate * 1(x > level)` with `rate > 0`.
    pub fn as_threshold(&self) -> Option<Threshold<T>> {
        let s = self.simplified();
        match s.as_piecewise()? {
            ([level], [low, rate]) if *low == T::zero() && *rate > T::zero() => {
                Some(Threshold { level: *level, rate: *rate })
            }
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.simplified().as_piecewise(), Some(([], [v])) if *v == T::zero())
    }

    /// Exact average of a step function over `[lo, hi]`, `lo < hi`.
    pub fn piecewise_average(&self, lo: T, hi: T) -> Option<T> {
        let (breakpoints, values) = self.as_piecewise()?;
        let mut acc = T::zero();
        let mut left = lo;
        let first = breakpoints.partition_point(|b| *b <= lo);
        for (i, b) in breakpoints.iter().enumerate().skip(first) {
            if *b >= hi {
                break;
            }
            acc = acc + values[i] * (*b - left);
            left = *b;
        }
        let last = breakpoints.partition_point(|b| *b < hi);
        acc = acc + values[last] * (hi - left);
        Some(acc / (hi - lo))
    }

    /// Checks `0 <= a <= M` everywhere and `a = 0` on `x <= 0`.
    ///
    /// Step functions are checked piece by piece and `probe_grid` is
    /// ignored. General strategies are sampled on `probe_grid`, or on
    /// [`default_probe_grid`] when it is empty.
    pub fn validate(&self, params: &ModelParams<T>, probe_grid: &[T]) -> AdmissibilityReport<T> {
        let cap = params.cap();
        let mut violations = Vec::new();
        match &self.repr {
            Representation::Piecewise { breakpoints, values } => {
                let n = breakpoints.len();
                for (i, &v) in values.iter().enumerate() {
                    let lower = (i > 0).then(|| breakpoints[i - 1]);
                    let upper = (i < n).then(|| breakpoints[i]);
                    let inside = match (lower, upper) {
                        (_, Some(u)) => u,
                        (Some(l), None) => l + T::one(),
                        (None, None) => T::zero(),
                    };
                    if !v.is_finite() {
                        violations.push(Violation { x: inside, rule: Rule::Finite });
                        continue;
                    }
                    if v < T::zero() || v > cap {
                        violations.push(Violation { x: inside, rule: Rule::WithinCap });
                    }
                    let touches_nonpositive = lower.is_none_or(|l| l < T::zero());
                    if touches_nonpositive && v != T::zero() {
                        let x = match upper {
                            Some(u) if u <= T::zero() => u,
                            _ => T::zero(),
                        };
                        violations.push(Violation { x, rule: Rule::ZeroOnNonPositive });
                    }
                }
                AdmissibilityReport { violations, method: CheckMethod::Exact }
            }
            Representation::General(f) => {
                let grid = if probe_grid.is_empty() { default_probe_grid() } else { probe_grid.to_vec() };
                for &x in &grid {
                    let v = f(x);
                    if !v.is_finite() {
                        violations.push(Violation { x, rule: Rule::Finite });
                        continue;
                    }
                    if x <= T::zero() && v != T::zero() {
                        violations.push(Violation { x, rule: Rule::ZeroOnNonPositive });
                    }
                    if v < T::zero() || v > cap {
                        violations.push(Violation { x, rule: Rule::WithinCap });
                    }
                }
                AdmissibilityReport { violations, method: CheckMethod::Sampled(grid) }
            }
        }
    }

    /// `Ok(())` when [`Strategy::validate`] finds nothing.
    pub fn ensure_admissible(&self, params: &ModelParams<T>, probe_grid: &[T]) -> Result<()> {
        let report = self.validate(params, probe_grid);
        if report.admissible() {
            Ok(())
        } else {
            Err(Error::NotAdmissible {
                violations: report
                    .violations
                    .iter()
                    .map(|v| (v.x.to_f64().unwrap_or(f64::NAN), v.rule))
                    .collect(),
            })
        }
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        Ok(serde_json::from_str(s)?)
    }
}

/// Uniform grid on `[-50, 50]` with spacing `0.1`.
pub fn default_probe_grid<T: Real>() -> Vec<T> {
    (0..=1000).map(|i| T::lit(-50.0 + 0.1 * i as f64)).collect()
}

impl<T: fmt::Debug> fmt::Debug for Strategy<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Representation::Piecewise { breakpoints, values } => f
                .debug_struct("Strategy")
                .field("label", &self.label)
                .field("breakpoints", breakpoints)
                .field("values", values)
                .finish(),
            Representation::General(_) => {
                f.debug_struct("Strategy").field("label", &self.label).finish_non_exhaustive()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation<T> {
    pub x: T,
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMethod<T> {
    Exact,
    Sampled(Vec<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport<T> {
    pub violations: Vec<Violation<T>>,
    pub method: CheckMethod<T>,
}

impl<T> AdmissibilityReport<T> {
    pub fn admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct StrategySpec<T> {
    #[serde(rename = "type")]
    kind: String,
    breakpoints: Vec<T>,
    values: Vec<T>,
    #[serde(default)]
    label: String,
}

impl<T: Real + Serialize> Serialize for Strategy<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match &self.repr {
            Representation::Piecewise { breakpoints, values } => StrategySpec {
                kind: "piecewise".to_string(),
                breakpoints: breakpoints.clone(),
                values: values.clone(),
                label: self.label.clone(),
            }
            .serialize(serializer),
            Representation::General(_) => Err(serde::ser::Error::custom(format!(
                "general strategy '{}' has no serialized form",
                self.label
            ))),
        }
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for Strategy<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let spec = StrategySpec::<T>::deserialize(deserializer)?;
        if spec.kind != "piecewise" {
            return Err(serde::de::Error::custom(format!(
                "unknown strategy type '{}', expected 'piecewise'",
                spec.kind
            )));
        }
        let s = Strategy::piecewise(spec.breakpoints, spec.values).map_err(serde::de::Error::custom)?;
        Ok(if spec.label.is_empty() { s } else { s.with_label(spec.label) })
    }
}
