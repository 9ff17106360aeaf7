//! The ergodic Bellman equation
//! `sup_{a in [0, M]} [(mu - a) V' + (s2/2) V'' + a - r] = 0`.
//!
//! The bracket is affine in `a` with slope `1 - V'`, so the supremum is the
//! larger of the endpoint values `a = 0` and `a = M`. On each side of the
//! threshold the equation reduces to a linear second-order ODE:
//!
//! ```text
//! x < x0:  V1 = C1 + C2  exp(-k1 (x - x0)) + (r / mu) (x - x0)
//! x > x0:  V2 = C1~ + C2~ exp( k2 (x - x0)) + ((r - M) / (mu - M)) (x - x0)
//! ```
//!
//! with `k1 = 2 mu / s2` and `k2 = 2 (M - mu) / s2`. `s2` is the noise
//! variance of the chosen [`Convention`].

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Real;
use crate::stationary::Convention;
use crate::strategy::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A candidate `V` with one-sided first and second derivatives.
pub trait ValueFunction<T> {
    fn value(&self, x: T) -> T;
    fn derivative(&self, x: T, side: Side) -> T;
    fn second_derivative(&self, x: T, side: Side) -> T;
    /// Points where one-sided derivatives may differ.
    fn is_kink(&self, _x: T) -> bool {
        false
    }
}

/// `coeffs[0] + coeffs[1] x + coeffs[2] x^2 + ...`
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T> {
    pub coeffs: Vec<T>,
}

impl<T: Real> Polynomial<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        Self { coeffs }
    }

    fn horner(coeffs: impl DoubleEndedIterator<Item = T>, x: T) -> T {
        coeffs.rev().fold(T::zero(), |acc, c| acc * x + c)
    }
}

impl<T: Real> ValueFunction<T> for Polynomial<T> {
    fn value(&self, x: T) -> T {
        Self::horner(self.coeffs.iter().copied(), x)
    }

    fn derivative(&self, x: T, _side: Side) -> T {
        let d = self.coeffs.iter().enumerate().skip(1).map(|(i, &c)| c * T::from_usize_lossy(i));
        Self::horner(d, x)
    }

    fn second_derivative(&self, x: T, _side: Side) -> T {
        let d = self
            .coeffs
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, &c)| c * T::from_usize_lossy(i * (i - 1)));
        Self::horner(d, x)
    }
}

/// Two-region solution candidate; `x0` is the pasting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HjbCandidate<T> {
    pub c1: T,
    pub c2: T,
    pub c1_tilde: T,
    pub c2_tilde: T,
    pub x0: T,
    pub r: T,
    pub rate_left: T,
    pub rate_right: T,
    pub slope_left: T,
    pub slope_right: T,
    pub convention: Convention,
}

impl<T: Real> HjbCandidate<T> {
    /// Candidate with the regional rates and slopes implied by `params` and `r`.
    pub fn new(params: &ModelParams<T>, convention: Convention, r: T, x0: T, coeffs: [T; 4]) -> Self {
        let (mu, cap) = (params.mu(), params.cap());
        Self {
            c1: coeffs[0],
            c2: coeffs[1],
            c1_tilde: coeffs[2],
            c2_tilde: coeffs[3],
            x0,
            r,
            rate_left: convention.decay_rate(mu),
            rate_right: convention.decay_rate(cap - mu),
            slope_left: r / mu,
            slope_right: (r - cap) / (mu - cap),
            convention,
        }
    }

    /// Shifts `V` by a constant.
    pub fn with_gauge_shift(mut self, shift: T) -> Self {
        self.c1 = self.c1 + shift;
        self.c1_tilde = self.c1_tilde + shift;
        self
    }

    fn left_of(&self, x: T, side: Side) -> bool {
        x < self.x0 || (x == self.x0 && side == Side::Left)
    }

    /// `C2 = C2~ = 0`, i.e. no exponential mode survives.
    pub fn has_polynomial_growth(&self, tol: T) -> bool {
        self.c2.abs() <= tol && self.c2_tilde.abs() <= tol
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

impl<T: Real> ValueFunction<T> for HjbCandidate<T> {
    fn value(&self, x: T) -> T {
        let xi = x - self.x0;
        if self.left_of(x, Side::Left) {
            self.c1 + self.c2 * (-self.rate_left * xi).exp() + self.slope_left * xi
        } else {
            self.c1_tilde + self.c2_tilde * (self.rate_right * xi).exp() + self.slope_right * xi
        }
    }

    fn derivative(&self, x: T, side: Side) -> T {
        let xi = x - self.x0;
        if self.left_of(x, side) {
            -self.rate_left * self.c2 * (-self.rate_left * xi).exp() + self.slope_left
        } else {
            self.rate_right * self.c2_tilde * (self.rate_right * xi).exp() + self.slope_right
        }
    }

    fn second_derivative(&self, x: T, side: Side) -> T {
        let xi = x - self.x0;
        if self.left_of(x, side) {
            self.rate_left * self.rate_left * self.c2 * (-self.rate_left * xi).exp()
        } else {
            self.rate_right * self.rate_right * self.c2_tilde * (self.rate_right * xi).exp()
        }
    }

    fn is_kink(&self, x: T) -> bool {
        x == self.x0
    }
}

/// Residual at a point; one-sided values at kinks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Residual<T> {
    Smooth(T),
    OneSided { left: T, right: T },
}

impl<T: Real> Residual<T> {
    pub fn max_abs(&self) -> T {
        match *self {
            Residual::Smooth(v) => v.abs(),
            Residual::OneSided { left, right } => left.abs().max(right.abs()),
        }
    }
}

/// Optimal action set by the sign of `1 - V'(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSet {
    /// `V' > 1`: withdraw nothing.
    Zero,
    /// `V' < 1`: withdraw at the cap.
    Cap,
    /// `V' = 1`: every `a in [0, M]` is optimal.
    AnyInInterval,
}

impl ActionSet {
    pub fn contains<T: Real>(&self, a: T, cap: T) -> bool {
        match self {
            ActionSet::Zero => a == T::zero(),
            ActionSet::Cap => a == cap,
            ActionSet::AnyInInterval => a >= T::zero() && a <= cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArgsupStructure<T> {
    pub points: Vec<(T, ActionSet)>,
}

impl<T: Real> ArgsupStructure<T> {
    /// Whether `strategy` picks an optimal action at every probe point.
    pub fn admits(&self, strategy: &Strategy<T>, cap: T) -> bool {
        self.points.iter().all(|&(x, set)| set.contains(strategy.evaluate(x), cap))
    }
}

/// Result of [`BellmanEquation::solve_pasting`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PastingOutcome<T> {
    pub candidate: HjbCandidate<T>,
    pub polynomial_growth: bool,
}

impl<T: Real> PastingOutcome<T> {
    /// The candidate, or [`Error::GrowthViolation`] when an exponential
    /// mode is forced.
    pub fn into_polynomial(self) -> Result<HjbCandidate<T>> {
        if self.polynomial_growth {
            Ok(self.candidate)
        } else {
            let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
            Err(Error::GrowthViolation {
                r: f(self.candidate.r),
                c2: f(self.candidate.c2),
                c2_tilde: f(self.candidate.c2_tilde),
            })
        }
    }
}

/// The ergodic Bellman equation for one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellmanEquation<T> {
    pub params: ModelParams<T>,
    pub convention: Convention,
    /// Tolerance for `1 - V' = 0` and for vanishing exponential modes.
    pub tolerance: T,
}

impl<T: Real> BellmanEquation<T> {
    pub fn new(params: ModelParams<T>) -> Self {
        Self { params, convention: Convention::SdeConsistent, tolerance: T::lit(1e-12) }
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    /// `(mu - a) V' + (s2/2) V'' + a - r`.
    pub fn bracket(&self, v1: T, v2: T, r: T, a: T) -> T {
        let half_var = self.convention.noise_variance::<T>() / T::two();
        (self.params.mu() - a) * v1 + half_var * v2 + a - r
    }

    fn sup_bracket(&self, v1: T, v2: T, r: T) -> T {
        self.bracket(v1, v2, r, T::zero()).max(self.bracket(v1, v2, r, self.params.cap()))
    }

    pub fn residual(&self, v: &impl ValueFunction<T>, r: T, x: T) -> Residual<T> {
        let at = |side| self.sup_bracket(v.derivative(x, side), v.second_derivative(x, side), r);
        if v.is_kink(x) {
            Residual::OneSided { left: at(Side::Left), right: at(Side::Right) }
        } else {
            Residual::Smooth(at(Side::Right))
        }
    }

    /// Largest `|residual|` over `grid`, both sides counted at kinks.
    pub fn verify_on_grid(&self, v: &impl ValueFunction<T>, r: T, grid: &[T]) -> T {
        grid.iter().fold(T::zero(), |m, &x| m.max(self.residual(v, r, x).max_abs()))
    }

    /// CSV with header `x,residual`; kinks produce a left row then a right row.
    pub fn write_residual_csv<W: Write>(&self, v: &impl ValueFunction<T>, r: T, grid: &[T], mut w: W) -> Result<()> {
        writeln!(w, "x,residual")?;
        for &x in grid {
            match self.residual(v, r, x) {
                Residual::Smooth(res) => writeln!(w, "{x},{res}")?,
                Residual::OneSided { left, right } => {
                    writeln!(w, "{x},{left}")?;
                    writeln!(w, "{x},{right}")?;
                }
            }
        }
        Ok(())
    }

    /// Maximizing action set at each probe point. Kinks use the left
    /// derivative, matching the strategy convention that `a(x0)` belongs
    /// to the left piece.
    pub fn argsup_structure(&self, v: &impl ValueFunction<T>, probe_grid: &[T]) -> ArgsupStructure<T> {
        let points = probe_grid
            .iter()
            .map(|&x| {
                let d = v.derivative(x, Side::Left);
                let slope = T::one() - d;
                let tol = self.tolerance * T::one().max(d.abs());
                let set = if slope.abs() <= tol {
                    ActionSet::AnyInInterval
                } else if slope > T::zero() {
                    ActionSet::Cap
                } else {
                    ActionSet::Zero
                };
                (x, set)
            })
            .collect();
        ArgsupStructure { points }
    }

    /// Solves the two regional ODEs with `C^0` and `C^1` pasting at `x0` and
    /// `V'(x0) = 1`, with gauge `C1 = 0`. Exponential modes `C2`, `C2~`
    /// vanish only for `r = mu`; otherwise the outcome is flagged.
    pub fn solve_pasting(&self, r: T, x0: T) -> Result<PastingOutcome<T>> {
        if !r.is_finite() || !x0.is_finite() {
            return Err(Error::InvalidParams(format!("r = {r} and x0 = {x0} must be finite")));
        }
        let probe = HjbCandidate::new(&self.params, self.convention, r, x0, [T::zero(); 4]);
        let c2 = (probe.slope_left - T::one()) / probe.rate_left;
        let c2_tilde = (T::one() - probe.slope_right) / probe.rate_right;
        let c1 = T::zero();
        let c1_tilde = c1 + c2 - c2_tilde;
        let candidate = HjbCandidate::new(&self.params, self.convention, r, x0, [c1, c2, c1_tilde, c2_tilde]);
        Ok(PastingOutcome { polynomial_growth: candidate.has_polynomial_growth(self.tolerance), candidate })
    }

    /// `solve_pasting` for each `r`, with the threshold taken from `params`.
    pub fn growth_sweep(&self, rs: &[T]) -> Result<Vec<PastingOutcome<T>>> {
        rs.iter().map(|&r| self.solve_pasting(r, self.params.x0())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn eq() -> BellmanEquation<f64> {
        BellmanEquation::new(ModelParams::new(1.0, 3.0, 0.0).unwrap())
    }

    fn linear(slope: f64) -> Polynomial<f64> {
        Polynomial::new(vec![0.0, slope])
    }

    #[test]
    fn identity_value_solves_with_r_mu() {
        for x in [-10.0, 0.0, 3.5] {
            assert_eq!(eq().residual(&linear(1.0), 1.0, x), Residual::Smooth(0.0));
        }
    }

    #[test]
    fn steeper_value_prefers_zero_action() {
        assert_eq!(eq().residual(&linear(2.0), 1.0, 0.7), Residual::Smooth(1.0));
        assert_eq!(eq().residual(&linear(1.0), 0.0, 0.7), Residual::Smooth(1.0));
    }

    #[test]
    fn grid_verification() {
        let grid: Vec<f64> = (0..10_000).map(|i| -50.0 + 100.0 * i as f64 / 9999.0).collect();
        assert_eq!(eq().verify_on_grid(&linear(1.0), 1.0, &grid), 0.0);
        assert!((eq().verify_on_grid(&linear(1.0), 1.1, &grid) - 0.1).abs() < 1e-15);
        let solved = eq().solve_pasting(1.0, 0.0).unwrap().into_polynomial().unwrap();
        assert_eq!(eq().verify_on_grid(&solved, solved.r, &grid), 0.0);
    }

    #[test]
    fn pasting_at_r_mu() {
        for conv in [Convention::SdeConsistent, Convention::PaperNotation] {
            for x0 in [0.0, 2.5] {
                let out = eq().with_convention(conv).solve_pasting(1.0, x0).unwrap();
                assert!(out.polynomial_growth);
                let c = out.candidate;
                assert_eq!((c.c2, c.c2_tilde), (0.0, 0.0));
                assert_eq!(c.c1, c.c1_tilde);
                for x in [-4.0, x0, 7.0] {
                    assert!((c.value(x) - (c.c1 + x - x0)).abs() < 1e-14);
                    assert_eq!(c.derivative(x, Side::Left), 1.0);
                }
            }
        }
    }

    #[test]
    fn pasting_off_mu_forces_exponential_mode() {
        // `PaperNotation` rates: V'(x0-) = -mu C2 + r/mu = 1 gives C2 = (r/mu - 1)/mu.
        let paper = eq().with_convention(Convention::PaperNotation);
        let out = paper.solve_pasting(0.5, 0.0).unwrap();
        assert!(!out.polynomial_growth);
        assert!((out.candidate.c2 - (-0.5)).abs() < 1e-15);
        assert!(matches!(out.into_polynomial(), Err(Error::GrowthViolation { .. })));
        // Unit-noise rates are twice as large.
        let out = eq().solve_pasting(0.5, 0.0).unwrap();
        assert!((out.candidate.c2 - (-0.25)).abs() < 1e-15);
    }

    #[test]
    fn pasted_candidate_is_c1() {
        let c = eq().solve_pasting(0.8, 1.0).unwrap().candidate;
        let eps = 1e-9;
        assert!((c.value(1.0 - eps) - c.value(1.0 + eps)).abs() < 1e-8);
        assert!((c.derivative(1.0, Side::Left) - c.derivative(1.0, Side::Right)).abs() < 1e-14);
        assert!((c.derivative(1.0, Side::Left) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kinked_candidate_reports_both_sides() {
        let p = ModelParams::new(1.0, 3.0, 0.0).unwrap();
        let kinked = HjbCandidate::new(&p, Convention::SdeConsistent, 1.0, 0.0, [0.0, 0.5, 0.0, 0.0]);
        match eq().residual(&kinked, 1.0, 0.0) {
            Residual::OneSided { left, right } => {
                assert!(left != right);
                assert_eq!(right, 0.0);
            }
            r => panic!("expected one-sided, got {r:?}"),
        }
        let mut buf = Vec::new();
        eq().write_residual_csv(&kinked, 1.0, &[0.0, 1.0], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    #[test]
    fn argsup_classification() {
        let grid = [-3.0, 0.0, 0.5, 4.0];
        let all = |s: &ArgsupStructure<f64>, set| s.points.iter().all(|p| p.1 == set);
        assert!(all(&eq().argsup_structure(&Polynomial::new(vec![5.0, 1.0]), &grid), ActionSet::AnyInInterval));
        assert!(all(&eq().argsup_structure(&linear(2.0), &grid), ActionSet::Zero));
        let half_square = Polynomial::new(vec![0.0, 0.0, 0.5]);
        assert_eq!(eq().argsup_structure(&half_square, &[0.5]).points, vec![(0.5, ActionSet::Cap)]);
    }

    #[test]
    fn solved_argsup_admits_admissible_strategies() {
        let e = eq();
        let c = e.solve_pasting(1.0, 0.0).unwrap().candidate;
        let grid: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.5).collect();
        let s = e.argsup_structure(&c, &grid);
        for strat in [
            Strategy::threshold(&e.params, 2.0, 0.0).unwrap(),
            Strategy::threshold(&e.params, 3.0, 1.0).unwrap(),
            Strategy::piecewise(vec![0.0, 5.0], vec![0.0, 1.0, 3.0]).unwrap(),
        ] {
            assert!(s.admits(&strat, 3.0));
        }
        let steep = e.argsup_structure(&linear(2.0), &grid);
        assert!(!steep.admits(&Strategy::threshold(&e.params, 2.0, 0.0).unwrap(), 3.0));
    }

    #[test]
    fn only_r_mu_has_polynomial_growth() {
        let rs: Vec<f64> = (-20..=20).map(|i| 1.0 + 0.01 * i as f64).collect();
        for out in eq().growth_sweep(&rs).unwrap() {
            assert_eq!(out.polynomial_growth, out.candidate.r == 1.0, "r = {}", out.candidate.r);
        }
    }

    #[test]
    fn candidate_json() {
        let c = eq().solve_pasting(1.0, 0.0).unwrap().candidate;
        let v: serde_json::Value = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        for key in ["c1", "c2", "c1_tilde", "c2_tilde", "x0", "r"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    proptest! {
        #[test]
        fn sup_matches_dense_scan(v1 in -3.0f64..3.0, v2 in -3.0f64..3.0, r in 0.0f64..2.0) {
            let e = eq();
            let scan = (0..=3000)
                .map(|i| e.bracket(v1, v2, r, 3.0 * i as f64 / 3000.0))
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((e.sup_bracket(v1, v2, r) - scan).abs() < 1e-12);
        }

        #[test]
        fn gauge_invariance(shift in -100.0f64..100.0, r in 0.5f64..1.5, x in -5.0f64..5.0) {
            let e = eq();
            let c = e.solve_pasting(r, 0.0).unwrap().candidate;
            let shifted = c.with_gauge_shift(shift);
            prop_assert_eq!(e.residual(&c, r, x), e.residual(&shifted, r, x));
            prop_assert_eq!(e.argsup_structure(&c, &[x]), e.argsup_structure(&shifted, &[x]));
            let p = Polynomial::new(vec![0.0, 1.0, 0.1]);
            let q = Polynomial::new(vec![shift, 1.0, 0.1]);
            prop_assert_eq!(e.residual(&p, r, x), e.residual(&q, r, x));
        }
    }
}
