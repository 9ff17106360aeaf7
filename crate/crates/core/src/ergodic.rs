//! Long-run average reward, the `E X_t / t -> 0` diagnostic, and the two
//! cross-checks of `r = mu`: the drift identity
//! `E X_T - x = E int_0^T (mu - a(X_s)) ds` and the law of large numbers
//! `(1/T) int_0^T a(X_s) ds -> int a dmu^a`.
//!
//! Reward estimators drop the first `burn_in_fraction` of the horizon.
//! Ensemble estimators average independent paths; the LLN check and the
//! occupation fraction follow a single long path (ensemble member `0`).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Real;
use crate::sde::{run_ensemble, summarize_path, PathProbe, PathSummary, SimConfig};
use crate::stationary::{stationary_reward, PiecewiseExpDensity};
use crate::stats::mean_and_std_error;
use crate::strategy::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RewardEstimate<T> {
    pub value: T,
    pub std_error: T,
    pub horizon: T,
    pub n_paths: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ErgodicConsistent,
    TransientPositive,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::ErgodicConsistent => "ergodic-consistent",
            Verdict::TransientPositive => "transient-positive",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Classification of the final `E X_T / T`, in units of `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerdictThresholds<T> {
    /// `|ratio| < ergodic_below * mu` reads as ergodic.
    pub ergodic_below: T,
    /// `ratio > transient_above * mu` reads as escape to `+inf`.
    pub transient_above: T,
}

impl<T: Real> Default for VerdictThresholds<T> {
    fn default() -> Self {
        Self { ergodic_below: T::lit(0.02), transient_above: T::lit(0.2) }
    }
}

impl<T: Real> VerdictThresholds<T> {
    pub fn classify(&self, ratio: T, mu: T) -> Verdict {
        if ratio.abs() < self.ergodic_below * mu {
            Verdict::ErgodicConsistent
        } else if ratio > self.transient_above * mu {
            Verdict::TransientPositive
        } else {
            Verdict::Inconclusive
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicityDiagnostic<T> {
    /// `(t, mean X_t / t)` at each checkpoint.
    pub ratio_curve: Vec<(T, T)>,
    pub verdict: Verdict,
    pub final_ratio: T,
}

impl<T: Real + Serialize> ErgodicityDiagnostic<T> {
    /// CSV with header `t,ratio`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,ratio")?;
        for (t, r) in &self.ratio_curve {
            writeln!(w, "{t},{r}")?;
        }
        Ok(())
    }

    pub fn verdict_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&serde_json::json!({
            "verdict": self.verdict,
            "final_ratio": self.final_ratio,
        }))?)
    }
}

fn reward_from_paths<T: Real>(paths: &[PathSummary<T>], cfg: &SimConfig<T>) -> RewardEstimate<T> {
    let window = T::from_usize_lossy(cfg.n_steps() - cfg.burn_in_step()) * cfg.dt;
    let rates: Vec<T> = paths.iter().map(|p| p.reward_after_burn_in / window).collect();
    let (value, std_error) = mean_and_std_error(&rates);
    RewardEstimate { value, std_error, horizon: cfg.effective_horizon(), n_paths: paths.len() }
}

fn checkpoint_steps<T: Real>(cfg: &SimConfig<T>, checkpoints: &[T]) -> Result<Vec<usize>> {
    let n = cfg.n_steps();
    let steps: Vec<usize> = checkpoints.iter().map(|&t| cfg.step_at(t)).collect();
    if checkpoints.iter().any(|&t| !(t > T::zero())) || steps.iter().any(|&s| s == 0 || s > n) {
        return Err(Error::InvalidConfig("checkpoints must lie in (0, horizon]".into()));
    }
    if steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "checkpoints must be increasing and at least one step apart".into(),
        ));
    }
    Ok(steps)
}

/// Reward estimate and drift diagnostic from one shared ensemble.
pub fn analyze<T: Real>(
    params: &ModelParams<T>,
    strategy: &Strategy<T>,
    cfg: &SimConfig<T>,
    checkpoints: &[T],
    thresholds: &VerdictThresholds<T>,
) -> Result<(RewardEstimate<T>, ErgodicityDiagnostic<T>)> {
    cfg.validate()?;
    let steps = if checkpoints.is_empty() {
        vec![cfg.n_steps()]
    } else {
        checkpoint_steps(cfg, checkpoints)?
    };
    let probe = PathProbe { burn_in_step: cfg.burn_in_step(), checkpoint_steps: steps.clone(), level: None };
    let paths = run_ensemble(params, strategy, cfg, &probe)?;
    let reward = reward_from_paths(&paths, cfg);
    let ratio_curve: Vec<(T, T)> = steps
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let t = T::from_usize_lossy(s) * cfg.dt;
            let states: Vec<T> = paths.iter().map(|p| p.checkpoint_states[j]).collect();
            (t, mean_and_std_error(&states).0 / t)
        })
        .collect();
    let final_ratio = ratio_curve.last().expect("at least one checkpoint").1;
    let diagnostic =
        ErgodicityDiagnostic { verdict: thresholds.classify(final_ratio, params.mu()), final_ratio, ratio_curve };
    Ok((reward, diagnostic))
}

/// Ensemble mean of `(1/T') int a(X_s) ds` over the post-burn-in window.
pub fn estimate_reward<T: Real>(
    params: &ModelParams<T>,
    strategy: &Strategy<T>,
    cfg: &SimConfig<T>,
) -> Result<RewardEstimate<T>> {
    cfg.validate()?;
    let probe = PathProbe { burn_in_step: cfg.burn_in_step(), ..PathProbe::default() };
    let paths = run_ensemble(params, strategy, cfg, &probe)?;
    Ok(reward_from_paths(&paths, cfg))
}

/// `E X_t / t` at `checkpoints` with the default verdict thresholds.
pub fn drift_diagnostic<T: Real>(
    params: &ModelParams<T>,
    strategy: &Strategy<T>,
    cfg: &SimConfig<T>,
    checkpoints: &[T],
) -> Result<ErgodicityDiagnostic<T>> {
    Ok(analyze(params, strategy, cfg, checkpoints, &VerdictThresholds::default())?.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LlnCheck<T> {
    pub time_average: T,
    pub stationary: T,
    pub discrepancy: T,
}

fn reject_transient<T: Real>(params: &ModelParams<T>, strategy: &Strategy<T>) -> Result<()> {
    if strategy.is_zero() {
        return Err(Error::Transient("a = 0 has no invariant density".into()));
    }
    if let Some(th) = strategy.as_threshold() {
        if th.rate <= params.mu() {
            return Err(Error::Transient(format!("withdrawal {} <= mu above the threshold", th.rate)));
        }
    }
    Ok(())
}

/// `|time average of a along one path - int a p|`.
pub fn lln_crosscheck<T: Real>(
    params: &ModelParams<T>,
    strategy: &Strategy<T>,
    cfg: &SimConfig<T>,
    density: &PiecewiseExpDensity<T>,
) -> Result<LlnCheck<T>> {
    reject_transient(params, strategy)?;
    let stationary = stationary_reward(density, strategy)?;
    cfg.validate()?;
    strategy.ensure_admissible(params, &[])?;
    let probe = PathProbe { burn_in_step: cfg.burn_in_step(), ..PathProbe::default() };
    let path = summarize_path(params, strategy, cfg, 0, &probe)?;
    let window = T::from_usize_lossy(cfg.n_steps() - cfg.burn_in_step()) * cfg.dt;
    let time_average = path.reward_after_burn_in / window;
    Ok(LlnCheck { time_average, stationary, discrepancy: (time_average - stationary).abs() })
}

/// Fraction of post-burn-in grid points of one path with `X_k > level`.
pub fn occupation_fraction<T: Real>(
    params: &ModelParams<T>,
    strategy: &Strategy<T>,
    cfg: &SimConfig<T>,
    level: T,
) -> Result<T> {
    cfg.validate()?;
    strategy.ensure_admissible(params, &[])?;
    let probe = PathProbe { burn_in_step: cfg.burn_in_step(), checkpoint_steps: Vec::new(), level: Some(level) };
    let path = summarize_path(params, strategy, cfg, 0, &probe)?;
    Ok(T::from_usize_lossy(path.steps_above) / T::from_usize_lossy(cfg.n_steps() - cfg.burn_in_step()))
}

/// Both sides of `E X_T - x = E int_0^T (mu - a(X_s)) ds` from one ensemble.
///
/// The drift integral is the trapezoidal rule on the simulation grid. The
/// realized Brownian parts of the same paths are subtracted as a control
/// variate (they have mean zero), so `residual` is what remains of the
/// identity after the shared noise cancels: the gap between trapezoidal and
/// left-endpoint quadrature, bounded per path by `M dt / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftIdentity<T> {
    pub mean_displacement: T,
    pub mean_drift_integral: T,
    pub mean_noise: T,
    /// `|mean_displacement - mean_drift_integral|`, martingale noise included.
    pub raw_gap: T,
    /// `|mean_displacement - mean_drift_integral - mean_noise|`.
    pub residual: T,
    /// `M dt / 2`.
    pub quadrature_bound: T,
}

pub fn proof1_identity_check<T: Real>(
    params: &ModelParams<T>,
    strategy: &Strategy<T>,
    cfg: &SimConfig<T>,
) -> Result<DriftIdentity<T>> {
    let paths = run_ensemble(params, strategy, cfg, &PathProbe::default())?;
    let mean = |f: &dyn Fn(&PathSummary<T>) -> T| {
        mean_and_std_error(&paths.iter().map(f).collect::<Vec<_>>()).0
    };
    let mean_displacement = mean(&|p| p.final_state - cfg.x_init);
    let mean_drift_integral = mean(&|p| p.drift_trapezoid);
    let mean_noise = mean(&|p| p.noise);
    Ok(DriftIdentity {
        mean_displacement,
        mean_drift_integral,
        mean_noise,
        raw_gap: (mean_displacement - mean_drift_integral).abs(),
        residual: (mean_displacement - mean_drift_integral - mean_noise).abs(),
        quadrature_bound: params.cap() * cfg.dt / T::two(),
    })
}
