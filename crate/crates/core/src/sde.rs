//! Euler–Maruyama simulation of `dX = (mu - a(X)) dt + dW`.
//!
//! The scheme is `X_{k+1} = X_k + (mu - a(X_k)) dt + sqrt(dt) xi_k` with the
//! withdrawal evaluated at the left grid point, and the reward integral
//! `int_0^t a(X_s) ds` is accumulated by the same left-endpoint rule.
//!
//! Seeding: every path owns a ChaCha8 stream. The generator is keyed by the
//! master seed (`seed_from_u64`) and path `i` uses stream number `i`, so an
//! ensemble member is reproducible on its own and independent of execution
//! order. `simulate_path` is path `0` of the ensemble with the same seed.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Real;
use crate::stats::mean_and_std_error;
use crate::strategy::{default_probe_grid, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig<T> {
    pub dt: T,
    pub horizon: T,
    pub seed: u64,
    pub n_paths: usize,
    pub x_init: T,
    /// Multiplies the Brownian increment; `0` gives the deterministic
    /// test mode `dX = (mu - a) dt`.
    pub noise_scale: T,
    /// A path aborts once `|X|` exceeds this.
    pub blowup_bound: T,
    /// Trajectories keep every `record_every`-th grid point (and the last).
    pub record_every: usize,
    /// Leading fraction of the horizon discarded by long-run estimators.
    pub burn_in_fraction: T,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(1e-3),
            horizon: T::lit(1e4),
            seed: 0,
            n_paths: 100,
            x_init: T::one(),
            noise_scale: T::one(),
            blowup_bound: T::lit(1e6),
            record_every: 1,
            burn_in_fraction: T::lit(0.1),
        }
    }
}

impl<T: Real> SimConfig<T> {
    pub fn new(dt: T, horizon: T, seed: u64, n_paths: usize, x_init: T) -> Result<Self> {
        let cfg = Self { dt, horizon, seed, n_paths, x_init, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.dt > T::zero() && self.dt.is_finite()) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.horizon.is_finite() && self.dt <= self.horizon) {
            return bad(format!("need dt <= horizon, got dt = {}, horizon = {}", self.dt, self.horizon));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be >= 1".into());
        }
        if !self.x_init.is_finite() {
            return bad(format!("x_init must be finite, got {}", self.x_init));
        }
        if !(self.noise_scale >= T::zero() && self.noise_scale.is_finite()) {
            return bad(format!("noise_scale must be >= 0, got {}", self.noise_scale));
        }
        if !(self.blowup_bound > self.x_init.abs()) {
            return bad(format!("blowup_bound {} must exceed |x_init|", self.blowup_bound));
        }
        if self.record_every == 0 {
            return bad("record_every must be >= 1".into());
        }
        if !(self.burn_in_fraction >= T::zero() && self.burn_in_fraction < T::one()) {
            return bad(format!("burn_in_fraction must lie in [0, 1), got {}", self.burn_in_fraction));
        }
        Ok(())
    }

    /// Number of Euler steps, `round(horizon / dt)`. The effective horizon
    /// is `n_steps * dt`.
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round().to_usize().unwrap_or(1).max(1)
    }

    pub fn effective_horizon(&self) -> T {
        T::from_usize_lossy(self.n_steps()) * self.dt
    }

    /// Grid index nearest to time `t`.
    pub fn step_at(&self, t: T) -> usize {
        (t / self.dt).round().to_usize().unwrap_or(0)
    }

    pub fn burn_in_step(&self) -> usize {
        (self.burn_in_fraction * T::from_usize_lossy(self.n_steps())).floor().to_usize().unwrap_or(0)
    }
}

/// RNG for ensemble member `path_index`: ChaCha8 keyed by `seed`, on stream
/// `path_index`. Each path's noise depends only on `(seed, path_index)`.
pub fn path_rng(seed: u64, path_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index as u64);
    rng
}

/// Drives one Euler–Maruyama path. `visit(k, x_k, a_k, dw_k)` sees each
/// grid state before the update; the return value is `(x_N, a(x_N))`.
fn integrate<T, F>(
    params: &ModelParams<T>,
    strategy: &Strategy<T>,
    cfg: &SimConfig<T>,
    path_index: usize,
    mut visit: F,
) -> Result<(T, T)>
where
    T: Real,
    F: FnMut(usize, T, T, T),
{
    let mut rng = path_rng(cfg.seed, path_index);
    let dt = cfg.dt;
    let noise = cfg.noise_scale * dt.sqrt();
    let bound = cfg.blowup_bound;
    let mut x = cfg.x_init;
    for k in 0..cfg.n_steps() {
        let a = strategy.evaluate(x);
        let dw = noise * T::standard_normal(&mut rng);
        visit(k, x, a, dw);
        x = x + params.drift(a) * dt + dw;
        if !x.is_finite() {
            return Err(Error::NonFinite { step: k + 1 });
        }
        if x.abs() > bound {
            return Err(Error::BlowUp {
                step: k + 1,
                value: x.to_f64().unwrap_or(f64::NAN),
                bound: bound.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok((x, strategy.evaluate(x)))
}

fn check_inputs<T: Real>(params: &ModelParams<T>, strategy: &Strategy<T>, cfg: &SimConfig<T>) -> Result<()> {
    cfg.validate()?;
    let mut grid = default_probe_grid();
    grid.push(cfg.x_init);
    strategy.ensure_admissible(params, &grid)
}

/// A recorded sample path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<T>,
    pub reward_integral: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> T {
        *self.states.last().expect("trajectory has at least the initial point")
    }

    pub fn final_reward(&self) -> T {
        *self.reward_integral.last().expect("trajectory has at least the initial point")
    }

    /// CSV with header `t,x,reward_integral`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,reward_integral")?;
        for i in 0..self.len() {
            writeln!(w, "{},{},{}", self.times[i], self.states[i], self.reward_integral[i])?;
        }
        Ok(())
    }
}

/// Simulates a single path (ensemble member `0` of `cfg.seed`).
pub fn simulate_path<T: Real>(
    params: &ModelParams<T>,
    strategy: &Strategy<T>,
    cfg: &SimConfig<T>,
) -> Result<Trajectory<T>> {
    check_inputs(params, strategy, cfg)?;
    let n = cfg.n_steps();
    let stride = cfg.record_every;
    let cap = n / stride + 2;
    let mut traj = Trajectory {
        times: Vec::with_capacity(cap),
        states: Vec::with_capacity(cap),
        reward_integral: Vec::with_capacity(cap),
    };
    let mut reward = T::zero();
    let (x_n, _) = integrate(params, strategy, cfg, 0, |k, x, a, _| {
        if k % stride == 0 {
            traj.times.push(T::from_usize_lossy(k) * cfg.dt);
            traj.states.push(x);
            traj.reward_integral.push(reward);
        }
        reward = reward + a * cfg.dt;
    })?;
    traj.times.push(T::from_usize_lossy(n) * cfg.dt);
    traj.states.push(x_n);
    traj.reward_integral.push(reward);
    Ok(traj)
}

/// What a streaming pass over one path should record besides the totals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathProbe<T> {
    /// Reward accumulated before this grid index is excluded from
    /// `reward_after_burn_in` and `steps_above`.
    pub burn_in_step: usize,
    /// Grid indices (in `0..=n_steps`) at which to keep the state.
    pub checkpoint_steps: Vec<usize>,
    /// Level for the occupation count `steps_above`.
    pub level: Option<T>,
}

/// Streaming summary of one path; nothing is stored per step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary<T> {
    pub final_state: T,
    /// `sum_k a(X_k) dt` over the whole horizon.
    pub reward: T,
    pub reward_after_burn_in: T,
    /// Realized Brownian part `sum_k dW_k`.
    pub noise: T,
    /// `int (mu - a(X_s)) ds` by the trapezoidal rule on the grid.
    pub drift_trapezoid: T,
    /// Grid points `k` in `[burn_in_step, n_steps)` with `X_k > level`.
    pub steps_above: usize,
    pub checkpoint_states: Vec<T>,
}

pub fn summarize_path<T: Real>(
    params: &ModelParams<T>,
    strategy: &Strategy<T>,
    cfg: &SimConfig<T>,
    path_index: usize,
    probe: &PathProbe<T>,
) -> Result<PathSummary<T>> {
    let dt = cfg.dt;
    let half = T::lit(0.5);
    let mu = params.mu();
    let n = cfg.n_steps();
    let mut reward = T::zero();
    let mut reward_before_burn_in = T::zero();
    let mut noise = T::zero();
    let mut trap = T::zero();
    let mut a_prev = T::zero();
    let mut steps_above = 0usize;
    let mut checkpoints = Vec::with_capacity(probe.checkpoint_steps.len());
    let mut next_cp = 0usize;
    let level = probe.level;
    let (x_n, a_n) = integrate(params, strategy, cfg, path_index, |k, x, a, dw| {
        if k == probe.burn_in_step {
            reward_before_burn_in = reward;
        }
        while next_cp < probe.checkpoint_steps.len() && probe.checkpoint_steps[next_cp] == k {
            checkpoints.push(x);
            next_cp += 1;
        }
        if k > 0 {
            trap = trap + (mu - half * (a_prev + a)) * dt;
        }
        if k >= probe.burn_in_step && level.is_some_and(|l| x > l) {
            steps_above += 1;
        }
        a_prev = a;
        reward = reward + a * dt;
        noise = noise + dw;
    })?;
    if probe.burn_in_step >= n {
        reward_before_burn_in = reward;
    }
    trap = trap + (mu - half * (a_prev + a_n)) * dt;
    while next_cp < probe.checkpoint_steps.len() && probe.checkpoint_steps[next_cp] == n {
        checkpoints.push(x_n);
        next_cp += 1;
    }
    Ok(PathSummary {
        final_state: x_n,
        reward,
        reward_after_burn_in: reward - reward_before_burn_in,
        noise,
        drift_trapezoid: trap,
        steps_above,
        checkpoint_states: checkpoints,
    })
}

/// Runs `cfg.n_paths` independent paths, in parallel, returned in path order.
pub fn run_ensemble<T: Real>(
    params: &ModelParams<T>,
    strategy: &Strategy<T>,
    cfg: &SimConfig<T>,
    probe: &PathProbe<T>,
) -> Result<Vec<PathSummary<T>>> {
    check_inputs(params, strategy, cfg)?;
    if probe.checkpoint_steps.windows(2).any(|w| w[0] >= w[1])
        || probe.checkpoint_steps.last().is_some_and(|&s| s > cfg.n_steps())
    {
        return Err(Error::InvalidConfig(
            "checkpoint steps must be strictly increasing and within the horizon".into(),
        ));
    }
    let results: Vec<Result<PathSummary<T>>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| summarize_path(params, strategy, cfg, i, probe))
        .collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => ok.push(s),
            Err(e) => failures.push((i, Box::new(e))),
        }
    }
    if failures.is_empty() {
        Ok(ok)
    } else {
        Err(Error::EnsembleFailures { failures })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleStats<T> {
    pub mean_final_state: T,
    pub mean_reward_rate: T,
    pub std_error: T,
    pub n_paths: usize,
}

impl<T: Real + Serialize> EnsembleStats<T> {
    /// Flat JSON object with keys `mean_final_state`, `mean_reward_rate`,
    /// `std_error`, `n_paths`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Ensemble means of `X_T` and of `(1/T) int_0^T a(X_s) ds`.
pub fn simulate_ensemble<T: Real>(
    params: &ModelParams<T>,
    strategy: &Strategy<T>,
    cfg: &SimConfig<T>,
) -> Result<EnsembleStats<T>> {
    let paths = run_ensemble(params, strategy, cfg, &PathProbe::default())?;
    let horizon = cfg.effective_horizon();
    let finals: Vec<T> = paths.iter().map(|p| p.final_state).collect();
    let rates: Vec<T> = paths.iter().map(|p| p.reward / horizon).collect();
    let (mean_final_state, _) = mean_and_std_error(&finals);
    let (mean_reward_rate, std_error) = mean_and_std_error(&rates);
    Ok(EnsembleStats { mean_final_state, mean_reward_rate, std_error, n_paths: cfg.n_paths })
}
