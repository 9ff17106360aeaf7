//! Subcommand implementations. Each returns the summary JSON and writes the
//! files selected by the manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ergolab::ergodic::{analyze, VerdictThresholds};
use ergolab::hjb::{ActionSet, BellmanEquation, Residual};
use ergolab::stationary::{closed_form_density, solve_fokker_planck, stationary_reward};
use ergolab::{simulate_ensemble, simulate_path, Convention, ModelParams, SimConfig, Strategy};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::manifest::{GridSpec, Manifest, OutputKind};
use crate::{CliError, DensityArgs, DiagnoseArgs, HjbArgs, SimulateArgs, SweepArgs};

/// Rows kept in a trajectory CSV when no stride is given.
const DEFAULT_TRAJECTORY_ROWS: usize = 10_000;
const DEFAULT_CELLS: usize = 4000;
const DEFAULT_CHECKPOINTS: usize = 10;
const DEFAULT_HJB_GRID: GridSpec = GridSpec { lo: -50.0, hi: 50.0, n: 10_001 };
const DEFAULT_SWEEP_C: [f64; 4] = [1.5, 2.0, 2.5, 3.0];
const DEFAULT_SWEEP_X0: [f64; 3] = [0.0, 1.0, 5.0];

type Outputs = BTreeMap<OutputKind, PathBuf>;

fn prepare(out: &Path, manifest: &Manifest, kinds: &[OutputKind]) -> Result<Outputs, CliError> {
    let paths = manifest.output_paths(out, kinds)?;
    for p in paths.values() {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(paths)
}

fn write_with<F>(outputs: &Outputs, kind: OutputKind, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
{
    if let Some(path) = outputs.get(&kind) {
        let mut w = BufWriter::new(File::create(path)?);
        f(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn write_text(outputs: &Outputs, kind: OutputKind, text: &str) -> Result<(), CliError> {
    write_with(outputs, kind, |w| {
        w.write_all(text.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn finish(outputs: &Outputs, summary: Value) -> Result<Value, CliError> {
    write_text(outputs, OutputKind::Summary, &serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

fn resolved(manifest: &Manifest, params: &ModelParams<f64>, strategy: Option<&Strategy<f64>>, cfg: Option<&SimConfig<f64>>) -> Value {
    let mut v = json!({ "model": params });
    if let Some(s) = strategy {
        v["strategy"] = serde_json::to_value(s).unwrap_or(Value::Null);
    }
    if let Some(c) = manifest.rate_multiple {
        v["rate_multiple"] = json!(c);
    }
    if let Some(cfg) = cfg {
        v["sim"] = json!(cfg);
    }
    v
}

pub fn simulate(args: &SimulateArgs) -> Result<Value, CliError> {
    let mut manifest = args.common.manifest()?;
    if args.record_every.is_some() {
        manifest.sim.record_every = args.record_every;
    }
    let params = manifest.params()?;
    let strategy = manifest.strategy(&params)?;
    let mut cfg = manifest.sim_config()?;
    if manifest.sim.record_every.is_none() {
        cfg.record_every = (cfg.n_steps() / DEFAULT_TRAJECTORY_ROWS).max(1);
    }
    let outputs = prepare(
        &args.common.out,
        &manifest,
        &[OutputKind::Summary, OutputKind::TrajectoryCsv, OutputKind::EnsembleJson],
    )?;

    let traj = simulate_path(&params, &strategy, &cfg)?;
    let stats = simulate_ensemble(&params, &strategy, &cfg)?;
    write_with(&outputs, OutputKind::TrajectoryCsv, |w| Ok(traj.write_csv(w)?))?;
    write_text(&outputs, OutputKind::EnsembleJson, &stats.to_json()?)?;

    finish(
        &outputs,
        json!({
            "command": "simulate",
            "config": resolved(&manifest, &params, Some(&strategy), Some(&cfg)),
            "reward_rate": stats.mean_reward_rate,
            "std_error": stats.std_error,
            "mean_final_state": stats.mean_final_state,
            "n_paths": stats.n_paths,
            "trajectory_rows": traj.len(),
        }),
    )
}

pub fn density(args: &DensityArgs) -> Result<Value, CliError> {
    let mut manifest = args.common.manifest()?;
    let d = &mut manifest.density;
    d.mode = args.mode.or(d.mode);
    d.convention = args.convention.or(d.convention);
    d.half_width = args.half_width.or(d.half_width);
    d.n_cells = args.cells.or(d.n_cells);
    let mode = d.mode.unwrap_or_default();
    let conv_arg = d.convention.unwrap_or_default();
    let convention = Convention::from(conv_arg);
    let n_cells = d.n_cells.unwrap_or(DEFAULT_CELLS);

    let params = manifest.params()?;
    let strategy = manifest.strategy(&params)?;
    let want_closed = !matches!(mode, crate::manifest::DensityMode::Numeric);
    let want_numeric = !matches!(mode, crate::manifest::DensityMode::ClosedForm);

    let mut kinds = vec![OutputKind::Summary, OutputKind::SplitJson];
    if want_closed {
        kinds.push(OutputKind::DensityCsv);
    }
    if want_numeric {
        kinds.push(OutputKind::NumericDensityCsv);
    }
    let outputs = prepare(&args.common.out, &manifest, &kinds)?;

    let closed = if want_closed { Some(closed_form_density(&params, &strategy, convention)?) } else { None };
    let simplified = strategy.simplified();
    let (breakpoints, values) = simplified
        .as_piecewise()
        .ok_or_else(|| ergolab::Error::UnsupportedStrategy(format!("'{}' is not piecewise constant", strategy.label())))?;
    let anchor = breakpoints.last().copied().unwrap_or(0.0);
    let last = values.last().copied().unwrap_or(0.0);
    let half_width = match manifest.density.half_width {
        Some(l) => l,
        None if last > params.mu() => {
            40.0 / convention.decay_rate(params.mu()).min(convention.decay_rate(last - params.mu()))
        }
        None => {
            return Err(ergolab::Error::Transient(format!(
                "far-right withdrawal {last} does not exceed mu = {}",
                params.mu()
            ))
            .into())
        }
    };

    let mut summary = json!({
        "command": "density",
        "config": resolved(&manifest, &params, Some(&strategy), None),
        "mode": mode,
        "convention": conv_arg,
        "anchor": anchor,
        "half_width": half_width,
        "n_cells": n_cells,
    });

    let grid: Vec<f64> = {
        let h = 2.0 * half_width / n_cells as f64;
        (0..n_cells).map(|i| anchor - half_width + (i as f64 + 0.5) * h).collect()
    };
    let mut split = None;

    if let Some(density) = &closed {
        let s = ergolab::stationary::occupation_probabilities(density);
        summary["closed_form"] = json!({
            "p_plus": s.p_plus,
            "p_minus": s.p_minus,
            "p_at_anchor": density.p_at_anchor,
            "stationary_reward": stationary_reward(density, &strategy)?,
        });
        write_with(&outputs, OutputKind::DensityCsv, |w| Ok(density.write_csv(&grid, w)?))?;
        split = Some(json!({ "p_plus": s.p_plus, "p_minus": s.p_minus }));
    }

    if want_numeric {
        let fv = solve_fokker_planck(&params, &strategy, half_width, n_cells, convention)?;
        let p_plus = fv.mass_above(fv.anchor);
        let mass = fv.mass();
        let reward: f64 =
            fv.grid.iter().zip(&fv.values).map(|(&x, &p)| strategy.evaluate(x) * p).sum::<f64>() * fv.cell_width;
        let pin = ((fv.anchor - fv.grid[0]) / fv.cell_width + 0.5).floor() as usize;
        summary["numeric"] = json!({
            "p_plus": p_plus,
            "p_minus": mass - p_plus,
            "p_at_anchor": fv.values[pin.min(fv.values.len() - 1)],
            "stationary_reward": reward,
            "mass": mass,
        });
        if let Some(density) = &closed {
            summary["l1_distance"] = json!(fv.l1_distance(density));
        }
        write_with(&outputs, OutputKind::NumericDensityCsv, |w| Ok(fv.write_csv(w)?))?;
        if split.is_none() {
            split = Some(json!({ "p_plus": p_plus, "p_minus": mass - p_plus }));
        }
    }

    if let Some(s) = split {
        write_text(&outputs, OutputKind::SplitJson, &serde_json::to_string(&s)?)?;
    }
    finish(&outputs, summary)
}

pub fn hjb(args: &HjbArgs) -> Result<Value, CliError> {
    let mut manifest = args.common.manifest()?;
    let h = &mut manifest.hjb;
    h.r = args.r.or(h.r);
    h.convention = args.convention.or(h.convention);
    let mut grid = h.grid.unwrap_or(DEFAULT_HJB_GRID);
    if let Some(lo) = args.grid_lo {
        grid.lo = lo;
    }
    if let Some(hi) = args.grid_hi {
        grid.hi = hi;
    }
    if let Some(n) = args.grid_n {
        grid.n = n;
    }
    h.grid = Some(grid);
    let conv_arg = h.convention.unwrap_or_default();

    let params = manifest.params()?;
    let r = manifest.hjb.r.unwrap_or(params.mu());
    let points = grid.points()?;
    let outputs = prepare(
        &args.common.out,
        &manifest,
        &[OutputKind::Summary, OutputKind::ResidualCsv, OutputKind::CandidateJson],
    )?;

    let eq = BellmanEquation::new(params).with_convention(conv_arg.into());
    let outcome = eq.solve_pasting(r, params.x0())?;
    let v = outcome.candidate;
    let max_residual = eq.verify_on_grid(&v, r, &points);
    let argsup = eq.argsup_structure(&v, &points);
    let count = |set: ActionSet| argsup.points.iter().filter(|(_, s)| *s == set).count();
    let at_x0 = match eq.residual(&v, r, params.x0()) {
        Residual::Smooth(e) => json!({ "left": e, "right": e }),
        Residual::OneSided { left, right } => json!({ "left": left, "right": right }),
    };

    write_with(&outputs, OutputKind::ResidualCsv, |w| Ok(eq.write_residual_csv(&v, r, &points, w)?))?;
    write_text(&outputs, OutputKind::CandidateJson, &v.to_json()?)?;

    finish(
        &outputs,
        json!({
            "command": "hjb",
            "config": resolved(&manifest, &params, None, None),
            "r": r,
            "convention": conv_arg,
            "grid": { "lo": grid.lo, "hi": grid.hi, "n": grid.n },
            "candidate": v,
            "polynomial_growth": outcome.polynomial_growth,
            "growth_violation": !outcome.polynomial_growth,
            "max_abs_residual": max_residual,
            "residual_at_x0": at_x0,
            "argsup": {
                "zero": count(ActionSet::Zero),
                "cap": count(ActionSet::Cap),
                "any_in_interval": count(ActionSet::AnyInInterval),
            },
        }),
    )
}

struct SweepRow {
    c: f64,
    x0: f64,
    outcome: Result<(f64, f64, String), String>,
}

pub fn sweep(args: &SweepArgs) -> Result<Value, CliError> {
    let mut manifest = args.common.manifest()?;
    if args.cs.is_some() {
        manifest.sweep.c = args.cs.clone();
    }
    if args.x0s.is_some() {
        manifest.sweep.x0 = args.x0s.clone();
    }
    let mut cs = manifest.sweep.c.clone().unwrap_or_else(|| DEFAULT_SWEEP_C.to_vec());
    let mut x0s = manifest.sweep.x0.clone().unwrap_or_else(|| DEFAULT_SWEEP_X0.to_vec());
    if cs.iter().chain(&x0s).any(|v| !v.is_finite()) {
        return Err(CliError::Usage("sweep values must be finite".into()));
    }
    cs.sort_by(f64::total_cmp);
    x0s.sort_by(f64::total_cmp);

    let params = manifest.params()?;
    let cfg = manifest.sim_config()?;
    let outputs = prepare(&args.common.out, &manifest, &[OutputKind::Summary, OutputKind::SweepCsv])?;

    let cells: Vec<(f64, f64)> = cs.iter().flat_map(|&c| x0s.iter().map(move |&x0| (c, x0))).collect();
    let thresholds = VerdictThresholds::default();
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(c, x0)| {
            let outcome = params
                .with_x0(x0)
                .and_then(|p| {
                    let s = Strategy::proportional_threshold(&p, c)?;
                    analyze(&p, &s, &cfg, &[], &thresholds)
                })
                .map(|(est, diag)| (est.value, est.std_error, diag.verdict.to_string()))
                .map_err(|e| e.to_string());
            SweepRow { c, x0, outcome }
        })
        .collect();

    write_with(&outputs, OutputKind::SweepCsv, |w| {
        writeln!(w, "c,x0,reward_estimate,std_error,verdict,error")?;
        for row in &rows {
            match &row.outcome {
                Ok((v, se, verdict)) => writeln!(w, "{},{},{},{},{},", row.c, row.x0, v, se, verdict)?,
                Err(e) => writeln!(w, "{},{},,,,\"{}\"", row.c, row.x0, e.replace('"', "\"\""))?,
            }
        }
        Ok(())
    })?;

    let failures = rows.iter().filter(|r| r.outcome.is_err()).count();
    finish(
        &outputs,
        json!({
            "command": "sweep",
            "config": resolved(&manifest, &params, None, Some(&cfg)),
            "c": cs,
            "x0": x0s,
            "rows": rows.len(),
            "failures": failures,
        }),
    )
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<Value, CliError> {
    let mut manifest = args.common.manifest()?;
    if args.checkpoints.is_some() {
        manifest.diagnose.checkpoints = args.checkpoints.clone();
    }
    let params = manifest.params()?;
    let strategy = manifest.strategy(&params)?;
    let cfg = manifest.sim_config()?;
    let checkpoints = match &manifest.diagnose.checkpoints {
        Some(c) => c.clone(),
        None => {
            let n = cfg.n_steps();
            let k = DEFAULT_CHECKPOINTS.min(n);
            (1..=k).map(|j| (n * j / k) as f64 * cfg.dt).collect()
        }
    };
    let outputs = prepare(
        &args.common.out,
        &manifest,
        &[OutputKind::Summary, OutputKind::DiagnosticCsv, OutputKind::VerdictJson],
    )?;

    let (reward, diag) = analyze(&params, &strategy, &cfg, &checkpoints, &VerdictThresholds::default())?;
    write_with(&outputs, OutputKind::DiagnosticCsv, |w| Ok(diag.write_csv(w)?))?;
    write_text(&outputs, OutputKind::VerdictJson, &diag.verdict_json()?)?;

    finish(
        &outputs,
        json!({
            "command": "diagnose",
            "config": resolved(&manifest, &params, Some(&strategy), Some(&cfg)),
            "checkpoints": checkpoints,
            "verdict": diag.verdict,
            "final_ratio": diag.final_ratio,
            "reward_rate": reward.value,
            "std_error": reward.std_error,
        }),
    )
}
