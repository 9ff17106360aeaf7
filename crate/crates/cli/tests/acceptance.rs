//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ergolab::ergodic::{analyze, estimate_reward, occupation_fraction, proof1_identity_check, Verdict, VerdictThresholds};
use ergolab::hjb::{BellmanEquation, Polynomial};
use ergolab::stationary::{closed_form_density, occupation_probabilities, solve_fokker_planck};
use ergolab::{Convention, ExactBalance, ModelParams, Rational, SimConfig, Strategy};

type Outcome = Result<String, String>;

type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

fn params(mu: f64, cap: f64, x0: f64) -> Result<ModelParams<f64>, String> {
    ModelParams::new(mu, cap, x0).map_err(e)
}

fn acceptance_cfg() -> SimConfig<f64> {
    SimConfig { dt: 1e-3, horizon: 1e4, n_paths: 100, seed: 2024, ..SimConfig::default() }
}

/// Threshold strategy `c mu 1(x > 0)` with reward near `mu`.
fn criterion_1() -> Outcome {
    let p = params(1.0, 3.0, 0.0)?;
    let s = Strategy::threshold(&p, 2.0, 0.0).map_err(e)?;
    let r = estimate_reward(&p, &s, &acceptance_cfg()).map_err(e)?;
    check((r.value - 1.0).abs() < 0.05, format!("reward {:.5} +- {:.5} (target 1 +- 0.05)", r.value, r.std_error))
}

/// Every `(c, x0)` threshold cell earns `mu` within three standard errors.
fn criterion_2() -> Outcome {
    let base = params(1.0, 3.0, 0.0)?;
    let cfg = acceptance_cfg();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for c in [1.5, 2.0, 2.5, 3.0] {
        for x0 in [0.0, 1.0, 5.0] {
            let p = base.with_x0(x0).map_err(e)?;
            let s = Strategy::proportional_threshold(&p, c).map_err(e)?;
            let r = estimate_reward(&p, &s, &cfg).map_err(e)?;
            let z = (r.value - 1.0).abs() / r.std_error;
            worst = worst.max(z);
            if z.is_nan() || z > 3.0 {
                failures.push(format!("c={c} x0={x0}: {:.5} +- {:.5}", r.value, r.std_error));
            }
        }
    }
    let mut detail = format!("12 cells, worst |z| = {worst:.2}");
    if !failures.is_empty() {
        detail = format!("{detail}; {}", failures.join("; "));
    }
    check(failures.is_empty(), detail)
}

/// Exact `p_plus = 1/C` and the single-path occupation fraction.
fn criterion_3() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for c in [2i64, 3, 4] {
        let b = ExactBalance::new(Rational::from_integer(1), Rational::from_integer(c), Convention::SdeConsistent)
            .map_err(e)?;
        let exact = b.split().p_plus == Rational::new(1, c);
        let p = params(1.0, 5.0, 0.0)?;
        let s = Strategy::proportional_threshold(&p, c as f64).map_err(e)?;
        let f64_split = occupation_probabilities(&closed_form_density(&p, &s, Convention::SdeConsistent).map_err(e)?);
        let fp = (f64_split.p_plus - 1.0 / c as f64).abs() <= f64::EPSILON;
        let cfg = SimConfig { dt: 1e-3, horizon: 1e5, n_paths: 1, seed: 7 + c as u64, ..SimConfig::default() };
        let frac = occupation_fraction(&p, &s, &cfg, 0.0).map_err(e)?;
        let mc = (frac - 1.0 / c as f64).abs() < 0.02;
        ok &= exact && fp && mc;
        parts.push(format!("C={c}: exact {exact}, f64 {fp}, MC {frac:.4}"));
    }
    check(ok, parts.join("; "))
}

/// Symmetric case `M = 2 mu`: anchor density and equal split.
fn criterion_4() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (num, den) in [(1i64, 2i64), (1, 1), (2, 1)] {
        let mu = Rational::new(num, den);
        let half = Rational::new(1, 2);
        let paper = ExactBalance::new(mu, Rational::from_integer(2), Convention::PaperNotation).map_err(e)?;
        let sde = ExactBalance::new(mu, Rational::from_integer(2), Convention::SdeConsistent).map_err(e)?;
        let exact = paper.p_at_anchor() == mu * half
            && sde.p_at_anchor() == mu
            && [paper.split(), sde.split()].iter().all(|s| s.p_plus == half && s.p_minus == half);

        let muf = num as f64 / den as f64;
        let p = params(muf, 2.0 * muf, 0.0)?;
        let s = Strategy::proportional_threshold(&p, 2.0).map_err(e)?;
        let dp = closed_form_density(&p, &s, Convention::PaperNotation).map_err(e)?;
        let ds = closed_form_density(&p, &s, Convention::SdeConsistent).map_err(e)?;
        let float = (dp.pdf(0.0) - muf / 2.0).abs() <= f64::EPSILON * muf
            && (ds.pdf(0.0) - muf).abs() <= f64::EPSILON * muf
            && [&dp, &ds].iter().all(|d| {
                let s = occupation_probabilities(d);
                (s.p_plus - 0.5).abs() <= f64::EPSILON && (s.p_minus - 0.5).abs() <= f64::EPSILON
            });
        ok &= exact && float;
        parts.push(format!("mu={muf}: p(x0) paper {} sde {}", dp.pdf(0.0), ds.pdf(0.0)));
    }
    check(ok, parts.join("; "))
}

/// Finite-volume density against the closed form, with refinement.
fn criterion_5() -> Outcome {
    let p = params(1.0, 3.0, 0.0)?;
    let s = Strategy::proportional_threshold(&p, 3.0).map_err(e)?;
    let exact = closed_form_density(&p, &s, Convention::SdeConsistent).map_err(e)?;
    let l1 = |n| -> Result<f64, String> {
        Ok(solve_fokker_planck(&p, &s, 20.0, n, Convention::SdeConsistent).map_err(e)?.l1_distance(&exact))
    };
    let (coarse, fine) = (l1(4000)?, l1(8000)?);
    let ratio = coarse / fine;
    check(
        coarse < 1e-3 && ratio > 2.5 && ratio < 6.0,
        format!("L1 {coarse:.3e} at 4000 cells, {fine:.3e} at 8000, ratio {ratio:.3}"),
    )
}

/// `V(x) = x` solves the Bellman equation at `r = mu`; other `r` force growth.
fn criterion_6() -> Outcome {
    let mu = 1.0;
    let p = params(mu, 3.0, 0.0)?;
    let grid: Vec<f64> = (0..10_000).map(|i| -50.0 + 100.0 * i as f64 / 9_999.0).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for conv in [Convention::SdeConsistent, Convention::PaperNotation] {
        let eq = BellmanEquation::new(p).with_convention(conv);
        let res = eq.verify_on_grid(&Polynomial::new(vec![0.0, 1.0]), mu, &grid);
        let out = eq.solve_pasting(mu, 0.0).map_err(e)?;
        let pasted = eq.verify_on_grid(&out.candidate, mu, &grid);
        let coeffs = out.candidate.c2.abs().max(out.candidate.c2_tilde.abs());
        let rs: Vec<f64> = [0.05, 0.1, 0.2].iter().flat_map(|d| [mu - d, mu + d]).collect();
        let flagged = eq.growth_sweep(&rs).map_err(e)?.iter().all(|o| !o.polynomial_growth);
        ok &= res <= 1e-12 && pasted <= 1e-12 && coeffs <= 1e-12 && out.polynomial_growth && flagged;
        parts.push(format!(
            "{conv:?}: residual {res:.1e}, pasted residual {pasted:.1e}, |C2| {coeffs:.1e}, r != mu flagged {flagged}"
        ));
    }
    check(ok, parts.join("; "))
}

/// Zero withdrawal and under-withdrawal both escape to `+inf`.
fn criterion_7() -> Outcome {
    let mu = 1.0;
    let p = params(mu, 3.0, 0.0)?;
    let cfg = acceptance_cfg();
    let th = VerdictThresholds::default();
    let (_, zero) = analyze(&p, &Strategy::zero(), &cfg, &[], &th).map_err(e)?;
    let under = Strategy::threshold(&p, mu - 0.25, 0.0).map_err(e)?;
    let (reward, diag) = analyze(&p, &under, &cfg, &[], &th).map_err(e)?;
    check(
        zero.verdict == Verdict::TransientPositive
            && (zero.final_ratio - mu).abs() < 0.05
            && (reward.value - 0.75).abs() < 0.05
            && diag.verdict == Verdict::TransientPositive,
        format!(
            "a=0: {} ratio {:.4}; eps=0.25: reward {:.4}, {} ratio {:.4}",
            zero.verdict, zero.final_ratio, reward.value, diag.verdict, diag.final_ratio
        ),
    )
}

/// `E X_T - x = E int (mu - a)` up to quadrature error that halves with `dt`.
fn criterion_8() -> Outcome {
    let p = params(1.0, 3.0, 0.0)?;
    let s = Strategy::threshold(&p, 2.0, 0.0).map_err(e)?;
    let run = |dt: f64| {
        let cfg = SimConfig { dt, horizon: 1e3, n_paths: 100, seed: 99, ..SimConfig::default() };
        proof1_identity_check(&p, &s, &cfg).map_err(e)
    };
    let (a, b) = (run(1e-3)?, run(5e-4)?);
    check(
        a.residual <= a.quadrature_bound && b.residual < a.residual && b.residual <= b.quadrature_bound,
        format!(
            "dt=1e-3 residual {:.3e} (bound {:.1e}), dt=5e-4 residual {:.3e}; raw gap {:.3e}",
            a.residual, a.quadrature_bound, b.residual, a.raw_gap
        ),
    )
}

fn run_cli(args: &[&str], out: &Path, threads: &str) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_ergolab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("ERGOLAB_THREADS", threads)
        .output()
        .map_err(e)?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&status.stderr)))
    }
}

fn files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut v = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(e)? {
        let entry = entry.map_err(e)?;
        v.push((entry.file_name().to_string_lossy().into_owned(), std::fs::read(entry.path()).map_err(e)?));
    }
    v.sort();
    Ok(v)
}

/// Repeated CLI runs from one manifest are byte-identical.
fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().map_err(e)?;
    let manifest = tmp.path().join("manifest.json");
    std::fs::write(
        &manifest,
        r#"{
            "model": {"mu": 1, "cap": 3, "x0": 0},
            "rate_multiple": 2,
            "sim": {"dt": 0.001, "horizon": 200, "seed": 5, "n_paths": 16},
            "density": {"mode": "both"},
            "sweep": {"c": [1.5, 2, 2.5, 3], "x0": [0, 1, 5]}
        }"#,
    )
    .map_err(e)?;
    let config = manifest.to_str().ok_or("non-UTF-8 temp path")?;
    let commands = ["simulate", "density", "hjb", "sweep", "diagnose"];
    let mut compared = 0;
    for cmd in commands {
        let a = tmp.path().join(format!("{cmd}-a"));
        let b = tmp.path().join(format!("{cmd}-b"));
        run_cli(&[cmd, "--config", config], &a, "1")?;
        run_cli(&[cmd, "--config", config], &b, "3")?;
        let (fa, fb) = (files(&a)?, files(&b)?);
        if fa.is_empty() || fa != fb {
            return Err(format!("{cmd}: outputs differ"));
        }
        compared += fa.len();
    }
    Ok(format!("{compared} files identical across repeated runs of {}", commands.join(", ")))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("reward of a(x) = 2 1(x > 0)", criterion_1),
        ("reward independent of (c, x0)", criterion_2),
        ("occupation split p+ = 1/C", criterion_3),
        ("symmetric case density", criterion_4),
        ("finite-volume density agreement", criterion_5),
        ("Bellman verification and growth flags", criterion_6),
        ("transience detection", criterion_7),
        ("drift identity", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
