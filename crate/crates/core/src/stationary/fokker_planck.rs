//! Finite-volume solver for the stationary Fokker–Planck equation
//! `(s2/2) p'' - (b p)' = 0` on `[anchor - L, anchor + L]`.
//!
//! Unknowns are cell values. The face flux `J = b p - (s2/2) p'` uses the
//! mean of the two neighbouring cells and a central difference, with the
//! face drift equal to the exact average of `mu - a(x)` between the two
//! cell centres. Boundary faces carry zero flux. The balance system is
//! singular (its null space is the density), so one row is replaced by a
//! scaled pin of the anchor cell; the tridiagonal solve is followed by
//! normalization to unit mass.

use std::io::Write;

use serde::Serialize;

use super::{solve_tridiagonal, Convention, PiecewiseExpDensity};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Real;
use crate::strategy::Strategy;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDensity<T> {
    /// Cell centres.
    pub grid: Vec<T>,
    pub values: Vec<T>,
    pub cell_width: T,
    pub anchor: T,
}

const TAIL_TOLERANCE: f64 = 1e-10;
const BOUNDARY_MASS_TOLERANCE: f64 = 1e-8;

pub fn solve_fokker_planck<T: Real>(
    params: &ModelParams<T>,
    strategy: &Strategy<T>,
    half_width: T,
    n_cells: usize,
    convention: Convention,
) -> Result<GridDensity<T>> {
    strategy.ensure_admissible(params, &[])?;
    let s = strategy.simplified();
    let Some((breakpoints, values)) = s.as_piecewise() else {
        return Err(Error::UnsupportedStrategy(format!(
            "'{}' is not piecewise constant",
            strategy.label()
        )));
    };
    let mu = params.mu();
    let last = *values.last().expect("at least one piece");
    if !(last > mu) {
        return Err(Error::Transient(format!(
            "far-right withdrawal {last} does not exceed mu = {mu}"
        )));
    }
    if n_cells < 2 {
        return Err(Error::InvalidConfig("need at least 2 cells".into()));
    }
    if !(half_width > T::zero() && half_width.is_finite()) {
        return Err(Error::InvalidConfig(format!("half-width must be > 0, got {half_width}")));
    }
    let anchor = *breakpoints.last().expect("non-zero admissible strategy has a breakpoint");
    let lo = anchor - half_width;
    let hi = anchor + half_width;
    let rate = convention.decay_rate(mu).min(convention.decay_rate(last - mu));
    if !((-rate * half_width).exp() < T::lit(TAIL_TOLERANCE)) {
        return Err(Error::InsufficientDomain(format!(
            "exp(-{rate} * {half_width}) >= {TAIL_TOLERANCE}"
        )));
    }
    if breakpoints.iter().any(|&b| b <= lo || b > hi) {
        return Err(Error::InsufficientDomain("breakpoints outside the truncated domain".into()));
    }

    let n = n_cells;
    let h = (hi - lo) / T::from_usize_lossy(n);
    let half = T::lit(0.5);
    let centre = |i: usize| lo + (T::from_usize_lossy(i) + half) * h;
    let diff = convention.noise_variance::<T>() * half / h;

    // Face j sits between cells j and j + 1.
    let mut face_drift = Vec::with_capacity(n - 1);
    for j in 0..n - 1 {
        let avg = s.piecewise_average(centre(j), centre(j + 1)).expect("piecewise");
        let b = mu - avg;
        if !(b.abs() * h / convention.noise_variance::<T>() < T::one()) {
            return Err(Error::InvalidConfig(format!(
                "grid too coarse: cell Peclet number |b| h / s2 >= 1 at x = {}",
                centre(j)
            )));
        }
        face_drift.push(b);
    }

    // J_{j+1/2} = p_j (b/2 + D/h) + p_{j+1} (b/2 - D/h); row i: J_{i+1/2} - J_{i-1/2} = 0.
    let mut lower = vec![T::zero(); n];
    let mut diag = vec![T::zero(); n];
    let mut upper = vec![T::zero(); n];
    for i in 0..n {
        if i + 1 < n {
            let b = face_drift[i];
            diag[i] = diag[i] + b * half + diff;
            upper[i] = b * half - diff;
        }
        if i > 0 {
            let b = face_drift[i - 1];
            lower[i] = -(b * half + diff);
            diag[i] = diag[i] - (b * half - diff);
        }
    }
    let pin = ((anchor - lo) / h).floor().to_usize().unwrap_or(0).min(n - 1);
    let scale = diff + diff;
    let mut rhs = vec![T::zero(); n];
    lower[pin] = T::zero();
    upper[pin] = T::zero();
    diag[pin] = scale;
    rhs[pin] = scale;

    let mut p = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
    let mass = p.iter().fold(T::zero(), |acc, &v| acc + v) * h;
    if !(mass > T::zero() && mass.is_finite()) {
        return Err(Error::SingularSystem { row: pin });
    }
    for v in &mut p {
        *v = *v / mass;
    }
    let boundary = (p[0] + p[n - 1]) * h;
    if !(boundary < T::lit(BOUNDARY_MASS_TOLERANCE)) {
        return Err(Error::InsufficientDomain(format!("boundary cells carry mass {boundary}")));
    }
    Ok(GridDensity { grid: (0..n).map(centre).collect(), values: p, cell_width: h, anchor })
}

impl<T: Real> GridDensity<T> {
    pub fn mass(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v) * self.cell_width
    }

    /// Mass of cells whose centre lies above `level`.
    pub fn mass_above(&self, level: T) -> T {
        self.grid
            .iter()
            .zip(&self.values)
            .filter(|(x, _)| **x > level)
            .fold(T::zero(), |acc, (_, &v)| acc + v)
            * self.cell_width
    }

    /// Midpoint-rule L1 distance to a closed-form density.
    pub fn l1_distance(&self, exact: &PiecewiseExpDensity<T>) -> T {
        self.grid
            .iter()
            .zip(&self.values)
            .fold(T::zero(), |acc, (&x, &v)| acc + (v - exact.pdf(x)).abs())
            * self.cell_width
    }

    /// CSV with header `x,p`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,p")?;
        for (x, p) in self.grid.iter().zip(&self.values) {
            writeln!(w, "{x},{p}")?;
        }
        Ok(())
    }
}
