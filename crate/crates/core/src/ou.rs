//! Stationary Ornstein–Uhlenbeck paths with covariance `exp(-|s - t| / 2)`
//! and the extreme-value statistics built on them.

use ndarray::Array2;
use statrs::function::gamma::ln_gamma;

use crate::error::{config, structural, Error, Result};
use crate::rng::RngStream;
use crate::stats::{gumbel_cdf, ks_one_sample, KsResult};

/// `d` independent components sampled on the grid `0, dt, ..., steps * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuPath {
    pub dt: f64,
    /// `d x (steps + 1)`.
    pub values: Array2<f64>,
}

impl OuPath {
    pub fn components(&self) -> usize {
        self.values.nrows()
    }

    pub fn steps(&self) -> usize {
        self.values.ncols() - 1
    }

    /// Euclidean norm across components at grid point `i`.
    pub fn norm_at(&self, i: usize) -> f64 {
        self.values.column(i).iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Exact simulation: `V(t + dt) = rho V(t) + sqrt(1 - rho^2) Z`, `rho = exp(-dt/2)`,
/// started from the stationary law. The grid covers `[0, horizon]` in
/// `round(horizon / dt)` steps.
pub fn simulate_ou(d: usize, horizon: f64, dt: f64, stream: &mut RngStream) -> Result<OuPath> {
    if d == 0 {
        return Err(config("an O-U path needs at least one component"));
    }
    if !(dt > 0.0 && dt.is_finite()) || !(horizon >= dt && horizon.is_finite()) {
        return Err(config(format!("need 0 < dt <= horizon, got dt = {dt}, horizon = {horizon}")));
    }
    let steps = (horizon / dt).round() as usize;
    let rho = (-dt / 2.0).exp();
    let innovation = (1.0 - rho * rho).sqrt();
    let mut values = Array2::zeros((d, steps + 1));
    for mut row in values.rows_mut() {
        let mut v = stream.standard_normal();
        row[0] = v;
        for t in 1..=steps {
            v = rho * v + innovation * stream.standard_normal();
            row[t] = v;
        }
    }
    Ok(OuPath { dt, values })
}

/// `a(L) = sqrt(2 log L)`.
pub fn de_scale(l: f64) -> f64 {
    (2.0 * l.ln()).sqrt()
}

/// `b_d(L) = 2 log L + (d/2) log log L - log Gamma(d/2)`.
pub fn de_centering(d: usize, l: f64) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * l.ln() + half * l.ln().ln() - ln_gamma(half)
}

/// Normalised running maximum of the path norm over `[0, c L]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarlingErdosStat {
    pub l: f64,
    pub c: f64,
    pub sup: f64,
    pub stat: f64,
}

/// `a(L) * max_{t <= cL} |V(t)| - b_d(L)`, using grid points only.
pub fn sup_norm_stat(path: &OuPath, l: f64, c: f64) -> Result<DarlingErdosStat> {
    if !(l > 1.0) {
        return Err(config(format!("L must exceed 1, got {l}")));
    }
    if !(c > 0.0) {
        return Err(config(format!("window multiplier must be positive, got {c}")));
    }
    let last = (c * l / path.dt).round() as usize;
    if last > path.steps() {
        return Err(structural(format!("window [0, {}] exceeds the simulated path", c * l)));
    }
    let sup = (0..=last).map(|i| path.norm_at(i)).fold(0.0, f64::max);
    let stat = de_scale(l) * sup - de_centering(path.components(), l);
    Ok(DarlingErdosStat { l, c, sup, stat })
}

/// KS comparison of normalised maxima with the Gumbel law shifted by `shift`.
pub fn gumbel_ks_check(stats: &[f64], shift: f64) -> Result<KsResult> {
    if stats.len() < 100 {
        return Err(Error::Statistical(format!("need at least 100 maxima, got {}", stats.len())));
    }
    ks_one_sample(stats, |z| gumbel_cdf(z, shift))
}

/// Whether the maximum of `|U|` over `[0, C]` is attained strictly inside `(A, B)`:
/// the sup over `[0, C]` exceeds the sup over `[0, A] u [B, C]`.
pub fn max_in_window(path: &OuPath, a: f64, b: f64) -> bool {
    let row = path.values.row(0);
    let (mut inside, mut outside) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (i, v) in row.iter().enumerate() {
        let t = i as f64 * path.dt;
        let m = v.abs();
        if t > a && t < b {
            inside = inside.max(m);
        } else {
            outside = outside.max(m);
        }
    }
    inside > outside
}

pub fn check_window(a: f64, b: f64, c: f64) -> Result<()> {
    if a > 0.0 && a < b && b < c && c.is_finite() {
        Ok(())
    } else {
        Err(config(format!("need 0 < A < B < C, got A = {a}, B = {b}, C = {c}")))
    }
}
