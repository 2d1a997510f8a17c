//! Brute-force split search used as a test oracle.
//!
//! Each candidate threshold is applied literally: rows are partitioned by
//! `x_l <= t`, child estimates are refitted from scratch, and the two-arm
//! least-squares problems are solved through their normal equations. Nothing
//! here shares code with the running-sum scan in the parent module.

use super::{SplitDecision, SplitRule};
use crate::dgp::{transformed_outcome, Dataset};
use crate::estimators::{dim_leaf, mean_leaf};

/// One candidate as seen by the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCandidate {
    pub coordinate: usize,
    pub index: usize,
    pub threshold: f64,
    /// Criterion value, `None` if the rule rejects the candidate.
    pub value: Option<f64>,
    /// Total residual sum of squares of the two-arm least-squares fits in both
    /// children (only for `SseTwoMeans`).
    pub two_arm_sse: Option<f64>,
    /// Parent SSE minus child SSEs of the constant fits (only for `CartSse`).
    pub impurity_gain: Option<f64>,
}

struct Child {
    y: Vec<f64>,
    d: Vec<bool>,
}

fn children(data: &Dataset, l: usize, t: f64) -> (Child, Child) {
    let mut left = Child { y: vec![], d: vec![] };
    let mut right = Child { y: vec![], d: vec![] };
    for i in 0..data.n() {
        let c = if data.column(l)[i] <= t { &mut left } else { &mut right };
        c.y.push(data.y()[i]);
        c.d.push(data.d()[i]);
    }
    (left, right)
}

fn sse_about_mean(y: &[f64]) -> f64 {
    let m = mean_leaf(y).value;
    y.iter().map(|v| (v - m).powi(2)).sum()
}

/// Residual SSE of `y ~ a + b d`, or `None` when the design is singular.
fn two_arm_least_squares(c: &Child) -> Option<f64> {
    let n = c.y.len() as f64;
    let dv: Vec<f64> = c.d.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    let sd: f64 = dv.iter().sum();
    let sdd: f64 = dv.iter().map(|v| v * v).sum();
    let sy: f64 = c.y.iter().sum();
    let sdy: f64 = c.y.iter().zip(&dv).map(|(y, d)| y * d).sum();
    let det = n * sdd - sd * sd;
    if det.abs() < 0.5 {
        return None;
    }
    let a = (sdd * sy - sd * sdy) / det;
    let b = (n * sdy - sd * sy) / det;
    Some(c.y.iter().zip(&dv).map(|(y, d)| (y - a - b * d).powi(2)).sum())
}

fn arm(c: &Child, treated: bool) -> Vec<f64> {
    c.y.iter().zip(&c.d).filter(|(_, &t)| t == treated).map(|(&y, _)| y).collect()
}

fn evaluate(data: &Dataset, rule: SplitRule, left: &Child, right: &Child) -> Option<f64> {
    let n = data.n() as f64;
    let k = left.y.len() as f64;
    let weight = k * (n - k) / n;
    match rule {
        SplitRule::CartSse => {
            let delta = mean_leaf(&left.y).value - mean_leaf(&right.y).value;
            Some(weight * delta * delta)
        }
        SplitRule::IpwVar { xi } => {
            let t = |c: &Child| -> Vec<f64> {
                c.y.iter().zip(&c.d).map(|(&y, &d)| transformed_outcome(y, d, xi).unwrap()).collect()
            };
            let delta = mean_leaf(&t(left)).value - mean_leaf(&t(right)).value;
            Some(weight * delta * delta)
        }
        SplitRule::DimVar | SplitRule::TStat | SplitRule::SseTwoMeans => {
            let l = dim_leaf(&left.y, &left.d).unwrap();
            let r = dim_leaf(&right.y, &right.d).unwrap();
            if l.degenerate || r.degenerate {
                return None;
            }
            let delta = l.value - r.value;
            let g = weight * delta * delta;
            match rule {
                SplitRule::DimVar => Some(g),
                SplitRule::TStat => {
                    let s2 = (pseudo_outcome_tss(data) - g) / (n - 2.0);
                    (s2 > 0.0).then(|| {
                        let se2 = s2 / k + s2 / (n - k);
                        n * delta * delta / se2
                    })
                }
                _ => {
                    let between = |treated: bool| {
                        let (a, b) = (arm(left, treated), arm(right, treated));
                        let (na, nb) = (a.len() as f64, b.len() as f64);
                        let diff = mean_leaf(&a).value - mean_leaf(&b).value;
                        na * nb / (na + nb) * diff * diff
                    };
                    Some(between(true) + between(false))
                }
            }
        }
    }
}

/// Sum of squared deviations of `(y - ybar)(d - s)/(s(1-s))`, `s` the node's treated share.
fn pseudo_outcome_tss(data: &Dataset) -> f64 {
    let n = data.n() as f64;
    let s = data.treated_count() as f64 / n;
    let ybar = mean_leaf(data.y()).value;
    let pseudo: Vec<f64> = data
        .y()
        .iter()
        .zip(data.d())
        .map(|(&y, &d)| (y - ybar) * (if d { 1.0 - s } else { -s }) / (s * (1.0 - s)))
        .collect();
    let m = mean_leaf(&pseudo).value;
    pseudo.iter().map(|v| (v - m).powi(2)).sum()
}

/// Every threshold-realisable candidate, coordinate by coordinate, in increasing `k`.
pub fn brute_force_candidates(data: &Dataset, rule: SplitRule) -> Vec<OracleCandidate> {
    let mut out = Vec::new();
    let parent_sse = sse_about_mean(data.y());
    for l in 0..data.p() {
        let mut values: Vec<f64> = data.column(l).to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        // the largest value would leave the right child empty
        for &t in values.iter().take(values.len().saturating_sub(1)) {
            let (left, right) = children(data, l, t);
            let value = evaluate(data, rule, &left, &right);
            let two_arm_sse = (rule == SplitRule::SseTwoMeans)
                .then(|| Some(two_arm_least_squares(&left)? + two_arm_least_squares(&right)?))
                .flatten();
            let impurity_gain = (rule == SplitRule::CartSse)
                .then(|| parent_sse - sse_about_mean(&left.y) - sse_about_mean(&right.y));
            out.push(OracleCandidate {
                coordinate: l,
                index: left.y.len(),
                threshold: t,
                value,
                two_arm_sse,
                impurity_gain,
            });
        }
    }
    out
}

fn outcome_scale(data: &Dataset, rule: SplitRule) -> f64 {
    let values: Vec<f64> = match rule {
        SplitRule::TStat => return data.n() as f64,
        SplitRule::IpwVar { xi } => data.y().iter().zip(data.d()).map(|(&y, &d)| transformed_outcome(y, d, xi).unwrap()).collect(),
        _ => data.y().to_vec(),
    };
    sse_about_mean(&values)
}

/// Exhaustive search. `SseTwoMeans` minimises the literal two-arm SSE; every
/// other rule maximises its criterion. Ties resolve as in `best_split`.
pub fn brute_force_split(data: &Dataset, rule: SplitRule) -> SplitDecision {
    let scored: Vec<(OracleCandidate, f64, f64)> = brute_force_candidates(data, rule)
        .into_iter()
        .filter_map(|c| {
            let value = c.value?;
            let key = match rule {
                SplitRule::SseTwoMeans => -c.two_arm_sse?,
                _ => value,
            };
            Some((c, value, key))
        })
        .collect();
    let Some(best_key) = scored.iter().map(|t| t.2).reduce(f64::max) else {
        return SplitDecision::none();
    };
    let max_value = scored.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let tol = super::tie_tolerance(max_value, outcome_scale(data, rule));
    let (c, value, _) = scored.into_iter().find(|t| best_key - t.2 <= tol).unwrap();
    SplitDecision { coordinate: c.coordinate, index: c.index, threshold: c.threshold, value, valid: true }
}
