//! Leaf-level estimators: difference in means, inverse probability
//! weighting, and the plain mean used by regression trees.
//!
//! Empty or single-arm leaves return exactly `0` and are flagged
//! `degenerate`, so experiments can count how often that happens.

use crate::dgp::check_xi;
use crate::error::{structural, Result};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut s = CompensatedSum::default();
    values.into_iter().for_each(|v| s.add(v));
    s.total()
}

/// Estimate and local sample sizes of one leaf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafEstimate {
    pub value: f64,
    pub n: usize,
    pub n0: usize,
    pub n1: usize,
    /// The zero fallback fired (empty leaf, or a missing arm for DIM).
    pub degenerate: bool,
}

impl LeafEstimate {
    fn degenerate(n0: usize, n1: usize) -> Self {
        LeafEstimate { value: 0.0, n: n0 + n1, n0, n1, degenerate: true }
    }
}

fn check_lengths(y: &[f64], d: &[bool]) -> Result<()> {
    if y.len() != d.len() {
        return Err(structural(format!("y has {} rows but d has {}", y.len(), d.len())));
    }
    Ok(())
}

fn arm_counts(d: &[bool]) -> (usize, usize) {
    let n1 = d.iter().filter(|&&t| t).count();
    (d.len() - n1, n1)
}

/// Treated mean minus control mean; `0` if either arm is empty.
pub fn dim_leaf(y: &[f64], d: &[bool]) -> Result<LeafEstimate> {
    check_lengths(y, d)?;
    let (n0, n1) = arm_counts(d);
    if n0 == 0 || n1 == 0 {
        return Ok(LeafEstimate::degenerate(n0, n1));
    }
    let mut s0 = CompensatedSum::default();
    let mut s1 = CompensatedSum::default();
    for (&v, &t) in y.iter().zip(d) {
        if t {
            s1.add(v)
        } else {
            s0.add(v)
        }
    }
    let value = s1.total() / n1 as f64 - s0.total() / n0 as f64;
    Ok(LeafEstimate { value, n: n0 + n1, n0, n1, degenerate: false })
}

/// Mean of the transformed outcome over the leaf; `0` if the leaf is empty.
pub fn ipw_leaf(y: &[f64], d: &[bool], xi: f64) -> Result<LeafEstimate> {
    check_xi(xi)?;
    check_lengths(y, d)?;
    let (n0, n1) = arm_counts(d);
    if y.is_empty() {
        return Ok(LeafEstimate::degenerate(0, 0));
    }
    let w = xi * (1.0 - xi);
    let total = compensated_sum(
        y.iter()
            .zip(d)
            .map(|(&v, &t)| v * (if t { 1.0 } else { 0.0 } - xi) / w),
    );
    Ok(LeafEstimate { value: total / y.len() as f64, n: y.len(), n0, n1, degenerate: false })
}

/// Arithmetic mean; `0` if empty. With no treatment indicator every row is
/// counted in `n0`.
pub fn mean_leaf(y: &[f64]) -> LeafEstimate {
    if y.is_empty() {
        return LeafEstimate::degenerate(0, 0);
    }
    let value = compensated_sum(y.iter().copied()) / y.len() as f64;
    LeafEstimate { value, n: y.len(), n0: y.len(), n1: 0, degenerate: false }
}

/// Which estimator fills the leaves of a fitted tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeafEstimator {
    Dim,
    Ipw { xi: f64 },
    Mean,
}

impl LeafEstimator {
    pub fn estimate(&self, y: &[f64], d: &[bool]) -> Result<LeafEstimate> {
        match *self {
            LeafEstimator::Dim => dim_leaf(y, d),
            LeafEstimator::Ipw { xi } => ipw_leaf(y, d, xi),
            LeafEstimator::Mean => {
                check_lengths(y, d)?;
                let (n0, n1) = arm_counts(d);
                Ok(LeafEstimate { n0, n1, ..mean_leaf(y) })
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LeafEstimator::Dim => "dim",
            LeafEstimator::Ipw { .. } => "ipw",
            LeafEstimator::Mean => "mean",
        }
    }
}
