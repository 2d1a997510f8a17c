//! Split criteria and split selection.
//!
//! A node is described by its rows sorted along each coordinate
//! ([`OrderIndex`]). A candidate split `(k, l)` sends the first `k` rows in
//! coordinate-`l` order to the left child, i.e. the left child is
//! `{x_l <= threshold}` with `threshold` the `k`-th order statistic. Every rule
//! is evaluated for all candidates in one pass per coordinate from running
//! sums of globally centered outcomes.
//!
//! Candidates whose threshold ties with the next order statistic cannot be
//! realised by a threshold and are treated as invalid, as are candidates
//! that leave an arm empty in either child for the rules that need both arms.

mod oracle;

use std::fmt;
use std::str::FromStr;

pub use oracle::{brute_force_candidates, brute_force_split, OracleCandidate};

use crate::dgp::{check_xi, Dataset};
use crate::error::{config, domain, structural, Error, Result};
use crate::estimators::CompensatedSum;

/// Which criterion is maximised when splitting a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitRule {
    /// CART impurity gain on the observed outcome.
    CartSse,
    /// Squared difference of child difference-in-means estimates, weighted by `k(n-k)/n`.
    DimVar,
    /// CART impurity gain on the transformed outcome.
    IpwVar { xi: f64 },
    /// Two-arm least squares; scored as the sum of the per-arm between-child terms.
    SseTwoMeans,
    /// Squared two-sample T statistic of the child DIM estimates.
    TStat,
}

impl SplitRule {
    pub fn name(&self) -> &'static str {
        match self {
            SplitRule::CartSse => "cart",
            SplitRule::DimVar => "dim",
            SplitRule::IpwVar { .. } => "ipw",
            SplitRule::SseTwoMeans => "sse",
            SplitRule::TStat => "tstat",
        }
    }

    /// Parses a rule name; `xi` is only used (and checked) for `ipw`.
    pub fn from_name(name: &str, xi: f64) -> Result<Self> {
        Ok(match name {
            "cart" => SplitRule::CartSse,
            "dim" => SplitRule::DimVar,
            "ipw" => {
                check_xi(xi)?;
                SplitRule::IpwVar { xi }
            }
            "sse" => SplitRule::SseTwoMeans,
            "tstat" => SplitRule::TStat,
            other => return Err(config(format!("unknown split rule {other:?}"))),
        })
    }

    /// Rules that need at least one treated and one control row in each child.
    pub fn needs_both_arms(&self) -> bool {
        matches!(self, SplitRule::DimVar | SplitRule::SseTwoMeans | SplitRule::TStat)
    }

    pub fn validate(&self) -> Result<()> {
        if let SplitRule::IpwVar { xi } = *self {
            check_xi(xi)?;
        }
        Ok(())
    }
}

impl fmt::Display for SplitRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitRule {
    type Err = Error;

    /// Accepts `cart`, `dim`, `sse`, `tstat` and `ipw:<xi>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("ipw", xi)) => {
                let xi = xi.parse::<f64>().map_err(|_| config(format!("bad xi in {s:?}")))?;
                SplitRule::from_name("ipw", xi)
            }
            Some(_) => Err(config(format!("unknown split rule {s:?}"))),
            None if s == "ipw" => Err(config("ipw rule needs a treatment probability, e.g. ipw:0.5")),
            None => SplitRule::from_name(s, 0.5),
        }
    }
}

/// Per-coordinate sort orders of a node's rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderIndex {
    perms: Vec<Vec<usize>>,
}

impl OrderIndex {
    /// Number of rows in the node.
    pub fn len(&self) -> usize {
        self.perms.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn p(&self) -> usize {
        self.perms.len()
    }

    /// Row indices in ascending order of coordinate `l`.
    pub fn coordinate(&self, l: usize) -> &[usize] {
        &self.perms[l]
    }

    /// The node's rows (in coordinate-0 order).
    pub fn rows(&self) -> &[usize] {
        self.perms.first().map_or(&[], Vec::as_slice)
    }

    /// Stable split into `{x_l <= threshold}` and the rest; both keep their sort orders.
    pub fn partition(&self, data: &Dataset, coordinate: usize, threshold: f64) -> (OrderIndex, OrderIndex) {
        let col = data.column(coordinate);
        let mut left = Vec::with_capacity(self.p());
        let mut right = Vec::with_capacity(self.p());
        for perm in &self.perms {
            let (l, r): (Vec<usize>, Vec<usize>) = perm.iter().partition(|&&i| col[i] <= threshold);
            left.push(l);
            right.push(r);
        }
        (OrderIndex { perms: left }, OrderIndex { perms: right })
    }
}

/// Sorts all rows of `data` along each coordinate; ties go to the lower row index.
pub fn coordinate_orders(data: &Dataset) -> OrderIndex {
    let rows: Vec<usize> = (0..data.n()).collect();
    orders_for_rows(data, &rows)
}

/// Sort orders for a subset of rows.
pub fn orders_for_rows(data: &Dataset, rows: &[usize]) -> OrderIndex {
    let perms = (0..data.p())
        .map(|l| {
            let col = data.column(l);
            let mut perm = rows.to_vec();
            perm.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            perm
        })
        .collect();
    OrderIndex { perms }
}

/// The chosen split of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitDecision {
    /// Zero-based covariate index.
    pub coordinate: usize,
    /// Number of rows sent to the left child, in `1..n`.
    pub index: usize,
    /// Left child is `{x_coordinate <= threshold}`.
    pub threshold: f64,
    pub value: f64,
    /// `false` when no candidate was admissible; the node must stay a leaf.
    pub valid: bool,
}

impl SplitDecision {
    pub fn none() -> Self {
        SplitDecision { coordinate: 0, index: 0, threshold: f64::NAN, value: f64::NAN, valid: false }
    }
}

/// Criterion values for every candidate of a node; `None` marks an invalid candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionProfile {
    n: usize,
    values: Vec<Vec<Option<f64>>>,
}

impl CriterionProfile {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.values.len()
    }

    /// Value at left count `k` (`1..n`) along coordinate `l`.
    pub fn get(&self, k: usize, l: usize) -> Option<f64> {
        self.values[l][k - 1]
    }

    /// Values along coordinate `l`, indexed by `k - 1`.
    pub fn coordinate(&self, l: usize) -> &[Option<f64>] {
        &self.values[l]
    }
}

/// Node-level constants shared by all candidates.
struct NodeStats {
    n: usize,
    n1: usize,
    y_center: f64,
    ipw_center: f64,
    sum_y: f64,
    sum_ipw: f64,
    sum_treated: f64,
    sum_control: f64,
    /// Total sum of squares of the pseudo outcomes used by the T statistic.
    pseudo_tss: f64,
}

/// Running sums over the left child.
#[derive(Default)]
struct Running {
    k: usize,
    k1: usize,
    y: CompensatedSum,
    ipw: CompensatedSum,
    treated: CompensatedSum,
    control: CompensatedSum,
}

fn ipw_weight(d: bool, xi: f64) -> f64 {
    (if d { 1.0 } else { 0.0 } - xi) / (xi * (1.0 - xi))
}

impl NodeStats {
    fn new(data: &Dataset, rows: &[usize], rule: SplitRule) -> Self {
        let (y, d) = (data.y(), data.d());
        let n = rows.len();
        let n1 = rows.iter().filter(|&&i| d[i]).count();
        let nf = n as f64;
        let y_center = mean_of(rows.iter().map(|&i| y[i]), nf);
        let xi = match rule {
            SplitRule::IpwVar { xi } => xi,
            _ => 0.5,
        };
        let ipw_center = mean_of(rows.iter().map(|&i| y[i] * ipw_weight(d[i], xi)), nf);

        let mut st = NodeStats {
            n,
            n1,
            y_center,
            ipw_center,
            sum_y: 0.0,
            sum_ipw: 0.0,
            sum_treated: 0.0,
            sum_control: 0.0,
            pseudo_tss: 0.0,
        };
        let mut acc = Running::default();
        for &i in rows {
            st.push(&mut acc, data, i, xi);
        }
        st.sum_y = acc.y.total();
        st.sum_ipw = acc.ipw.total();
        st.sum_treated = acc.treated.total();
        st.sum_control = acc.control.total();

        if rule == SplitRule::TStat && n1 > 0 && n1 < n {
            let share = n1 as f64 / nf;
            let pseudo = |i: usize| (y[i] - y_center) * ipw_weight(d[i], share);
            let m = mean_of(rows.iter().map(|&i| pseudo(i)), nf);
            let mut tss = CompensatedSum::default();
            rows.iter().for_each(|&i| tss.add((pseudo(i) - m).powi(2)));
            st.pseudo_tss = tss.total();
        }
        st
    }

    fn push(&self, acc: &mut Running, data: &Dataset, i: usize, xi: f64) {
        let yc = data.y()[i] - self.y_center;
        let d = data.d()[i];
        acc.k += 1;
        acc.y.add(yc);
        acc.ipw.add(data.y()[i] * ipw_weight(d, xi) - self.ipw_center);
        if d {
            acc.k1 += 1;
            acc.treated.add(yc);
        } else {
            acc.control.add(yc);
        }
    }

    /// Criterion at the current left child; `None` if the rule rejects it.
    fn score(&self, rule: SplitRule, acc: &Running) -> Option<f64> {
        let n = self.n as f64;
        let k = acc.k as f64;
        let gain = |left_sum: f64, total: f64| {
            let diff = left_sum - k / n * total;
            n / (k * (n - k)) * diff * diff
        };
        let arms = || {
            let (l1, l0) = (acc.k1, acc.k - acc.k1);
            let (r1, r0) = (self.n1 - acc.k1, (self.n - self.n1) - l0);
            if l1 == 0 || l0 == 0 || r1 == 0 || r0 == 0 {
                return None;
            }
            let (s1l, s0l) = (acc.treated.total(), acc.control.total());
            let (s1r, s0r) = (self.sum_treated - s1l, self.sum_control - s0l);
            Some(([l1 as f64, r1 as f64, l0 as f64, r0 as f64], [s1l, s1r, s0l, s0r]))
        };
        match rule {
            SplitRule::CartSse => Some(gain(acc.y.total(), self.sum_y)),
            SplitRule::IpwVar { .. } => Some(gain(acc.ipw.total(), self.sum_ipw)),
            SplitRule::DimVar => {
                let ([l1, r1, l0, r0], [s1l, s1r, s0l, s0r]) = arms()?;
                let delta = (s1l / l1 - s0l / l0) - (s1r / r1 - s0r / r0);
                Some(k * (n - k) / n * delta * delta)
            }
            SplitRule::SseTwoMeans => {
                let ([l1, r1, l0, r0], [s1l, s1r, s0l, s0r]) = arms()?;
                let d1 = s1l / l1 - s1r / r1;
                let d0 = s0l / l0 - s0r / r0;
                Some(l1 * r1 / (l1 + r1) * d1 * d1 + l0 * r0 / (l0 + r0) * d0 * d0)
            }
            SplitRule::TStat => {
                let ([l1, r1, l0, r0], [s1l, s1r, s0l, s0r]) = arms()?;
                let delta = (s1l / l1 - s0l / l0) - (s1r / r1 - s0r / r0);
                let g = k * (n - k) / n * delta * delta;
                let s2 = (self.pseudo_tss - g) / (n - 2.0);
                (s2 > 0.0).then(|| n * g / s2)
            }
        }
    }
}

fn mean_of<I: Iterator<Item = f64>>(values: I, n: f64) -> f64 {
    let mut s = CompensatedSum::default();
    values.for_each(|v| s.add(v));
    if n > 0.0 {
        s.total() / n
    } else {
        0.0
    }
}

/// Walks coordinate `l` and reports `(k, value)` for every `k` in `1..n`.
fn scan<F: FnMut(usize, Option<f64>)>(
    data: &Dataset,
    orders: &OrderIndex,
    rule: SplitRule,
    stats: &NodeStats,
    l: usize,
    mut emit: F,
) {
    let xi = match rule {
        SplitRule::IpwVar { xi } => xi,
        _ => 0.5,
    };
    let col = data.column(l);
    let perm = orders.coordinate(l);
    let mut acc = Running::default();
    for w in perm.windows(2) {
        stats.push(&mut acc, data, w[0], xi);
        let separable = col[w[0]] < col[w[1]];
        emit(acc.k, if separable { stats.score(rule, &acc) } else { None });
    }
}

fn check_node(data: &Dataset, orders: &OrderIndex, rule: SplitRule) -> Result<()> {
    rule.validate()?;
    if orders.p() != data.p() {
        return Err(structural(format!("order index has {} coordinates, data has {}", orders.p(), data.p())));
    }
    if orders.len() < 2 {
        return Err(structural(format!("a split needs at least 2 rows, node has {}", orders.len())));
    }
    Ok(())
}

/// Criterion at a single candidate, computed directly from the left child's rows.
pub fn criterion_value(
    data: &Dataset,
    orders: &OrderIndex,
    rule: SplitRule,
    k: usize,
    l: usize,
) -> Result<Option<f64>> {
    rule.validate()?;
    let n = orders.len();
    if l >= data.p() || l >= orders.p() {
        return Err(domain(format!("coordinate {l} out of range for p = {}", data.p())));
    }
    if k == 0 || k >= n {
        return Err(domain(format!("split index {k} out of range 1..{n}")));
    }
    let stats = NodeStats::new(data, orders.rows(), rule);
    let xi = match rule {
        SplitRule::IpwVar { xi } => xi,
        _ => 0.5,
    };
    let perm = orders.coordinate(l);
    let col = data.column(l);
    if col[perm[k - 1]] == col[perm[k]] {
        return Ok(None);
    }
    let mut acc = Running::default();
    perm[..k].iter().for_each(|&i| stats.push(&mut acc, data, i, xi));
    Ok(stats.score(rule, &acc))
}

/// Criterion values for all candidates of the node.
pub fn criterion_profile(data: &Dataset, orders: &OrderIndex, rule: SplitRule) -> Result<CriterionProfile> {
    check_node(data, orders, rule)?;
    let stats = NodeStats::new(data, orders.rows(), rule);
    let values = (0..data.p())
        .map(|l| {
            let mut column = Vec::with_capacity(orders.len() - 1);
            scan(data, orders, rule, &stats, l, |_, v| column.push(v));
            column
        })
        .collect();
    Ok(CriterionProfile { n: orders.len(), values })
}

/// Candidates within this distance of the maximum count as tied with it.
/// `scale` is the node's total sum of squares of the outcome the rule
/// splits on (`n` for the T statistic), so exact ties that rounding has
/// pulled apart still resolve by the tie rule.
pub(crate) fn tie_tolerance(max_value: f64, scale: f64) -> f64 {
    1e-10 * max_value.abs() + 1e-13 * scale
}

fn value_scale(data: &Dataset, rows: &[usize], rule: SplitRule) -> f64 {
    let (y, d) = (data.y(), data.d());
    let outcome = |i: usize| match rule {
        SplitRule::IpwVar { xi } => y[i] * ipw_weight(d[i], xi),
        _ => y[i],
    };
    match rule {
        SplitRule::TStat => rows.len() as f64,
        _ => {
            let m = mean_of(rows.iter().map(|&i| outcome(i)), rows.len() as f64);
            let mut tss = CompensatedSum::default();
            rows.iter().for_each(|&i| tss.add((outcome(i) - m).powi(2)));
            tss.total()
        }
    }
}

/// Admissible candidate with the largest criterion value. Ties, up to
/// rounding, go to the smallest coordinate, then the smallest `k`.
pub fn best_split(data: &Dataset, orders: &OrderIndex, rule: SplitRule) -> Result<SplitDecision> {
    let profile = criterion_profile(data, orders, rule)?;
    let max = profile
        .values
        .iter()
        .flatten()
        .flatten()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(SplitDecision::none());
    }
    let tol = tie_tolerance(max, value_scale(data, orders.rows(), rule));
    for (l, column) in profile.values.iter().enumerate() {
        for (j, v) in column.iter().enumerate() {
            if let Some(v) = v.filter(|v| max - v <= tol) {
                let k = j + 1;
                let threshold = data.column(l)[orders.coordinate(l)[k - 1]];
                return Ok(SplitDecision { coordinate: l, index: k, threshold, value: v, valid: true });
            }
        }
    }
    unreachable!("the maximum is attained by some candidate")
}
