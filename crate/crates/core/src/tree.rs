//! Depth-limited recursive partitioning of `[0,1]^p`.
//!
//! Trees are grown maximally: every terminal node is split at each level
//! unless it holds at most one row, its rows share identical covariates, its
//! rows share identical `(d, y)`, or the rule admits no candidate. There is
//! no pruning and no minimum leaf size.

use std::fmt::Write as _;

use crate::dgp::Dataset;
use crate::error::{config, domain, structural, Result};
use crate::estimators::{LeafEstimate, LeafEstimator};
use crate::splitting::{best_split, orders_for_rows, OrderIndex, SplitDecision, SplitRule};

/// One side of a cell: `(lo, hi]`, or `[lo, hi]` when `lo_closed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        (v > self.lo || (self.lo_closed && v == self.lo)) && v <= self.hi
    }

    pub fn length(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }
}

/// Axis-aligned cell of the partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub sides: Vec<Interval>,
}

impl Cell {
    pub fn unit(p: usize) -> Self {
        Cell { sides: vec![Interval { lo: 0.0, hi: 1.0, lo_closed: true }; p] }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.sides.iter().zip(x).all(|(s, &v)| s.contains(v))
    }

    /// Lebesgue measure: the product of side lengths.
    pub fn measure(&self) -> f64 {
        self.sides.iter().map(Interval::length).product()
    }

    fn split(&self, coordinate: usize, threshold: f64) -> (Cell, Cell) {
        let mut left = self.clone();
        let mut right = self.clone();
        left.sides[coordinate].hi = threshold;
        right.sides[coordinate].lo = threshold;
        right.sides[coordinate].lo_closed = false;
        (left, right)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        depth: usize,
        decision: SplitDecision,
        left: usize,
        right: usize,
    },
    Leaf {
        depth: usize,
        cell: Cell,
        /// Rows of the splitting data that reached this leaf, ascending.
        rows: Vec<usize>,
        /// Position in left-to-right order.
        ordinal: usize,
    },
}

/// Where split decisions come from.
#[derive(Debug, Clone, Copy)]
pub enum SplitSource<'a> {
    /// One dataset for every level.
    Single(&'a Dataset),
    /// Dataset `k` chooses every split made at level `k`.
    PerLevel(&'a [Dataset]),
}

impl SplitSource<'_> {
    fn datasets(&self) -> Vec<&Dataset> {
        match self {
            SplitSource::Single(d) => vec![*d],
            SplitSource::PerLevel(ds) => ds.iter().collect(),
        }
    }
}

/// An unfitted tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    max_depth: usize,
    p: usize,
    leaf_count: usize,
}

struct Grower<'a> {
    sets: Vec<&'a Dataset>,
    rule: SplitRule,
    max_depth: usize,
    nodes: Vec<Node>,
    leaf_count: usize,
}

impl Grower<'_> {
    fn set_for(&self, level: usize) -> usize {
        level.min(self.sets.len() - 1)
    }

    fn should_stop(&self, data: &Dataset, orders: &OrderIndex) -> bool {
        let rows = orders.rows();
        if rows.len() <= 1 {
            return true;
        }
        let same_x = (0..data.p()).all(|l| {
            let perm = orders.coordinate(l);
            let col = data.column(l);
            col[perm[0]] == col[perm[perm.len() - 1]]
        });
        let (y, d) = (data.y(), data.d());
        let same_outcome = rows.iter().all(|&i| y[i] == y[rows[0]] && d[i] == d[rows[0]]);
        same_x || same_outcome
    }

    fn grow(&mut self, orders: Vec<OrderIndex>, depth: usize, cell: Cell) -> Result<usize> {
        let idx = self.nodes.len();
        let current = self.set_for(depth);
        let data = self.sets[current];
        let decision = if depth < self.max_depth && !self.should_stop(data, &orders[current]) {
            best_split(data, &orders[current], self.rule)?
        } else {
            SplitDecision::none()
        };
        if !decision.valid {
            let mut rows = orders[current].rows().to_vec();
            rows.sort_unstable();
            self.nodes.push(Node::Leaf { depth, cell, rows, ordinal: self.leaf_count });
            self.leaf_count += 1;
            return Ok(idx);
        }
        // placeholder, patched once the children exist
        self.nodes.push(Node::Split { depth, decision, left: 0, right: 0 });
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        for (o, set) in orders.iter().zip(&self.sets) {
            let (l, r) = o.partition(set, decision.coordinate, decision.threshold);
            lo.push(l);
            hi.push(r);
        }
        let (lcell, rcell) = cell.split(decision.coordinate, decision.threshold);
        let left = self.grow(lo, depth + 1, lcell)?;
        let right = self.grow(hi, depth + 1, rcell)?;
        self.nodes[idx] = Node::Split { depth, decision, left, right };
        Ok(idx)
    }
}

/// Grows a tree of depth at most `max_depth` under `rule`.
///
/// With [`SplitSource::PerLevel`] exactly `max_depth` datasets are required,
/// all with the same number of covariates.
pub fn grow_tree(source: SplitSource<'_>, rule: SplitRule, max_depth: usize) -> Result<Tree> {
    if max_depth < 1 {
        return Err(config("tree depth must be at least 1"));
    }
    rule.validate()?;
    let sets = source.datasets();
    if let SplitSource::PerLevel(ds) = source {
        if ds.len() != max_depth {
            return Err(config(format!("{} per-level datasets supplied for depth {max_depth}", ds.len())));
        }
    }
    let p = sets[0].p();
    if sets.iter().any(|d| d.p() != p) {
        return Err(structural("per-level datasets disagree on the number of covariates"));
    }
    let orders = sets.iter().map(|d| orders_for_rows(d, &(0..d.n()).collect::<Vec<_>>())).collect();
    let mut g = Grower { sets, rule, max_depth, nodes: Vec::new(), leaf_count: 0 };
    g.grow(orders, 0, Cell::unit(p))?;
    Ok(Tree { nodes: g.nodes, max_depth, p, leaf_count: g.leaf_count })
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    /// Leaves in left-to-right order as `(cell, splitting rows)`.
    pub fn leaves(&self) -> Vec<(&Cell, &[usize])> {
        let mut out: Vec<(usize, &Cell, &[usize])> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { cell, rows, ordinal, .. } => Some((*ordinal, cell, rows.as_slice())),
                _ => None,
            })
            .collect();
        out.sort_by_key(|t| t.0);
        out.into_iter().map(|(_, c, r)| (c, r)).collect()
    }

    /// Internal nodes' decisions in pre-order.
    pub fn splits(&self) -> Vec<SplitDecision> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { decision, .. } => Some(*decision),
                _ => None,
            })
            .collect()
    }

    /// Ordinal of the leaf containing `x`; no range check.
    fn route(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split { decision, left, right, .. } => {
                    at = if x[decision.coordinate] <= decision.threshold { *left } else { *right };
                }
                Node::Leaf { ordinal, .. } => return *ordinal,
            }
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.p {
            return Err(structural(format!("point has {} coordinates, tree has {}", x.len(), self.p)));
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(domain(format!("point {x:?} lies outside the unit cube")));
        }
        Ok(())
    }

    /// Ordinal of the leaf whose cell contains `x`.
    pub fn leaf_index(&self, x: &[f64]) -> Result<usize> {
        self.check_point(x)?;
        Ok(self.route(x))
    }
}

/// A leaf of a fitted tree.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedLeaf {
    pub cell: Cell,
    pub measure: f64,
    /// Counts come from the fitting data.
    pub estimate: LeafEstimate,
    /// Number of splitting rows that reached the leaf.
    pub split_count: usize,
}

/// Tree plus per-leaf estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedTree {
    tree: Tree,
    leaves: Vec<FittedLeaf>,
}

/// Fills each leaf with `estimator` applied to the rows of `fit_data` inside it.
pub fn fit_leaves(tree: Tree, fit_data: &Dataset, estimator: LeafEstimator) -> Result<FittedTree> {
    if fit_data.p() != tree.p {
        return Err(structural(format!("fit data has {} covariates, tree has {}", fit_data.p(), tree.p)));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); tree.leaf_count];
    let mut point = vec![0.0; tree.p];
    for i in 0..fit_data.n() {
        point.iter_mut().zip(fit_data.row(i)).for_each(|(p, &v)| *p = v);
        members[tree.route(&point)].push(i);
    }
    let leaves = tree
        .leaves()
        .into_iter()
        .zip(&members)
        .map(|((cell, rows), m)| {
            let y: Vec<f64> = m.iter().map(|&i| fit_data.y()[i]).collect();
            let d: Vec<bool> = m.iter().map(|&i| fit_data.d()[i]).collect();
            Ok(FittedLeaf {
                cell: cell.clone(),
                measure: cell.measure(),
                estimate: estimator.estimate(&y, &d)?,
                split_count: rows.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FittedTree { tree, leaves })
}

impl FittedTree {
    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    /// Leaves in left-to-right depth-first order.
    pub fn leaf_partition(&self) -> &[FittedLeaf] {
        &self.leaves
    }

    pub fn leaf_measures(&self) -> Vec<f64> {
        self.leaves.iter().map(|l| l.measure).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.leaf_at(x)?.estimate.value)
    }

    pub fn leaf_at(&self, x: &[f64]) -> Result<&FittedLeaf> {
        Ok(&self.leaves[self.tree.leaf_index(x)?])
    }

    /// `sup_x |prediction(x) - target|`; exact because predictions are piecewise constant.
    pub fn sup_abs_error(&self, target: f64) -> f64 {
        self.leaves
            .iter()
            .filter(|l| l.measure > 0.0)
            .map(|l| (l.estimate.value - target).abs())
            .fold(0.0, f64::max)
    }

    /// `sum_leaves measure * (estimate - target)^2`.
    pub fn integrated_squared_error(&self, target: f64) -> f64 {
        self.leaves.iter().map(|l| l.measure * (l.estimate.value - target).powi(2)).sum()
    }

    /// Line-oriented dump, one node per line in pre-order:
    ///
    /// ```text
    /// tree p=<p> depth=<K> leaves=<L>
    /// split <depth> <coordinate> <threshold> <left count>
    /// leaf <depth> <value> <n> <n0> <n1> <degenerate 0|1>
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = format!("tree p={} depth={} leaves={}\n", self.tree.p, self.tree.max_depth, self.leaves.len());
        self.write_node(0, &mut out);
        out
    }

    fn write_node(&self, at: usize, out: &mut String) {
        match &self.tree.nodes[at] {
            Node::Split { depth, decision, left, right } => {
                let _ = writeln!(out, "split {depth} {} {:?} {}", decision.coordinate, decision.threshold, decision.index);
                self.write_node(*left, out);
                self.write_node(*right, out);
            }
            Node::Leaf { depth, ordinal, .. } => {
                let e = &self.leaves[*ordinal].estimate;
                let _ = writeln!(
                    out,
                    "leaf {depth} {:?} {} {} {} {}",
                    e.value,
                    e.n,
                    e.n0,
                    e.n1,
                    u8::from(e.degenerate)
                );
            }
        }
    }
}
