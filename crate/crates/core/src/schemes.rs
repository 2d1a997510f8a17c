//! The three sample-usage designs wrapped around tree growth and leaf fitting.
//!
//! | scheme | splits chosen on | leaves fitted on |
//! |---|---|---|
//! | `nss` | the full sample | the full sample |
//! | `hon` | a random part of the sample | the rest |
//! | `x` | one fresh `(y, d)` panel per level, shared covariates | one more fresh panel |

use std::fmt;
use std::str::FromStr;

use crate::dgp::{sample_covariates, sample_panel, DgpConfig, Dataset};
use crate::error::{config, Error, Result};
use crate::estimators::LeafEstimator;
use crate::rng::RngStream;
use crate::tree::{fit_leaves, grow_tree, FittedTree, SplitSource};
use crate::splitting::SplitRule;

pub const DEFAULT_HONEST_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingScheme {
    Nss,
    /// `ratio` is the fraction of rows used for splitting.
    Honest { ratio: f64 },
    XAdaptive,
}

impl SamplingScheme {
    pub fn name(&self) -> &'static str {
        match self {
            SamplingScheme::Nss => "nss",
            SamplingScheme::Honest { .. } => "hon",
            SamplingScheme::XAdaptive => "x",
        }
    }

    pub fn from_name(name: &str, honest_ratio: f64) -> Result<Self> {
        let s = match name {
            "nss" => SamplingScheme::Nss,
            "hon" => SamplingScheme::Honest { ratio: honest_ratio },
            "x" => SamplingScheme::XAdaptive,
            other => return Err(config(format!("unknown sampling scheme {other:?}"))),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SamplingScheme::Honest { ratio } if !(ratio > 0.0 && ratio < 1.0) => {
                Err(config(format!("honest ratio must lie in (0,1), got {ratio}")))
            }
            _ => Ok(()),
        }
    }
}

/// A complete estimator: split rule, sample usage, depth and leaf estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSpec {
    pub rule: SplitRule,
    pub scheme: SamplingScheme,
    pub depth: usize,
    pub leaf: LeafEstimator,
}

impl EstimatorSpec {
    /// Pairs the rule with its natural leaf estimator: `ipw` with IPW leaves,
    /// `cart` with plain means, and the other causal rules with DIM leaves.
    pub fn new(rule: SplitRule, scheme: SamplingScheme, depth: usize) -> Self {
        let leaf = match rule {
            SplitRule::IpwVar { xi } => LeafEstimator::Ipw { xi },
            SplitRule::CartSse => LeafEstimator::Mean,
            SplitRule::DimVar | SplitRule::SseTwoMeans | SplitRule::TStat => LeafEstimator::Dim,
        };
        EstimatorSpec { rule, scheme, depth, leaf }
    }

    /// Parses `rule-scheme-K<depth>`, e.g. `dim-hon-K3`. The IPW rule takes
    /// `xi` from the design.
    pub fn parse(name: &str, xi: f64, honest_ratio: f64) -> Result<Self> {
        let bad = || config(format!("estimator name {name:?} is not of the form rule-scheme-K<depth>"));
        let mut parts = name.split('-');
        let (Some(rule), Some(scheme), Some(depth), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad());
        };
        let depth = depth.strip_prefix('K').and_then(|k| k.parse().ok()).ok_or_else(bad)?;
        let spec = EstimatorSpec::new(
            SplitRule::from_name(rule, xi)?,
            SamplingScheme::from_name(scheme, honest_ratio)?,
            depth,
        );
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(config("tree depth must be at least 1"));
        }
        self.rule.validate()?;
        self.scheme.validate()
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-K{}", self.rule.name(), self.scheme.name(), self.depth)
    }
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    /// Uses `xi = 1/2` and the default honest ratio.
    fn from_str(s: &str) -> Result<Self> {
        EstimatorSpec::parse(s, 0.5, DEFAULT_HONEST_RATIO)
    }
}

fn expect_scheme(spec: &EstimatorSpec, want: &str) -> Result<()> {
    spec.validate()?;
    if spec.scheme.name() != want {
        return Err(config(format!("{spec} cannot be run as a {want} estimator")));
    }
    Ok(())
}

/// Grows and fits on the same data.
pub fn estimate_nss(data: &Dataset, spec: &EstimatorSpec) -> Result<FittedTree> {
    expect_scheme(spec, "nss")?;
    let tree = grow_tree(SplitSource::Single(data), spec.rule, spec.depth)?;
    fit_leaves(tree, data, spec.leaf)
}

/// Randomly splits rows into a splitting part of `floor(ratio * n)` rows and a fitting part.
pub fn honest_split(data: &Dataset, ratio: f64, stream: &mut RngStream) -> Result<(Dataset, Dataset)> {
    SamplingScheme::Honest { ratio }.validate()?;
    let n = data.n();
    let n_split = (ratio * n as f64).floor() as usize;
    if n_split == 0 || n_split == n {
        return Err(config(format!("honest ratio {ratio} leaves one part of a {n}-row sample empty")));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    stream.shuffle(&mut rows);
    Ok((data.subset(&rows[..n_split]), data.subset(&rows[n_split..])))
}

/// Grows on one random part of `data` and fits the leaves on the other.
pub fn estimate_honest(data: &Dataset, spec: &EstimatorSpec, stream: &mut RngStream) -> Result<FittedTree> {
    expect_scheme(spec, "hon")?;
    let SamplingScheme::Honest { ratio } = spec.scheme else { unreachable!() };
    let (grow, fit) = honest_split(data, ratio, stream)?;
    let tree = grow_tree(SplitSource::Single(&grow), spec.rule, spec.depth)?;
    fit_leaves(tree, &fit, spec.leaf)
}

/// Draws the `K + 1` panels used by the X-adaptive scheme: one covariate
/// matrix of `floor(n / (K + 1))` rows shared by all panels.
pub fn x_adaptive_panels(cfg: &DgpConfig, depth: usize, stream: &mut RngStream) -> Result<Vec<Dataset>> {
    cfg.validate()?;
    if depth < 1 {
        return Err(config("tree depth must be at least 1"));
    }
    let rows = cfg.n / (depth + 1);
    if rows < 2 {
        return Err(config(format!("n = {} leaves {rows} rows per panel at depth {depth}", cfg.n)));
    }
    let x = sample_covariates(rows, cfg.p, stream);
    (0..=depth).map(|_| sample_panel(cfg, &x, stream)).collect()
}

/// Level `k` is split on panel `k`; the leaves are fitted on the last panel.
pub fn estimate_x_adaptive(cfg: &DgpConfig, spec: &EstimatorSpec, stream: &mut RngStream) -> Result<FittedTree> {
    expect_scheme(spec, "x")?;
    let panels = x_adaptive_panels(cfg, spec.depth, stream)?;
    fit_x_adaptive(&panels, spec)
}

/// X-adaptive estimate from already drawn panels (`depth + 1` of them).
pub fn fit_x_adaptive(panels: &[Dataset], spec: &EstimatorSpec) -> Result<FittedTree> {
    expect_scheme(spec, "x")?;
    if panels.len() != spec.depth + 1 {
        return Err(config(format!("{} panels supplied for depth {}", panels.len(), spec.depth)));
    }
    let (grow, fit) = panels.split_at(spec.depth);
    let tree = grow_tree(SplitSource::PerLevel(grow), spec.rule, spec.depth)?;
    fit_leaves(tree, &fit[0], spec.leaf)
}

/// Runs any scheme within one Monte Carlo replication.
///
/// `data` serves the NSS and honest schemes. The X-adaptive scheme draws its
/// own panels from `cfg`, using a substream keyed by depth so that every
/// rule at a given depth sees the same panels.
pub fn estimate(cfg: &DgpConfig, data: &Dataset, spec: &EstimatorSpec, stream: &RngStream) -> Result<FittedTree> {
    match spec.scheme {
        SamplingScheme::Nss => estimate_nss(data, spec),
        SamplingScheme::Honest { .. } => estimate_honest(data, spec, &mut stream.substream("honest")),
        SamplingScheme::XAdaptive => {
            estimate_x_adaptive(cfg, spec, &mut stream.substream(&format!("x-adaptive/K{}", spec.depth)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::sample_dataset;
    use crate::estimators::dim_leaf;
    use crate::splitting::{best_split, coordinate_orders};
    use crate::tree::Node;

    fn spec(name: &str) -> EstimatorSpec {
        name.parse().unwrap()
    }

    #[test]
    fn names_round_trip() {
        for name in ["dim-nss-K1", "ipw-hon-K3", "sse-x-K5", "cart-x-K2", "tstat-nss-K1"] {
            assert_eq!(spec(name).to_string(), name);
        }
        assert_eq!(spec("ipw-nss-K1").leaf, LeafEstimator::Ipw { xi: 0.5 });
        assert_eq!(spec("sse-nss-K1").leaf, LeafEstimator::Dim);
        assert_eq!(spec("cart-nss-K1").leaf, LeafEstimator::Mean);
        assert_eq!(EstimatorSpec::parse("ipw-x-K2", 0.3, 0.5).unwrap().rule, SplitRule::IpwVar { xi: 0.3 });
        for bad in ["dim-nss", "dim-nss-3", "dim-nss-K0", "foo-nss-K1", "dim-bar-K1", "dim-nss-K1-x"] {
            assert!(bad.parse::<EstimatorSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn scheme_mismatch_is_a_config_error() {
        let data = sample_dataset(&DgpConfig::null(20, 1), &mut RngStream::from_seed(1)).unwrap();
        assert!(matches!(estimate_nss(&data, &spec("dim-hon-K1")), Err(Error::Config(_))));
    }

    #[test]
    fn nss_stump_is_child_dim() {
        let mut cfg = DgpConfig::null(300, 2);
        cfg.c1 = 0.7;
        let data = sample_dataset(&cfg, &mut RngStream::from_seed(2)).unwrap();
        let ft = estimate_nss(&data, &spec("dim-nss-K1")).unwrap();
        let s = best_split(&data, &coordinate_orders(&data), SplitRule::DimVar).unwrap();
        let left: Vec<usize> = (0..300).filter(|&i| data.column(s.coordinate)[i] <= s.threshold).collect();
        let sub = data.subset(&left);
        let mut x = vec![0.5; 2];
        x[s.coordinate] = s.threshold;
        assert_eq!(ft.predict(&x).unwrap(), dim_leaf(sub.y(), sub.d()).unwrap().value);
    }

    #[test]
    fn nss_is_deterministic() {
        let data = sample_dataset(&DgpConfig::null(200, 2), &mut RngStream::from_seed(3)).unwrap();
        let a = estimate_nss(&data, &spec("sse-nss-K3")).unwrap();
        let b = estimate_nss(&data, &spec("sse-nss-K3")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn honest_smallest_case() {
        let data = Dataset::univariate(vec![1.0, 2.0], vec![true, false], vec![0.3, 0.6]).unwrap();
        let (g, f) = honest_split(&data, 0.5, &mut RngStream::from_seed(0)).unwrap();
        assert_eq!((g.n(), f.n()), (1, 1));
        let ft = estimate_honest(&data, &spec("ipw-hon-K2"), &mut RngStream::from_seed(0)).unwrap();
        assert_eq!(ft.leaf_partition().len(), 1);
        let one = Dataset::univariate(vec![1.0], vec![true], vec![0.3]).unwrap();
        assert!(matches!(honest_split(&one, 0.5, &mut RngStream::from_seed(0)), Err(Error::Config(_))));
    }

    #[test]
    fn honest_leaves_ignore_splitting_outcomes() {
        let data = sample_dataset(&DgpConfig::null(400, 2), &mut RngStream::from_seed(4)).unwrap();
        let sp = spec("dim-hon-K2");
        let (grow, fit) = honest_split(&data, 0.5, &mut RngStream::from_seed(9)).unwrap();
        let tree = grow_tree(SplitSource::Single(&grow), sp.rule, 2).unwrap();
        let reference = fit_leaves(tree.clone(), &fit, sp.leaf).unwrap();
        let counted: usize = reference.leaf_partition().iter().map(|l| l.estimate.n).sum();
        assert_eq!(counted, fit.n());
        let direct = estimate_honest(&data, &sp, &mut RngStream::from_seed(9)).unwrap();
        assert_eq!(direct, reference);
        // only the fitting outcomes move the leaves
        let refit_poisoned = fit_leaves(direct.tree().clone(), &fit.with_outcomes(vec![5.0; fit.n()]).unwrap(), sp.leaf).unwrap();
        assert_ne!(refit_poisoned.leaf_partition(), reference.leaf_partition());
    }

    #[test]
    fn x_adaptive_shapes() {
        let cfg = DgpConfig::null(301, 2);
        let panels = x_adaptive_panels(&cfg, 2, &mut RngStream::from_seed(5)).unwrap();
        assert_eq!(panels.len(), 3);
        assert!(panels.iter().all(|p| p.n() == 100 && p.covariates() == panels[0].covariates()));
        assert_ne!(panels[0].y(), panels[1].y());
        assert!(matches!(x_adaptive_panels(&cfg, 0, &mut RngStream::from_seed(5)), Err(Error::Config(_))));
        assert!(matches!(x_adaptive_panels(&DgpConfig::null(5, 1), 2, &mut RngStream::from_seed(5)), Err(Error::Config(_))));
    }

    #[test]
    fn x_adaptive_stump_threshold_is_shared_order_statistic() {
        let cfg = DgpConfig::null(200, 1);
        let panels = x_adaptive_panels(&cfg, 1, &mut RngStream::from_seed(6)).unwrap();
        let ft = fit_x_adaptive(&panels, &spec("cart-x-K1")).unwrap();
        let s = ft.tree().splits()[0];
        let mut xs = panels[0].column(0).to_vec();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs[s.index - 1], s.threshold);
        assert_eq!(ft.leaf_partition()[0].measure, s.threshold);
    }

    #[test]
    fn x_adaptive_later_panels_do_not_move_earlier_levels() {
        let cfg = DgpConfig::null(400, 2);
        let mut panels = x_adaptive_panels(&cfg, 3, &mut RngStream::from_seed(7)).unwrap();
        let sp = spec("dim-x-K3");
        let before = fit_x_adaptive(&panels, &sp).unwrap();
        panels[2] = sample_panel(&cfg, panels[0].covariates(), &mut RngStream::from_seed(99)).unwrap();
        let after = fit_x_adaptive(&panels, &sp).unwrap();
        let upper = |ft: &FittedTree| {
            ft.tree()
                .nodes()
                .iter()
                .filter_map(|n| match n {
                    Node::Split { depth, decision, .. } if *depth < 2 => Some(*decision),
                    _ => None,
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(upper(&before), upper(&after));
    }

    #[test]
    fn dispatch_runs_every_scheme() {
        let cfg = DgpConfig::null(120, 1);
        let stream = RngStream::from_seed(8);
        let data = sample_dataset(&cfg, &mut stream.substream("data")).unwrap();
        for name in ["dim-nss-K2", "ipw-hon-K2", "sse-x-K2"] {
            let a = estimate(&cfg, &data, &spec(name), &stream).unwrap();
            let b = estimate(&cfg, &data, &spec(name), &stream).unwrap();
            assert_eq!(a, b);
        }
    }
}
