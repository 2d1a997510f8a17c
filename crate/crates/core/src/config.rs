//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # pointwise RMSE over three depths
//! experiment = rmse-grid
//! n = 1000
//! methods = dim-nss, ipw-hon, sse-x
//! depths = 1, 2, 3
//! ```
//!
//! Blank lines and `#` comments are ignored. Every file names its
//! experiment; keys the experiment does not use are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::dgp::DgpConfig;
use crate::error::{config, Error, Result};
use crate::ou::check_window;
use crate::schemes::{EstimatorSpec, SamplingScheme, DEFAULT_HONEST_RATIO};
use crate::splitting::SplitRule;

pub const DEFAULT_SEED: u64 = 1;
pub const SEED_ENV: &str = "CAUSAL_CART_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Experiment {
    SplitIndex,
    RmseGrid,
    Imse,
    Bias,
    SupError,
    BetaMeasure,
    OuDarlingErdos,
    OuMaxloc,
}

const DGP_KEYS: &[&str] = &["n", "p", "xi", "c0", "c1", "err0", "err1"];

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::SplitIndex,
        Experiment::RmseGrid,
        Experiment::Imse,
        Experiment::Bias,
        Experiment::SupError,
        Experiment::BetaMeasure,
        Experiment::OuDarlingErdos,
        Experiment::OuMaxloc,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Experiment::SplitIndex => "split-index",
            Experiment::RmseGrid => "rmse-grid",
            Experiment::Imse => "imse",
            Experiment::Bias => "bias",
            Experiment::SupError => "sup-error",
            Experiment::BetaMeasure => "beta-measure",
            Experiment::OuDarlingErdos => "ou-darling-erdos",
            Experiment::OuMaxloc => "ou-maxloc",
        }
    }

    pub fn csv_name(&self) -> String {
        format!("{}.csv", self.id().replace('-', "_"))
    }

    /// Keys accepted besides `experiment`, `seed` and `reps`.
    pub fn keys(&self) -> Vec<&'static str> {
        let mut keys: Vec<&'static str> = match self {
            Experiment::SplitIndex => [DGP_KEYS, &["rules", "a", "b"]].concat(),
            Experiment::RmseGrid => [DGP_KEYS, &["methods", "depths", "honest_ratio", "grid_points"]].concat(),
            Experiment::Imse => vec!["p", "c0", "err0", "depths", "sizes"],
            Experiment::Bias => [DGP_KEYS, &["methods", "depths", "honest_ratio", "x"]].concat(),
            Experiment::SupError => [DGP_KEYS, &["methods", "depths", "honest_ratio", "b", "sigma"]].concat(),
            Experiment::BetaMeasure => vec!["p", "xi", "c0", "c1", "err0", "err1", "size", "rule", "min_bucket"],
            Experiment::OuDarlingErdos => vec!["d", "c", "L", "dt"],
            Experiment::OuMaxloc => vec!["A", "B", "C", "dt"],
        };
        keys.sort_unstable();
        keys
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| config(format!("unknown experiment {s:?}")))
    }
}

/// A split rule paired with a sampling scheme; crossed with the depth list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Method {
    pub rule: SplitRule,
    pub scheme: SamplingScheme,
}

impl Method {
    pub fn name(&self) -> String {
        format!("{}-{}", self.rule.name(), self.scheme.name())
    }

    pub fn at_depth(&self, depth: usize) -> EstimatorSpec {
        EstimatorSpec::new(self.rule, self.scheme, depth)
    }
}

/// The nine causal estimators: `{dim, ipw, sse} x {nss, hon, x}`.
pub fn causal_methods(xi: f64, honest_ratio: f64) -> Vec<Method> {
    let mut out = Vec::new();
    for rule in [SplitRule::DimVar, SplitRule::IpwVar { xi }, SplitRule::SseTwoMeans] {
        for scheme in [SamplingScheme::Nss, SamplingScheme::Honest { ratio: honest_ratio }, SamplingScheme::XAdaptive] {
            out.push(Method { rule, scheme });
        }
    }
    out
}

/// Everything an experiment run needs. Fields an experiment does not use keep their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub reps: usize,
    pub dgp: DgpConfig,
    /// Split rules for `split-index`, or the single rule for `beta-measure`.
    pub rules: Vec<SplitRule>,
    pub methods: Vec<Method>,
    pub depths: Vec<usize>,
    /// Per-depth panel sizes `N` for `imse`; `sizes[0]` is `N` for `beta-measure`.
    pub sizes: Vec<usize>,
    pub honest_ratio: f64,
    /// Evaluation points for `rmse-grid`, in the first coordinate.
    pub grid: Vec<f64>,
    pub x: f64,
    pub a: f64,
    pub b: f64,
    pub sigma: Option<f64>,
    pub min_bucket: usize,
    /// O-U component count `d`.
    pub ou_d: usize,
    pub ou_c: f64,
    pub ou_l: f64,
    pub dt: f64,
    /// Max-location window `(A, B)` and horizon `C`.
    pub window: (f64, f64, f64),
}

/// `m` equally spaced interior points `i / (m + 1)`.
pub fn interior_grid(m: usize) -> Vec<f64> {
    (1..=m).map(|i| i as f64 / (m + 1) as f64).collect()
}

impl ExperimentConfig {
    /// Defaults reproduce the designs studied for each experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut cfg = ExperimentConfig {
            experiment,
            seed: DEFAULT_SEED,
            reps: 2000,
            dgp: DgpConfig::null(1000, 1),
            rules: vec![SplitRule::CartSse, SplitRule::DimVar, SplitRule::IpwVar { xi: 0.5 }, SplitRule::SseTwoMeans],
            methods: causal_methods(0.5, DEFAULT_HONEST_RATIO),
            depths: vec![1, 2, 3, 4, 5],
            sizes: vec![99, 149, 199],
            honest_ratio: DEFAULT_HONEST_RATIO,
            grid: interior_grid(99),
            x: 0.5,
            a: 0.1,
            b: 0.9,
            sigma: None,
            min_bucket: 200,
            ou_d: 1,
            ou_c: 2.0,
            ou_l: 1e6f64.ln(),
            dt: 0.005,
            window: (1.0, 2.0, 4.0),
        };
        match experiment {
            Experiment::SplitIndex => cfg.dgp.n = 10_000,
            Experiment::RmseGrid => {}
            Experiment::Imse => {
                cfg.reps = 5000;
                cfg.depths = vec![1, 2, 3];
            }
            Experiment::Bias => {
                cfg.reps = 10_000;
                cfg.depths = vec![2];
            }
            Experiment::SupError => {
                cfg.dgp.n = 10_000;
                cfg.depths = vec![1];
                cfg.methods.retain(|m| m.scheme == SamplingScheme::Nss);
            }
            Experiment::BetaMeasure => {
                cfg.reps = 20_000;
                cfg.sizes = vec![100];
                cfg.rules = vec![SplitRule::CartSse];
            }
            Experiment::OuDarlingErdos | Experiment::OuMaxloc => cfg.reps = 10_000,
        }
        cfg
    }

    /// Parses a config file. The `experiment` key is required.
    pub fn from_text(text: &str) -> Result<Self> {
        let map = parse_pairs(text)?;
        let id = map.get("experiment").ok_or_else(|| config("missing required key `experiment`"))?;
        let mut cfg = ExperimentConfig::defaults(id.parse()?);
        cfg.apply(&map)?;
        Ok(cfg)
    }

    fn apply(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        let allowed = self.experiment.keys();
        let unknown: Vec<&str> = map
            .keys()
            .map(String::as_str)
            .filter(|k| !matches!(*k, "experiment" | "seed" | "reps") && !allowed.contains(k))
            .collect();
        if !unknown.is_empty() {
            return Err(config(format!(
                "unknown key(s) for experiment {}: {}",
                self.experiment,
                unknown.join(", ")
            )));
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        if let Some(v) = get("seed") {
            self.seed = parse_value("seed", v)?;
        }
        if let Some(v) = get("reps") {
            self.reps = parse_value("reps", v)?;
        }
        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = get($key) {
                    $field = parse_value($key, v)?;
                }
            };
        }
        set!("n", self.dgp.n);
        set!("p", self.dgp.p);
        set!("xi", self.dgp.xi);
        set!("c0", self.dgp.c0);
        set!("c1", self.dgp.c1);
        set!("err0", self.dgp.err0);
        set!("err1", self.dgp.err1);
        set!("honest_ratio", self.honest_ratio);
        set!("x", self.x);
        set!("a", self.a);
        set!("b", self.b);
        set!("min_bucket", self.min_bucket);
        set!("d", self.ou_d);
        set!("c", self.ou_c);
        set!("L", self.ou_l);
        set!("dt", self.dt);
        set!("A", self.window.0);
        set!("B", self.window.1);
        set!("C", self.window.2);
        if self.experiment == Experiment::Imse || self.experiment == Experiment::BetaMeasure {
            // regression mode: both arms share the control law
            if self.experiment == Experiment::Imse || get("c1").is_none() {
                self.dgp.c1 = self.dgp.c0;
            }
            if self.experiment == Experiment::Imse || get("err1").is_none() {
                self.dgp.err1 = self.dgp.err0;
            }
        }
        if let Some(v) = get("sigma") {
            self.sigma = Some(parse_value("sigma", v)?);
        }
        if let Some(v) = get("grid_points") {
            self.grid = interior_grid(parse_value("grid_points", v)?);
        }
        if let Some(v) = get("depths") {
            self.depths = parse_list("depths", v)?;
        }
        if let Some(v) = get("sizes") {
            self.sizes = parse_list("sizes", v)?;
        }
        if let Some(v) = get("size") {
            self.sizes = vec![parse_value("size", v)?];
        }
        let xi = self.dgp.xi;
        if let Some(v) = get("rules") {
            self.rules = split_list(v).map(|r| SplitRule::from_name(r, xi)).collect::<Result<_>>()?;
        } else if let Some(v) = get("rule") {
            self.rules = vec![SplitRule::from_name(v, xi)?];
        } else {
            self.rules = self.rules.iter().map(|r| retarget(*r, xi)).collect();
        }
        if let Some(v) = get("methods") {
            self.methods = split_list(v).map(|m| parse_method(m, xi, self.honest_ratio)).collect::<Result<_>>()?;
        } else {
            for m in &mut self.methods {
                m.rule = retarget(m.rule, xi);
                if let SamplingScheme::Honest { ratio } = &mut m.scheme {
                    *ratio = self.honest_ratio;
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(config("reps must be at least 1"));
        }
        let uses_dgp = !matches!(self.experiment, Experiment::OuDarlingErdos | Experiment::OuMaxloc);
        if uses_dgp {
            self.dgp.validate()?;
        }
        match self.experiment {
            Experiment::SplitIndex => {
                nonempty("rules", self.rules.len())?;
                if !(self.a > 0.0 && self.a < self.b && self.b < 1.0) {
                    return Err(config(format!("need 0 < a < b < 1, got a = {}, b = {}", self.a, self.b)));
                }
                if self.dgp.n < 2 {
                    return Err(config("split-index needs n >= 2"));
                }
            }
            Experiment::RmseGrid | Experiment::Bias | Experiment::SupError => {
                nonempty("methods", self.methods.len())?;
                nonempty("depths", self.depths.len())?;
                for m in &self.methods {
                    for &k in &self.depths {
                        m.at_depth(k).validate()?;
                    }
                }
                if self.experiment == Experiment::RmseGrid {
                    nonempty("grid_points", self.grid.len())?;
                }
                if self.experiment == Experiment::Bias && !(0.0..=1.0).contains(&self.x) {
                    return Err(config(format!("x must lie in [0,1], got {}", self.x)));
                }
                if self.experiment == Experiment::SupError {
                    if !(self.b > 0.0 && self.b < 1.0) {
                        return Err(config(format!("need 0 < b < 1, got {}", self.b)));
                    }
                    if self.dgp.n < 16 {
                        return Err(config("sup-error needs n >= 16 so that log log n > 0"));
                    }
                    if let Some(s) = self.sigma {
                        if !(s > 0.0) {
                            return Err(config("sigma must be positive"));
                        }
                    }
                }
            }
            Experiment::Imse => {
                nonempty("depths", self.depths.len())?;
                if self.depths.len() != self.sizes.len() {
                    return Err(config("depths and sizes must have the same length"));
                }
                if self.depths.contains(&0) || self.sizes.iter().any(|&s| s < 2) {
                    return Err(config("imse needs depths >= 1 and sizes >= 2"));
                }
            }
            Experiment::BetaMeasure => {
                if self.sizes.len() != 1 || self.sizes[0] < 2 {
                    return Err(config("beta-measure needs one size N >= 2"));
                }
                if self.rules.len() != 1 {
                    return Err(config("beta-measure takes exactly one rule"));
                }
            }
            Experiment::OuDarlingErdos => {
                if !(1..=2).contains(&self.ou_d) {
                    return Err(config(format!("d must be 1 or 2, got {}", self.ou_d)));
                }
                if !(self.ou_l > 1.0 && self.ou_c > 0.0 && self.dt > 0.0) {
                    return Err(config("need L > 1, c > 0 and dt > 0"));
                }
            }
            Experiment::OuMaxloc => {
                check_window(self.window.0, self.window.1, self.window.2)?;
                if !(self.dt > 0.0) {
                    return Err(config("dt must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Estimators in method-major, depth-minor order.
    pub fn specs(&self) -> Vec<EstimatorSpec> {
        self.methods.iter().flat_map(|m| self.depths.iter().map(|&k| m.at_depth(k))).collect()
    }

    /// One line per setting, keys sorted.
    pub fn canonical(&self) -> String {
        let rules: Vec<String> = self.rules.iter().map(|r| r.name().to_string()).collect();
        let methods: Vec<String> = self.methods.iter().map(Method::name).collect();
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let pairs = [
            ("A", self.window.0.to_string()),
            ("B", self.window.1.to_string()),
            ("C", self.window.2.to_string()),
            ("L", self.ou_l.to_string()),
            ("a", self.a.to_string()),
            ("b", self.b.to_string()),
            ("c", self.ou_c.to_string()),
            ("c0", self.dgp.c0.to_string()),
            ("c1", self.dgp.c1.to_string()),
            ("d", self.ou_d.to_string()),
            ("depths", join(&self.depths)),
            ("dt", self.dt.to_string()),
            ("err0", self.dgp.err0.to_string()),
            ("err1", self.dgp.err1.to_string()),
            ("experiment", self.experiment.to_string()),
            ("grid_points", self.grid.len().to_string()),
            ("honest_ratio", self.honest_ratio.to_string()),
            ("methods", methods.join(",")),
            ("min_bucket", self.min_bucket.to_string()),
            ("n", self.dgp.n.to_string()),
            ("p", self.dgp.p.to_string()),
            ("reps", self.reps.to_string()),
            ("rules", rules.join(",")),
            ("seed", self.seed.to_string()),
            ("sigma", self.sigma.map_or("auto".into(), |s| s.to_string())),
            ("sizes", join(&self.sizes)),
            ("x", self.x.to_string()),
            ("xi", self.dgp.xi.to_string()),
        ];
        pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// First 16 hex digits of the SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn retarget(rule: SplitRule, xi: f64) -> SplitRule {
    match rule {
        SplitRule::IpwVar { .. } => SplitRule::IpwVar { xi },
        other => other,
    }
}

fn nonempty(key: &str, len: usize) -> Result<()> {
    if len == 0 {
        Err(config(format!("`{key}` must not be empty")))
    } else {
        Ok(())
    }
}

fn parse_method(s: &str, xi: f64, honest_ratio: f64) -> Result<Method> {
    let (rule, scheme) = s
        .split_once('-')
        .ok_or_else(|| config(format!("method {s:?} is not of the form rule-scheme")))?;
    Ok(Method { rule: SplitRule::from_name(rule, xi)?, scheme: SamplingScheme::from_name(scheme, honest_ratio)? })
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| config(format!("invalid value {v:?} for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    split_list(v).map(|item| parse_value(key, item)).collect()
}

/// Splits a config file into `key -> value`, rejecting malformed lines and duplicates.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config(format!("line {}: expected `key = value`, got {raw:?}", no + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(config(format!("line {}: empty key or value", no + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(config(format!("line {}: duplicate key `{k}`", no + 1)));
        }
    }
    Ok(map)
}

/// Seed precedence: command line, then config file, then the environment, then the default.
pub fn resolve_seed(flag: Option<u64>, from_config: Option<u64>, env: Option<&str>) -> Result<u64> {
    if let Some(s) = flag.or(from_config) {
        return Ok(s);
    }
    match env {
        Some(v) => v.trim().parse().map_err(|_| config(format!("{SEED_ENV}={v:?} is not a u64"))),
        None => Ok(DEFAULT_SEED),
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentConfig::from_text(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_file() {
        let cfg = ExperimentConfig::from_text(
            "# comment\nexperiment = rmse-grid\nn = 500 # trailing\nmethods = dim-nss, ipw-x\ndepths = 1,3\nxi = 0.25\n\ngrid_points = 9\n",
        )
        .unwrap();
        assert_eq!(cfg.dgp.n, 500);
        assert_eq!(cfg.depths, vec![1, 3]);
        assert_eq!(cfg.grid.len(), 9);
        assert_eq!(cfg.grid[0], 0.1);
        assert_eq!(cfg.methods[1].rule, SplitRule::IpwVar { xi: 0.25 });
        let names: Vec<String> = cfg.specs().iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["dim-nss-K1", "dim-nss-K3", "ipw-x-K1", "ipw-x-K3"]);
        cfg.validate().unwrap();
    }

    #[test]
    fn default_methods_follow_xi() {
        let cfg = ExperimentConfig::from_text("experiment = bias\nxi = 0.3\n").unwrap();
        assert!(cfg.methods.iter().any(|m| m.rule == SplitRule::IpwVar { xi: 0.3 }));
        assert_eq!(cfg.methods.len(), 9);
    }

    #[test]
    fn unknown_keys_are_listed() {
        let err = ExperimentConfig::from_text("experiment = imse\nfoo = 1\nbar = 2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bar") && msg.contains("foo"), "{msg}");
        // keys of other experiments are unknown here too
        assert!(ExperimentConfig::from_text("experiment = imse\nmethods = dim-nss\n").is_err());
    }

    #[test]
    fn missing_experiment_is_named() {
        let err = ExperimentConfig::from_text("n = 5\n").unwrap_err();
        assert!(err.to_string().contains("experiment"));
    }

    #[test]
    fn malformed_lines() {
        assert!(parse_pairs("just words\n").is_err());
        assert!(parse_pairs("a = 1\na = 2\n").is_err());
        assert!(parse_pairs("= 1\n").is_err());
        assert!(ExperimentConfig::from_text("experiment = imse\nreps = many\n").is_err());
        assert!(ExperimentConfig::from_text("experiment = nope\n").is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig::defaults(Experiment::SplitIndex);
        cfg.validate().unwrap();
        cfg.a = 0.95;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::defaults(Experiment::OuMaxloc);
        cfg.window = (2.0, 1.0, 4.0);
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::defaults(Experiment::Bias);
        cfg.dgp.xi = 1.0;
        assert!(cfg.validate().is_err());
        for e in Experiment::ALL {
            ExperimentConfig::defaults(e).validate().unwrap();
        }
    }

    #[test]
    fn imse_forces_a_single_arm_law() {
        let cfg = ExperimentConfig::from_text("experiment = imse\nerr0 = laplace:2\nc0 = 3\n").unwrap();
        assert_eq!(cfg.dgp.err1, cfg.dgp.err0);
        assert_eq!(cfg.dgp.c1, 3.0);
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(3), Some(4), Some("5")).unwrap(), 3);
        assert_eq!(resolve_seed(None, Some(4), Some("5")).unwrap(), 4);
        assert_eq!(resolve_seed(None, None, Some("5")).unwrap(), 5);
        assert_eq!(resolve_seed(None, None, None).unwrap(), DEFAULT_SEED);
        assert!(resolve_seed(None, None, Some("x")).is_err());
    }

    #[test]
    fn hash_tracks_settings() {
        let a = ExperimentConfig::defaults(Experiment::Bias);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.x = 0.25;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn csv_names() {
        assert_eq!(Experiment::OuDarlingErdos.csv_name(), "ou_darling_erdos.csv");
        assert_eq!("sup-error".parse::<Experiment>().unwrap(), Experiment::SupError);
    }
}
