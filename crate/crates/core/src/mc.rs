//! Monte Carlo experiments.
//!
//! Replication `r` of an experiment draws from
//! `RngStream::derive(seed, experiment id, r)`, and results are folded in
//! replication order, so every table is a function of the configuration and
//! seed alone, whatever the worker count.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::config::{Experiment, ExperimentConfig};
use crate::dgp::{sample_dataset, DgpConfig};
use crate::error::{config, Error, Result};
use crate::ou::{gumbel_ks_check, max_in_window, simulate_ou, sup_norm_stat};
use crate::rng::RngStream;
use crate::schemes::{estimate, x_adaptive_panels, EstimatorSpec, SamplingScheme};
use crate::splitting::{best_split, coordinate_orders, SplitRule};
use crate::stats::{ks_one_sample, quantile, KsResult};
use crate::tree::{grow_tree, SplitSource};

const CHUNK: usize = 256;

/// Runs `map` for every replication on `workers` threads (0 = all cores)
/// and folds the results in replication order.
pub fn run_replications<R, A, M, F>(reps: usize, workers: usize, map: M, mut acc: A, mut fold: F) -> Result<A>
where
    R: Send,
    M: Fn(usize) -> Result<R> + Sync,
    F: FnMut(&mut A, usize, R),
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| config(format!("cannot start worker pool: {e}")))?;
    for start in (0..reps).step_by(CHUNK) {
        let end = (start + CHUNK).min(reps);
        let out: Vec<Result<R>> = pool.install(|| (start..end).into_par_iter().map(&map).collect());
        for (i, r) in out.into_iter().enumerate() {
            fold(&mut acc, start + i, r?);
        }
    }
    Ok(acc)
}

fn stream_for(cfg: &ExperimentConfig, rep: usize) -> RngStream {
    RngStream::derive(cfg.seed, cfg.experiment.id(), rep as u64)
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_real(v: f64) -> String {
    format!("{v}")
}

/// A CSV row type with a fixed header.
pub trait Record {
    const HEADER: &'static str;
    fn fields(&self) -> Vec<String>;
}

/// Rendered CSV plus the provenance of the run that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub header: &'static str,
    pub rows: Vec<String>,
    pub seed: u64,
    pub config_hash: String,
}

impl ResultTable {
    pub fn from_records<R: Record>(records: &[R], cfg: &ExperimentConfig) -> Self {
        ResultTable {
            header: R::HEADER,
            rows: records.iter().map(|r| r.fields().join(",")).collect(),
            seed: cfg.seed,
            config_hash: cfg.hash(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(self.header);
        out.push('\n');
        for r in &self.rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    /// Writes through a temporary file in the same directory and renames it
    /// into place, so the target is either absent or complete.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(dir)?;
        let name = path.file_name().ok_or_else(|| config(format!("{} is not a file path", path.display())))?;
        let tmp: PathBuf = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
        let result = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(self.to_csv().as_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        })();
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        Ok(result?)
    }
}

// ---------------------------------------------------------------- split index

#[derive(Debug, Clone, PartialEq)]
pub struct SplitIndexRow {
    pub rule: &'static str,
    pub n: usize,
    pub p: usize,
    pub rep: usize,
    /// 1-based; 0 when no valid split exists.
    pub coord: usize,
    pub index: usize,
    pub threshold: f64,
}

impl Record for SplitIndexRow {
    const HEADER: &'static str = "rule,n,p,rep,coord,index,threshold";
    fn fields(&self) -> Vec<String> {
        vec![
            self.rule.into(),
            self.n.to_string(),
            self.p.to_string(),
            self.rep.to_string(),
            self.coord.to_string(),
            self.index.to_string(),
            fmt_real(self.threshold),
        ]
    }
}

/// Root split of a stump on each replication's sample, for every configured rule.
pub fn split_index_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<SplitIndexRow>> {
    let (n, p) = (cfg.dgp.n, cfg.dgp.p);
    run_replications(
        cfg.reps,
        workers,
        |rep| {
            let data = sample_dataset(&cfg.dgp, &mut stream_for(cfg, rep).substream("data"))?;
            let orders = coordinate_orders(&data);
            cfg.rules
                .iter()
                .map(|&rule| {
                    let s = best_split(&data, &orders, rule)?;
                    Ok(SplitIndexRow {
                        rule: rule.name(),
                        n,
                        p,
                        rep,
                        coord: if s.valid { s.coordinate + 1 } else { 0 },
                        index: if s.valid { s.index } else { 0 },
                        threshold: if s.valid { s.threshold } else { f64::NAN },
                    })
                })
                .collect::<Result<Vec<_>>>()
        },
        Vec::new(),
        |acc, _, rows| acc.extend(rows),
    )
    .map(|mut rows| {
        rows.sort_by_key(|r| (cfg.rules.iter().position(|q| q.name() == r.rule), r.rep));
        rows
    })
}

/// Tail frequencies of the root split index for one rule.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitIndexSummary {
    pub rule: &'static str,
    pub reps: usize,
    /// `P(i <= n^b or i >= n - n^b)`.
    pub two_tail: f64,
    /// Per coordinate: `P(n^a <= i <= n^b, j = l)`.
    pub left_band: Vec<f64>,
    /// Per coordinate: `P(n - n^b <= i <= n - n^a, j = l)`.
    pub right_band: Vec<f64>,
    /// `b / e`.
    pub two_tail_bound: f64,
    /// `(b - a) / (2 p e)`.
    pub band_bound: f64,
}

pub fn summarize_split_index(rows: &[SplitIndexRow], a: f64, b: f64) -> Vec<SplitIndexSummary> {
    let mut rules: Vec<&'static str> = Vec::new();
    for r in rows {
        if !rules.contains(&r.rule) {
            rules.push(r.rule);
        }
    }
    rules
        .into_iter()
        .map(|rule| {
            let mine: Vec<&SplitIndexRow> = rows.iter().filter(|r| r.rule == rule).collect();
            let (n, p) = (mine[0].n as f64, mine[0].p);
            let (na, nb) = (n.powf(a), n.powf(b));
            let reps = mine.len();
            let freq = |f: &dyn Fn(&SplitIndexRow) -> bool| mine.iter().filter(|r| f(r)).count() as f64 / reps as f64;
            let two_tail = freq(&|r| r.coord > 0 && ((r.index as f64) <= nb || (r.index as f64) >= n - nb));
            let left_band = (1..=p)
                .map(|l| freq(&|r| r.coord == l && (r.index as f64) >= na && (r.index as f64) <= nb))
                .collect();
            let right_band = (1..=p)
                .map(|l| freq(&|r| r.coord == l && (r.index as f64) >= n - nb && (r.index as f64) <= n - na))
                .collect();
            SplitIndexSummary {
                rule,
                reps,
                two_tail,
                left_band,
                right_band,
                two_tail_bound: b / std::f64::consts::E,
                band_bound: (b - a) / (2.0 * p as f64 * std::f64::consts::E),
            }
        })
        .collect()
}

// ---------------------------------------------------------------- RMSE grid

#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub rule: &'static str,
    pub scheme: &'static str,
    pub depth: usize,
    pub x: f64,
    pub rmse: f64,
    pub se: f64,
    pub reps: usize,
}

impl Record for RmseRow {
    const HEADER: &'static str = "rule,scheme,K,x,rmse,se,reps";
    fn fields(&self) -> Vec<String> {
        vec![
            self.rule.into(),
            self.scheme.into(),
            self.depth.to_string(),
            fmt_real(self.x),
            fmt_real(self.rmse),
            fmt_real(self.se),
            self.reps.to_string(),
        ]
    }
}

/// Evaluation point with `x` in the first coordinate and 1/2 elsewhere.
fn eval_point(x: f64, p: usize) -> Vec<f64> {
    let mut pt = vec![0.5; p];
    pt[0] = x;
    pt
}

/// Running sums of a value and its square, one per cell.
#[derive(Debug, Clone)]
struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Moments {
    fn new(cells: usize) -> Self {
        Moments { sum: vec![0.0; cells], sum_sq: vec![0.0; cells] }
    }

    fn add(&mut self, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            self.sum[i] += v;
            self.sum_sq[i] += v * v;
        }
    }

    /// Mean and standard error of the mean in cell `i`.
    fn mean_se(&self, i: usize, reps: usize) -> (f64, f64) {
        let n = reps as f64;
        let mean = self.sum[i] / n;
        let var = if reps > 1 { ((self.sum_sq[i] - n * mean * mean) / (n - 1.0)).max(0.0) } else { f64::NAN };
        (mean, (var / n).sqrt())
    }
}

/// Pointwise RMSE of every estimator over the evaluation grid.
pub fn rmse_grid_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<RmseRow>> {
    let specs = cfg.specs();
    let tau = cfg.dgp.tau();
    let points: Vec<Vec<f64>> = cfg.grid.iter().map(|&x| eval_point(x, cfg.dgp.p)).collect();
    let cells = specs.len() * points.len();
    let acc = run_replications(
        cfg.reps,
        workers,
        |rep| {
            let stream = stream_for(cfg, rep);
            let data = sample_dataset(&cfg.dgp, &mut stream.substream("data"))?;
            let mut sq = Vec::with_capacity(cells);
            for spec in &specs {
                let ft = estimate(&cfg.dgp, &data, spec, &stream)?;
                for pt in &points {
                    sq.push((ft.predict(pt)? - tau).powi(2));
                }
            }
            Ok(sq)
        },
        Moments::new(cells),
        |m, _, sq| m.add(&sq),
    )?;
    let mut rows = Vec::with_capacity(cells);
    for (s, spec) in specs.iter().enumerate() {
        for (g, &x) in cfg.grid.iter().enumerate() {
            let (mse, mse_se) = acc.mean_se(s * points.len() + g, cfg.reps);
            let rmse = mse.sqrt();
            let se = if rmse > 0.0 { mse_se / (2.0 * rmse) } else { 0.0 };
            rows.push(RmseRow { rule: spec.rule.name(), scheme: spec.scheme.name(), depth: spec.depth, x, rmse, se, reps: cfg.reps });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------- IMSE

#[derive(Debug, Clone, PartialEq)]
pub struct ImseRow {
    pub mode: &'static str,
    pub depth: usize,
    pub size: usize,
    pub imse: f64,
    pub bound: f64,
    pub reps: usize,
}

impl Record for ImseRow {
    const HEADER: &'static str = "mode,K,N,imse,bound,reps";
    fn fields(&self) -> Vec<String> {
        vec![
            self.mode.into(),
            self.depth.to_string(),
            self.size.to_string(),
            fmt_real(self.imse),
            fmt_real(self.bound),
            self.reps.to_string(),
        ]
    }
}

/// `2^(K+1) (K+1) sigma^2 / (N+1)`.
pub fn imse_bound(depth: usize, size: usize, sigma2: f64) -> f64 {
    2f64.powi(depth as i32 + 1) * (depth + 1) as f64 * sigma2 / (size + 1) as f64
}

/// Integrated squared error of X-adaptive regression trees with `N` rows per panel.
pub fn imse_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<ImseRow>> {
    let mu = cfg.dgp.c0;
    let sigma2 = cfg.dgp.err0.variance();
    let designs: Vec<(EstimatorSpec, DgpConfig)> = cfg
        .depths
        .iter()
        .zip(&cfg.sizes)
        .map(|(&k, &size)| {
            let mut dgp = cfg.dgp.clone();
            dgp.n = size * (k + 1);
            (EstimatorSpec::new(SplitRule::CartSse, SamplingScheme::XAdaptive, k), dgp)
        })
        .collect();
    let sums = run_replications(
        cfg.reps,
        workers,
        |rep| {
            let stream = stream_for(cfg, rep);
            designs
                .iter()
                .map(|(spec, dgp)| {
                    let panels = x_adaptive_panels(dgp, spec.depth, &mut stream.substream(&format!("K{}", spec.depth)))?;
                    Ok(crate::schemes::fit_x_adaptive(&panels, spec)?.integrated_squared_error(mu))
                })
                .collect::<Result<Vec<f64>>>()
        },
        vec![0.0; designs.len()],
        |acc, _, v| acc.iter_mut().zip(v).for_each(|(a, x)| *a += x),
    )?;
    Ok(designs
        .iter()
        .zip(&cfg.sizes)
        .zip(sums)
        .map(|(((spec, _), &size), total)| ImseRow {
            mode: "regression",
            depth: spec.depth,
            size,
            imse: total / cfg.reps as f64,
            bound: imse_bound(spec.depth, size, sigma2),
            reps: cfg.reps,
        })
        .collect())
}

// ---------------------------------------------------------------- bias

#[derive(Debug, Clone, PartialEq)]
pub struct BiasRow {
    pub rule: &'static str,
    pub scheme: &'static str,
    pub depth: usize,
    pub x: f64,
    pub mean: f64,
    pub se: f64,
    /// Fraction of replications whose leaf at `x` fell back to 0.
    pub p_empty: f64,
    pub reps: usize,
}

impl Record for BiasRow {
    const HEADER: &'static str = "rule,scheme,K,x,mean,se,p_empty,reps";
    fn fields(&self) -> Vec<String> {
        vec![
            self.rule.into(),
            self.scheme.into(),
            self.depth.to_string(),
            fmt_real(self.x),
            fmt_real(self.mean),
            fmt_real(self.se),
            fmt_real(self.p_empty),
            self.reps.to_string(),
        ]
    }
}

impl BiasRow {
    /// Expected value when leaves fall back to 0 with probability `p_empty`.
    pub fn target(&self, tau: f64) -> f64 {
        tau * (1.0 - self.p_empty)
    }
}

/// Monte Carlo mean of each estimator at the point `x`.
pub fn bias_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<BiasRow>> {
    let specs = cfg.specs();
    let point = eval_point(cfg.x, cfg.dgp.p);
    let (moments, empty) = run_replications(
        cfg.reps,
        workers,
        |rep| {
            let stream = stream_for(cfg, rep);
            let data = sample_dataset(&cfg.dgp, &mut stream.substream("data"))?;
            specs
                .iter()
                .map(|spec| {
                    let ft = estimate(&cfg.dgp, &data, spec, &stream)?;
                    let leaf = ft.leaf_at(&point)?;
                    Ok((leaf.estimate.value, leaf.estimate.degenerate))
                })
                .collect::<Result<Vec<_>>>()
        },
        (Moments::new(specs.len()), vec![0usize; specs.len()]),
        |(m, e), _, v| {
            m.add(&v.iter().map(|t| t.0).collect::<Vec<_>>());
            e.iter_mut().zip(&v).for_each(|(c, t)| *c += usize::from(t.1));
        },
    )?;
    Ok(specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let (mean, se) = moments.mean_se(i, cfg.reps);
            BiasRow {
                rule: spec.rule.name(),
                scheme: spec.scheme.name(),
                depth: spec.depth,
                x: cfg.x,
                mean,
                se,
                p_empty: empty[i] as f64 / cfg.reps as f64,
                reps: cfg.reps,
            }
        })
        .collect())
}

// ---------------------------------------------------------------- sup error

#[derive(Debug, Clone, PartialEq)]
pub struct SupErrorRow {
    pub rule: &'static str,
    pub scheme: &'static str,
    pub depth: usize,
    pub n: usize,
    pub threshold: f64,
    pub exceed_freq: f64,
    pub q50: f64,
    pub q90: f64,
    pub reps: usize,
}

impl Record for SupErrorRow {
    const HEADER: &'static str = "rule,scheme,K,n,threshold,exceed_freq,q50,q90,reps";
    fn fields(&self) -> Vec<String> {
        vec![
            self.rule.into(),
            self.scheme.into(),
            self.depth.to_string(),
            self.n.to_string(),
            fmt_real(self.threshold),
            fmt_real(self.exceed_freq),
            fmt_real(self.q50),
            fmt_real(self.q90),
            self.reps.to_string(),
        ]
    }
}

/// Noise scale in the uniform-error threshold. Causal rules use the standard
/// deviation of the transformed-outcome noise; plain regression uses that of `y`.
pub fn default_sigma(rule: SplitRule, dgp: &DgpConfig) -> f64 {
    match rule {
        SplitRule::CartSse => {
            let (xi, tau) = (dgp.xi, dgp.tau());
            (xi * dgp.err1.variance() + (1.0 - xi) * dgp.err0.variance() + xi * (1.0 - xi) * tau * tau).sqrt()
        }
        _ => dgp.transformed_noise_variance().sqrt(),
    }
}

/// `sigma n^(-b/2) sqrt(2 log log n)`.
pub fn sup_error_threshold(sigma: f64, n: usize, b: f64) -> f64 {
    let n = n as f64;
    sigma * n.powf(-b / 2.0) * (2.0 * n.ln().ln()).sqrt()
}

/// Distribution of `sup_x |estimate(x) - tau|` for every estimator.
pub fn sup_error_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<SupErrorRow>> {
    let specs = cfg.specs();
    let tau = cfg.dgp.tau();
    let errors = run_replications(
        cfg.reps,
        workers,
        |rep| {
            let stream = stream_for(cfg, rep);
            let data = sample_dataset(&cfg.dgp, &mut stream.substream("data"))?;
            specs
                .iter()
                .map(|spec| Ok(estimate(&cfg.dgp, &data, spec, &stream)?.sup_abs_error(tau)))
                .collect::<Result<Vec<f64>>>()
        },
        vec![Vec::with_capacity(cfg.reps); specs.len()],
        |acc, _, v| acc.iter_mut().zip(v).for_each(|(a, x)| a.push(x)),
    )?;
    Ok(specs
        .iter()
        .zip(errors)
        .map(|(spec, errs)| {
            let sigma = cfg.sigma.unwrap_or_else(|| default_sigma(spec.rule, &cfg.dgp));
            let threshold = sup_error_threshold(sigma, cfg.dgp.n, cfg.b);
            SupErrorRow {
                rule: spec.rule.name(),
                scheme: spec.scheme.name(),
                depth: spec.depth,
                n: cfg.dgp.n,
                threshold,
                exceed_freq: errs.iter().filter(|&&e| e >= threshold).count() as f64 / errs.len() as f64,
                q50: quantile(&errs, 0.5),
                q90: quantile(&errs, 0.9),
                reps: cfg.reps,
            }
        })
        .collect())
}

// ---------------------------------------------------------------- Beta measure

#[derive(Debug, Clone, PartialEq)]
pub struct BetaRow {
    pub size: usize,
    pub k: usize,
    pub count: usize,
    pub ks_stat: f64,
    pub p_value: f64,
}

impl Record for BetaRow {
    const HEADER: &'static str = "N,k,count,ks_stat,p_value";
    fn fields(&self) -> Vec<String> {
        vec![
            self.size.to_string(),
            self.k.to_string(),
            self.count.to_string(),
            fmt_real(self.ks_stat),
            fmt_real(self.p_value),
        ]
    }
}

/// Left count and left-cell measure of the root split of an X-adaptive stump.
pub fn stump_measures(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<(usize, f64)>> {
    let size = cfg.sizes[0];
    let mut dgp = cfg.dgp.clone();
    dgp.n = 2 * size;
    let rule = cfg.rules[0];
    run_replications(
        cfg.reps,
        workers,
        |rep| {
            let panels = x_adaptive_panels(&dgp, 1, &mut stream_for(cfg, rep))?;
            let tree = grow_tree(SplitSource::PerLevel(&panels[..1]), rule, 1)?;
            Ok(tree.splits().first().map(|s| (s.index, s.threshold)))
        },
        Vec::with_capacity(cfg.reps),
        |acc, _, s| acc.extend(s),
    )
}

/// KS test of the left measure against `Beta(k, N - k + 1)` in every
/// left-count bucket holding at least `min_bucket` replications.
pub fn beta_measure_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<BetaRow>> {
    let size = cfg.sizes[0];
    let draws = stump_measures(cfg, workers)?;
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); size];
    for (k, m) in draws {
        buckets[k].push(m);
    }
    buckets
        .iter()
        .enumerate()
        .filter(|(_, b)| !b.is_empty() && b.len() >= cfg.min_bucket)
        .map(|(k, ms)| {
            let law = Beta::new(k as f64, (size - k + 1) as f64).map_err(|e| Error::Statistical(e.to_string()))?;
            let KsResult { statistic, p_value } = ks_one_sample(ms, |m| law.cdf(m))?;
            Ok(BetaRow { size, k, count: ms.len(), ks_stat: statistic, p_value })
        })
        .collect()
}

// ---------------------------------------------------------------- O-U

#[derive(Debug, Clone, PartialEq)]
pub struct DarlingErdosRow {
    pub d: usize,
    pub c: f64,
    pub l: f64,
    pub rep: usize,
    pub stat: f64,
}

impl Record for DarlingErdosRow {
    const HEADER: &'static str = "d,c,L,rep,stat";
    fn fields(&self) -> Vec<String> {
        vec![self.d.to_string(), fmt_real(self.c), fmt_real(self.l), self.rep.to_string(), fmt_real(self.stat)]
    }
}

/// Normalised maxima of the path norm over `[0, c L]`, one per replication.
pub fn darling_erdos_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<DarlingErdosRow>> {
    let (d, c, l) = (cfg.ou_d, cfg.ou_c, cfg.ou_l);
    run_replications(
        cfg.reps,
        workers,
        |rep| {
            let path = simulate_ou(d, c * l, cfg.dt, &mut stream_for(cfg, rep))?;
            Ok(DarlingErdosRow { d, c, l, rep, stat: sup_norm_stat(&path, l, c)?.stat })
        },
        Vec::with_capacity(cfg.reps),
        |acc, _, r| acc.push(r),
    )
}

/// KS fits of the maxima to the Gumbel laws shifted by `log c` and `2 log c`.
pub fn darling_erdos_fits(rows: &[DarlingErdosRow], c: f64) -> Result<(KsResult, KsResult)> {
    let stats: Vec<f64> = rows.iter().map(|r| r.stat).collect();
    Ok((gumbel_ks_check(&stats, c.ln())?, gumbel_ks_check(&stats, 2.0 * c.ln())?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxLocationRow {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub reps: usize,
    pub freq: f64,
    pub se: f64,
}

impl Record for MaxLocationRow {
    const HEADER: &'static str = "A,B,C,reps,freq,se";
    fn fields(&self) -> Vec<String> {
        vec![
            fmt_real(self.a),
            fmt_real(self.b),
            fmt_real(self.c),
            self.reps.to_string(),
            fmt_real(self.freq),
            fmt_real(self.se),
        ]
    }
}

/// Frequency with which the maximum of `|U|` over `[0, C]` lies in `(A, B)`.
pub fn max_location_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<MaxLocationRow> {
    let (a, b, c) = cfg.window;
    let hits = run_replications(
        cfg.reps,
        workers,
        |rep| Ok(max_in_window(&simulate_ou(1, c, cfg.dt, &mut stream_for(cfg, rep))?, a, b)),
        0usize,
        |acc, _, hit| *acc += usize::from(hit),
    )?;
    let freq = hits as f64 / cfg.reps as f64;
    Ok(MaxLocationRow { a, b, c, reps: cfg.reps, freq, se: (freq * (1.0 - freq) / cfg.reps as f64).sqrt() })
}

// ---------------------------------------------------------------- dispatch

/// CSV files and human-readable summary lines of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub files: Vec<(String, ResultTable)>,
    pub summary: Vec<String>,
}

/// Validates `cfg` and runs its experiment.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let name = cfg.experiment.csv_name();
    let (table, summary) = match cfg.experiment {
        Experiment::SplitIndex => {
            let rows = split_index_experiment(cfg, workers)?;
            let summary = summarize_split_index(&rows, cfg.a, cfg.b)
                .iter()
                .map(|s| {
                    format!(
                        "{}: P(two tails) = {:.4} (bound {:.4}); left band per coordinate {:?} (bound {:.4})",
                        s.rule,
                        s.two_tail,
                        s.two_tail_bound,
                        s.left_band.iter().map(|f| (f * 1e4).round() / 1e4).collect::<Vec<_>>(),
                        s.band_bound
                    )
                })
                .collect();
            (ResultTable::from_records(&rows, cfg), summary)
        }
        Experiment::RmseGrid => {
            let rows = rmse_grid_experiment(cfg, workers)?;
            let mut summary = Vec::new();
            for spec in cfg.specs() {
                let at = |x: f64| {
                    rows.iter()
                        .filter(|r| r.rule == spec.rule.name() && r.scheme == spec.scheme.name() && r.depth == spec.depth)
                        .min_by(|p, q| (p.x - x).abs().total_cmp(&(q.x - x).abs()))
                        .map(|r| r.rmse)
                        .unwrap_or(f64::NAN)
                };
                summary.push(format!("{spec}: RMSE near 0 = {:.4}, at 1/2 = {:.4}", at(0.0), at(0.5)));
            }
            (ResultTable::from_records(&rows, cfg), summary)
        }
        Experiment::Imse => {
            let rows = imse_experiment(cfg, workers)?;
            let summary = rows
                .iter()
                .map(|r| format!("K = {}, N = {}: IMSE = {:.5}, bound = {:.5}", r.depth, r.size, r.imse, r.bound))
                .collect();
            (ResultTable::from_records(&rows, cfg), summary)
        }
        Experiment::Bias => {
            let rows = bias_experiment(cfg, workers)?;
            let tau = cfg.dgp.tau();
            let summary = rows
                .iter()
                .map(|r| {
                    format!(
                        "{}-{}-K{}: mean = {:.5} (se {:.5}), P(empty) = {:.4}, tau (1 - P(empty)) = {:.5}",
                        r.rule,
                        r.scheme,
                        r.depth,
                        r.mean,
                        r.se,
                        r.p_empty,
                        r.target(tau)
                    )
                })
                .collect();
            (ResultTable::from_records(&rows, cfg), summary)
        }
        Experiment::SupError => {
            let rows = sup_error_experiment(cfg, workers)?;
            let summary = rows
                .iter()
                .map(|r| {
                    format!(
                        "{}-{}-K{}: P(sup error >= {:.4}) = {:.4}",
                        r.rule, r.scheme, r.depth, r.threshold, r.exceed_freq
                    )
                })
                .collect();
            (ResultTable::from_records(&rows, cfg), summary)
        }
        Experiment::BetaMeasure => {
            let rows = beta_measure_experiment(cfg, workers)?;
            let level = 0.01 / rows.len().max(1) as f64;
            let rejected = rows.iter().filter(|r| r.p_value < level).count();
            let summary = vec![format!(
                "{} buckets tested at Bonferroni level {:.2e}; {} rejected",
                rows.len(),
                level,
                rejected
            )];
            (ResultTable::from_records(&rows, cfg), summary)
        }
        Experiment::OuDarlingErdos => {
            let rows = darling_erdos_experiment(cfg, workers)?;
            let summary = match darling_erdos_fits(&rows, cfg.ou_c) {
                Ok((near, far)) => vec![format!(
                    "KS distance to Gumbel(log c) = {:.4}, to Gumbel(2 log c) = {:.4}",
                    near.statistic, far.statistic
                )],
                Err(e) => vec![format!("Gumbel fit skipped: {e}")],
            };
            (ResultTable::from_records(&rows, cfg), summary)
        }
        Experiment::OuMaxloc => {
            let row = max_location_experiment(cfg, workers)?;
            let (a, b, c) = cfg.window;
            let summary = vec![format!(
                "P(argmax in (A, B)) = {:.4} (se {:.4}); (B - A) / C = {:.4}",
                row.freq,
                row.se,
                (b - a) / c
            )];
            (ResultTable::from_records(&[row], cfg), summary)
        }
    };
    Ok(ExperimentOutput { files: vec![(name, table)], summary })
}
