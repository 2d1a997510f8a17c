//! Synthetic experimental data with a constant treatment effect.
//!
//! Covariates are drawn uniformly on `[0,1]^p`. Every estimator in the crate
//! depends on the covariates only through their per-coordinate ranks, so this
//! loses no generality for continuous covariate laws.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{config, domain, structural, Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorFamily {
    Normal,
    Laplace,
    Uniform,
    /// `Exp(mean = scale) - scale`; mean zero but skewed.
    CenteredExponential,
}

/// A mean-zero error law.
///
/// `scale` is the natural scale of the family: the standard deviation for
/// `Normal`, the exponential scale `b` for `Laplace`, the half-width for
/// `Uniform`, and the mean of the underlying exponential for
/// `CenteredExponential`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDist {
    pub family: ErrorFamily,
    pub scale: f64,
}

impl ErrorDist {
    pub fn new(family: ErrorFamily, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(config(format!("error scale must be positive, got {scale}")));
        }
        Ok(ErrorDist { family, scale })
    }

    pub fn normal(sd: f64) -> Self {
        ErrorDist { family: ErrorFamily::Normal, scale: sd }
    }

    pub fn is_symmetric(&self) -> bool {
        self.family != ErrorFamily::CenteredExponential
    }

    pub fn variance(&self) -> f64 {
        let s2 = self.scale * self.scale;
        match self.family {
            ErrorFamily::Normal | ErrorFamily::CenteredExponential => s2,
            ErrorFamily::Laplace => 2.0 * s2,
            ErrorFamily::Uniform => s2 / 3.0,
        }
    }

    pub fn sample(&self, stream: &mut RngStream) -> f64 {
        let s = self.scale;
        match self.family {
            ErrorFamily::Normal => s * stream.standard_normal(),
            ErrorFamily::Laplace => {
                let e = -(1.0 - stream.uniform()).ln();
                if stream.bernoulli(0.5) {
                    s * e
                } else {
                    -s * e
                }
            }
            ErrorFamily::Uniform => s * (2.0 * stream.uniform() - 1.0),
            ErrorFamily::CenteredExponential => s * (-(1.0 - stream.uniform()).ln()) - s,
        }
    }
}

impl fmt::Display for ErrorDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.family {
            ErrorFamily::Normal => "normal",
            ErrorFamily::Laplace => "laplace",
            ErrorFamily::Uniform => "uniform",
            ErrorFamily::CenteredExponential => "cexp",
        };
        write!(f, "{name}:{}", self.scale)
    }
}

impl FromStr for ErrorDist {
    type Err = Error;

    /// Parses `family[:scale]`, e.g. `normal:1`, `laplace:0.5`, `cexp`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, scale) = match s.split_once(':') {
            Some((name, scale)) => {
                let scale = scale
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| config(format!("bad error scale in {s:?}")))?;
                (name.trim(), scale)
            }
            None => (s.trim(), 1.0),
        };
        let family = match name {
            "normal" | "gaussian" => ErrorFamily::Normal,
            "laplace" => ErrorFamily::Laplace,
            "uniform" => ErrorFamily::Uniform,
            "cexp" | "centered-exponential" => ErrorFamily::CenteredExponential,
            other => return Err(config(format!("unknown error family {other:?}"))),
        };
        ErrorDist::new(family, scale)
    }
}

/// Parameters of the experimental design.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpConfig {
    pub n: usize,
    pub p: usize,
    /// Treatment probability.
    pub xi: f64,
    /// Control arm mean.
    pub c0: f64,
    /// Treated arm mean.
    pub c1: f64,
    pub err0: ErrorDist,
    pub err1: ErrorDist,
}

impl DgpConfig {
    /// Pure noise: `tau = c0 = c1 = 0`, standard normal errors, `xi = 1/2`.
    pub fn null(n: usize, p: usize) -> Self {
        DgpConfig {
            n,
            p,
            xi: 0.5,
            c0: 0.0,
            c1: 0.0,
            err0: ErrorDist::normal(1.0),
            err1: ErrorDist::normal(1.0),
        }
    }

    pub fn tau(&self) -> f64 {
        self.c1 - self.c0
    }

    /// Variance of `d e(1)/xi - (1-d) e(0)/(1-xi)`, the noise of the
    /// transformed outcome once the arm means are removed.
    pub fn transformed_noise_variance(&self) -> f64 {
        self.err1.variance() / self.xi + self.err0.variance() / (1.0 - self.xi)
    }

    pub fn validate(&self) -> Result<()> {
        check_xi(self.xi).map_err(|_| config(format!("xi must lie in (0,1), got {}", self.xi)))?;
        if self.p == 0 {
            return Err(config("p must be at least 1"));
        }
        if !(self.c0.is_finite() && self.c1.is_finite()) {
            return Err(config("arm means must be finite"));
        }
        Ok(())
    }
}

pub(crate) fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("treatment probability must lie in (0,1), got {xi}")))
    }
}

/// Observed sample `(y, d, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    d: Vec<bool>,
    x: Array2<f64>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, d: Vec<bool>, x: Array2<f64>) -> Result<Self> {
        if y.len() != d.len() || y.len() != x.nrows() {
            return Err(structural(format!(
                "row counts differ: y={}, d={}, x={}",
                y.len(),
                d.len(),
                x.nrows()
            )));
        }
        Ok(Dataset { y, d, x })
    }

    /// Builds a dataset from row-major covariates.
    pub fn from_rows(y: Vec<f64>, d: Vec<bool>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(1, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(structural("ragged covariate rows"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let x = Array2::from_shape_vec((rows.len(), p), flat)
            .map_err(|e| structural(e.to_string()))?;
        Dataset::new(y, d, x)
    }

    /// Single-covariate dataset.
    pub fn univariate(y: Vec<f64>, d: Vec<bool>, x: Vec<f64>) -> Result<Self> {
        let n = x.len();
        let x = Array2::from_shape_vec((n, 1), x).map_err(|e| structural(e.to_string()))?;
        Dataset::new(y, d, x)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn d(&self) -> &[bool] {
        &self.d
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn covariates(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    pub fn column(&self, l: usize) -> ArrayView1<'_, f64> {
        self.x.column(l)
    }

    pub fn treated_count(&self) -> usize {
        self.d.iter().filter(|&&d| d).count()
    }

    /// Rows `rows`, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            y: rows.iter().map(|&i| self.y[i]).collect(),
            d: rows.iter().map(|&i| self.d[i]).collect(),
            x: self.x.select(Axis(0), rows),
        }
    }

    /// Same covariates and treatments with replaced outcomes.
    pub fn with_outcomes(&self, y: Vec<f64>) -> Result<Dataset> {
        Dataset::new(y, self.d.clone(), self.x.clone())
    }

    /// Outcomes replaced by their transformed version `y (d - xi) / (xi (1 - xi))`.
    pub fn transformed(&self, xi: f64) -> Result<Dataset> {
        let y = self
            .y
            .iter()
            .zip(&self.d)
            .map(|(&y, &d)| transformed_outcome(y, d, xi))
            .collect::<Result<Vec<_>>>()?;
        self.with_outcomes(y)
    }
}

/// `y (d - xi) / (xi (1 - xi))`, whose conditional mean is the treatment effect.
pub fn transformed_outcome(y: f64, d: bool, xi: f64) -> Result<f64> {
    check_xi(xi)?;
    let dv = if d { 1.0 } else { 0.0 };
    Ok(y * (dv - xi) / (xi * (1.0 - xi)))
}

/// `n x p` matrix of independent Uniform[0,1) covariates, filled row by row.
pub fn sample_covariates(n: usize, p: usize, stream: &mut RngStream) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, p), || stream.uniform())
}

/// Draws fresh `(y, d)` for the given covariates.
pub fn sample_panel(cfg: &DgpConfig, x: &Array2<f64>, stream: &mut RngStream) -> Result<Dataset> {
    cfg.validate()?;
    if x.ncols() != cfg.p {
        return Err(structural(format!("covariates have {} columns, expected {}", x.ncols(), cfg.p)));
    }
    let n = x.nrows();
    let mut y = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    for _ in 0..n {
        let treated = stream.bernoulli(cfg.xi);
        let outcome = if treated {
            cfg.c1 + cfg.err1.sample(stream)
        } else {
            cfg.c0 + cfg.err0.sample(stream)
        };
        d.push(treated);
        y.push(outcome);
    }
    Dataset::new(y, d, x.clone())
}

/// Draws a complete sample of `cfg.n` rows.
pub fn sample_dataset(cfg: &DgpConfig, stream: &mut RngStream) -> Result<Dataset> {
    cfg.validate()?;
    let x = sample_covariates(cfg.n, cfg.p, stream);
    sample_panel(cfg, &x, stream)
}
