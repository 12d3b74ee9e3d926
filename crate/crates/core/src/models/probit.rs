//! Bayesian probit regression with a standard normal prior on the weights.

use super::{FactorizedTarget, StaticTarget};
use crate::error::{Error, Result};
use crate::families::DiagGaussianParams;
use crate::numkit::{std_normal_log_cdf, LN_SQRT_2PI};

/// Columns whose standard deviation falls below this are treated as constant.
const VARIANCE_FLOOR: f64 = 1e-12;

/// Per-column centering and scaling fitted on a training split.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Columns that were constant on the fitting rows; they map to zero.
    pub constant: Vec<bool>,
}

impl Standardizer {
    /// Fits on row-major `raw` with `p` columns.
    pub fn fit(raw: &[f64], p: usize) -> Self {
        let n = raw.len().checked_div(p).unwrap_or(0);
        let mut mean = vec![0.0; p];
        let mut sd = vec![1.0; p];
        let mut constant = vec![false; p];
        if n == 0 {
            return Self { mean, sd, constant };
        }
        for j in 0..p {
            let m = (0..n).map(|i| raw[i * p + j]).sum::<f64>() / n as f64;
            let var = (0..n).map(|i| (raw[i * p + j] - m).powi(2)).sum::<f64>() / n as f64;
            mean[j] = m;
            if var.sqrt() < VARIANCE_FLOOR {
                log::warn!("feature column {j} is constant; standardizing it to zeros");
                constant[j] = true;
            } else {
                sd[j] = var.sqrt();
            }
        }
        Self { mean, sd, constant }
    }

    pub fn apply(&self, j: usize, value: f64) -> f64 {
        if self.constant[j] {
            0.0
        } else {
            (value - self.mean[j]) / self.sd[j]
        }
    }
}

/// Probit design: raw features, the standardized design matrix with an
/// intercept column appended last, and binary labels.
#[derive(Clone, Debug)]
pub struct ProbitData {
    n: usize,
    p: usize,
    d: usize,
    raw: Vec<f64>,
    x: Vec<f64>,
    y: Vec<u8>,
    standardizer: Standardizer,
    /// False for designs supplied verbatim through [`ProbitData::from_design`].
    intercept: bool,
}

impl ProbitData {
    /// Standardizes with statistics of `raw` itself.
    pub fn from_raw(raw: Vec<f64>, p: usize, y: Vec<u8>) -> Result<Self> {
        let st = Standardizer::fit(&raw, p);
        Self::with_standardizer(raw, p, y, st)
    }

    pub fn with_standardizer(
        raw: Vec<f64>,
        p: usize,
        y: Vec<u8>,
        st: Standardizer,
    ) -> Result<Self> {
        let n = y.len();
        if raw.len() != n * p {
            return Err(Error::arg(format!(
                "feature buffer has {} values, expected {n}×{p}",
                raw.len()
            )));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
        if y.iter().any(|&l| l > 1) {
            return Err(Error::Data("labels must be 0 or 1".into()));
        }
        if st.mean.len() != p {
            return Err(Error::arg("standardizer width does not match features"));
        }
        let d = p + 1;
        let mut x = Vec::with_capacity(n * d);
        for i in 0..n {
            for j in 0..p {
                x.push(st.apply(j, raw[i * p + j]));
            }
            x.push(1.0);
        }
        Ok(Self {
            n,
            p,
            d,
            raw,
            x,
            y,
            standardizer: st,
            intercept: true,
        })
    }

    /// A design matrix used as-is (no standardization, no intercept added).
    pub fn from_design(x: Vec<f64>, d: usize, y: Vec<u8>) -> Result<Self> {
        let n = y.len();
        if x.len() != n * d {
            return Err(Error::arg("design matrix shape mismatch"));
        }
        if y.iter().any(|&l| l > 1) {
            return Err(Error::Data("labels must be 0 or 1".into()));
        }
        Ok(Self {
            n,
            p: d,
            d,
            raw: x.clone(),
            x,
            y,
            standardizer: Standardizer {
                mean: vec![0.0; d],
                sd: vec![1.0; d],
                constant: vec![false; d],
            },
            intercept: false,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of regression weights, intercept included.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of raw feature columns.
    pub fn raw_width(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.x[i * d..(i + 1) * d]
    }

    pub fn raw_row(&self, i: usize) -> &[f64] {
        &self.raw[i * self.p..(i + 1) * self.p]
    }

    pub fn labels(&self) -> &[u8] {
        &self.y
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    /// Rows `idx` of the raw features and labels, restandardized with `st`.
    pub fn subset(&self, idx: &[usize], st: &Standardizer) -> Result<Self> {
        let mut raw = Vec::with_capacity(idx.len() * self.p);
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            raw.extend_from_slice(self.raw_row(i));
            y.push(self.y[i]);
        }
        if self.intercept {
            Self::with_standardizer(raw, self.p, y, st.clone())
        } else {
            Self::from_design(raw, self.d, y)
        }
    }

    /// Fits a standardizer on the given rows of the raw features.
    pub fn fit_standardizer(&self, rows: &[usize]) -> Standardizer {
        let mut raw = Vec::with_capacity(rows.len() * self.p);
        for &i in rows {
            raw.extend_from_slice(self.raw_row(i));
        }
        Standardizer::fit(&raw, self.p)
    }

    fn point_log_lik(&self, i: usize, z: &[f64]) -> f64 {
        let a: f64 = self.row(i).iter().zip(z).map(|(x, w)| x * w).sum();
        if self.y[i] == 1 {
            std_normal_log_cdf(a)
        } else {
            std_normal_log_cdf(-a)
        }
    }
}

/// `log N(z; 0, I) + Σ_t log Φ(±x_tᵀz)`.
pub fn probit_log_joint(data: &ProbitData, z: &[f64]) -> Result<f64> {
    if z.len() != data.dim() {
        return Err(Error::arg(format!(
            "weights have dimension {}, design has {}",
            z.len(),
            data.dim()
        )));
    }
    let prior: f64 = z.iter().map(|w| -0.5 * w * w - LN_SQRT_2PI).sum();
    let lik: f64 = (0..data.n()).map(|i| data.point_log_lik(i, z)).sum();
    Ok(prior + lik)
}

/// Posterior predictive `P(y = 1 | x_new)` under a Gaussian `q`, integrating
/// the probit link in closed form.
pub fn probit_predict(q: &DiagGaussianParams, x_new: &[f64]) -> Result<f64> {
    if x_new.len() != q.dim() {
        return Err(Error::arg(
            "feature vector and variational family differ in dimension",
        ));
    }
    let mut mean = 0.0;
    let mut var = 0.0;
    for (d, &x) in x_new.iter().enumerate() {
        mean += x * q.mu[d];
        var += x * x * q.sigma(d).powi(2);
    }
    Ok(std_normal_log_cdf(mean / (1.0 + var).sqrt()).exp())
}

/// Owns the data and exposes it as a [`StaticTarget`].
#[derive(Clone, Debug)]
pub struct ProbitModel {
    pub data: ProbitData,
}

impl ProbitModel {
    pub fn new(data: ProbitData) -> Self {
        Self { data }
    }

    /// Fraction of rows whose predicted label (`P ≥ 0.5` ↦ 1) is wrong.
    pub fn test_error(&self, q: &DiagGaussianParams) -> Result<f64> {
        if self.data.n() == 0 {
            return Err(Error::arg("empty test set"));
        }
        let mut wrong = 0usize;
        for i in 0..self.data.n() {
            let p = probit_predict(q, self.data.row(i))?;
            let label = u8::from(p >= 0.5);
            if label != self.data.y[i] {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / self.data.n() as f64)
    }
}

impl StaticTarget for ProbitModel {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn log_joint(&self, z: &[f64]) -> f64 {
        probit_log_joint(&self.data, z).unwrap_or(f64::NEG_INFINITY)
    }
}

impl FactorizedTarget for ProbitModel {
    fn n_points(&self) -> usize {
        self.data.n()
    }

    fn log_prior(&self, z: &[f64]) -> f64 {
        z.iter().map(|w| -0.5 * w * w - LN_SQRT_2PI).sum()
    }

    fn log_lik_point(&self, i: usize, z: &[f64]) -> f64 {
        self.data.point_log_lik(i, z)
    }
}
