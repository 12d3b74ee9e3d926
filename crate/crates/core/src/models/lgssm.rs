//! Scalar linear-Gaussian state-space model with Kalman filtering,
//! Rauch–Tung–Striebel smoothing and forward-filter backward-sampling.
//!
//! ```text
//! z_1 ~ N(0, prior_var)
//! z_t = a z_{t-1} + N(0, trans_var)
//! x_t = c z_t + N(0, obs_var)
//! ```
//!
//! Missing observations are encoded as NaN and skipped by every routine.

use super::{ParametricSsm, StateSpaceModel};
use crate::error::{Error, Result};
use crate::numkit::{gaussian_log_density, RngStream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LgssmParams {
    pub a: f64,
    pub trans_var: f64,
    pub c: f64,
    pub obs_var: f64,
    pub prior_var: f64,
}

#[derive(Clone, Debug)]
pub struct Lgssm {
    pub params: LgssmParams,
    pub data: Vec<f64>,
}

/// Per-step smoothed marginals `p(z_t | x_{1:T})`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmootherMoments {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

struct Filtered {
    log_lik: f64,
    mean: Vec<f64>,
    var: Vec<f64>,
    pred_mean: Vec<f64>,
    pred_var: Vec<f64>,
}

impl Lgssm {
    pub fn new(
        a: f64,
        trans_var: f64,
        c: f64,
        obs_var: f64,
        prior_var: f64,
        data: Vec<f64>,
    ) -> Result<Self> {
        Self::from_params(
            LgssmParams {
                a,
                trans_var,
                c,
                obs_var,
                prior_var,
            },
            data,
        )
    }

    pub fn from_params(params: LgssmParams, data: Vec<f64>) -> Result<Self> {
        if !(params.trans_var > 0.0 && params.obs_var > 0.0 && params.prior_var > 0.0) {
            return Err(Error::arg("LGSSM variances must be positive"));
        }
        if data.is_empty() {
            return Err(Error::arg("LGSSM needs at least one time step"));
        }
        Ok(Self { params, data })
    }

    /// Draws `(z_{1:T}, x_{1:T})` from the model.
    pub fn simulate(params: LgssmParams, t: usize, rng: &mut RngStream) -> (Vec<f64>, Vec<f64>) {
        let mut z = Vec::with_capacity(t);
        let mut x = Vec::with_capacity(t);
        for i in 0..t {
            let zi = if i == 0 {
                params.prior_var.sqrt() * rng.std_normal()
            } else {
                params.a * z[i - 1] + params.trans_var.sqrt() * rng.std_normal()
            };
            z.push(zi);
            x.push(params.c * zi + params.obs_var.sqrt() * rng.std_normal());
        }
        (z, x)
    }

    fn filter(&self) -> Filtered {
        let p = &self.params;
        let n = self.data.len();
        let mut out = Filtered {
            log_lik: 0.0,
            mean: Vec::with_capacity(n),
            var: Vec::with_capacity(n),
            pred_mean: Vec::with_capacity(n),
            pred_var: Vec::with_capacity(n),
        };
        let (mut m, mut v) = (0.0, p.prior_var);
        for (t, &x) in self.data.iter().enumerate() {
            if t > 0 {
                m *= p.a;
                v = p.a * p.a * v + p.trans_var;
            }
            out.pred_mean.push(m);
            out.pred_var.push(v);
            if !x.is_nan() {
                let s = p.c * p.c * v + p.obs_var;
                out.log_lik += gaussian_log_density(x, p.c * m, s);
                let k = v * p.c / s;
                m += k * (x - p.c * m);
                v *= 1.0 - k * p.c;
            }
            out.mean.push(m);
            out.var.push(v);
        }
        out
    }

    /// Exact `log p(x_{1:T})`.
    pub fn kalman_log_likelihood(&self) -> f64 {
        self.filter().log_lik
    }

    pub fn kalman_smoother_moments(&self) -> SmootherMoments {
        let f = self.filter();
        let n = self.data.len();
        let mut mean = f.mean.clone();
        let mut var = f.var.clone();
        for t in (0..n.saturating_sub(1)).rev() {
            let j = f.var[t] * self.params.a / f.pred_var[t + 1];
            mean[t] = f.mean[t] + j * (mean[t + 1] - f.pred_mean[t + 1]);
            var[t] = f.var[t] + j * j * (var[t + 1] - f.pred_var[t + 1]);
        }
        SmootherMoments { mean, var }
    }

    /// One exact draw from `p(z_{1:T} | x_{1:T})`.
    pub fn sample_posterior(&self, rng: &mut RngStream) -> Vec<f64> {
        let f = self.filter();
        let n = self.data.len();
        let a = self.params.a;
        let mut z = vec![0.0; n];
        z[n - 1] = f.mean[n - 1] + f.var[n - 1].sqrt() * rng.std_normal();
        for t in (0..n - 1).rev() {
            let j = f.var[t] * a / f.pred_var[t + 1];
            let m = f.mean[t] + j * (z[t + 1] - f.pred_mean[t + 1]);
            let v = f.var[t] - j * a * f.var[t];
            z[t] = m + v.max(0.0).sqrt() * rng.std_normal();
        }
        z
    }
}

impl StateSpaceModel for Lgssm {
    fn len(&self) -> usize {
        self.data.len()
    }

    fn prior(&self) -> (f64, f64) {
        (0.0, self.params.prior_var)
    }

    fn transition(&self, _t: usize, prev: f64) -> (f64, f64) {
        (self.params.a * prev, self.params.trans_var)
    }

    fn log_obs(&self, t: usize, z: f64) -> f64 {
        let x = self.data[t];
        if x.is_nan() {
            0.0
        } else {
            gaussian_log_density(x, self.params.c * z, self.params.obs_var)
        }
    }
}

/// Unconstrained parameters are `(a, log trans_var, log obs_var)`; `c` and
/// `prior_var` stay fixed.
impl ParametricSsm for Lgssm {
    fn theta_unconstrained(&self) -> Vec<f64> {
        vec![
            self.params.a,
            self.params.trans_var.ln(),
            self.params.obs_var.ln(),
        ]
    }

    fn with_theta_unconstrained(&self, u: &[f64]) -> Result<Self> {
        if u.len() != 3 {
            return Err(Error::arg("LGSSM has 3 unconstrained parameters"));
        }
        let params = LgssmParams {
            a: u[0],
            trans_var: u[1].exp(),
            obs_var: u[2].exp(),
            ..self.params
        };
        Self::from_params(params, self.data.clone())
    }

    fn grad_theta_log_joint(&self, traj: &[f64]) -> Result<Vec<f64>> {
        if traj.len() != self.data.len() {
            return Err(Error::arg("trajectory length does not match the data"));
        }
        let p = &self.params;
        let mut g = vec![0.0; 3];
        for t in 1..traj.len() {
            let r = traj[t] - p.a * traj[t - 1];
            g[0] += r * traj[t - 1] / p.trans_var;
            g[1] += -0.5 + 0.5 * r * r / p.trans_var;
        }
        for (t, &x) in self.data.iter().enumerate() {
            if x.is_nan() {
                continue;
            }
            let e = x - p.c * traj[t];
            g[2] += -0.5 + 0.5 * e * e / p.obs_var;
        }
        Ok(g)
    }

    fn theta_names(&self) -> Vec<String> {
        vec!["a".into(), "log_trans_var".into(), "log_obs_var".into()]
    }
}
