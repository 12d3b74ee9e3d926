//! Stochastic volatility model.
//!
//! ```text
//! z_1 ~ N(0, σ² / (1 − φ²))
//! z_t ~ N(μ + φ (z_{t−1} − μ), σ²)
//! x_t ~ N(0, β exp(z_t))
//! ```

use serde::{Deserialize, Serialize};

use super::{ParametricSsm, StateSpaceModel};
use crate::error::{Error, Result};
use crate::numkit::{RngStream, LN_SQRT_2PI};

/// `θ = (σ², φ, μ, β)`; unconstrained image `(log σ², atanh φ, μ, log β)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvParams {
    pub sigma2: f64,
    pub phi: f64,
    pub mu: f64,
    pub beta: f64,
}

impl SvParams {
    pub fn new(sigma2: f64, phi: f64, mu: f64, beta: f64) -> Result<Self> {
        let p = Self {
            sigma2,
            phi,
            mu,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::arg(format!(
                "sigma2 must be positive, got {}",
                self.sigma2
            )));
        }
        if !(self.phi > -1.0 && self.phi < 1.0) {
            return Err(Error::arg(format!(
                "phi must lie in (-1, 1), got {}",
                self.phi
            )));
        }
        if !self.mu.is_finite() {
            return Err(Error::arg("mu must be finite"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::arg(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn unconstrain(&self) -> [f64; 4] {
        [self.sigma2.ln(), self.phi.atanh(), self.mu, self.beta.ln()]
    }

    pub fn constrain(u: &[f64]) -> Result<Self> {
        if u.len() != 4 {
            return Err(Error::arg(
                "stochastic volatility has 4 unconstrained parameters",
            ));
        }
        Self::new(u[0].exp(), u[1].tanh(), u[2], u[3].exp())
    }

    pub fn stationary_var(&self) -> f64 {
        self.sigma2 / (1.0 - self.phi * self.phi)
    }
}

#[derive(Clone, Debug)]
pub struct StochVol {
    pub params: SvParams,
    pub data: Vec<f64>,
}

impl StochVol {
    pub fn new(params: SvParams, data: Vec<f64>) -> Result<Self> {
        params.validate()?;
        if data.is_empty() {
            return Err(Error::arg(
                "stochastic volatility model needs at least one observation",
            ));
        }
        Ok(Self { params, data })
    }
}

/// Ancestral simulation of `(z_{1:T}, x_{1:T})`.
pub fn sv_simulate(
    params: &SvParams,
    t: usize,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate()?;
    let mut z = Vec::with_capacity(t);
    let mut x = Vec::with_capacity(t);
    for i in 0..t {
        let zi = if i == 0 {
            params.stationary_var().sqrt() * rng.std_normal()
        } else {
            params.mu
                + params.phi * (z[i - 1] - params.mu)
                + params.sigma2.sqrt() * rng.std_normal()
        };
        z.push(zi);
        x.push((params.beta * zi.exp()).sqrt() * rng.std_normal());
    }
    Ok((z, x))
}

impl StateSpaceModel for StochVol {
    fn len(&self) -> usize {
        self.data.len()
    }

    fn prior(&self) -> (f64, f64) {
        (0.0, self.params.stationary_var())
    }

    fn transition(&self, _t: usize, prev: f64) -> (f64, f64) {
        let p = &self.params;
        (p.mu + p.phi * (prev - p.mu), p.sigma2)
    }

    fn log_obs(&self, t: usize, z: f64) -> f64 {
        let x = self.data[t];
        if x.is_nan() {
            return 0.0;
        }
        let log_var = self.params.beta.ln() + z;
        -LN_SQRT_2PI - 0.5 * log_var - 0.5 * x * x * (-log_var).exp()
    }
}

impl ParametricSsm for StochVol {
    fn theta_unconstrained(&self) -> Vec<f64> {
        self.params.unconstrain().to_vec()
    }

    fn with_theta_unconstrained(&self, u: &[f64]) -> Result<Self> {
        Self::new(SvParams::constrain(u)?, self.data.clone())
    }

    fn grad_theta_log_joint(&self, traj: &[f64]) -> Result<Vec<f64>> {
        if traj.len() != self.data.len() {
            return Err(Error::arg("trajectory length does not match the data"));
        }
        let p = &self.params;
        let dphi = 1.0 - p.phi * p.phi;
        let mut g = vec![0.0; 4];

        // prior: only the stationary variance depends on θ
        let v0 = p.stationary_var();
        let dlogv0 = -0.5 + 0.5 * traj[0] * traj[0] / v0;
        g[0] += dlogv0;
        g[1] += dlogv0 * 2.0 * p.phi;

        for t in 1..traj.len() {
            let centered = traj[t - 1] - p.mu;
            let r = traj[t] - p.mu - p.phi * centered;
            g[0] += -0.5 + 0.5 * r * r / p.sigma2;
            g[1] += r / p.sigma2 * centered * dphi;
            g[2] += r / p.sigma2 * (1.0 - p.phi);
        }

        for (t, &x) in self.data.iter().enumerate() {
            if x.is_nan() {
                continue;
            }
            g[3] += -0.5 + 0.5 * x * x / (p.beta * traj[t].exp());
        }
        Ok(g)
    }

    fn theta_names(&self) -> Vec<String> {
        vec![
            "log_sigma2".into(),
            "atanh_phi".into(),
            "mu".into(),
            "log_beta".into(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_params() {
        assert!(SvParams::new(0.0, 0.5, 0.0, 1.0).is_err());
        assert!(SvParams::new(0.1, 1.0, 0.0, 1.0).is_err());
        assert!(SvParams::new(0.1, 0.5, 0.0, -1.0).is_err());
    }

    #[test]
    fn memoryless_prior_variance() {
        let m = StochVol::new(SvParams::new(0.3, 0.0, 0.2, 1.0).unwrap(), vec![0.1]).unwrap();
        assert_eq!(m.prior().1, 0.3);
    }

    #[test]
    fn standard_normal_observation() {
        let m = StochVol::new(SvParams::new(0.1, 0.9, 0.0, 1.0).unwrap(), vec![0.0]).unwrap();
        assert!((m.log_obs(0, 0.0) + 0.918_938_5).abs() < 1e-7);
    }

    #[test]
    fn missing_observations_leave_prior_terms() {
        let p = SvParams::new(0.2, 0.7, 0.1, 0.9).unwrap();
        let m = StochVol::new(p, vec![f64::NAN]).unwrap();
        let g = m.grad_theta_log_joint(&[0.4]).unwrap();
        let v0 = p.stationary_var();
        let d = -0.5 + 0.5 * 0.16 / v0;
        assert!((g[0] - d).abs() < 1e-15);
        assert!((g[1] - 2.0 * p.phi * d).abs() < 1e-15);
        assert_eq!(g[2], 0.0);
        assert_eq!(g[3], 0.0);
        assert_eq!(m.log_obs(0, 0.4), 0.0);
    }

    #[test]
    fn vanishing_noise_keeps_state_at_mean() {
        let p = SvParams::new(1e-30, 0.9, 0.0, 0.7).unwrap();
        let (z, _) = sv_simulate(&p, 100, &mut RngStream::new(1, 0)).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn simulation_is_reproducible() {
        let p = SvParams::new(0.1, 0.9, 0.0, 0.7).unwrap();
        let a = sv_simulate(&p, 50, &mut RngStream::new(4, 1)).unwrap();
        let b = sv_simulate(&p, 50, &mut RngStream::new(4, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn long_run_variance_is_stationary() {
        let p = SvParams::new(0.1, 0.9, 0.0, 0.7).unwrap();
        let (z, _) = sv_simulate(&p, 100_000, &mut RngStream::new(12, 0)).unwrap();
        let n = z.len() as f64;
        let m = z.iter().sum::<f64>() / n;
        let v = z.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        let want = p.stationary_var();
        assert!(((v - want) / want).abs() < 0.05, "{v} vs {want}");
    }
}
