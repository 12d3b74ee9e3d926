use super::{FactorizedTarget, StaticTarget};
use crate::error::{Error, Result};
use crate::numkit::{gaussian_log_density, skew_normal_log_pdf};

/// Skew-normal target with location `xi`, scale `omega` and shape `alpha`.
#[derive(Clone, Debug)]
pub struct SkewNormalTarget {
    pub xi: f64,
    pub omega: f64,
    pub alpha: f64,
}

impl SkewNormalTarget {
    pub fn new(xi: f64, omega: f64, alpha: f64) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::arg(format!(
                "skew-normal scale must be positive, got {omega}"
            )));
        }
        Ok(Self { xi, omega, alpha })
    }

    /// Mean and standard deviation of the target, which is also the
    /// inclusive-KL optimum within the Gaussian family.
    pub fn moment_matched(&self) -> (f64, f64) {
        let delta = self.alpha / (1.0 + self.alpha * self.alpha).sqrt();
        let two_over_pi = 2.0 / std::f64::consts::PI;
        let mean = self.xi + self.omega * delta * two_over_pi.sqrt();
        let var = self.omega * self.omega * (1.0 - two_over_pi * delta * delta);
        (mean, var.sqrt())
    }
}

impl StaticTarget for SkewNormalTarget {
    fn dim(&self) -> usize {
        1
    }

    fn log_joint(&self, z: &[f64]) -> f64 {
        skew_normal_log_pdf(z[0], self.xi, self.omega, self.alpha).unwrap_or(f64::NEG_INFINITY)
    }
}

/// Unknown mean under Gaussian noise with a zero-mean Gaussian prior:
/// `z ~ N(0, prior_var)`, `x_i ~ N(z, noise_var)`.
#[derive(Clone, Debug)]
pub struct ConjugateGaussian {
    pub prior_var: f64,
    pub noise_var: f64,
    pub data: Vec<f64>,
}

impl ConjugateGaussian {
    pub fn new(prior_var: f64, noise_var: f64, data: Vec<f64>) -> Result<Self> {
        if !(prior_var > 0.0 && noise_var > 0.0) {
            return Err(Error::arg("conjugate model variances must be positive"));
        }
        Ok(Self {
            prior_var,
            noise_var,
            data,
        })
    }

    /// Exact posterior `(mean, var)`.
    pub fn posterior(&self) -> (f64, f64) {
        let precision = 1.0 / self.prior_var + self.data.len() as f64 / self.noise_var;
        let sum: f64 = self.data.iter().sum();
        let var = 1.0 / precision;
        (sum / self.noise_var * var, var)
    }

    /// Exact `log p(x)`.
    pub fn log_evidence(&self) -> f64 {
        // log p(x) = log p(x, z) − log p(z | x) at any z; use z = posterior mean
        let (m, v) = self.posterior();
        self.log_joint(&[m]) - gaussian_log_density(m, m, v)
    }
}

impl StaticTarget for ConjugateGaussian {
    fn dim(&self) -> usize {
        1
    }

    fn log_joint(&self, z: &[f64]) -> f64 {
        self.log_prior(z)
            + self
                .data
                .iter()
                .map(|&x| gaussian_log_density(x, z[0], self.noise_var))
                .sum::<f64>()
    }
}

impl FactorizedTarget for ConjugateGaussian {
    fn n_points(&self) -> usize {
        self.data.len()
    }

    fn log_prior(&self, z: &[f64]) -> f64 {
        gaussian_log_density(z[0], 0.0, self.prior_var)
    }

    fn log_lik_point(&self, i: usize, z: &[f64]) -> f64 {
        gaussian_log_density(self.data[i], z[0], self.noise_var)
    }
}
