//! Variational families with analytic scores.
//!
//! Both families store their positive parameters through a logarithm, and
//! every score is returned in those unconstrained coordinates so an optimizer
//! can add increments without projecting back onto a feasible set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::StateSpaceModel;
use crate::numkit::{gaussian_log_density, normal_log_pdf, RngStream};

/// Diagonal Gaussian `N(μ, diag(σ²))` stored as `(μ, log σ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagGaussianParams {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
}

impl DiagGaussianParams {
    pub fn new(mu: Vec<f64>, log_sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != log_sigma.len() {
            return Err(Error::arg(format!(
                "mu has {} entries but log_sigma has {}",
                mu.len(),
                log_sigma.len()
            )));
        }
        Ok(Self { mu, log_sigma })
    }

    /// Standard normal in `d` dimensions.
    pub fn standard(d: usize) -> Self {
        Self {
            mu: vec![0.0; d],
            log_sigma: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn sigma(&self, d: usize) -> f64 {
        self.log_sigma[d].exp()
    }

    /// Parameters packed as `[μ_1..μ_d, log σ_1..log σ_d]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.mu.clone();
        v.extend_from_slice(&self.log_sigma);
        v
    }

    pub fn from_flat(v: &[f64]) -> Result<Self> {
        if !v.len().is_multiple_of(2) {
            return Err(Error::arg(
                "flat diagonal-Gaussian vector must have even length",
            ));
        }
        let d = v.len() / 2;
        Ok(Self {
            mu: v[..d].to_vec(),
            log_sigma: v[d..].to_vec(),
        })
    }

    /// Adds a flat increment in place.
    pub fn add_flat(&mut self, inc: &[f64]) {
        let d = self.dim();
        debug_assert_eq!(inc.len(), 2 * d);
        for i in 0..d {
            self.mu[i] += inc[i];
            self.log_sigma[i] += inc[d + i];
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        self.mu
            .iter()
            .zip(&self.log_sigma)
            .map(|(&m, &ls)| m + ls.exp() * rng.std_normal())
            .collect()
    }

    pub fn log_pdf(&self, z: &[f64]) -> Result<f64> {
        self.check_dim(z)?;
        self.mu
            .iter()
            .zip(&self.log_sigma)
            .zip(z)
            .map(|((&m, &ls), &zi)| normal_log_pdf(zi, m, ls.exp()))
            .sum()
    }

    /// Score `∇_(μ, log σ) log q(z)`, flat layout as in [`Self::to_flat`].
    pub fn score(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        let d = self.dim();
        let mut g = vec![0.0; 2 * d];
        for i in 0..d {
            let inv_var = (-2.0 * self.log_sigma[i]).exp();
            let r = z[i] - self.mu[i];
            g[i] = r * inv_var;
            g[d + i] = r * r * inv_var - 1.0;
        }
        Ok(g)
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::arg(format!(
                "point has dimension {}, family has {}",
                z.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Per-step exponential-quadratic twisting `ψ_t(z) = exp(−½Λ_t z² + ν_t z)`,
/// with `Λ_t = exp(ρ_t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwistingParams {
    pub nu: Vec<f64>,
    pub rho: Vec<f64>,
}

/// `ρ` used for "no twisting": `Λ = e^{-30}` is numerically zero against any
/// reasonable transition precision.
pub const UNTWISTED_RHO: f64 = -30.0;

impl TwistingParams {
    pub fn new(nu: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if nu.len() != rho.len() {
            return Err(Error::arg("nu and rho must have the same length"));
        }
        Ok(Self { nu, rho })
    }

    pub fn untwisted(t: usize) -> Self {
        Self {
            nu: vec![0.0; t],
            rho: vec![UNTWISTED_RHO; t],
        }
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    pub fn lambda(&self, t: usize) -> f64 {
        self.rho[t].exp()
    }

    /// `log ψ_t(z)`.
    pub fn log_psi(&self, t: usize, z: f64) -> f64 {
        -0.5 * self.lambda(t) * z * z + self.nu[t] * z
    }

    /// `[ν_1..ν_T, ρ_1..ρ_T]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.nu.clone();
        v.extend_from_slice(&self.rho);
        v
    }

    pub fn from_flat(v: &[f64]) -> Result<Self> {
        if !v.len().is_multiple_of(2) {
            return Err(Error::arg("flat twisting vector must have even length"));
        }
        let t = v.len() / 2;
        Ok(Self {
            nu: v[..t].to_vec(),
            rho: v[t..].to_vec(),
        })
    }

    pub fn add_flat(&mut self, inc: &[f64]) {
        let t = self.len();
        debug_assert_eq!(inc.len(), 2 * t);
        for i in 0..t {
            self.nu[i] += inc[i];
            self.rho[i] += inc[t + i];
        }
    }

    /// Proposal `(mean, var)` at step `t` given the base Gaussian at that step.
    pub fn proposal(&self, t: usize, base_mean: f64, base_var: f64) -> (f64, f64) {
        twisted_gaussian_compose(base_mean, base_var, self.nu[t], self.lambda(t))
    }
}

/// Normalizes `N(z; m, v) · exp(−½λz² + νz)` into a Gaussian `(mean, var)`.
pub fn twisted_gaussian_compose(base_mean: f64, base_var: f64, nu: f64, lambda: f64) -> (f64, f64) {
    let precision = 1.0 / base_var + lambda;
    let var = 1.0 / precision;
    ((base_mean / base_var + nu) * var, var)
}

fn check_lengths<M: StateSpaceModel + ?Sized>(
    ssm: &M,
    twist: &TwistingParams,
    traj: &[f64],
) -> Result<()> {
    let t = ssm.len();
    if twist.len() != t || traj.len() != t {
        return Err(Error::arg(format!(
            "model has {t} steps, twisting has {}, trajectory has {}",
            twist.len(),
            traj.len()
        )));
    }
    Ok(())
}

/// `(mean, var)` of the base Gaussian at step `t`: the prior at `t = 0`,
/// otherwise the transition out of `traj[t - 1]`.
fn base_at<M: StateSpaceModel + ?Sized>(ssm: &M, t: usize, traj: &[f64]) -> (f64, f64) {
    if t == 0 {
        ssm.prior()
    } else {
        ssm.transition(t, traj[t - 1])
    }
}

/// `log q(z_{1:T}; λ)` of the twisted proposal for a fixed model.
pub fn twisted_log_q<M: StateSpaceModel + ?Sized>(
    ssm: &M,
    twist: &TwistingParams,
    traj: &[f64],
) -> Result<f64> {
    check_lengths(ssm, twist, traj)?;
    Ok((0..traj.len())
        .map(|t| {
            let (bm, bv) = base_at(ssm, t, traj);
            let (m, v) = twist.proposal(t, bm, bv);
            gaussian_log_density(traj[t], m, v)
        })
        .sum())
}

/// Score of [`twisted_log_q`] with respect to `(ν, ρ)`, flat layout.
pub fn twisted_score<M: StateSpaceModel + ?Sized>(
    ssm: &M,
    twist: &TwistingParams,
    traj: &[f64],
) -> Result<Vec<f64>> {
    check_lengths(ssm, twist, traj)?;
    let n = traj.len();
    let mut g = vec![0.0; 2 * n];
    for t in 0..n {
        let (bm, bv) = base_at(ssm, t, traj);
        let lambda = twist.lambda(t);
        let (m, v) = twisted_gaussian_compose(bm, bv, twist.nu[t], lambda);
        let z = traj[t];
        g[t] = z - m;
        // ∂/∂Λ = ½ var − ½ z² + ½ m², then chain through Λ = e^ρ
        g[n + t] = 0.5 * (v - z * z + m * m) * lambda;
    }
    Ok(g)
}

/// Draws a trajectory from the twisted proposal.
pub fn twisted_sample<M: StateSpaceModel + ?Sized>(
    ssm: &M,
    twist: &TwistingParams,
    rng: &mut RngStream,
) -> Vec<f64> {
    let mut traj = Vec::with_capacity(ssm.len());
    for t in 0..ssm.len() {
        let (bm, bv) = base_at(ssm, t, &traj);
        let (m, v) = twist.proposal(t, bm, bv);
        traj.push(m + v.sqrt() * rng.std_normal());
    }
    traj
}
