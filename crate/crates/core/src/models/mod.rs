//! Target distributions and their exact oracles.

mod lgssm;
mod probit;
mod static_targets;
mod stochvol;

pub use lgssm::{Lgssm, LgssmParams, SmootherMoments};
pub use probit::{probit_log_joint, probit_predict, ProbitData, ProbitModel, Standardizer};
pub use static_targets::{ConjugateGaussian, SkewNormalTarget};
pub use stochvol::{sv_simulate, StochVol, SvParams};

use crate::error::Result;
use crate::numkit::gaussian_log_density;

/// An unnormalized density `log p(z, x)` over `R^dim` with the data baked in.
pub trait StaticTarget: Sync {
    fn dim(&self) -> usize;

    /// Returns `−∞` outside the support, never NaN.
    fn log_joint(&self, z: &[f64]) -> f64;
}

/// A static target whose likelihood factorizes over `n_points` observations,
/// `log p(z, x) = log p(z) + Σ_i log p(x_i | z)`.
pub trait FactorizedTarget: StaticTarget {
    fn n_points(&self) -> usize;
    fn log_prior(&self, z: &[f64]) -> f64;
    fn log_lik_point(&self, i: usize, z: &[f64]) -> f64;
}

/// A scalar-state model with Gaussian prior and Gaussian transitions:
/// `p(z_{1:T}, x_{1:T}) = p(z_1) Π_{t≥2} p(z_t | z_{t−1}) Π_t p(x_t | z_t)`.
///
/// Time indices are 0-based here; `t = 0` is the first state.
pub trait StateSpaceModel: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(mean, var)` of `p(z_1)`.
    fn prior(&self) -> (f64, f64);

    /// `(mean, var)` of `p(z_t | z_{t−1} = prev)`, for `t ≥ 1`.
    fn transition(&self, t: usize, prev: f64) -> (f64, f64);

    /// `log p(x_t | z_t = z)`; zero for a missing observation.
    fn log_obs(&self, t: usize, z: f64) -> f64;

    fn log_prior(&self, z: f64) -> f64 {
        let (m, v) = self.prior();
        gaussian_log_density(z, m, v)
    }

    fn log_trans(&self, t: usize, prev: f64, z: f64) -> f64 {
        let (m, v) = self.transition(t, prev);
        gaussian_log_density(z, m, v)
    }

    fn log_joint(&self, traj: &[f64]) -> f64 {
        let mut lp = 0.0;
        for (t, &z) in traj.iter().enumerate() {
            lp += if t == 0 {
                self.log_prior(z)
            } else {
                self.log_trans(t, traj[t - 1], z)
            };
            lp += self.log_obs(t, z);
        }
        lp
    }
}

/// A state-space model indexed by parameters `θ` with an unconstrained
/// reparameterization, as needed for maximum-likelihood updates.
pub trait ParametricSsm: StateSpaceModel + Sized {
    fn theta_unconstrained(&self) -> Vec<f64>;

    /// The same model (same data) at new unconstrained parameters.
    fn with_theta_unconstrained(&self, u: &[f64]) -> Result<Self>;

    /// `∇_u log p(z_{1:T}, x_{1:T}; θ(u))`.
    fn grad_theta_log_joint(&self, traj: &[f64]) -> Result<Vec<f64>>;

    fn theta_names(&self) -> Vec<String>;
}
