//! Posterior-invariant Markov kernels built from importance sampling.

mod cis;
mod csmc;

pub use cis::{cis_step, ParticleSystem};
pub use csmc::{csmc_step, incremental_log_weight, smc_sweep, CsmcSweep};

use crate::error::{Error, Result};
use crate::numkit::{CategoricalTable, RngStream};

/// `count` iid ancestor indices drawn from `weights`.
pub fn multinomial_resample(
    weights: &[f64],
    count: usize,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    if weights.is_empty() {
        return Err(Error::arg("resampling from an empty weight vector"));
    }
    let table = CategoricalTable::new(weights)?;
    Ok((0..count).map(|_| table.sample(rng)).collect())
}
