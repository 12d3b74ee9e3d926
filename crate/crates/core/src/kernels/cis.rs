use crate::error::{Error, Result};
use crate::families::DiagGaussianParams;
use crate::models::StaticTarget;
use crate::numkit::{
    categorical_sample, effective_sample_size, normalize_log_weights, LogWeights, RngStream,
};

/// Particles, weights and the selected index from one importance-sampling
/// sweep. `particles[0]` is the conditional sample that entered the sweep.
#[derive(Clone, Debug)]
pub struct ParticleSystem {
    pub particles: Vec<Vec<f64>>,
    pub log_weights: LogWeights,
    pub weights: Vec<f64>,
    pub selected_index: usize,
    /// Every proposed particle had zero weight, so the kernel could only
    /// return the conditional sample.
    pub sticky: bool,
}

impl ParticleSystem {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn ess(&self) -> f64 {
        effective_sample_size(&self.weights)
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }
}

/// One conditional importance sampling transition.
///
/// Pins particle 0 to `z_cond`, draws the other `s − 1` from `proposal`,
/// weights all of them by `p(z, x) / q(z)` and returns the particle picked
/// with probability proportional to its weight.
pub fn cis_step<T: StaticTarget + ?Sized>(
    target: &T,
    proposal: &DiagGaussianParams,
    z_cond: &[f64],
    s: usize,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, ParticleSystem)> {
    if s == 0 {
        return Err(Error::arg("CIS needs at least one particle"));
    }
    if z_cond.len() != target.dim() || proposal.dim() != target.dim() {
        return Err(Error::arg(format!(
            "dimension mismatch: target {}, proposal {}, conditional sample {}",
            target.dim(),
            proposal.dim(),
            z_cond.len()
        )));
    }
    let mut particles = Vec::with_capacity(s);
    particles.push(z_cond.to_vec());
    for _ in 1..s {
        particles.push(proposal.sample(rng));
    }
    let log_w: Vec<f64> = particles
        .iter()
        .map(|z| {
            let lw = target.log_joint(z) - proposal.log_pdf(z)?;
            Ok(if lw.is_nan() { f64::NEG_INFINITY } else { lw })
        })
        .collect::<Result<_>>()?;
    let weights = normalize_log_weights(&log_w)?;
    let sticky = s > 1 && log_w[1..].iter().all(|&w| w == f64::NEG_INFINITY);
    let j = categorical_sample(&weights, rng)?;
    let z_new = particles[j].clone();
    Ok((
        z_new,
        ParticleSystem {
            particles,
            log_weights: LogWeights(log_w),
            weights,
            selected_index: j,
            sticky,
        },
    ))
}
