//! Twisted (conditional) sequential Monte Carlo for scalar state-space models.
//!
//! Proposals are `q_t(z_t | z_{t−1}) ∝ p(z_t | z_{t−1}) ψ_t(z_t)`. The
//! incremental weight at an intermediate step carries the previous
//! observation and swaps the twist:
//!
//! ```text
//! w_t = p(z_t | z_{t−1}) p(x_{t−1} | z_{t−1}) / q_t(z_t | z_{t−1}) · ψ_t(z_t) / ψ_{t−1}(z_{t−1})
//! ```
//!
//! and at the last step `ψ_T(z_T)` is replaced by `p(x_T | z_T)`, so the
//! product of the weights along a path is `p(z_{1:T}, x_{1:T}) / q(z_{1:T})`.

use super::ParticleSystem;
use crate::error::{Error, Result};
use crate::families::TwistingParams;
use crate::models::StateSpaceModel;
use crate::numkit::{
    categorical_sample, gaussian_log_density, normalize_log_weights, CategoricalTable, LogWeights,
    RngStream,
};

/// All particles and genealogy of one sweep.
#[derive(Clone, Debug)]
pub struct CsmcSweep {
    /// `states[t][i]`.
    pub states: Vec<Vec<f64>>,
    /// `ancestors[t − 1][i]` is the parent at step `t − 1` of particle `i` at step `t`.
    pub ancestors: Vec<Vec<usize>>,
    pub log_weights: Vec<LogWeights>,
    pub selected_index: usize,
    /// `Σ_t log((1/S) Σ_i w_t^i)`.
    pub log_evidence: f64,
}

impl CsmcSweep {
    pub fn num_particles(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// Backtracks the full path ending in particle `i` at the last step.
    pub fn trajectory(&self, i: usize) -> Vec<f64> {
        let n = self.states.len();
        let mut path = vec![0.0; n];
        let mut idx = i;
        for t in (0..n).rev() {
            path[t] = self.states[t][idx];
            if t > 0 {
                idx = self.ancestors[t - 1][idx];
            }
        }
        path
    }

    /// The final-step weights over complete trajectories.
    pub fn final_system(&self) -> Result<ParticleSystem> {
        let last = self
            .log_weights
            .last()
            .ok_or_else(|| Error::arg("empty sweep"))?
            .clone();
        let weights = last.normalize()?;
        let particles = (0..self.num_particles())
            .map(|i| self.trajectory(i))
            .collect();
        Ok(ParticleSystem {
            particles,
            log_weights: last,
            weights,
            selected_index: self.selected_index,
            sticky: false,
        })
    }
}

/// Incremental log-weight at step `t ≥ 1` for a particle moving from `prev` to `z`.
pub fn incremental_log_weight<M: StateSpaceModel + ?Sized>(
    ssm: &M,
    twist: &TwistingParams,
    t: usize,
    prev: f64,
    z: f64,
) -> f64 {
    let (bm, bv) = ssm.transition(t, prev);
    let (qm, qv) = twist.proposal(t, bm, bv);
    let last = t + 1 == ssm.len();
    gaussian_log_density(z, bm, bv) + ssm.log_obs(t - 1, prev)
        - gaussian_log_density(z, qm, qv)
        - twist.log_psi(t - 1, prev)
        + if last {
            ssm.log_obs(t, z)
        } else {
            twist.log_psi(t, z)
        }
}

fn initial_log_weight<M: StateSpaceModel + ?Sized>(
    ssm: &M,
    twist: &TwistingParams,
    z: f64,
    qm: f64,
    qv: f64,
) -> f64 {
    let tail = if ssm.len() == 1 {
        ssm.log_obs(0, z)
    } else {
        twist.log_psi(0, z)
    };
    ssm.log_prior(z) + tail - gaussian_log_density(z, qm, qv)
}

fn sanitize(lw: f64) -> f64 {
    if lw.is_nan() {
        f64::NEG_INFINITY
    } else {
        lw
    }
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::DegenerateWeights { .. } => Error::DegenerateWeights { step: Some(step) },
        e => e,
    }
}

fn sweep<M: StateSpaceModel + ?Sized>(
    ssm: &M,
    twist: &TwistingParams,
    cond: Option<&[f64]>,
    s: usize,
    rng: &mut RngStream,
) -> Result<CsmcSweep> {
    let n = ssm.len();
    if n == 0 {
        return Err(Error::arg("model has no time steps"));
    }
    if s == 0 {
        return Err(Error::arg("SMC needs at least one particle"));
    }
    if twist.len() != n {
        return Err(Error::arg(format!(
            "model has {n} steps but twisting has {}",
            twist.len()
        )));
    }
    if let Some(c) = cond {
        if c.len() != n {
            return Err(Error::arg(format!(
                "conditional trajectory has {} steps, model has {n}",
                c.len()
            )));
        }
    }
    let pinned = usize::from(cond.is_some());

    let mut states = Vec::with_capacity(n);
    let mut ancestors = Vec::with_capacity(n.saturating_sub(1));
    let mut log_weights: Vec<LogWeights> = Vec::with_capacity(n);
    let mut log_evidence = 0.0;

    let (pm, pv) = ssm.prior();
    let (qm, qv) = twist.proposal(0, pm, pv);
    let qsd = qv.sqrt();
    let mut z0 = Vec::with_capacity(s);
    if let Some(c) = cond {
        z0.push(c[0]);
    }
    for _ in pinned..s {
        z0.push(qm + qsd * rng.std_normal());
    }
    let lw0: Vec<f64> = z0
        .iter()
        .map(|&z| sanitize(initial_log_weight(ssm, twist, z, qm, qv)))
        .collect();
    let lw0 = LogWeights(lw0);
    log_evidence += lw0.log_mean().map_err(|e| at_step(e, 1))?;
    states.push(z0);
    log_weights.push(lw0);

    for t in 1..n {
        let wbar = log_weights[t - 1].normalize().map_err(|e| at_step(e, t))?;
        let prev = &states[t - 1];
        let table = CategoricalTable::new(&wbar)?;
        let mut a = vec![0usize; s];
        let mut zt = vec![0.0; s];
        for i in pinned..s {
            let j = table.sample(rng);
            a[i] = j;
            let (bm, bv) = ssm.transition(t, prev[j]);
            let (m, v) = twist.proposal(t, bm, bv);
            zt[i] = m + v.sqrt() * rng.std_normal();
        }
        if let Some(c) = cond {
            let target = c[t];
            // P(a = j) ∝ w̄_{t−1}^j · γ_t(z^j_{1:t−1}, z'_t) / γ_{t−1}(z^j_{1:t−1})
            let as_log: Vec<f64> = wbar
                .iter()
                .zip(prev)
                .map(|(&w, &y)| {
                    if w == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        sanitize(
                            w.ln() + ssm.log_trans(t, y, target) + ssm.log_obs(t - 1, y)
                                - twist.log_psi(t - 1, y),
                        )
                    }
                })
                .collect();
            let p = normalize_log_weights(&as_log).map_err(|e| at_step(e, t + 1))?;
            a[0] = categorical_sample(&p, rng)?;
            zt[0] = target;
        }
        let lw: Vec<f64> = (0..s)
            .map(|i| sanitize(incremental_log_weight(ssm, twist, t, prev[a[i]], zt[i])))
            .collect();
        let lw = LogWeights(lw);
        log_evidence += lw.log_mean().map_err(|e| at_step(e, t + 1))?;
        states.push(zt);
        ancestors.push(a);
        log_weights.push(lw);
    }

    let wbar = log_weights[n - 1].normalize().map_err(|e| at_step(e, n))?;
    let selected_index = categorical_sample(&wbar, rng)?;
    Ok(CsmcSweep {
        states,
        ancestors,
        log_weights,
        selected_index,
        log_evidence,
    })
}

/// One conditional SMC transition with ancestor sampling.
///
/// Particle 0 is pinned to `traj_cond` at every step; its ancestor is redrawn
/// in proportion to how well each candidate history explains the pinned state.
/// Returns the trajectory selected by the final weights.
pub fn csmc_step<M: StateSpaceModel + ?Sized>(
    ssm: &M,
    twist: &TwistingParams,
    traj_cond: &[f64],
    s: usize,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, CsmcSweep)> {
    let out = sweep(ssm, twist, Some(traj_cond), s, rng)?;
    Ok((out.trajectory(out.selected_index), out))
}

/// Unconditional twisted SMC sweep (no pinned particle).
pub fn smc_sweep<M: StateSpaceModel + ?Sized>(
    ssm: &M,
    twist: &TwistingParams,
    s: usize,
    rng: &mut RngStream,
) -> Result<CsmcSweep> {
    sweep(ssm, twist, None, s, rng)
}
