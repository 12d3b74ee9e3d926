//! Gradient estimators for the inclusive KL and the marginal likelihood.
//!
//! Every estimator returns an *ascent* direction: for `λ` it estimates
//! `E_p[∇_λ log q(z; λ)] = −∇_λ L_KL(λ)`, for `θ` it estimates
//! `∇_θ log p(x; θ)`. Optimization loops therefore always add the step.

use rand::seq::index;

use crate::error::{Error, Result};
use crate::families::DiagGaussianParams;
use crate::kernels::ParticleSystem;
use crate::models::{FactorizedTarget, ParametricSsm, StaticTarget};
use crate::numkit::{effective_sample_size, log_sum_exp, normalize_log_weights, RngStream};

#[derive(Clone, Debug, PartialEq)]
pub struct GradEstimate {
    pub value: Vec<f64>,
    /// Effective sample size of the weights that produced the estimate.
    pub ess: f64,
    pub max_weight: f64,
}

impl GradEstimate {
    fn single(value: Vec<f64>) -> Self {
        Self {
            value,
            ess: 1.0,
            max_weight: 1.0,
        }
    }

    pub fn norm(&self) -> f64 {
        self.value.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

fn weighted_score_sum(
    q: &DiagGaussianParams,
    points: &[Vec<f64>],
    weights: &[f64],
) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; 2 * q.dim()];
    for (z, &w) in points.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (a, s) in acc.iter_mut().zip(q.score(z)?) {
            *a += w * s;
        }
    }
    Ok(acc)
}

/// Score at the sample retained by the Markov kernel.
pub fn msc_score_gradient(q: &DiagGaussianParams, z_retained: &[f64]) -> Result<GradEstimate> {
    Ok(GradEstimate::single(q.score(z_retained)?))
}

/// `Σ_i w̄^i s(z^i; λ)` over every particle of a conditional sweep.
pub fn rao_blackwell_gradient(q: &DiagGaussianParams, ps: &ParticleSystem) -> Result<GradEstimate> {
    let weights = normalize_log_weights(ps.log_weights.as_slice())?;
    let value = weighted_score_sum(q, &ps.particles, &weights)?;
    Ok(GradEstimate {
        value,
        ess: effective_sample_size(&weights),
        max_weight: weights.iter().copied().fold(0.0, f64::max),
    })
}

/// Self-normalized importance-sampling estimate from `s` fresh draws of `q`.
///
/// Consistent as `s → ∞` but biased for any finite `s`.
pub fn snis_gradient<T: StaticTarget + ?Sized>(
    target: &T,
    q: &DiagGaussianParams,
    s: usize,
    rng: &mut RngStream,
) -> Result<GradEstimate> {
    if s == 0 {
        return Err(Error::arg("SNIS needs at least one sample"));
    }
    let points: Vec<Vec<f64>> = (0..s).map(|_| q.sample(rng)).collect();
    let log_w: Vec<f64> = points
        .iter()
        .map(|z| Ok(target.log_joint(z) - q.log_pdf(z)?))
        .map(|r: Result<f64>| r.map(|w| if w.is_nan() { f64::NEG_INFINITY } else { w }))
        .collect::<Result<_>>()?;
    let weights = normalize_log_weights(&log_w)?;
    let value = weighted_score_sum(q, &points, &weights)?;
    Ok(GradEstimate {
        value,
        ess: effective_sample_size(&weights),
        max_weight: weights.iter().copied().fold(0.0, f64::max),
    })
}

/// `∇_θ log p(z_{1:T}, x_{1:T}; θ)` at a kernel-retained trajectory.
pub fn fisher_gradient<M: ParametricSsm>(ssm: &M, trajectory: &[f64]) -> Result<GradEstimate> {
    Ok(GradEstimate::single(ssm.grad_theta_log_joint(trajectory)?))
}

/// Unnormalized importance-sampling gradient with the subset-average likelihood
/// `p(x_M | z)^{n/m}` for a uniformly drawn mini-batch `M` of size `m`.
///
/// `log_scale` is subtracted from every log-weight. It multiplies the
/// estimate by a positive constant, which rescales step sizes but leaves the
/// fixed points of an SGD loop unchanged.
pub fn subset_avg_gradient<T: FactorizedTarget + ?Sized>(
    target: &T,
    q: &DiagGaussianParams,
    s: usize,
    m: usize,
    log_scale: f64,
    rng: &mut RngStream,
) -> Result<GradEstimate> {
    let n = target.n_points();
    if m == 0 || m > n {
        return Err(Error::arg(format!(
            "mini-batch size {m} must lie in 1..={n}"
        )));
    }
    if s == 0 {
        return Err(Error::arg(
            "subset-average estimator needs at least one sample",
        ));
    }
    let batch = index::sample(rng, n, m).into_vec();
    let power = n as f64 / m as f64;
    let mut points = Vec::with_capacity(s);
    let mut log_w = Vec::with_capacity(s);
    for _ in 0..s {
        let z = q.sample(rng);
        let lik: f64 = batch.iter().map(|&i| target.log_lik_point(i, &z)).sum();
        let lw = target.log_prior(&z) + power * lik - q.log_pdf(&z)? - log_scale;
        log_w.push(if lw.is_nan() { f64::NEG_INFINITY } else { lw });
        points.push(z);
    }
    let raw: Vec<f64> = log_w.iter().map(|w| w.exp() / s as f64).collect();
    let value = weighted_score_sum(q, &points, &raw)?;
    let (ess, max_weight) = match normalize_log_weights(&log_w) {
        Ok(p) => (
            effective_sample_size(&p),
            p.iter().copied().fold(0.0, f64::max),
        ),
        Err(_) => (0.0, 0.0),
    };
    Ok(GradEstimate {
        value,
        ess,
        max_weight,
    })
}

/// Pilot estimate of `log E[w]` for the subset-average weights under `q`,
/// averaging over `draws` independent (mini-batch, sample) pairs.
///
/// Passing it as `log_scale` to [`subset_avg_gradient`] makes the weights
/// O(1) near `q`, which keeps fixed step-size schedules stable.
pub fn subset_avg_log_scale<T: FactorizedTarget + ?Sized>(
    target: &T,
    q: &DiagGaussianParams,
    m: usize,
    draws: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let n = target.n_points();
    if m == 0 || m > n {
        return Err(Error::arg(format!(
            "mini-batch size {m} must lie in 1..={n}"
        )));
    }
    if draws == 0 {
        return Err(Error::arg("pilot estimate needs at least one draw"));
    }
    let power = n as f64 / m as f64;
    let mut log_w = Vec::with_capacity(draws);
    for _ in 0..draws {
        let batch = index::sample(rng, n, m);
        let z = q.sample(rng);
        let lik: f64 = batch.iter().map(|i| target.log_lik_point(i, &z)).sum();
        log_w.push(target.log_prior(&z) + power * lik - q.log_pdf(&z)?);
    }
    Ok(log_sum_exp(&log_w)? - (draws as f64).ln())
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Calls `f` with every `m`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, m: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        f(&idx);
        let mut i = m;
        while i > 0 && idx[i - 1] == n - m + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..m {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub const MAX_ORACLE_SUBSETS: f64 = 1e4;

/// Exact `(mean, var)` of `p̃(z | x) ∝ p(z) Σ_M p(x_M | z)^{n/m}` for the
/// conjugate model `z ~ N(0, prior_var)`, `x_i ~ N(z, noise_var)`, by
/// enumerating every mini-batch.
pub fn perturbed_posterior_oracle(
    prior_var: f64,
    noise_var: f64,
    data: &[f64],
    m: usize,
) -> Result<(f64, f64)> {
    let n = data.len();
    if m == 0 || m > n {
        return Err(Error::arg(format!(
            "mini-batch size {m} must lie in 1..={n}"
        )));
    }
    if !(prior_var > 0.0 && noise_var > 0.0) {
        return Err(Error::arg("variances must be positive"));
    }
    if binomial(n, m) > MAX_ORACLE_SUBSETS {
        return Err(Error::arg(format!(
            "C({n}, {m}) subsets exceed the enumeration limit of {MAX_ORACLE_SUBSETS}"
        )));
    }
    let k = n as f64 / m as f64;
    // Each term p(z) Π_{j∈M} N(x_j; z, r)^k is exp(−½ A z² + B z − C) up to
    // constants shared by every subset.
    let a = 1.0 / prior_var + k * m as f64 / noise_var;
    let mut comps: Vec<(f64, f64)> = Vec::new();
    for_each_subset(n, m, |subset| {
        let sx: f64 = subset.iter().map(|&i| data[i]).sum();
        let sxx: f64 = subset.iter().map(|&i| data[i] * data[i]).sum();
        let b = k * sx / noise_var;
        let c = 0.5 * k * sxx / noise_var;
        comps.push((b * b / (2.0 * a) - c, b / a));
    });
    let log_mass: Vec<f64> = comps.iter().map(|c| c.0).collect();
    let weights = normalize_log_weights(&log_mass)?;
    let var_c = 1.0 / a;
    let mean: f64 = weights.iter().zip(&comps).map(|(w, c)| w * c.1).sum();
    let second: f64 = weights
        .iter()
        .zip(&comps)
        .map(|(w, c)| w * (var_c + c.1 * c.1))
        .sum();
    Ok((mean, second - mean * mean))
}
