//! Stochastic-approximation loops.
//!
//! [`msc_run`] is Markovian score climbing over a static target with the CIS
//! kernel; [`msc_ml_run`] adds maximum-likelihood updates of model parameters
//! for state-space models driven by conditional SMC. [`snis_sgd_run`] and
//! [`subset_avg_sgd_run`] are the importance-sampling baselines, which draw
//! fresh samples every iteration instead of threading a Markov chain.

mod schedule;

pub use schedule::{schedule_step, Schedule, Stepper};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::{twisted_score, DiagGaussianParams, TwistingParams};
use crate::gradients::{
    fisher_gradient, msc_score_gradient, rao_blackwell_gradient, snis_gradient,
    subset_avg_gradient, GradEstimate,
};
use crate::kernels::{cis_step, csmc_step, smc_sweep};
use crate::models::{FactorizedTarget, ParametricSsm, StateSpaceModel, StaticTarget};
use crate::numkit::RngStream;

/// Which distribution the CIS kernel proposes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ProposalMode {
    /// The current variational approximation `q(·; λ_{k−1})`.
    Adaptive,
    /// A fixed distribution, e.g. the model prior.
    Fixed(DiagGaussianParams),
}

/// Which score estimate feeds the update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GradientMode {
    /// Score at the retained conditional sample.
    Retained,
    /// Weighted average of scores over every particle of the sweep.
    RaoBlackwell,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CisKernel {
    pub samples: usize,
    pub proposal: ProposalMode,
    pub gradient: GradientMode,
}

impl CisKernel {
    pub fn adaptive(samples: usize) -> Self {
        Self {
            samples,
            proposal: ProposalMode::Adaptive,
            gradient: GradientMode::Retained,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceOptions {
    pub enabled: bool,
    /// Keep every `thin`-th iteration (and always the last).
    pub thin: usize,
}

impl TraceOptions {
    pub const OFF: Self = Self {
        enabled: false,
        thin: 1,
    };

    pub fn every(thin: usize) -> Self {
        Self {
            enabled: true,
            thin: thin.max(1),
        }
    }

    /// One record per iteration up to 10⁴ iterations, 1-in-10 beyond.
    pub fn default_for(iterations: usize) -> Self {
        Self::every(if iterations > 10_000 { 10 } else { 1 })
    }

    fn keep(&self, k: usize, total: usize) -> bool {
        self.enabled && (k.is_multiple_of(self.thin) || k == total)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopOptions {
    pub iterations: usize,
    /// Fraction of final iterates averaged into the reported parameters.
    pub tail_fraction: f64,
    pub trace: TraceOptions,
}

impl LoopOptions {
    pub fn new(iterations: usize) -> Self {
        Self {
            iterations,
            tail_fraction: 0.5,
            trace: TraceOptions::OFF,
        }
    }

    pub fn with_trace(mut self, trace: TraceOptions) -> Self {
        self.trace = trace;
        self
    }

    pub fn with_tail(mut self, tail_fraction: f64) -> Self {
        self.tail_fraction = tail_fraction;
        self
    }

    fn tail_start(&self) -> usize {
        let tail = ((self.iterations as f64) * self.tail_fraction.clamp(0.0, 1.0)).ceil() as usize;
        self.iterations - tail.min(self.iterations)
    }
}

/// One traced iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub iteration: usize,
    /// Variational parameters after the update, flat layout.
    pub params: Vec<f64>,
    /// Unconstrained model parameters after the update, when learned.
    pub theta: Option<Vec<f64>>,
    /// The sample (or trajectory) that produced the gradient.
    pub sample: Vec<f64>,
    pub grad_norm: f64,
    pub ess: f64,
    pub max_weight: f64,
    pub sticky: bool,
}

/// Running mean of flat parameter vectors over the tail of a run.
#[derive(Clone, Debug, Default)]
struct TailAverage {
    sum: Vec<f64>,
    count: usize,
}

impl TailAverage {
    fn push(&mut self, v: &[f64]) {
        if self.sum.is_empty() {
            self.sum = vec![0.0; v.len()];
        }
        for (s, x) in self.sum.iter_mut().zip(v) {
            *s += x;
        }
        self.count += 1;
    }

    fn mean_or(&self, fallback: &[f64]) -> Vec<f64> {
        if self.count == 0 {
            fallback.to_vec()
        } else {
            self.sum.iter().map(|s| s / self.count as f64).collect()
        }
    }
}

/// Result of a variational loop over a diagonal Gaussian.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub last: DiagGaussianParams,
    /// Tail-averaged parameters, averaged in `(μ, log σ)` coordinates.
    pub averaged: DiagGaussianParams,
    pub records: Vec<RunRecord>,
    /// Iterations in which only the conditional sample carried weight.
    pub sticky_iterations: usize,
    /// The chain state after the final iteration.
    pub final_sample: Vec<f64>,
}

/// Markovian score climbing with the CIS kernel.
///
/// The chain is never restarted: each iteration moves the previous sample
/// through one kernel transition at the current `λ` and climbs its score.
pub fn msc_run<T: StaticTarget + ?Sized>(
    target: &T,
    kernel: &CisKernel,
    schedule: &Schedule,
    lambda0: DiagGaussianParams,
    z0: Option<Vec<f64>>,
    opts: &LoopOptions,
    rng: &mut RngStream,
) -> Result<RunOutput> {
    if lambda0.dim() != target.dim() {
        return Err(Error::arg(
            "initial parameters do not match the target dimension",
        ));
    }
    let mut lambda = lambda0;
    let mut z = z0.unwrap_or_else(|| lambda.sample(rng));
    let mut stepper = Stepper::new(schedule.clone(), 2 * lambda.dim());
    let tail_start = opts.tail_start();
    let mut avg = TailAverage::default();
    let mut records = Vec::new();
    let mut sticky_iterations = 0;

    for k in 1..=opts.iterations {
        let proposal = match &kernel.proposal {
            ProposalMode::Adaptive => &lambda,
            ProposalMode::Fixed(p) => p,
        };
        let (z_new, ps) =
            cis_step(target, proposal, &z, kernel.samples, rng).map_err(|e| e.at(k))?;
        z = z_new;
        sticky_iterations += usize::from(ps.sticky);
        let mut g = match kernel.gradient {
            GradientMode::Retained => msc_score_gradient(&lambda, &z),
            GradientMode::RaoBlackwell => rao_blackwell_gradient(&lambda, &ps),
        }
        .map_err(|e| e.at(k))?;
        if kernel.gradient == GradientMode::Retained {
            g.ess = ps.ess();
            g.max_weight = ps.max_weight();
        }
        let inc = stepper.step(&g.value)?;
        lambda.add_flat(&inc);
        let flat = lambda.to_flat();
        if k > tail_start {
            avg.push(&flat);
        }
        if opts.trace.keep(k, opts.iterations) {
            records.push(record(k, flat, None, z.clone(), &g, ps.sticky));
        }
    }
    let averaged = DiagGaussianParams::from_flat(&avg.mean_or(&lambda.to_flat()))?;
    Ok(RunOutput {
        last: lambda,
        averaged,
        records,
        sticky_iterations,
        final_sample: z,
    })
}

fn record(
    k: usize,
    params: Vec<f64>,
    theta: Option<Vec<f64>>,
    sample: Vec<f64>,
    g: &GradEstimate,
    sticky: bool,
) -> RunRecord {
    RunRecord {
        iteration: k,
        params,
        theta,
        sample,
        grad_norm: g.norm(),
        ess: g.ess,
        max_weight: g.max_weight,
        sticky,
    }
}

fn fresh_sample_loop(
    lambda0: DiagGaussianParams,
    schedule: &Schedule,
    opts: &LoopOptions,
    mut grad: impl FnMut(&DiagGaussianParams) -> Result<GradEstimate>,
) -> Result<RunOutput> {
    let mut lambda = lambda0;
    let mut stepper = Stepper::new(schedule.clone(), 2 * lambda.dim());
    let tail_start = opts.tail_start();
    let mut avg = TailAverage::default();
    let mut records = Vec::new();
    for k in 1..=opts.iterations {
        let g = grad(&lambda).map_err(|e| e.at(k))?;
        let inc = stepper.step(&g.value)?;
        lambda.add_flat(&inc);
        let flat = lambda.to_flat();
        if k > tail_start {
            avg.push(&flat);
        }
        if opts.trace.keep(k, opts.iterations) {
            records.push(record(k, flat, None, Vec::new(), &g, false));
        }
    }
    let averaged = DiagGaussianParams::from_flat(&avg.mean_or(&lambda.to_flat()))?;
    Ok(RunOutput {
        last: lambda,
        averaged,
        records,
        sticky_iterations: 0,
        final_sample: Vec::new(),
    })
}

/// SGD with the self-normalized importance-sampling gradient.
pub fn snis_sgd_run<T: StaticTarget + ?Sized>(
    target: &T,
    samples: usize,
    schedule: &Schedule,
    lambda0: DiagGaussianParams,
    opts: &LoopOptions,
    rng: &mut RngStream,
) -> Result<RunOutput> {
    if lambda0.dim() != target.dim() {
        return Err(Error::arg(
            "initial parameters do not match the target dimension",
        ));
    }
    fresh_sample_loop(lambda0, schedule, opts, |l| {
        snis_gradient(target, l, samples, rng)
    })
}

/// SGD with the subset-average-likelihood gradient (mini-batches of size `m`).
#[allow(clippy::too_many_arguments)]
pub fn subset_avg_sgd_run<T: FactorizedTarget + ?Sized>(
    target: &T,
    samples: usize,
    m: usize,
    log_scale: f64,
    schedule: &Schedule,
    lambda0: DiagGaussianParams,
    opts: &LoopOptions,
    rng: &mut RngStream,
) -> Result<RunOutput> {
    if lambda0.dim() != target.dim() {
        return Err(Error::arg(
            "initial parameters do not match the target dimension",
        ));
    }
    fresh_sample_loop(lambda0, schedule, opts, |l| {
        subset_avg_gradient(target, l, samples, m, log_scale, rng)
    })
}

#[derive(Clone, Debug)]
pub struct MlOptions {
    pub samples: usize,
    pub lambda_schedule: Schedule,
    pub theta_schedule: Schedule,
    pub loop_opts: LoopOptions,
}

#[derive(Clone, Debug)]
pub struct MlRunOutput<M> {
    pub twist: TwistingParams,
    pub model: M,
    pub twist_averaged: TwistingParams,
    /// Tail-averaged unconstrained `θ`.
    pub theta_averaged: Vec<f64>,
    pub records: Vec<RunRecord>,
    pub final_trajectory: Vec<f64>,
}

impl<M: ParametricSsm> MlRunOutput<M> {
    /// The model at the tail-averaged parameters.
    pub fn averaged_model(&self) -> Result<M> {
        self.model.with_theta_unconstrained(&self.theta_averaged)
    }
}

/// Markovian score climbing with maximum-likelihood updates of `θ`.
///
/// Each iteration runs one conditional SMC sweep at `(θ_{k−1}, λ_{k−1})`,
/// then updates the twisting parameters along the proposal score and `θ`
/// along the Fisher-identity gradient, both from the same retained
/// trajectory.
pub fn msc_ml_run<M: ParametricSsm>(
    model0: M,
    twist0: TwistingParams,
    traj0: Option<Vec<f64>>,
    opts: &MlOptions,
    rng: &mut RngStream,
) -> Result<MlRunOutput<M>> {
    if twist0.len() != model0.len() {
        return Err(Error::arg(
            "twisting parameters do not match the model length",
        ));
    }
    let mut model = model0;
    let mut twist = twist0;
    let mut traj = match traj0 {
        Some(t) => t,
        None => {
            let sw = smc_sweep(&model, &twist, opts.samples.max(1), rng)?;
            sw.trajectory(sw.selected_index)
        }
    };
    let mut theta = model.theta_unconstrained();
    let mut lambda_stepper = Stepper::new(opts.lambda_schedule.clone(), 2 * twist.len());
    let mut theta_stepper = Stepper::new(opts.theta_schedule.clone(), theta.len());
    let lo = &opts.loop_opts;
    let tail_start = lo.tail_start();
    let mut twist_avg = TailAverage::default();
    let mut theta_avg = TailAverage::default();
    let mut records = Vec::new();

    for k in 1..=lo.iterations {
        let (next, sweep) =
            csmc_step(&model, &twist, &traj, opts.samples, rng).map_err(|e| e.at(k))?;
        traj = next;
        let g_lambda = twisted_score(&model, &twist, &traj).map_err(|e| e.at(k))?;
        let g_theta = fisher_gradient(&model, &traj).map_err(|e| e.at(k))?;
        let inc_lambda = lambda_stepper.step(&g_lambda)?;
        let inc_theta = theta_stepper.step(&g_theta.value)?;
        twist.add_flat(&inc_lambda);
        for (t, d) in theta.iter_mut().zip(&inc_theta) {
            *t += d;
        }
        model = model
            .with_theta_unconstrained(&theta)
            .map_err(|e| e.at(k))?;
        let flat = twist.to_flat();
        if k > tail_start {
            twist_avg.push(&flat);
            theta_avg.push(&theta);
        }
        if lo.trace.keep(k, lo.iterations) {
            let fin = sweep.final_system().ok();
            let ge = GradEstimate {
                value: g_lambda.iter().chain(&g_theta.value).copied().collect(),
                ess: fin.as_ref().map_or(0.0, |p| p.ess()),
                max_weight: fin.as_ref().map_or(0.0, |p| p.max_weight()),
            };
            records.push(record(
                k,
                flat,
                Some(theta.clone()),
                traj.clone(),
                &ge,
                false,
            ));
        }
    }
    let twist_averaged = TwistingParams::from_flat(&twist_avg.mean_or(&twist.to_flat()))?;
    let theta_averaged = theta_avg.mean_or(&theta);
    Ok(MlRunOutput {
        twist,
        model,
        twist_averaged,
        theta_averaged,
        records,
        final_trajectory: traj,
    })
}

/// `log p̂(x)` from one unconditional twisted SMC sweep with `s` particles.
pub fn smc_marginal_likelihood<M: StateSpaceModel + ?Sized>(
    ssm: &M,
    twist: &TwistingParams,
    s: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if s < 2 {
        return Err(Error::arg(
            "marginal-likelihood estimation needs at least 2 particles",
        ));
    }
    Ok(smc_sweep(ssm, twist, s, rng)?.log_evidence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ConjugateGaussian, Lgssm};

    #[test]
    fn zero_iterations_return_initial_parameters() {
        let target = ConjugateGaussian::new(1.0, 1.0, vec![0.5]).unwrap();
        let l0 = DiagGaussianParams::new(vec![0.3], vec![-0.1]).unwrap();
        let out = msc_run(
            &target,
            &CisKernel::adaptive(2),
            &Schedule::default_robbins_monro(),
            l0.clone(),
            None,
            &LoopOptions::new(0),
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        assert_eq!(out.last, l0);
        assert_eq!(out.averaged, l0);
    }

    #[test]
    fn single_particle_freezes_the_sample() {
        let target = ConjugateGaussian::new(1.0, 1.0, vec![0.5, 1.0]).unwrap();
        let out = msc_run(
            &target,
            &CisKernel::adaptive(1),
            &Schedule::default_robbins_monro(),
            DiagGaussianParams::standard(1),
            Some(vec![0.77]),
            &LoopOptions::new(200).with_trace(TraceOptions::every(1)),
            &mut RngStream::new(1, 0),
        )
        .unwrap();
        assert_eq!(out.records.len(), 200);
        assert!(out.records.iter().all(|r| r.sample == vec![0.77]));
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let target = ConjugateGaussian::new(1.0, 1.0, vec![0.5, 1.0, -0.3]).unwrap();
        let run = || {
            msc_run(
                &target,
                &CisKernel::adaptive(3),
                &Schedule::default_adam(),
                DiagGaussianParams::standard(1),
                None,
                &LoopOptions::new(500),
                &mut RngStream::new(42, 3),
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.last.to_flat(), b.last.to_flat());
        assert_eq!(a.averaged.to_flat(), b.averaged.to_flat());
    }

    #[test]
    fn trace_thinning_keeps_last() {
        let target = ConjugateGaussian::new(1.0, 1.0, vec![0.5]).unwrap();
        let out = snis_sgd_run(
            &target,
            2,
            &Schedule::default_robbins_monro(),
            DiagGaussianParams::standard(1),
            &LoopOptions::new(95).with_trace(TraceOptions::every(10)),
            &mut RngStream::new(2, 0),
        )
        .unwrap();
        let its: Vec<usize> = out.records.iter().map(|r| r.iteration).collect();
        assert_eq!(its, vec![10, 20, 30, 40, 50, 60, 70, 80, 90, 95]);
    }

    #[test]
    fn frozen_theta_schedule_keeps_theta() {
        let model = Lgssm::new(0.7, 0.4, 1.0, 0.5, 1.0, vec![0.2, 0.5, -0.1, 0.8]).unwrap();
        let theta0 = model.theta_unconstrained();
        let opts = MlOptions {
            samples: 4,
            lambda_schedule: Schedule::default_adam(),
            theta_schedule: Schedule::frozen(),
            loop_opts: LoopOptions::new(100),
        };
        let out = msc_ml_run(
            model,
            TwistingParams::untwisted(4),
            None,
            &opts,
            &mut RngStream::new(3, 0),
        )
        .unwrap();
        assert_eq!(out.model.theta_unconstrained(), theta0);
        for (a, b) in out.theta_averaged.iter().zip(&theta0) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_ne!(out.twist, TwistingParams::untwisted(4));
    }

    #[test]
    fn single_step_evidence_is_importance_sampling() {
        let model = Lgssm::new(0.7, 0.4, 1.0, 0.5, 1.0, vec![0.9]).unwrap();
        let twist = TwistingParams::new(vec![0.3], vec![0.2]).unwrap();
        let est = smc_marginal_likelihood(&model, &twist, 8, &mut RngStream::new(5, 0)).unwrap();
        // replay: 8 draws from the twisted prior, weights p(z) p(x|z) / q(z)
        let mut rng = RngStream::new(5, 0);
        let (qm, qv) = twist.proposal(0, 0.0, 1.0);
        let lw: Vec<f64> = (0..8)
            .map(|_| {
                let z = qm + qv.sqrt() * rng.std_normal();
                model.log_prior(z) + model.log_obs(0, z)
                    - crate::numkit::gaussian_log_density(z, qm, qv)
            })
            .collect();
        let want = crate::numkit::log_sum_exp(&lw).unwrap() - 8f64.ln();
        assert!((est - want).abs() < 1e-12);
        assert!(smc_marginal_likelihood(&model, &twist, 1, &mut rng).is_err());
    }
}
