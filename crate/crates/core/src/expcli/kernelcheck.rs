//! Invariance suites: run a kernel for many iterations against a target with
//! an exact oracle and compare chain averages with batch-means standard errors.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::{DiagGaussianParams, TwistingParams};
use crate::kernels::{cis_step, csmc_step};
use crate::models::{ConjugateGaussian, Lgssm, LgssmParams};
use crate::numkit::RngStream;

/// Chain averages are declared consistent within this many standard errors.
pub const Z_THRESHOLD: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub suite: String,
    pub statistic: String,
    pub estimate: f64,
    pub reference: f64,
    pub se: f64,
    pub z: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(suite: &str, statistic: String, estimate: f64, reference: f64, se: f64) -> Self {
        let z = (estimate - reference) / se;
        Self {
            suite: suite.into(),
            statistic,
            estimate,
            reference,
            se,
            z,
            pass: z.abs() <= Z_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CheckReport {
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<10} {:<18} {:>12} {:>12} {:>10} {:>7}  result\n",
            "suite", "statistic", "estimate", "exact", "se", "z"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:<10} {:<18} {:>12.6} {:>12.6} {:>10.2e} {:>7.2}  {}\n",
                r.suite,
                r.statistic,
                r.estimate,
                r.reference,
                r.se,
                r.z,
                if r.pass { "PASS" } else { "FAIL" }
            ));
        }
        s
    }
}

/// Mean of a correlated chain and its batch-means standard error, using
/// `⌊√n⌋` batches of equal size (trailing remainder dropped).
pub fn batch_means(chain: &[f64]) -> Result<(f64, f64)> {
    let n = chain.len();
    let batches = (n as f64).sqrt().floor() as usize;
    if batches < 2 {
        return Err(Error::arg("batch means need at least 4 samples"));
    }
    let size = n / batches;
    let means: Vec<f64> = chain
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok((grand, (var / batches as f64).sqrt()))
}

/// Mean and variance rows for a scalar chain against exact moments.
fn moment_rows(
    suite: &str,
    label: &str,
    chain: &[f64],
    mean: f64,
    var: f64,
) -> Result<Vec<CheckRow>> {
    let (m, se_m) = batch_means(chain)?;
    let sq: Vec<f64> = chain.iter().map(|z| (z - mean).powi(2)).collect();
    let (v, se_v) = batch_means(&sq)?;
    Ok(vec![
        CheckRow::new(suite, format!("mean{label}"), m, mean, se_m),
        CheckRow::new(suite, format!("var{label}"), v, var, se_v),
    ])
}

/// CIS on a 10-point conjugate Gaussian with the prior as a fixed proposal,
/// plus selection-index uniformity when the proposal is the exact posterior.
pub fn cis_invariance_suite(
    samples: usize,
    iters: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Vec<CheckRow>> {
    let mut rng = RngStream::new(seed, 0);
    let truth = rng.std_normal();
    let data: Vec<f64> = (0..10).map(|_| truth + rng.std_normal()).collect();
    let target = ConjugateGaussian::new(1.0, 1.0, data)?;
    let (pm, pv) = target.posterior();

    let prior = DiagGaussianParams::standard(1);
    let mut z = vec![0.0];
    let mut chain = Vec::with_capacity(iters);
    for k in 0..burn_in + iters {
        z = cis_step(&target, &prior, &z, samples, &mut rng)
            .map_err(|e| e.at(k + 1))?
            .0;
        if k >= burn_in {
            chain.push(z[0]);
        }
    }
    let mut rows = moment_rows("cis", "", &chain, pm, pv)?;

    // exact proposal: every weight equals, so J is uniform on 0..S
    if samples > 1 {
        let exact = DiagGaussianParams::new(vec![pm], vec![0.5 * pv.ln()])?;
        let mut counts = vec![0usize; samples];
        let draws = iters.max(1);
        let mut z = vec![pm];
        for k in 0..draws {
            let (next, ps) =
                cis_step(&target, &exact, &z, samples, &mut rng).map_err(|e| e.at(k + 1))?;
            counts[ps.selected_index] += 1;
            z = next;
        }
        let p = 1.0 / samples as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for (j, c) in counts.iter().enumerate() {
            rows.push(CheckRow::new(
                "cis",
                format!("P(J={j})"),
                *c as f64 / draws as f64,
                p,
                se,
            ));
        }
    }
    Ok(rows)
}

/// The twisting used by the CSMC suite: half of the Gaussian likelihood
/// potential at every step (`Λ_t = ½ c²/r`, `ν_t = ½ c x_t / r`).
pub fn moderate_twist(model: &Lgssm) -> TwistingParams {
    let p = &model.params;
    let nu = model
        .data
        .iter()
        .map(|x| 0.5 * p.c * x / p.obs_var)
        .collect();
    let rho = vec![(0.5 * p.c * p.c / p.obs_var).ln(); model.data.len()];
    TwistingParams::new(nu, rho).expect("finite twisting")
}

/// Simulated `T = 10` linear-Gaussian instance used by the CSMC suite.
pub fn lgssm_instance(seed: u64) -> Result<Lgssm> {
    let params = LgssmParams {
        a: 0.8,
        trans_var: 0.5,
        c: 1.0,
        obs_var: 0.5,
        prior_var: 1.0,
    };
    let (_, x) = Lgssm::simulate(params, 10, &mut RngStream::new(seed, 1));
    Lgssm::from_params(params, x)
}

/// CSMC with ancestor sampling on a `T = 10` LGSSM: every per-step marginal
/// mean against the Kalman smoother.
pub fn csmc_invariance_suite(
    samples: usize,
    iters: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Vec<CheckRow>> {
    let model = lgssm_instance(seed)?;
    let twist = moderate_twist(&model);
    let smooth = model.kalman_smoother_moments();
    let t_len = model.data.len();
    let mut rng = RngStream::new(seed, 2);
    let mut traj = vec![0.0; t_len];
    let mut chains = vec![Vec::with_capacity(iters); t_len];
    for k in 0..burn_in + iters {
        traj = csmc_step(&model, &twist, &traj, samples, &mut rng)
            .map_err(|e| e.at(k + 1))?
            .0;
        if k >= burn_in {
            for (c, z) in chains.iter_mut().zip(&traj) {
                c.push(*z);
            }
        }
    }
    let mut rows = Vec::with_capacity(t_len);
    for (t, c) in chains.iter().enumerate() {
        let (m, se) = batch_means(c)?;
        rows.push(CheckRow::new(
            "csmc",
            format!("mean[t={}]", t + 1),
            m,
            smooth.mean[t],
            se,
        ));
    }
    Ok(rows)
}
