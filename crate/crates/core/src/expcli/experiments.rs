use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use super::config::{CheckTarget, Estimator, Experiment, ExperimentConfig, ProposalChoice};
use super::data::{load_csv_dataset, split_train_test, write_trace_csv, SplitSpec};
use super::kernelcheck::{cis_invariance_suite, csmc_invariance_suite, CheckReport};
use crate::climb::{
    msc_ml_run, msc_run, smc_marginal_likelihood, snis_sgd_run, subset_avg_sgd_run, CisKernel,
    LoopOptions, MlOptions, ProposalMode, RunOutput, RunRecord, TraceOptions,
};
use crate::error::{Error, Result};
use crate::families::{DiagGaussianParams, TwistingParams};
use crate::gradients::{perturbed_posterior_oracle, subset_avg_log_scale};
use crate::models::{
    sv_simulate, ConjugateGaussian, ParametricSsm, ProbitData, ProbitModel, SkewNormalTarget,
    StaticTarget, StochVol, SvParams,
};
use crate::numkit::RngStream;

/// Skew-normal target of the toy experiment: location 0.5, scale 2, shape 5.
pub const SKEW_NORMAL: (f64, f64, f64) = (0.5, 2.0, 5.0);

/// Subset-average data realizations must separate `p̃` from `p` by this much.
pub const SUBSET_MIN_GAP: f64 = 0.1;

const DATA_STREAM: u64 = 1 << 61;
/// Draws in the pilot estimate of the subset-average weight scale.
const PILOT_DRAWS: usize = 10_000;
const KERNELCHECK_BURN_IN: usize = 1_000;

/// What a call to [`run_experiment`] produced.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub summary: Value,
    pub summary_path: PathBuf,
    pub trace_paths: Vec<PathBuf>,
    /// Human-readable report (the invariance table for `kernelcheck`).
    pub report: String,
    pub failed_replications: usize,
}

struct RepResult {
    summary: Value,
    trace: Option<(Vec<String>, Vec<RunRecord>)>,
}

/// Mean, unbiased standard deviation and standard error of the mean.
pub fn mean_std(v: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, f64::NAN, f64::NAN);
    }
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (m, sd, sd / n.sqrt())
}

fn stats_json(v: &[f64]) -> Value {
    let (m, sd, se) = mean_std(v);
    json!({ "mean": m, "std": sd, "se": se, "n": v.len() })
}

fn loop_opts(cfg: &ExperimentConfig) -> LoopOptions {
    LoopOptions::new(cfg.iters)
        .with_tail(cfg.tail)
        .with_trace(TraceOptions::every(cfg.effective_thin()))
}

fn diag_names(d: usize) -> Vec<String> {
    (0..d)
        .map(|i| format!("mu_{i}"))
        .chain((0..d).map(|i| format!("log_sigma_{i}")))
        .collect()
}

/// Runs one static-target variational fit with the configured estimator.
fn fit_static<T: StaticTarget + ?Sized>(
    cfg: &ExperimentConfig,
    target: &T,
    prior: DiagGaussianParams,
    rng: &mut RngStream,
) -> Result<RunOutput> {
    let d = target.dim();
    let lambda0 = DiagGaussianParams::standard(d);
    let opts = loop_opts(cfg);
    match cfg.estimator {
        Estimator::MscCis => {
            let kernel = CisKernel {
                samples: cfg.samples,
                proposal: match cfg.proposal {
                    ProposalChoice::Adaptive => ProposalMode::Adaptive,
                    ProposalChoice::Prior => ProposalMode::Fixed(prior),
                },
                gradient: cfg.gradient,
            };
            msc_run(target, &kernel, &cfg.schedule, lambda0, None, &opts, rng)
        }
        Estimator::Snis => snis_sgd_run(target, cfg.samples, &cfg.schedule, lambda0, &opts, rng),
        e => Err(Error::arg(format!(
            "estimator {e} needs a factorized target"
        ))),
    }
}

fn skewnormal_rep(cfg: &ExperimentConfig, rng: &mut RngStream) -> Result<RepResult> {
    let (xi, omega, alpha) = SKEW_NORMAL;
    let target = SkewNormalTarget::new(xi, omega, alpha)?;
    let (mu_star, sigma_star) = target.moment_matched();
    let out = fit_static(cfg, &target, DiagGaussianParams::standard(1), rng)?;
    let (mu, sigma) = (out.averaged.mu[0], out.averaged.sigma(0));
    Ok(RepResult {
        summary: json!({
            "mu": mu,
            "sigma": sigma,
            "mu_last": out.last.mu[0],
            "sigma_last": out.last.sigma(0),
            "gap_mu": mu - mu_star,
            "gap_sigma": sigma - sigma_star,
            "sticky_iterations": out.sticky_iterations,
        }),
        trace: Some((diag_names(1), out.records)),
    })
}

fn probit_rep(cfg: &ExperimentConfig, data: &ProbitData, index: usize) -> Result<RepResult> {
    let spec = SplitSpec {
        train_fraction: cfg.train_fraction,
        index: index as u64,
        seed: cfg.seed,
    };
    let (train, test) = split_train_test(data, &spec)?;
    let (n_train, n_test) = (train.n(), test.n());
    let model = ProbitModel::new(train);
    let d = model.dim();
    let mut rng = RngStream::new(cfg.seed, index as u64);
    let out = fit_static(cfg, &model, DiagGaussianParams::standard(d), &mut rng)?;
    let err = ProbitModel::new(test).test_error(&out.averaged)?;
    Ok(RepResult {
        summary: json!({
            "test_error": err,
            "n_train": n_train,
            "n_test": n_test,
            "mu": out.averaged.mu,
            "sigma": (0..d).map(|i| out.averaged.sigma(i)).collect::<Vec<_>>(),
        }),
        trace: Some((diag_names(d), out.records)),
    })
}

fn sv_params(v: &[f64]) -> Result<SvParams> {
    SvParams::new(v[0], v[1], v[2], v[3])
}

fn sv_json(p: &SvParams) -> Value {
    json!({ "sigma2": p.sigma2, "phi": p.phi, "mu": p.mu, "beta": p.beta })
}

/// Evidence estimates from `sweeps` independent sweeps: `(mean, se)`.
fn evidence<M: crate::models::StateSpaceModel>(
    model: &M,
    twist: &TwistingParams,
    cfg: &ExperimentConfig,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    let v = (0..cfg.eval_sweeps.max(1))
        .map(|_| smc_marginal_likelihood(model, twist, cfg.eval_samples, rng))
        .collect::<Result<Vec<_>>>()?;
    let (m, _, se) = mean_std(&v);
    Ok((m, se))
}

fn read_series(path: &std::path::Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut x = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split(',').next_back().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        let v = if field.eq_ignore_ascii_case("nan") || field == "NA" {
            f64::NAN
        } else {
            field.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("not a number: {field:?}"),
            })?
        };
        x.push(v);
    }
    if x.is_empty() {
        return Err(Error::Data(format!(
            "{} contains no observations",
            path.display()
        )));
    }
    Ok(x)
}

fn stochvol_rep(cfg: &ExperimentConfig, rng: &mut RngStream) -> Result<RepResult> {
    let theta_true = sv_params(&cfg.theta_true)?;
    let theta_init = sv_params(&cfg.theta_init)?;
    let (x, simulated) = match &cfg.dataset {
        Some(p) => (read_series(p)?, false),
        None => (
            sv_simulate(&theta_true, cfg.series_len, &mut rng.derive(0))?.1,
            true,
        ),
    };
    let t_len = x.len();
    let model0 = StochVol::new(theta_init, x)?;
    let twist0 = TwistingParams::new(vec![0.0; t_len], vec![0.5f64.ln(); t_len])?;
    let opts = MlOptions {
        samples: cfg.samples,
        lambda_schedule: cfg.schedule.clone(),
        theta_schedule: cfg.schedule.clone(),
        loop_opts: loop_opts(cfg),
    };
    let out = msc_ml_run(model0.clone(), twist0, None, &opts, rng)?;
    let fitted = out.averaged_model()?;

    let mut eval_rng = rng.derive(1);
    let flat = TwistingParams::untwisted(t_len);
    let (ll_init, se_init) = evidence(&model0, &flat, cfg, &mut eval_rng)?;
    let (ll_fit, se_fit) = evidence(&fitted, &flat, cfg, &mut eval_rng)?;
    let (ll_fit_tw, se_fit_tw) = evidence(&fitted, &out.twist_averaged, cfg, &mut eval_rng)?;
    let mut summary = json!({
        "series_len": t_len,
        "simulated": simulated,
        "theta_init": sv_json(&theta_init),
        "theta_fit": sv_json(&fitted.params),
        "log_ml_init": { "mean": ll_init, "se": se_init },
        "log_ml_fit": { "mean": ll_fit, "se": se_fit },
        "log_ml_fit_learned_twist": { "mean": ll_fit_tw, "se": se_fit_tw },
        "improvement": ll_fit - ll_init,
    });
    if simulated {
        let truth = StochVol::new(theta_true, fitted.data.clone())?;
        let (ll_true, se_true) = evidence(&truth, &flat, cfg, &mut eval_rng)?;
        summary["theta_true"] = sv_json(&theta_true);
        summary["log_ml_true"] = json!({ "mean": ll_true, "se": se_true });
        summary["gap_to_true"] = json!(ll_fit - ll_true);
    }
    // the twisting vector is 2T wide; traces keep θ only
    let records = out
        .records
        .into_iter()
        .map(|mut r| {
            r.params = r.theta.take().unwrap_or_default();
            r
        })
        .collect();
    Ok(RepResult {
        summary,
        trace: Some((model0.theta_names(), records)),
    })
}

/// The conjugate subset-average instance: the first data realization (in a
/// fixed search order) whose perturbed posterior mean differs from the exact
/// posterior mean by more than [`SUBSET_MIN_GAP`].
pub struct SubsetInstance {
    pub target: ConjugateGaussian,
    pub data_index: u64,
    pub posterior: (f64, f64),
    pub perturbed: (f64, f64),
}

pub fn subset_instance(seed: u64, m: usize) -> Result<SubsetInstance> {
    let base = RngStream::new(seed, DATA_STREAM);
    for j in 0..10_000u64 {
        let mut rng = base.derive(j);
        let z = rng.std_normal();
        let data: Vec<f64> = (0..10).map(|_| z + rng.std_normal()).collect();
        let (pm, pv) = perturbed_posterior_oracle(1.0, 1.0, &data, m)?;
        let target = ConjugateGaussian::new(1.0, 1.0, data)?;
        let (em, ev) = target.posterior();
        if (pm - em).abs() > SUBSET_MIN_GAP {
            return Ok(SubsetInstance {
                target,
                data_index: j,
                posterior: (em, ev.sqrt()),
                perturbed: (pm, pv.sqrt()),
            });
        }
    }
    Err(Error::Data(
        "no data realization separates the perturbed posterior".into(),
    ))
}

fn subsetavg_rep(
    cfg: &ExperimentConfig,
    inst: &SubsetInstance,
    rng: &mut RngStream,
) -> Result<RepResult> {
    let target = &inst.target;
    let out = match cfg.estimator {
        Estimator::SubsetAvg => {
            let lambda0 = DiagGaussianParams::standard(1);
            let scale = subset_avg_log_scale(target, &lambda0, cfg.subset_size, PILOT_DRAWS, rng)?;
            subset_avg_sgd_run(
                target,
                cfg.samples,
                cfg.subset_size,
                scale,
                &cfg.schedule,
                lambda0,
                &loop_opts(cfg),
                rng,
            )?
        }
        _ => fit_static(cfg, target, DiagGaussianParams::standard(1), rng)?,
    };
    let (mu, sigma) = (out.averaged.mu[0], out.averaged.sigma(0));
    let dist = |(m, s): (f64, f64)| (mu - m).abs().max((sigma - s).abs());
    let (to_pt, to_p) = (dist(inst.perturbed), dist(inst.posterior));
    Ok(RepResult {
        summary: json!({
            "mu": mu,
            "sigma": sigma,
            "dist_to_perturbed": to_pt,
            "dist_to_posterior": to_p,
            "closeness_ratio": to_p / to_pt,
        }),
        trace: Some((diag_names(1), out.records)),
    })
}

fn run_kernelcheck(cfg: &ExperimentConfig) -> Result<CheckReport> {
    let mut report = CheckReport::default();
    if matches!(cfg.target, CheckTarget::Conjugate | CheckTarget::All) {
        report.rows.extend(cis_invariance_suite(
            cfg.samples,
            cfg.iters,
            KERNELCHECK_BURN_IN,
            cfg.seed,
        )?);
    }
    if matches!(cfg.target, CheckTarget::Lgssm | CheckTarget::All) {
        report.rows.extend(csmc_invariance_suite(
            cfg.samples,
            cfg.iters,
            KERNELCHECK_BURN_IN,
            cfg.seed,
        )?);
    }
    Ok(report)
}

fn write_summary(cfg: &ExperimentConfig, summary: &Value) -> Result<PathBuf> {
    let path = cfg.out.join("summary.json");
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(&path, text)?;
    fs::write(cfg.out.join("config.txt"), cfg.to_kv_string())?;
    Ok(path)
}

fn header(cfg: &ExperimentConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("experiment".into(), json!(cfg.experiment.name()));
    m.insert("estimator".into(), json!(cfg.estimator.name()));
    let config: Map<String, Value> = cfg
        .result_pairs()
        .into_iter()
        .map(|(k, v)| (k, json!(v)))
        .collect();
    m.insert("config".into(), Value::Object(config));
    m
}

/// Runs every replication of `cfg`, writing per-replication trace CSVs and a
/// `summary.json` under `cfg.out`.
///
/// Replications run on a pool of `cfg.workers` threads, each on its own
/// stream `(seed, replication index)`, so results do not depend on the
/// worker count. The experiment fails only when every replication fails.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let mut summary = header(cfg);

    if cfg.experiment == Experiment::KernelCheck {
        let report = run_kernelcheck(cfg)?;
        summary.insert("all_passed".into(), json!(report.all_passed()));
        summary.insert("rows".into(), serde_json::to_value(&report.rows)?);
        let summary = Value::Object(summary);
        let summary_path = write_summary(cfg, &summary)?;
        return Ok(ExperimentOutcome {
            summary,
            summary_path,
            trace_paths: Vec::new(),
            report: report.to_table(),
            failed_replications: 0,
        });
    }

    let probit_data = match cfg.experiment {
        Experiment::Probit => Some(load_csv_dataset(
            cfg.dataset.as_deref().expect("validated"),
        )?),
        _ => None,
    };
    let subset = match cfg.experiment {
        Experiment::SubsetAvg => Some(subset_instance(cfg.seed, cfg.subset_size)?),
        _ => None,
    };

    let run_one = |i: usize| -> Result<RepResult> {
        let mut rng = RngStream::new(cfg.seed, i as u64);
        match cfg.experiment {
            Experiment::SkewNormal => skewnormal_rep(cfg, &mut rng),
            Experiment::Probit => probit_rep(cfg, probit_data.as_ref().expect("loaded"), i),
            Experiment::StochVol => stochvol_rep(cfg, &mut rng),
            Experiment::SubsetAvg => subsetavg_rep(cfg, subset.as_ref().expect("built"), &mut rng),
            Experiment::KernelCheck => unreachable!(),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::arg(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<RepResult>> =
        pool.install(|| (0..cfg.replications).into_par_iter().map(run_one).collect());

    let width = cfg.replications.saturating_sub(1).to_string().len().max(3);
    let mut reps = Vec::with_capacity(results.len());
    let mut trace_paths = Vec::new();
    let mut ok: Vec<Value> = Vec::new();
    let mut failed = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(rep) => {
                if let Some((names, records)) = rep.trace {
                    let path = cfg.out.join(format!("trace_{i:0width$}.csv"));
                    write_trace_csv(&path, &names, &records)?;
                    trace_paths.push(path);
                }
                let mut s = rep.summary;
                s["index"] = json!(i);
                ok.push(s.clone());
                reps.push(s);
            }
            Err(e) => {
                log::warn!("replication {i} failed: {e}");
                failed += 1;
                reps.push(json!({ "index": i, "error": e.to_string() }));
            }
        }
    }
    if ok.is_empty() {
        return Err(Error::Data(format!(
            "all {} replications failed",
            cfg.replications
        )));
    }

    let field = |k: &str| -> Vec<f64> { ok.iter().filter_map(|s| s[k].as_f64()).collect() };
    let (aggregate, report) = match cfg.experiment {
        Experiment::SkewNormal => {
            let (xi, omega, alpha) = SKEW_NORMAL;
            let (mu_star, sigma_star) = SkewNormalTarget::new(xi, omega, alpha)?.moment_matched();
            let within = ok
                .iter()
                .filter(|s| {
                    s["gap_mu"].as_f64().is_some_and(|g| g.abs() <= 0.05)
                        && s["gap_sigma"].as_f64().is_some_and(|g| g.abs() <= 0.05)
                })
                .count();
            let (mu, sigma) = (stats_json(&field("mu")), stats_json(&field("sigma")));
            let report = format!(
                "mu = {:.4} ± {:.4}, sigma = {:.4} ± {:.4} (optimum {mu_star:.4}, {sigma_star:.4}); {within}/{} within 0.05",
                mu["mean"].as_f64().unwrap_or(f64::NAN),
                mu["se"].as_f64().unwrap_or(f64::NAN),
                sigma["mean"].as_f64().unwrap_or(f64::NAN),
                sigma["se"].as_f64().unwrap_or(f64::NAN),
                ok.len()
            );
            (
                json!({
                    "optimum": { "mu": mu_star, "sigma": sigma_star },
                    "mu": mu,
                    "sigma": sigma,
                    "within_0.05": within,
                }),
                report,
            )
        }
        Experiment::Probit => {
            let errors = field("test_error");
            let (m, sd, _) = mean_std(&errors);
            (
                json!({ "test_errors": errors, "mean": m, "std": sd }),
                format!("test error {m:.4} ± {sd:.4} over {} splits", ok.len()),
            )
        }
        Experiment::StochVol => {
            let imp = field("improvement");
            let (m, _, _) = mean_std(&imp);
            (
                json!({ "improvement": stats_json(&imp) }),
                format!(
                    "log-marginal improvement {m:.2} nats (mean over {} runs)",
                    ok.len()
                ),
            )
        }
        Experiment::SubsetAvg => {
            let inst = subset.as_ref().expect("built");
            let ratio = field("closeness_ratio");
            let (m, _, _) = mean_std(&ratio);
            (
                json!({
                    "data_index": inst.data_index,
                    "data": inst.target.data,
                    "posterior": { "mean": inst.posterior.0, "std": inst.posterior.1 },
                    "perturbed": { "mean": inst.perturbed.0, "std": inst.perturbed.1 },
                    "mu": stats_json(&field("mu")),
                    "sigma": stats_json(&field("sigma")),
                    "dist_to_perturbed": stats_json(&field("dist_to_perturbed")),
                    "dist_to_posterior": stats_json(&field("dist_to_posterior")),
                }),
                format!(
                    "perturbed posterior ({:.4}, {:.4}), posterior ({:.4}, {:.4}); mean closeness ratio {m:.2}",
                    inst.perturbed.0, inst.perturbed.1, inst.posterior.0, inst.posterior.1
                ),
            )
        }
        Experiment::KernelCheck => unreachable!(),
    };
    summary.insert("aggregate".into(), aggregate);
    summary.insert("failed_replications".into(), json!(failed));
    summary.insert("replications".into(), Value::Array(reps));
    let summary = Value::Object(summary);
    let summary_path = write_summary(cfg, &summary)?;
    Ok(ExperimentOutcome {
        summary,
        summary_path,
        trace_paths,
        report,
        failed_replications: failed,
    })
}
