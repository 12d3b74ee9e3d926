//! Learn a twisted SMC proposal and the parameters of a stochastic
//! volatility model at the same time (score climbing with maximum
//! likelihood), then compare log-marginal-likelihood estimates.
//!
//!     cargo run --release --example stochastic_volatility

use msc::climb::{msc_ml_run, smc_marginal_likelihood, LoopOptions, MlOptions, Schedule};
use msc::expcli::mean_std;
use msc::families::TwistingParams;
use msc::models::{sv_simulate, StochVol, SvParams};
use msc::RngStream;

fn log_ml(
    model: &StochVol,
    twist: &TwistingParams,
    rng: &mut RngStream,
) -> msc::Result<(f64, f64)> {
    let v: Vec<f64> = (0..5)
        .map(|_| smc_marginal_likelihood(model, twist, 2_000, rng))
        .collect::<msc::Result<_>>()?;
    let (m, _, se) = mean_std(&v);
    Ok((m, se))
}

pub fn run_example() -> msc::Result<()> {
    let truth = SvParams::new(0.1, 0.9, 0.0, 0.7)?;
    let (_, x) = sv_simulate(&truth, 200, &mut RngStream::new(11, 0))?;
    let t_len = x.len();
    let start = StochVol::new(SvParams::new(0.5, 0.5, 0.5, 2.0)?, x.clone())?;

    let opts = MlOptions {
        samples: 10,
        lambda_schedule: Schedule::default_adam(),
        theta_schedule: Schedule::default_adam(),
        loop_opts: LoopOptions::new(3_000),
    };
    let twist0 = TwistingParams::new(vec![0.0; t_len], vec![0.5f64.ln(); t_len])?;
    let mut rng = RngStream::new(11, 1);
    let out = msc_ml_run(start.clone(), twist0, None, &opts, &mut rng)?;
    let fitted = out.averaged_model()?;
    let p = fitted.params;
    println!(
        "fitted: sigma2 = {:.3}, phi = {:.3}, mu = {:.3}, beta = {:.3}",
        p.sigma2, p.phi, p.mu, p.beta
    );

    let flat = TwistingParams::untwisted(t_len);
    let (l0, s0) = log_ml(&start, &flat, &mut rng)?;
    let (lf, sf) = log_ml(&fitted, &flat, &mut rng)?;
    let (lt, st) = log_ml(&StochVol::new(truth, x)?, &flat, &mut rng)?;
    let (lw, sw) = log_ml(&fitted, &out.twist_averaged, &mut rng)?;
    println!(
        "log p(x): start {l0:.2} ± {s0:.2}, fitted {lf:.2} ± {sf:.2}, truth {lt:.2} ± {st:.2}"
    );
    println!("fitted, learned proposal: {lw:.2} ± {sw:.3}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> msc::Result<()> {
    run_example()
}
