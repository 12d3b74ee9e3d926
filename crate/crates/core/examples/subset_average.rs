//! Stochastic optimization with a subset-average likelihood does not target
//! the posterior: its fixed point matches the moments of a perturbed
//! posterior, which for a conjugate model can be enumerated exactly.
//!
//!     cargo run --release --example subset_average

use msc::climb::{subset_avg_sgd_run, LoopOptions, Schedule};
use msc::expcli::subset_instance;
use msc::families::DiagGaussianParams;
use msc::gradients::subset_avg_log_scale;
use msc::RngStream;

pub fn run_example() -> msc::Result<()> {
    let m = 2;
    let inst = subset_instance(0, m)?;
    println!("data: {:.3?}", inst.target.data);
    println!(
        "posterior:           mean {:+.4}, sd {:.4}",
        inst.posterior.0, inst.posterior.1
    );
    println!(
        "perturbed posterior: mean {:+.4}, sd {:.4}",
        inst.perturbed.0, inst.perturbed.1
    );

    let lambda0 = DiagGaussianParams::standard(1);
    let mut rng = RngStream::new(0, 0);
    let scale = subset_avg_log_scale(&inst.target, &lambda0, m, 10_000, &mut rng)?;
    let out = subset_avg_sgd_run(
        &inst.target,
        10,
        m,
        scale,
        &Schedule::default_robbins_monro(),
        lambda0,
        &LoopOptions::new(50_000),
        &mut rng,
    )?;
    println!(
        "subset-average SGD:  mean {:+.4}, sd {:.4}",
        out.averaged.mu[0],
        out.averaged.sigma(0)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> msc::Result<()> {
    run_example()
}
