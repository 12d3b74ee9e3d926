//! Conditional SMC with ancestor sampling on a linear-Gaussian state-space
//! model, checked against the Kalman smoother, plus the unconditional SMC
//! evidence estimate against the exact Kalman log-likelihood.
//!
//!     cargo run --release --example csmc_kalman

use msc::climb::smc_marginal_likelihood;
use msc::expcli::kernelcheck::{lgssm_instance, moderate_twist};
use msc::expcli::mean_std;
use msc::kernels::csmc_step;
use msc::RngStream;

pub fn run_example() -> msc::Result<()> {
    let model = lgssm_instance(7)?;
    let twist = moderate_twist(&model);
    let exact = model.kalman_smoother_moments();
    let t_len = model.data.len();
    let mut rng = RngStream::new(7, 0);

    let mut traj = vec![0.0; t_len];
    let mut sums = vec![0.0; t_len];
    let iters = 20_000;
    for _ in 0..iters {
        traj = csmc_step(&model, &twist, &traj, 4, &mut rng)?.0;
        for (s, z) in sums.iter_mut().zip(&traj) {
            *s += z;
        }
    }
    println!(" t   CSMC mean   smoother mean");
    for (t, (s, m)) in sums.iter().zip(&exact.mean).enumerate() {
        println!("{:>2}   {:>9.4}   {:>13.4}", t + 1, s / iters as f64, m);
    }

    let est: Vec<f64> = (0..50)
        .map(|_| smc_marginal_likelihood(&model, &twist, 500, &mut rng))
        .collect::<msc::Result<_>>()?;
    let (m, _, se) = mean_std(&est);
    println!(
        "log p(x): SMC {m:.4} ± {se:.4}, Kalman {:.4}",
        model.kalman_log_likelihood()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> msc::Result<()> {
    run_example()
}
