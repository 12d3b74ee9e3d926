//! Bayesian probit regression on the Pima diabetes data with Markovian score
//! climbing: one 90/10 split, Adam, ten CIS particles.
//!
//!     cargo run --release --example probit [path/to/data.csv]
//!
//! Without an argument the bundled `data/pima.csv` is used.

use std::path::PathBuf;

use msc::climb::{msc_run, CisKernel, LoopOptions, Schedule};
use msc::expcli::{load_csv_dataset, split_train_test, SplitSpec};
use msc::families::DiagGaussianParams;
use msc::models::ProbitModel;
use msc::RngStream;

pub fn run_example() -> msc::Result<()> {
    let path = std::env::args()
        .nth(1)
        .filter(|a| a.ends_with(".csv"))
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/pima.csv"));
    let data = load_csv_dataset(&path)?;
    let (train, test) = split_train_test(&data, &SplitSpec::new(0, 0))?;
    println!(
        "{} training rows, {} test rows, d = {}",
        train.n(),
        test.n(),
        train.dim()
    );

    let model = ProbitModel::new(train);
    let d = model.data.dim();
    let out = msc_run(
        &model,
        &CisKernel::adaptive(10),
        &Schedule::default_adam(),
        DiagGaussianParams::standard(d),
        None,
        &LoopOptions::new(2_000),
        &mut RngStream::new(0, 0),
    )?;
    for j in 0..d {
        println!(
            "w[{j}] ~ N({:+.3}, {:.3}²)",
            out.averaged.mu[j],
            out.averaged.sigma(j)
        );
    }
    let err = ProbitModel::new(test).test_error(&out.averaged)?;
    println!("test error: {err:.3}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> msc::Result<()> {
    run_example()
}
