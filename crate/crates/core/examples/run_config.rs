//! Drive an experiment from a `key = value` configuration, the same way the
//! `msc` command line does, and read back the summary it writes.
//!
//!     cargo run --release --example run_config

use msc::expcli::{run_experiment, ExperimentConfig};

pub fn run_example() -> msc::Result<()> {
    let out = std::env::temp_dir().join(format!("msc-run-config-{}", std::process::id()));
    let text = format!(
        "# three short skew-normal runs\n\
         experiment = skewnormal\n\
         estimator = msc-cis\n\
         samples = 2\n\
         iters = 5000\n\
         replications = 3\n\
         seed = 42\n\
         out = {}\n",
        out.display()
    );
    let cfg = ExperimentConfig::parse_kv(&text)?;
    let outcome = run_experiment(&cfg)?;
    println!("{}", outcome.report);
    println!("traces: {}", outcome.trace_paths.len());
    println!("summary: {}", outcome.summary_path.display());
    let sigma = &outcome.summary["aggregate"]["sigma"];
    println!("sigma across replications: {sigma}");
    std::fs::remove_dir_all(&out)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> msc::Result<()> {
    run_example()
}
