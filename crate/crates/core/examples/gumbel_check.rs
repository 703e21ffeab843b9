//! Monte Carlo check of the Gumbel limit for the centred maximum deviation,
//! white noise, over three sample sizes.
//!
//! cargo run --release --example gumbel_check

use lagspec::harness::{run, Experiment, ExperimentPlan};
use lagspec::{Kernel, ProcessModel};

fn main() -> lagspec::Result<()> {
    let mut plan = ExperimentPlan::new(
        Experiment::Gumbel,
        ProcessModel::white_noise(1),
        Kernel::Bartlett,
        vec![1 << 12, 1 << 14, 1 << 16],
    );
    plan.reps = 1000;
    let report = run(&plan)?;
    for row in &report.rows {
        let get = |name: &str| {
            row.find(name, None, None, None)
                .map_or(f64::NAN, |s| s.value)
        };
        println!(
            "T = {:>6}, B = {:>3}: KS = {:.4}, mean = {:.3}, median = {:.3}",
            row.t_len,
            row.bandwidth,
            get("ks_gumbel"),
            get("mean"),
            get("median")
        );
    }
    for c in &report.checks {
        println!(
            "{:<28} {}  {}",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.detail
        );
    }
    Ok(())
}
