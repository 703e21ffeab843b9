//! Exact bias of the estimator for AR(1) at λ = π/2 as the bandwidth grows,
//! for each built-in kernel. No simulation is involved.
//!
//! cargo run --release --example bias_rate

use lagspec::harness::{run, Experiment, ExperimentPlan};
use lagspec::{Kernel, ProcessModel};

fn main() -> lagspec::Result<()> {
    for kernel in Kernel::CATALOG {
        let plan = ExperimentPlan::new(
            Experiment::BiasRate,
            ProcessModel::ar1(0.5),
            kernel.clone(),
            vec![],
        );
        let report = run(&plan)?;
        let biases: Vec<String> = report
            .rows
            .iter()
            .map(|r| format!("{:.2e}", r.find("bias", None, None, None).unwrap().value))
            .collect();
        let slope = report.summary_stat("slope").map_or(f64::NAN, |s| s.value);
        println!(
            "{:<14} B = 8..128: [{}]  slope {slope:.3}",
            kernel.name(),
            biases.join(", ")
        );
    }
    Ok(())
}
