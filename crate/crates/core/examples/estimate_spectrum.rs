//! Simulate the default bivariate VAR(1), estimate its spectral density
//! matrix on the theorem grid and compare with the closed form.
//!
//! cargo run --release --example estimate_spectrum

use lagspec::acov::sample_autocov;
use lagspec::dependence::simulate;
use lagspec::spectral::{estimate_spectrum, theorem_grid, true_spectrum, Bandwidth};
use lagspec::{Kernel, ProcessModel};

fn main() -> lagspec::Result<()> {
    let model = ProcessModel::default_var1();
    let series = simulate(&model, 1 << 14, 42)?.center();
    let bw = Bandwidth::with_defaults(series.t_len())?;
    let acov = sample_autocov(&series, bw.value())?;
    let freqs = theorem_grid(&bw);
    let est = estimate_spectrum(&acov, &Kernel::Bartlett, &bw, &freqs)?;
    let truth = true_spectrum(&model, &freqs)?;

    println!(
        "T = {}, B_T = {}, grid points = {}",
        series.t_len(),
        bw.value(),
        freqs.len()
    );
    println!(
        "{:>8} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "lambda", "f11_hat", "f11", "f22_hat", "f22", "|f12_hat|"
    );
    for l in (0..freqs.len()).step_by(4) {
        println!(
            "{:>8.4} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            freqs[l],
            est.diag(l, 0),
            truth.diag(l, 0),
            est.diag(l, 1),
            truth.diag(l, 1),
            est.entry(l, 0, 1).norm()
        );
    }
    println!("Hermitian defect: {:e}", est.hermitian_defect());
    Ok(())
}
