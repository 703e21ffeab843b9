//! Simultaneous Gumbel-limit bands for every entry of a bivariate estimate,
//! Bonferroni-adjusted, checked against the true spectrum.
//!
//! cargo run --release --example uniform_bands

use lagspec::acov::sample_autocov;
use lagspec::dependence::simulate;
use lagspec::inference::{parse_entries, smoothness_check, uniform_band};
use lagspec::spectral::{estimate_spectrum, theorem_grid, true_spectrum, Bandwidth};
use lagspec::{Kernel, ProcessModel};

fn main() -> lagspec::Result<()> {
    let model = ProcessModel::default_var1();
    let kernel = Kernel::Parzen;
    let series = simulate(&model, 1 << 15, 7)?.center();
    let bw = Bandwidth::new(series.t_len(), 0.4, 1.0)?;
    let freqs = theorem_grid(&bw);
    let est = estimate_spectrum(&sample_autocov(&series, bw.value())?, &kernel, &bw, &freqs)?;

    let entries = parse_entries("all", 2)?;
    let band = uniform_band(&est, &kernel, 0.95, &entries, true)?;
    println!(
        "level 0.95 over {} entries, quantile {:.4}",
        band.bonferroni_m, band.quantile
    );
    let truth = true_spectrum(&model, &freqs)?;
    for e in &band.entries {
        let widest = e.half_width.iter().copied().fold(0.0, f64::max);
        println!(
            "entry ({}, {}): max half-width {widest:.5}, covers f: {}",
            e.entry.0 + 1,
            e.entry.1 + 1,
            e.covers(&truth, band.method)
        );
    }
    let s = smoothness_check(&kernel, 0.4);
    println!(
        "b(q+1) = {:.2}; band may be read as covering f: {}",
        s.product, s.satisfied
    );
    Ok(())
}
