//! CLT intervals at a few frequencies for an AR(1) series. The interval at
//! λ = 0 is wider by √2 because of the boundary variance factor.
//!
//! cargo run --release --example pointwise_intervals

use std::f64::consts::PI;

use lagspec::acov::sample_autocov;
use lagspec::dependence::simulate;
use lagspec::inference::pointwise_ci;
use lagspec::spectral::{estimate_spectrum, Bandwidth};
use lagspec::{Kernel, ProcessModel};

fn main() -> lagspec::Result<()> {
    let model = ProcessModel::ar1(0.5);
    let series = simulate(&model, 8192, 3)?.center();
    let bw = Bandwidth::new(series.t_len(), 0.5, 1.0)?;
    let freqs = [0.0, PI / 4.0, PI / 2.0, PI];
    let est = estimate_spectrum(
        &sample_autocov(&series, bw.value())?,
        &Kernel::TukeyHanning,
        &bw,
        &freqs,
    )?;
    for &lambda in &freqs {
        let ci = pointwise_ci(&est, &Kernel::TukeyHanning, 0.9, (0, 0), lambda)?;
        let f = model.spectral_density(lambda)?[(0, 0)].re;
        println!(
            "lambda {lambda:.4}: [{:.4}, {:.4}]  half-width {:.4}  (true {f:.4})",
            ci.re.0, ci.re.1, ci.half_width
        );
    }
    Ok(())
}
