//! Write a simulated series to CSV, read it back and estimate from the file.
//!
//! cargo run --example csv_roundtrip

use lagspec::acov::sample_autocov;
use lagspec::dependence::simulate;
use lagspec::spectral::{estimate_spectrum, uniform_grid, Bandwidth};
use lagspec::{Kernel, MultivariateSeries, ProcessModel};

fn main() -> lagspec::Result<()> {
    let dir = std::env::temp_dir().join("lagspec_csv_roundtrip");
    std::fs::create_dir_all(&dir).map_err(|e| lagspec::Error::InvalidInput(e.to_string()))?;
    let path = dir.join("series.csv");

    let model = ProcessModel::parse("white:n=3")?;
    simulate(&model, 2000, 5)?.save_csv(&path)?;
    let series = MultivariateSeries::load_csv(&path, false)?.center();
    let bw = Bandwidth::with_defaults(series.t_len())?;
    let est = estimate_spectrum(
        &sample_autocov(&series, bw.value())?,
        &Kernel::Bartlett,
        &bw,
        &uniform_grid(5)?,
    )?;
    println!(
        "read {} x {} from {}",
        series.t_len(),
        series.n_dim(),
        path.display()
    );
    for (l, f) in est.freqs.iter().enumerate() {
        let diag: Vec<String> = (0..3).map(|i| format!("{:.4}", est.diag(l, i))).collect();
        println!(
            "lambda {f:.4}: diag [{}]  (white noise level {:.4})",
            diag.join(", "),
            1.0 / (2.0 * std::f64::consts::PI)
        );
    }
    Ok(())
}
