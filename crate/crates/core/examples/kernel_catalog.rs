//! Constants of the built-in lag windows and a tabulated kernel read from
//! points.
//!
//! cargo run --example kernel_catalog

use lagspec::kernels::TabulatedKernel;
use lagspec::Kernel;

fn main() -> lagspec::Result<()> {
    println!(
        "{:<14} {:>9} {:>9} {:>6} {:>9}  psd",
        "kernel", "kappa", "numeric", "q", "K_q"
    );
    let tri = Kernel::Tabulated(TabulatedKernel::new(&[
        (-1.0, 0.0),
        (-0.5, 0.75),
        (0.0, 1.0),
        (0.5, 0.75),
        (1.0, 0.0),
    ])?);
    for k in Kernel::CATALOG.iter().chain(std::iter::once(&tri)) {
        let bo = k.bias_order();
        println!(
            "{:<14} {:>9.5} {:>9.5} {:>6} {:>9}  {}",
            k.name(),
            k.kappa(),
            k.kappa_numeric(),
            bo.q,
            bo.k_q.map_or("-".to_string(), |v| format!("{v:.4}")),
            k.psd_guarantee()
        );
        if let Some(w) = k.kappa_warning() {
            println!("  note: {w}");
        }
    }
    Ok(())
}
