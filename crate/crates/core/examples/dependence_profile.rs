//! Coupling estimates of the functional dependence measures for a linear and
//! a threshold autoregression, followed by the condition checks.
//!
//! cargo run --release --example dependence_profile

use lagspec::dependence::{check_conditions, profile};
use lagspec::ProcessModel;

fn main() -> lagspec::Result<()> {
    for spec in ["ar1:phi=0.5", "tar:a=0.6,b=-0.3"] {
        let model = ProcessModel::parse(spec)?;
        let prof = profile(&model, 4.0, 20, 5000, 11)?;
        let cond = check_conditions(&prof, 4.0, 0.4, 0.2, 1.0, false)?;
        println!("{spec}");
        println!("  delta_t,4 for t = 0..5: {:.4?}", &prof.delta[..6]);
        println!(
            "  Theta_0,4 = {:.4}, Psi_0,4 = {:.4}",
            prof.theta[0], prof.psi[0]
        );
        println!(
            "  geometric decay: {:?} (rho = {:.3}), bandwidth window ok: {}",
            cond.geometric.verdict, cond.geometric.rho, cond.bandwidth_admissible
        );
        for w in &prof.warnings {
            println!("  warning: {w}");
        }
    }
    Ok(())
}
