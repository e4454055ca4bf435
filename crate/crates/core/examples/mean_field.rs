//! Second-order cumulant equations for large ensembles and the cooperativity
//! optimum of the engineered-cavity linewidth.
//!
//! ```text
//! cargo run --release --example mean_field -- 1000
//! ```

use spinsqueeze::liouvillian::{build_spin_model, ModelParams};
use spinsqueeze::meanfield::{cumulant_steady, optimize_kappa_sqz, MeanFieldOptions};
use spinsqueeze::measure::wineland;
use spinsqueeze::solver::steady_state;
use spinsqueeze::spinspace::dicke_space;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(1000);
    let p = ModelParams { r: 1.0, gamma_phi: 0.005, gamma_rel: 0.001, ..Default::default() };
    let mf = cumulant_steady(&p, n, &MeanFieldOptions::default())?;
    println!("N = {n}: cumulant xi2 = {:.5e} (residual {:.1e}, {:?})", mf.xi2, mf.residual, mf.method);
    let small = 24;
    let exact = wineland(&steady_state(&build_spin_model(&dicke_space(small)?, &p)?)?)?;
    let mf_small = cumulant_steady(&p, small, &MeanFieldOptions::default())?;
    println!("N = {small}: exact xi2 = {exact:.5e}, cumulant {:.5e}", mf_small.xi2);
    println!("\ncavity linewidth optimum (g = 1, kappa_int = 100):");
    for gamma_rel in [0.1, 0.02, 0.002] {
        let k = optimize_kappa_sqz(1.0, 100.0, gamma_rel, n as f64)?;
        println!("  gamma_rel = {gamma_rel:<6} C_rel = {:>8.2}  kappa_opt = {:>9.2}  xi2 = {:.4e}  closed form {:.4e}", k.c_rel, k.kappa_opt, k.xi2_opt, k.xi2_closed_form);
    }
    Ok(())
}
