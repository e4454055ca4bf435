//! Spins coupled to an explicit squeezed cavity mode, compared with the
//! adiabatically eliminated spin-only model.
//!
//! ```text
//! cargo run --release --example hybrid_cavity -- 4
//! ```

use spinsqueeze::liouvillian::{adiabatic_rates, build_hybrid, build_spin_model, cavity_occupation, hybrid_ground_state, reduce_to_spins, HybridParams, ModelParams};
use spinsqueeze::measure::wineland;
use spinsqueeze::solver::steady_state_from;
use spinsqueeze::spinspace::dicke_space;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(4);
    let (kappa_sqz, kappa_int, r) = (1.0, 0.05, 0.7);
    println!("{:>8} {:>6} {:>12} {:>12} {:>10}", "g", "n_cut", "xi2_hybrid", "xi2_adiab", "<a+a>");
    for g in [0.25, 0.125, 0.0625, 0.03125, 0.015625] {
        let hp = HybridParams::new(g, kappa_sqz, kappa_int, r);
        let l = build_hybrid(&hp, n)?;
        // total j is conserved without local noise; start from all spins down
        let rho = steady_state_from(&l, &hybrid_ground_state(l.layout().clone())?)?;
        let (gamma, gamma_coll) = adiabatic_rates(g, kappa_sqz, kappa_int)?;
        let mp = ModelParams { gamma, r, gamma_coll, ..Default::default() };
        let space = dicke_space(n)?;
        let adiab = wineland(&steady_state_from(&build_spin_model(&space, &mp)?, &space.ground_state())?)?;
        println!("{g:>8} {:>6} {:>12.6} {:>12.6} {:>10.3e}", hp.n_cut, wineland(&reduce_to_spins(&rho)?)?, adiab, cavity_occupation(&rho)?);
    }
    Ok(())
}
