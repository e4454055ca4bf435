//! Relaxation rates: the Liouvillian gap of the ideal model against `N`,
//! and the perturbative j-hopping rate matrix for weak local dephasing.
//!
//! ```text
//! cargo run --release --example relaxation_gap
//! ```

use spinsqueeze::liouvillian::build_ideal;
use spinsqueeze::optim::loglog_fit;
use spinsqueeze::solver::{dissipative_gap, jspace_rate_matrix};
use spinsqueeze::spinspace::dicke_space;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = 1.0;
    println!("ideal reservoir, r = {r}");
    let (mut ns, mut gaps) = (vec![], vec![]);
    for n in [10, 20, 40, 80] {
        let space = dicke_space(n)?;
        let g = dissipative_gap(&build_ideal(&space, space.j_max(), 1.0, r)?)?;
        println!("  N = {n:>3}  gap = {g:.5}");
        ns.push(n as f64);
        gaps.push(g);
    }
    println!("  log-log slope {:.3}", loglog_fit(&ns, &gaps)?.slope);
    println!("j-hopping rate matrix, gamma_phi = 0.005");
    for n in [8, 32, 128] {
        let rm = jspace_rate_matrix(&dicke_space(n)?, r, 0.005)?;
        println!("  N = {n:>3}  blocks = {:>3}  gap = {:.4e}  decay = {:.4e}", rm.js.len(), rm.gap()?, rm.decay_rate()?);
    }
    Ok(())
}
