//! Steady squeezing of N and N+1 spins under the ideal reservoir. Odd
//! ensembles end up mixed and lose squeezing at large `r`.
//!
//! ```text
//! cargo run --release --example even_odd -- 40
//! ```

use spinsqueeze::liouvillian::build_ideal;
use spinsqueeze::measure::observe;
use spinsqueeze::optim::linspace;
use spinsqueeze::solver::{dissipative_gap, steady_state};
use spinsqueeze::spinspace::dicke_space;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(20);
    println!("{:>6} {:>6} {:>12} {:>10} {:>12} {:>10}", "N", "r", "xi2", "purity", "Sy2", "gap");
    for m in [n, n + 1] {
        let space = dicke_space(m)?;
        for r in linspace(0.0, 4.0, 9) {
            let l = build_ideal(&space, space.j_max(), 1.0, r)?;
            let o = observe(&steady_state(&l)?)?;
            println!("{m:>6} {r:>6.2} {:>12.5e} {:>10.5} {:>12.5e} {:>10.3e}", o.xi2, o.purity, o.sy2, dissipative_gap(&l)?);
        }
    }
    Ok(())
}
