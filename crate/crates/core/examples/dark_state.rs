//! Even-N steady states are the pure dark state of `Σ[r]` and approach the
//! Heisenberg limit `ξ² = 2/(N+2)` as `r` grows.
//!
//! ```text
//! cargo run --release --example dark_state -- 20
//! ```

use spinsqueeze::analytic::{asymptotics, dark_state};
use spinsqueeze::liouvillian::build_ideal;
use spinsqueeze::measure::{observe, wineland};
use spinsqueeze::solver::steady_state;
use spinsqueeze::spinspace::dicke_space;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(20);
    let space = dicke_space(n)?;
    let j = space.j_max();
    let a = asymptotics(n, 1.0)?;
    println!("N = {n}: Heisenberg xi2 = {:.5}, breakdown r = {:.3}", a.heisenberg_xi2, a.breakdown_r);
    println!("{:>6} {:>12} {:>12} {:>10} {:>12}", "r", "xi2_steady", "xi2_dark", "purity", "trace_dist");
    for r in [0.25, 0.5, 1.0, 2.0, 3.0, 4.0] {
        let rho = steady_state(&build_ideal(&space, j, 1.0, r)?)?;
        let dark = dark_state(n, j, r)?.density(n)?;
        let o = observe(&rho)?;
        let ds = rho.trace_distance(&dark)?;
        println!("{r:>6.2} {:>12.6} {:>12.6} {:>10.6} {:>12.2e}", o.xi2, wineland(&dark)?, o.purity, ds);
    }
    Ok(())
}
