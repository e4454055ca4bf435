//! Finite reservoir temperature: the optimum squeezing parameter becomes
//! interior and the best ξ² degrades with `n_th`. The trapped-ion heating
//! mapping turns a heating rate into an effective `(r̃, n_th)`.
//!
//! ```text
//! cargo run --release --example thermal_reservoir -- 100
//! ```

use spinsqueeze::liouvillian::{build_thermal, heating_reservoir};
use spinsqueeze::measure::wineland;
use spinsqueeze::optim::{grid_then_golden, linspace};
use spinsqueeze::solver::steady_state;
use spinsqueeze::spinspace::dicke_space;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(100);
    let space = dicke_space(n)?;
    let j = space.j_max();
    let xi2 = |r: f64, n_th: f64| build_thermal(&space, j, 1.0, r, n_th).and_then(|l| steady_state(&l)).and_then(|s| wineland(&s)).unwrap_or(f64::NAN);
    println!("{:>8} {:>8} {:>12} {:>10}", "n_th", "r_opt", "xi2_min", "boundary");
    for n_th in [0.0, 0.01, 0.1, 0.5] {
        let m = grid_then_golden(|r| xi2(r, n_th), &linspace(0.0, 3.0, 13), 1e-4)?;
        println!("{n_th:>8} {:>8.4} {:>12.5e} {:>10}", m.x, m.value, m.at_boundary);
    }
    println!("\nheating rate -> effective reservoir at r = 1:");
    for h in [1e-3, 1e-2, 0.05] {
        let (rt, nth) = heating_reservoir(1.0, h)?;
        println!("  h = {h:<6} r~ = {rt:.4}  n_th = {nth:.4}  xi2 = {:.5e}", xi2(rt, nth));
    }
    Ok(())
}
