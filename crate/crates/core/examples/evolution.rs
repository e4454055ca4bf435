//! Time evolution from all spins down towards the squeezed steady state.
//!
//! ```text
//! cargo run --release --example evolution -- 20 2.5
//! ```

use spinsqueeze::liouvillian::build_ideal;
use spinsqueeze::optim::logspace;
use spinsqueeze::solver::{evolve_with, EvolveOptions};
use spinsqueeze::spinspace::dicke_space;
use spinsqueeze::state::{DensityState, Layout};
use spinsqueeze::C64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(20);
    let r: f64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(2.5);
    let space = dicke_space(n)?;
    let j = space.j_max();
    let l = build_ideal(&space, j, 1.0, r)?;
    let mut psi = vec![C64::new(0.0, 0.0); j.dim()];
    psi[0] = C64::new(1.0, 0.0);
    let rho0 = DensityState::pure(Layout::dicke_single(n, j), 0, &psi)?;
    let mut times = vec![0.0];
    times.extend(logspace(1e-3, 300.0, 23));
    let traj = evolve_with(&l, &rho0, &times, &EvolveOptions::default())?;
    println!("{:>10} {:>12} {:>10} {:>10}", "t", "xi2", "Sz", "purity");
    for (t, o) in traj.times.iter().zip(&traj.observables) {
        println!("{t:>10.3e} {:>12.5e} {:>10.4} {:>10.5}", o.xi2, o.sz, o.purity);
    }
    println!("steps: {:?}", traj.stats);
    Ok(())
}
