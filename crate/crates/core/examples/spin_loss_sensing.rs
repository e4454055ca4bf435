//! Spins leave the ensemble at fixed times; the steady state re-forms and
//! `⟨S_y²⟩` alternates between even- and odd-N values.
//!
//! ```text
//! cargo run --release --example spin_loss_sensing
//! ```

use spinsqueeze::optim::linspace;
use spinsqueeze::protocols::{sensing_trajectory, LossSchedule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schedule = LossSchedule { times: vec![20.0, 40.0, 60.0], seed: 7 };
    let t = linspace(0.0, 80.0, 33);
    let traj = sensing_trajectory(6, 1.0, 1.0, &schedule, &t)?;
    for e in &traj.events {
        println!("t = {:>5}: spin {} lost, {} left", e.t, e.site, e.n_after);
    }
    println!("{:>6} {:>4} {:>12}", "t", "N", "Sy2");
    for ((t, n), s) in traj.times.iter().zip(&traj.n_spins).zip(&traj.sy2) {
        println!("{t:>6.1} {n:>4} {s:>12.5e}");
    }
    Ok(())
}
