//! Steady dissipative squeezing against the best transient one-axis twist in
//! the same lossy cavity (`γ_rel = 0.02 g`, `κ_int = 100 g`).
//!
//! ```text
//! cargo run --release --example oat_vs_dissipative -- 4 6 10 16
//! ```

use std::time::Instant;

use spinsqueeze::oat::{optimize_dissipative, optimize_oat, OatParams};
use spinsqueeze::optim::loglog_fit;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ns: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let ns = if ns.is_empty() { vec![4, 6, 8, 12, 16] } else { ns };
    let (g, kappa_int, gamma_rel) = (1.0, 100.0, 0.02);
    println!("{:>4} {:>12} {:>10} {:>8} {:>12} {:>10} {:>8}", "N", "xi2_diss", "kappa_sqz", "r", "xi2_oat", "delta_c", "secs");
    let (mut diss, mut oat) = (vec![], vec![]);
    for &n in &ns {
        let t0 = Instant::now();
        let d = optimize_dissipative(n, g, kappa_int, gamma_rel)?;
        let o = optimize_oat(n, &OatParams { g, kappa_int, gamma_rel, delta_c: 0.0 }, 12)?;
        println!("{n:>4} {:>12.5e} {:>10.2} {:>8.3} {:>12.5e} {:>10.2} {:>8.1}", d.xi2, d.kappa_sqz, d.r, o.xi2_min, o.delta_c, t0.elapsed().as_secs_f64());
        diss.push(d.xi2);
        oat.push(o.xi2_min);
    }
    if ns.len() >= 3 {
        let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let k = x.len() / 2;
        println!("large-N slopes: dissipative {:.3}, OAT {:.3}", loglog_fit(&x[k..], &diss[k..])?.slope, loglog_fit(&x[k..], &oat[k..])?.slope);
    }
    Ok(())
}
