//! Spin-loss sensing: the ideal reservoir drives the ensemble while spins
//! leave one at a time, and `⟨S_y²⟩` jumps between the even-N and odd-N
//! steady values.
//!
//! Removal is a partial trace in the product space. Between events the
//! permutation-symmetric state is evolved in the Dicke representation.

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::liouvillian::{build_collective_all_blocks, ModelParams};
use crate::measure::spin_moments;
use crate::solver::{EvolveOptions, Propagator};
use crate::spinspace::{dicke_space, DickeEmbedding};
use crate::state::{DensityState, Layout};
use crate::{Error, Result};

pub const MAX_SENSING_SPINS: usize = 8;

/// Loss times plus the seed of the ChaCha8 stream that picks which spin
/// leaves at each event (uniform over the spins still present).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSchedule {
    pub times: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl LossSchedule {
    pub fn sites(&self, n0: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.times.len()).map(|k| rng.random_range(0..n0.saturating_sub(k).max(1))).collect()
    }
}

/// Partial trace over `site`.
pub fn remove_spin(rho: &DensityState, site: usize) -> Result<DensityState> {
    let Layout::Full { n_spins: n } = *rho.layout() else {
        return Err(Error::Layout(format!("spin removal needs a full-product state, got {}", rho.layout().kind())));
    };
    if n < 2 {
        return Err(Error::Domain("cannot remove a spin from fewer than two".into()));
    }
    if site >= n {
        return Err(Error::Domain(format!("site {site} out of range for N = {n}")));
    }
    let b = &rho.blocks()[0];
    let low = n - 1 - site;
    let insert = |i: usize, bit: usize| (i >> low) << (low + 1) | bit << low | (i & ((1 << low) - 1));
    let d = 1usize << (n - 1);
    let out = Mat::from_fn(d, d, |r, c| b[(insert(r, 0), insert(c, 0))] + b[(insert(r, 1), insert(c, 1))]);
    let mut s = DensityState::new(Layout::Full { n_spins: n - 1 }, vec![out])?;
    s.hermitize();
    s.normalize()?;
    Ok(s)
}

pub fn remove_random_spin(rho: &DensityState, rng: &mut impl Rng) -> Result<(DensityState, usize)> {
    let n = rho.layout().n_spins();
    if n < 2 {
        return Err(Error::Domain("cannot remove a spin from fewer than two".into()));
    }
    let site = rng.random_range(0..n);
    Ok((remove_spin(rho, site)?, site))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossEvent {
    pub t: f64,
    pub site: usize,
    pub n_after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingTrajectory {
    pub times: Vec<f64>,
    pub n_spins: Vec<usize>,
    pub sy2: Vec<f64>,
    pub events: Vec<LossEvent>,
}

/// `⟨S_y²⟩(t)` under `Γ D[Σ(r)]` starting from all spins down, with spins
/// removed at the scheduled times.
pub fn sensing_trajectory(n0: usize, gamma: f64, r: f64, schedule: &LossSchedule, t_grid: &[f64]) -> Result<SensingTrajectory> {
    if n0 > MAX_SENSING_SPINS {
        return Err(Error::Resource(format!("sensing runs are limited to N0 ≤ {MAX_SENSING_SPINS}, got {n0}")));
    }
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Validation("time grid must be non-empty and strictly increasing".into()));
    }
    let (t_start, t_end) = (t_grid[0], t_grid[t_grid.len() - 1]);
    if schedule.times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Validation("loss times must be strictly increasing".into()));
    }
    if let Some(&t) = schedule.times.iter().find(|&&t| !(t > t_start && t <= t_end)) {
        return Err(Error::Validation(format!("loss event at t = {t} lies outside ({t_start}, {t_end}]")));
    }
    if schedule.times.len() >= n0 {
        return Err(Error::Validation(format!("{} loss events leave no spins out of {n0}", schedule.times.len())));
    }
    let p = ModelParams::ideal(gamma, r);
    p.validate()?;
    let sites = schedule.sites(n0);
    let opts = EvolveOptions { rtol: 1e-10, atol: 1e-13, ..Default::default() };

    let mut n = n0;
    let mut space = dicke_space(n)?;
    let mut l = build_collective_all_blocks(&space, &p)?;
    let mut psi = vec![C64::new(0.0, 0.0); space.j_max().dim()];
    psi[0] = C64::new(1.0, 0.0);
    let mut v = DensityState::pure(space.layout(), 0, &psi)?.to_vec();
    let mut out = SensingTrajectory { times: vec![], n_spins: vec![], sy2: vec![], events: vec![] };
    let mut record = |t: f64, n: usize, v: &[C64], layout: Layout| -> Result<()> {
        let m = spin_moments(&DensityState::from_vec(layout, v)?)?;
        out.times.push(t);
        out.n_spins.push(n);
        out.sy2.push(m.second[1][1]);
        Ok(())
    };
    record(t_start, n, &v, space.layout())?;
    let mut t = t_start;
    let mut next_event = 0;
    let mut events = vec![];
    for &tg in &t_grid[1..] {
        loop {
            let stop = match schedule.times.get(next_event) {
                Some(&te) if te <= tg => te,
                _ => tg,
            };
            if stop > t {
                Propagator::new(&l, &opts, stop - t).advance(&mut v, t, stop)?;
                t = stop;
            }
            if schedule.times.get(next_event) == Some(&stop) {
                let site = sites[next_event];
                let rho = DensityState::from_vec(space.layout(), &v)?;
                let full = DickeEmbedding::new(n)?.embed(&rho)?;
                let reduced = remove_spin(&full, site)?;
                n -= 1;
                space = dicke_space(n)?;
                l = build_collective_all_blocks(&space, &p)?;
                v = DickeEmbedding::new(n)?.project(&reduced)?.to_vec();
                events.push(LossEvent { t: stop, site, n_after: n });
                next_event += 1;
                continue;
            }
            break;
        }
        record(tg, n, &v, space.layout())?;
    }
    out.events = events;
    Ok(out)
}

/// First time after `t_from` from which every later sample stays within
/// `tol` of `target`.
pub fn settle_time(times: &[f64], values: &[f64], t_from: f64, target: f64, tol: f64) -> Option<f64> {
    let mut settled: Option<f64> = None;
    for (&t, &v) in times.iter().zip(values) {
        if t < t_from {
            continue;
        }
        if (v - target).abs() <= tol {
            settled.get_or_insert(t);
        } else {
            settled = None;
        }
    }
    settled
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::dark_state;
    use crate::spinspace::full_space_ops;

    fn product_down(n: usize) -> DensityState {
        let mut psi = vec![C64::new(0.0, 0.0); 1 << n];
        psi[0] = C64::new(1.0, 0.0);
        DensityState::pure(Layout::Full { n_spins: n }, 0, &psi).unwrap()
    }

    #[test]
    fn all_down_stays_all_down() {
        let out = remove_spin(&product_down(4), 2).unwrap();
        assert!(out.max_abs_diff(&product_down(3)).unwrap() < 1e-15);
    }

    #[test]
    fn triplet_zero_leaves_a_mixed_spin() {
        let s = 1.0 / 2f64.sqrt();
        let psi = [C64::new(0.0, 0.0), C64::new(s, 0.0), C64::new(s, 0.0), C64::new(0.0, 0.0)];
        let rho = DensityState::pure(Layout::Full { n_spins: 2 }, 0, &psi).unwrap();
        for site in 0..2 {
            let out = remove_spin(&rho, site).unwrap();
            let b = &out.blocks()[0];
            assert!((b[(0, 0)].re - 0.5).abs() < 1e-15 && (b[(1, 1)].re - 0.5).abs() < 1e-15);
            assert!(b[(0, 1)].norm() < 1e-15);
        }
    }

    #[test]
    fn removal_from_the_dark_state_raises_sy2() {
        let n = 6;
        let dk = dark_state(n, crate::Half::from_int(3), 2.5).unwrap();
        let emb = DickeEmbedding::new(n).unwrap();
        let space = emb.space();
        let rho = dk.density(n).unwrap();
        let rho = DensityState::new(space.layout(), (0..space.blocks().len()).map(|b| if b == 0 { rho.blocks()[0].clone() } else { Mat::zeros(space.blocks()[b].dim, space.blocks()[b].dim) }).collect()).unwrap();
        let before = spin_moments(&rho).unwrap().second[1][1];
        let after = spin_moments(&remove_spin(&emb.embed(&rho).unwrap(), 3).unwrap()).unwrap().second[1][1];
        assert!(after > before, "{after} vs {before}");
    }

    #[test]
    fn dicke_input_is_a_layout_error() {
        let space = dicke_space(3).unwrap();
        let rho = DensityState::pure(space.layout(), 0, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        assert!(matches!(remove_spin(&rho, 0), Err(Error::Layout(_))));
    }

    #[test]
    fn removal_commutes_with_global_rotations() {
        // e^{−iθS_x} on 4 spins, then trace out, equals tracing out first.
        let n = 4;
        let rot = |n: usize| {
            let ops = full_space_ops(n).unwrap();
            let sx = ops.sx.to_dense();
            let eig = sx.self_adjoint_eigen(faer::Side::Lower).unwrap();
            let (u, s) = (eig.U(), eig.S().column_vector());
            let d = Mat::from_fn(u.nrows(), u.nrows(), |a, b| if a == b { C64::from_polar(1.0, -0.7 * s[a].re) } else { C64::new(0.0, 0.0) });
            u * d * u.adjoint()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Mat::from_fn(16, 16, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let mut rho = DensityState::new(Layout::Full { n_spins: n }, vec![&a * a.adjoint()]).unwrap();
        rho.normalize().unwrap();
        let (u4, u3) = (rot(4), rot(3));
        let rotated = DensityState::new(rho.layout().clone(), vec![&u4 * &rho.blocks()[0] * u4.adjoint()]).unwrap();
        let x = remove_spin(&rotated, 1).unwrap();
        let y0 = remove_spin(&rho, 1).unwrap();
        let y = DensityState::new(y0.layout().clone(), vec![&u3 * &y0.blocks()[0] * u3.adjoint()]).unwrap();
        assert!(x.max_abs_diff(&y).unwrap() < 1e-10);
        assert!((x.trace().re - 1.0).abs() < 1e-14 && x.hermiticity_error() == 0.0);
    }

    #[test]
    fn schedule_sites_are_reproducible() {
        let s = LossSchedule { times: vec![1.0, 2.0, 3.0], seed: 42 };
        assert_eq!(s.sites(6), s.sites(6));
        assert!(s.sites(6).iter().enumerate().all(|(k, &i)| i < 6 - k));
    }

    #[test]
    fn events_outside_the_grid_are_rejected() {
        let s = LossSchedule { times: vec![20.0], seed: 0 };
        assert!(matches!(sensing_trajectory(4, 1.0, 1.0, &s, &[0.0, 5.0, 10.0]), Err(Error::Validation(_))));
    }

    #[test]
    fn settle_time_needs_the_tail_in_band() {
        let t = [0.0, 1.0, 2.0, 3.0, 4.0];
        let v = [5.0, 1.0, 3.0, 1.0, 1.0];
        assert_eq!(settle_time(&t, &v, 0.0, 1.0, 0.1), Some(3.0));
        assert_eq!(settle_time(&t, &[5.0, 1.0, 1.0, 1.0, 3.0], 0.0, 1.0, 0.1), None);
    }
}
