//! One-axis-twist baseline: dispersive cavity coupling after elimination of
//! the cavity,
//!
//! ```text
//! L = −i[χ(S² − S_z²), ·] + κ_int g²/(Δ_c² + κ_int²/4) D[S₋] + γ_rel Σ_k D[σ₋^k]
//! χ = g²Δ_c/(Δ_c² + κ_int²/4)
//! ```
//!
//! The twist leaves `S_z` eigenstates invariant, so transient runs start from
//! the coherent state on the equator (mean spin along `+x`).

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::liouvillian::{adiabatic_rates, build_local_channel, build_spin_model, Assembler, Liouvillian, LocalChannel, ModelParams};
use crate::measure::wineland;
use crate::optim::{log_grid_then_golden, logspace, minimize_2d, linspace, CubicSpline};
use crate::solver::{evolve_with, steady_state, EvolveOptions};
use crate::sparse::CsrMatrix;
use crate::spinspace::{dicke_space, CollectiveOps, DickeSpace};
use crate::state::DensityState;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OatParams {
    pub g: f64,
    pub kappa_int: f64,
    #[serde(default)]
    pub gamma_rel: f64,
    /// Spin–cavity detuning Δ_c.
    #[serde(default)]
    pub delta_c: f64,
}

impl OatParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_int > 0.0) || !self.kappa_int.is_finite() {
            return Err(Error::Domain(format!("kappa_int must be positive, got {}", self.kappa_int)));
        }
        for (name, v) in [("g", self.g), ("gamma_rel", self.gamma_rel)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if !self.delta_c.is_finite() {
            return Err(Error::Domain("delta_c must be finite".into()));
        }
        Ok(())
    }

    /// Twisting strength χ.
    pub fn chi(&self) -> f64 {
        self.g * self.g * self.delta_c / self.lorentz()
    }

    /// Rate of the cavity-induced `D[S₋]`.
    pub fn collective_decay(&self) -> f64 {
        self.kappa_int * self.g * self.g / self.lorentz()
    }

    fn lorentz(&self) -> f64 {
        self.delta_c * self.delta_c + 0.25 * self.kappa_int * self.kappa_int
    }
}

pub fn build_oat(space: &DickeSpace, p: &OatParams) -> Result<Liouvillian> {
    p.validate()?;
    let (chi, decay) = (p.chi(), p.collective_decay());
    let mut asm = Assembler::new(space.layout());
    for (b, blk) in space.blocks().iter().enumerate() {
        let ops = CollectiveOps::spin(blk.j);
        let j = blk.j.value();
        let h: Vec<C64> = (0..blk.dim)
            .map(|i| {
                let m = -j + i as f64;
                C64::new(chi * (j * (j + 1.0) - m * m), 0.0)
            })
            .collect();
        asm.hamiltonian(b, &CsrMatrix::diagonal(&h));
        asm.dissipator(b, &CsrMatrix::from_dense(&ops.sm), decay);
    }
    let l = asm.finish();
    if p.gamma_rel > 0.0 {
        l.add(&build_local_channel(space, LocalChannel::Relaxation, p.gamma_rel)?)
    } else {
        Ok(l)
    }
}

/// Coherent state of the top block pointing along `+x`.
pub fn equator_state(space: &DickeSpace) -> Result<DensityState> {
    let d = space.j_max().dim();
    // |c_k|² ∝ binom(d − 1, k), built in log form.
    let mut logc = vec![0.0f64; d];
    for k in 1..d {
        logc[k] = logc[k - 1] + 0.5 * (((d - k) as f64).ln() - (k as f64).ln());
    }
    let top = logc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut c: Vec<f64> = logc.iter().map(|l| (l - top).exp()).collect();
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    c.iter_mut().for_each(|x| *x /= norm);
    let psi: Vec<C64> = c.into_iter().map(|x| C64::new(x, 0.0)).collect();
    DensityState::pure(space.layout(), 0, &psi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OatTransient {
    pub t_opt: f64,
    pub xi2_min: f64,
    /// Sampled `(t, ξ²)`.
    pub samples: Vec<(f64, f64)>,
    /// Times the window was doubled because the minimum sat on its edge.
    pub extensions: usize,
}

/// Kitagawa–Ueda estimate of the optimal twisting time, used to size the
/// default window.
pub fn ideal_twist_time(n: usize, chi: f64) -> f64 {
    3f64.powf(1.0 / 6.0) * (n as f64 / 2.0).powf(-2.0 / 3.0) / (2.0 * chi.abs())
}

/// Transient minimum of ξ²(t) starting from [`equator_state`].
///
/// With `t_max = None` the window is four times [`ideal_twist_time`]. The
/// window is doubled up to twice if the minimum sits on its end.
pub fn oat_transient(n: usize, p: &OatParams, t_max: Option<f64>, samples: usize) -> Result<OatTransient> {
    let space = dicke_space(n)?;
    let l = build_oat(&space, p)?;
    let rho0 = equator_state(&space)?;
    let mut t_max = match t_max {
        Some(t) if t > 0.0 => t,
        Some(t) => return Err(Error::Domain(format!("t_max must be positive, got {t}"))),
        None if p.chi() != 0.0 => 4.0 * ideal_twist_time(n, p.chi()),
        None => return Err(Error::Domain("χ = 0 and no t_max given".into())),
    };
    let samples = samples.max(8);
    let opts = EvolveOptions { rtol: 1e-9, atol: 1e-11, ..Default::default() };
    for extensions in 0..=2 {
        let grid = linspace(0.0, t_max, samples);
        let traj = evolve_with(&l, &rho0, &grid, &opts)?;
        let xi2 = traj.xi2();
        let k = (0..xi2.len()).fold(0, |b, i| if xi2[i] < xi2[b] { i } else { b });
        if k + 1 < xi2.len() {
            let spline = CubicSpline::new(&grid, &xi2)?;
            let (t_opt, xi2_min) = spline.minimum();
            return Ok(OatTransient { t_opt, xi2_min, samples: grid.into_iter().zip(xi2).collect(), extensions });
        }
        t_max *= 2.0;
    }
    Err(Error::Search(format!("ξ² still decreasing at t = {:.3e} after two extensions", t_max / 2.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OatOptimum {
    pub delta_c: f64,
    pub t_opt: f64,
    pub xi2_min: f64,
    /// `(Δ_c, ξ²_min)` on the coarse grid.
    pub profile: Vec<(f64, f64)>,
}

/// Detuning that gives the deepest transient squeezing. `p.delta_c` is
/// ignored; the search runs over `Δ_c ∈ [κ_int/2, 10³ κ_int]` on a log grid.
pub fn optimize_oat(n: usize, p: &OatParams, grid_points: usize) -> Result<OatOptimum> {
    p.validate()?;
    let eval = |d: f64| oat_transient(n, &OatParams { delta_c: d, ..*p }, None, 120).map(|t| t.xi2_min).unwrap_or(f64::NAN);
    let m = log_grid_then_golden(eval, 0.5 * p.kappa_int, 1e3 * p.kappa_int, grid_points.max(4), 1e-4)?;
    let best = oat_transient(n, &OatParams { delta_c: m.x, ..*p }, None, 200)?;
    Ok(OatOptimum { delta_c: m.x, t_opt: best.t_opt, xi2_min: best.xi2_min.min(m.value), profile: m.profile })
}

/// Steady-state optimum of the reservoir-engineered protocol at matched
/// cavity parameters (`g`, `κ_int`, `γ_rel`), over `r` and `κ_sqz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipativeOptimum {
    pub r: f64,
    pub kappa_sqz: f64,
    pub xi2: f64,
    pub gamma: f64,
    pub gamma_coll: f64,
}

/// Spin-model parameters after eliminating a cavity with linewidths
/// `κ_sqz`, `κ_int`.
pub fn cavity_model(g: f64, kappa_sqz: f64, kappa_int: f64, r: f64, gamma_rel: f64) -> Result<ModelParams> {
    let (gamma, gamma_coll) = adiabatic_rates(g, kappa_sqz, kappa_int)?;
    Ok(ModelParams { gamma, r, gamma_coll, gamma_rel, ..Default::default() })
}

pub fn optimize_dissipative(n: usize, g: f64, kappa_int: f64, gamma_rel: f64) -> Result<DissipativeOptimum> {
    let space = dicke_space(n)?;
    let objective = |ln_k: f64, r: f64| -> f64 {
        let run = || -> Result<f64> {
            let p = cavity_model(g, ln_k.exp(), kappa_int, r, gamma_rel)?;
            wineland(&steady_state(&build_spin_model(&space, &p)?)?)
        };
        run().unwrap_or(f64::NAN)
    };
    let gk: Vec<f64> = logspace(0.1 * kappa_int, 1e2 * kappa_int, 13).into_iter().map(f64::ln).collect();
    let gr = linspace(0.0, 3.0, 13);
    let m = minimize_2d(objective, &gk, &gr, 1e-5, 4)?;
    let kappa_sqz = m.x[0].exp();
    let (gamma, gamma_coll) = adiabatic_rates(g, kappa_sqz, kappa_int)?;
    Ok(DissipativeOptimum { r: m.x[1], kappa_sqz, xi2: m.value, gamma, gamma_coll })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{purity, spin_moments};

    #[test]
    fn chi_example_and_stationarity() {
        let p = OatParams { g: 1.0, kappa_int: 2.0, gamma_rel: 0.0, delta_c: 10.0 };
        assert!((p.chi() - 10.0 / 101.0).abs() < 1e-15);
        assert_eq!(OatParams { delta_c: 0.0, ..p }.chi(), 0.0);
        let chi = |d: f64| OatParams { delta_c: d, ..p }.chi();
        let h = 1e-4;
        let deriv = (chi(1.0 + h) - chi(1.0 - h)) / (2.0 * h);
        assert!(deriv.abs() < 1e-8, "{deriv}");
    }

    #[test]
    fn equator_state_points_along_x() {
        let space = dicke_space(9).unwrap();
        let m = spin_moments(&equator_state(&space).unwrap()).unwrap();
        assert!((m.mean[0] - 4.5).abs() < 1e-12);
        assert!(m.mean[1].abs() < 1e-12 && m.mean[2].abs() < 1e-12);
        assert!((m.second[2][2] - 9.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn unitary_twist_keeps_purity() {
        let n = 8;
        let space = dicke_space(n).unwrap();
        // κ_int → 0 limit: collective decay of order 1e−12
        let p = OatParams { g: 1.0, kappa_int: 1e-12, gamma_rel: 0.0, delta_c: 1.0 };
        let l = build_oat(&space, &p).unwrap();
        let rho0 = equator_state(&space).unwrap();
        let grid = linspace(0.0, 2.0, 11);
        let traj = evolve_with(&l, &rho0, &grid, &EvolveOptions { rtol: 1e-11, atol: 1e-13, store_states: true, ..Default::default() }).unwrap();
        for s in &traj.states {
            assert!((purity(s).unwrap() - 1.0).abs() < 1e-9);
        }
        assert!(traj.xi2().iter().skip(1).any(|&x| x < 0.5));
    }

    #[test]
    fn transient_minimum_is_interior() {
        let p = OatParams { g: 1.0, kappa_int: 1e-9, gamma_rel: 0.0, delta_c: 1.0 };
        let t = oat_transient(20, &p, None, 120).unwrap();
        assert!(t.t_opt > 0.0 && t.xi2_min < 0.3);
        let first = t.samples[0].1;
        assert!((first - 1.0).abs() < 1e-9);
    }
}
