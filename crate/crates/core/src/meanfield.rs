//! Second-order cumulant equations for the spin model, their linearization
//! about the polarized state and the closed-form cooperativity estimates
//! that follow from it.
//!
//! Third-order cumulants of symmetrized products are dropped. The state is
//! `(⟨S_z⟩, ⟨S_x²⟩, ⟨S_y²⟩, C_zz = ⟨S_z²⟩ − ⟨S_z⟩²)`, with the mean spin
//! along `z`.

use serde::{Deserialize, Serialize};

use crate::liouvillian::ModelParams;
use crate::optim::{log_grid_then_golden, Minimum};
use crate::solver::ode::{Dopri5, OdeOptions, OdeStats};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CumulantState {
    pub sz: f64,
    pub sx2: f64,
    pub sy2: f64,
    pub czz: f64,
}

impl CumulantState {
    /// All spins down.
    pub fn polarized(n: f64) -> Self {
        CumulantState { sz: -0.5 * n, sx2: 0.25 * n, sy2: 0.25 * n, czz: 0.0 }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.sz, self.sx2, self.sy2, self.czz]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        CumulantState { sz: a[0], sx2: a[1], sy2: a[2], czz: a[3] }
    }

    /// `N · min(⟨S_x²⟩, ⟨S_y²⟩) / ⟨S_z⟩²`; `+∞` when the mean spin vanishes.
    pub fn xi2(&self, n: f64) -> f64 {
        if self.sz.abs() < 1e-12 * n {
            f64::INFINITY
        } else {
            n * self.sx2.min(self.sy2) / (self.sz * self.sz)
        }
    }

    /// `⟨S_x²⟩, ⟨S_y²⟩ ≥ 0` and `|⟨S_z⟩| ≤ N/2`, up to `tol · N`.
    pub fn is_physical(&self, n: f64, tol: f64) -> bool {
        let eps = tol * n;
        self.sx2 >= -eps && self.sy2 >= -eps && self.sz.abs() <= 0.5 * n + eps
    }

    fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

// Unit-rate contribution of Γ D[Σ(r)].
fn squeezed_part(s: &CumulantState, r: f64) -> [f64; 4] {
    let (ep, em) = ((2.0 * r).exp(), (-2.0 * r).exp());
    let sz = s.sz;
    [
        -0.5 * (ep + em) * sz - (s.sx2 + s.sy2),
        ep * sz * sz + (2.0 * s.sx2 - 0.5) * sz - ep * s.sx2 + ep * s.czz,
        em * sz * sz + (2.0 * s.sy2 - 0.5) * sz - em * s.sy2 + em * s.czz,
        sz + ep * s.sx2 - (ep + em) * s.czz + em * s.sy2,
    ]
}

// The same channel conjugated by a π rotation about x (S_z → −S_z,
// Σ(r) → Σ(r)†).
fn mirrored(f: impl Fn(&CumulantState) -> [f64; 4], s: &CumulantState) -> [f64; 4] {
    let d = f(&CumulantState { sz: -s.sz, ..*s });
    [-d[0], d[1], d[2], d[3]]
}

fn dephasing_part(s: &CumulantState, n: f64) -> [f64; 4] {
    [0.0, -2.0 * s.sx2 + 0.5 * n, -2.0 * s.sy2 + 0.5 * n, 0.0]
}

fn relaxation_part(s: &CumulantState, n: f64) -> [f64; 4] {
    [-s.sz - 0.5 * n, -s.sx2 + 0.25 * n, -s.sy2 + 0.25 * n, s.sz - 2.0 * s.czz + 0.5 * n]
}

/// Time derivatives of the four cumulants.
pub fn cumulant_rhs(s: &CumulantState, p: &ModelParams, n: f64) -> CumulantState {
    let terms: [(f64, [f64; 4]); 6] = [
        (p.gamma * (p.n_th + 1.0), squeezed_part(s, p.r)),
        (p.gamma * p.n_th, mirrored(|x| squeezed_part(x, p.r), s)),
        (p.gamma_coll, squeezed_part(s, 0.0)),
        (p.gamma_up, mirrored(|x| squeezed_part(x, 0.0), s)),
        (p.gamma_phi, dephasing_part(s, n)),
        (p.gamma_rel, relaxation_part(s, n)),
    ];
    let mut out = [0.0; 4];
    for (rate, d) in terms {
        if rate != 0.0 {
            for k in 0..4 {
                out[k] += rate * d[k];
            }
        }
    }
    CumulantState::from_array(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanFieldMethod {
    /// Integrate to convergence, then polish with Newton.
    Integrate,
    /// Damped Newton from the linearized solution; integration on failure.
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanFieldOptions {
    pub method: MeanFieldMethod,
    /// Hold `⟨S_z⟩ = −N/2`, `C_zz = 0` and solve only for the variances.
    pub linearize: bool,
    /// Residual target relative to `N · max rate`.
    pub residual_tol: f64,
}

impl Default for MeanFieldOptions {
    fn default() -> Self {
        MeanFieldOptions { method: MeanFieldMethod::Newton, linearize: false, residual_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSteady {
    pub state: CumulantState,
    pub xi2: f64,
    /// `max |rhs|` at the returned state.
    pub residual: f64,
    /// Method that produced the final answer.
    pub method: MeanFieldMethod,
    pub physical: bool,
}

/// Stationary point of [`cumulant_rhs`].
pub fn cumulant_steady(p: &ModelParams, n: usize, opts: &MeanFieldOptions) -> Result<MeanFieldSteady> {
    p.validate()?;
    if n == 0 {
        return Err(Error::Domain("N must be positive".into()));
    }
    let nf = n as f64;
    let tol = opts.residual_tol * nf * p.max_rate().max(f64::MIN_POSITIVE);
    let finish = |state: CumulantState, method| {
        let residual = rhs_norm(&state, p, nf, opts.linearize);
        MeanFieldSteady { state, xi2: state.xi2(nf), residual, method, physical: state.is_physical(nf, 1e-9) }
    };
    if opts.linearize {
        let s = linearized_steady(p, nf)?;
        return Ok(finish(s, MeanFieldMethod::Newton));
    }
    let start = linearized_steady(p, nf).unwrap_or_else(|_| CumulantState::polarized(nf));
    if opts.method == MeanFieldMethod::Newton {
        if let Ok(s) = newton(p, nf, start, tol) {
            if s.is_physical(nf, 1e-6) {
                return Ok(finish(s, MeanFieldMethod::Newton));
            }
        }
    }
    let s = integrate_to_steady(p, nf, tol)?;
    Ok(finish(s, MeanFieldMethod::Integrate))
}

fn rhs_norm(s: &CumulantState, p: &ModelParams, n: f64, linearize: bool) -> f64 {
    let d = cumulant_rhs(s, p, n);
    if linearize {
        d.sx2.abs().max(d.sy2.abs())
    } else {
        d.max_abs()
    }
}

// With ⟨S_z⟩ and C_zz frozen the variance equations are affine and
// decoupled: dX/dt = a + bX.
fn linearized_steady(p: &ModelParams, n: f64) -> Result<CumulantState> {
    let base = CumulantState { sz: -0.5 * n, sx2: 0.0, sy2: 0.0, czz: 0.0 };
    let d0 = cumulant_rhs(&base, p, n);
    let d1 = cumulant_rhs(&CumulantState { sx2: 1.0, sy2: 1.0, ..base }, p, n);
    let (bx, by) = (d1.sx2 - d0.sx2, d1.sy2 - d0.sy2);
    if !(bx < 0.0 && by < 0.0) {
        return Err(Error::Domain(format!("linearized variances are not damped (rates {bx:.3e}, {by:.3e})")));
    }
    Ok(CumulantState { sx2: -d0.sx2 / bx, sy2: -d0.sy2 / by, ..base })
}

fn newton(p: &ModelParams, n: f64, start: CumulantState, tol: f64) -> Result<CumulantState> {
    let f = |x: [f64; 4]| cumulant_rhs(&CumulantState::from_array(x), p, n).to_array();
    let norm = |v: [f64; 4]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut x = start.to_array();
    let mut fx = f(x);
    for _ in 0..200 {
        if norm(fx) <= tol {
            return Ok(CumulantState::from_array(x));
        }
        let mut jac = [[0.0; 4]; 4];
        for c in 0..4 {
            let h = 1e-6 * x[c].abs().max(1.0);
            let (mut xp, mut xm) = (x, x);
            xp[c] += h;
            xm[c] -= h;
            let (fp, fm) = (f(xp), f(xm));
            for r in 0..4 {
                jac[r][c] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        let step = solve4(jac, fx.map(|v| -v)).ok_or_else(|| Error::Convergence("singular mean-field Jacobian".into()))?;
        let mut lambda = 1.0;
        loop {
            let xn: [f64; 4] = std::array::from_fn(|k| x[k] + lambda * step[k]);
            let fn_ = f(xn);
            if norm(fn_) < norm(fx) || lambda < 1e-6 {
                x = xn;
                fx = fn_;
                break;
            }
            lambda *= 0.5;
        }
    }
    Err(Error::Convergence(format!("Newton stalled at residual {:.3e}", norm(fx))))
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for c in 0..4 {
        let piv = (c..4).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..4 {
            let m = a[r][c] / a[c][c];
            for k in c..4 {
                a[r][k] -= m * a[c][k];
            }
            b[r] -= m * b[c];
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        let s: f64 = (r + 1..4).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn slowest_rate(p: &ModelParams, n: f64) -> f64 {
    let rates = [p.gamma, p.gamma_coll, p.gamma_up, p.gamma_phi, p.gamma_rel];
    let min = rates.into_iter().filter(|r| *r > 0.0).fold(f64::INFINITY, f64::min);
    // Collective processes can be slowed by 1/N near the pole.
    if min.is_finite() {
        min / n
    } else {
        0.0
    }
}

fn integrate_to_steady(p: &ModelParams, n: f64, tol: f64) -> Result<CumulantState> {
    let slow = slowest_rate(p, n);
    if slow == 0.0 {
        return Err(Error::Domain("all rates vanish: every state is stationary".into()));
    }
    let opts = OdeOptions { rtol: 1e-11, atol: 1e-13 * n, ..OdeOptions::default() };
    let mut st = Dopri5::new(4, opts);
    let mut stats = OdeStats::default();
    let mut rhs = |_: f64, y: &[f64], dy: &mut [f64]| {
        let d = cumulant_rhs(&CumulantState { sz: y[0], sx2: y[1], sy2: y[2], czz: y[3] }, p, n).to_array();
        dy.copy_from_slice(&d);
    };
    let mut y = CumulantState::polarized(n).to_array();
    let (mut t, mut window) = (0.0, 1.0 / p.max_rate());
    let t_end = 1e4 / slow;
    while t < t_end {
        st.integrate(&mut rhs, t, t + window, &mut y, &mut stats, |_, _| Ok(()))?;
        t += window;
        window *= 2.0;
        let s = CumulantState::from_array([y[0], y[1], y[2], y[3]]);
        if !s.max_abs().is_finite() {
            return Err(Error::Convergence("mean-field trajectory diverged".into()));
        }
        if rhs_norm(&s, p, n, false) <= 1e3 * tol {
            return newton(p, n, s, tol).or_else(|_| {
                if rhs_norm(&s, p, n, false) <= tol {
                    Ok(s)
                } else {
                    Err(Error::Convergence("Newton polish failed after integration".into()))
                }
            });
        }
    }
    Err(Error::Convergence(format!("no mean-field steady state reached by t = {t_end:.3e}")))
}

/// Cumulants sampled on `t_grid`, starting from `initial` at `t_grid[0]`.
pub fn cumulant_trajectory(p: &ModelParams, n: usize, initial: CumulantState, t_grid: &[f64]) -> Result<Vec<CumulantState>> {
    p.validate()?;
    let nf = n as f64;
    let opts = OdeOptions { rtol: 1e-10, atol: 1e-12 * nf, ..OdeOptions::default() };
    let (ys, _) = crate::solver::ode::integrate_on_grid(
        |_, y, dy| dy.copy_from_slice(&cumulant_rhs(&CumulantState { sz: y[0], sx2: y[1], sy2: y[2], czz: y[3] }, p, nf).to_array()),
        &initial.to_array(),
        t_grid,
        opts,
    )?;
    Ok(ys.into_iter().map(|y| CumulantState { sz: y[0], sx2: y[1], sy2: y[2], czz: y[3] }).collect())
}

/// Mean-field ξ² minimized over `r ∈ [r_lo, r_hi]`.
pub fn optimize_r(p: &ModelParams, n: usize, r_lo: f64, r_hi: f64, grid_points: usize) -> Result<Minimum> {
    if !(r_hi > r_lo) {
        return Err(Error::Domain(format!("empty r range [{r_lo}, {r_hi}]")));
    }
    let grid = crate::optim::linspace(r_lo, r_hi, grid_points.max(3));
    let opts = MeanFieldOptions::default();
    crate::optim::grid_then_golden(
        |r| cumulant_steady(&ModelParams { r, ..*p }, n, &opts).map(|s| if s.physical { s.xi2 } else { f64::NAN }).unwrap_or(f64::NAN),
        &grid,
        1e-9,
    )
}

/// Squeezing argument of the linearized estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Squeezing {
    Finite(f64),
    /// `r → ∞`.
    Large,
}

/// Rates entering the linearized estimate. A non-zero `gamma_phi` is folded
/// in as `γ_rel → γ_rel + 2γ_φ`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearRates {
    pub gamma: f64,
    pub gamma_coll: f64,
    pub gamma_rel: f64,
    pub gamma_phi: f64,
}

/// ξ² of the polarized-state linearization.
///
/// Finite `r`: `((N+1)γ_c + (Ne^{−2r}+1)Γ + γ′)/((N+1)γ_c + (N+e^{−2r})Γ + γ′)`.
/// Large `r`: `(Nγ_c + Γ + γ′)/(Nγ_c + NΓ + γ′)`.
pub fn linearized_wineland(n: f64, rates: &LinearRates, r: Squeezing) -> Result<f64> {
    for (name, v) in [("gamma", rates.gamma), ("gamma_coll", rates.gamma_coll), ("gamma_rel", rates.gamma_rel), ("gamma_phi", rates.gamma_phi)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be finite and non-negative, got {v}")));
        }
    }
    if !(n > 0.0) {
        return Err(Error::Domain(format!("N must be positive, got {n}")));
    }
    let gr = rates.gamma_rel + 2.0 * rates.gamma_phi;
    let (g, gc) = (rates.gamma, rates.gamma_coll);
    let (num, den) = match r {
        Squeezing::Finite(r) => {
            if !r.is_finite() {
                return Err(Error::Domain(format!("r must be finite, got {r}")));
            }
            let e = (-2.0 * r.abs()).exp();
            ((n + 1.0) * gc + (n * e + 1.0) * g + gr, (n + 1.0) * gc + (n + e) * g + gr)
        }
        Squeezing::Large => (n * gc + g + gr, n * gc + n * g + gr),
    };
    if !(den > 0.0) {
        return Err(Error::Domain("all rates vanish".into()));
    }
    Ok(num / den)
}

/// Optimal engineered-cavity linewidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaOptimum {
    pub kappa_opt: f64,
    pub xi2_opt: f64,
    /// `C_rel = 4G²/(κ_int γ_rel)`.
    pub c_rel: f64,
    /// `κ_int √C_rel`.
    pub kappa_closed_form: f64,
    /// `√(κ_int² + 4G²κ_int/γ_rel)`.
    pub kappa_stationary: f64,
    /// `2/(√(C_rel+1) + 1)`.
    pub xi2_closed_form: f64,
}

/// Large-`r` ξ² with adiabatic rates, as a function of `κ_sqz`
/// (`G = √N g` held fixed).
pub fn xi2_vs_kappa_sqz(kappa_sqz: f64, big_g: f64, kappa_int: f64, gamma_rel: f64, n: f64) -> f64 {
    let a = (n + 1.0) / n * kappa_int + (kappa_sqz + kappa_int).powi(2) * gamma_rel / (4.0 * big_g * big_g);
    (a + kappa_sqz / n) / (a + kappa_sqz)
}

pub fn optimize_kappa_sqz(big_g: f64, kappa_int: f64, gamma_rel: f64, n: f64) -> Result<KappaOptimum> {
    if !(kappa_int > 0.0 && gamma_rel > 0.0 && big_g > 0.0 && n > 0.0) {
        return Err(Error::Domain("G, κ_int, γ_rel and N must be positive".into()));
    }
    let c_rel = 4.0 * big_g * big_g / (kappa_int * gamma_rel);
    let kappa_closed_form = kappa_int * c_rel.sqrt();
    let kappa_stationary = (kappa_int * kappa_int + 4.0 * big_g * big_g * kappa_int / gamma_rel).sqrt();
    let lo = 1e-3 * kappa_int.min(kappa_closed_form);
    let hi = 1e3 * kappa_int.max(kappa_closed_form);
    let m = log_grid_then_golden(|k| xi2_vs_kappa_sqz(k, big_g, kappa_int, gamma_rel, n), lo, hi, 40, 1e-12)?;
    Ok(KappaOptimum {
        kappa_opt: m.x,
        xi2_opt: m.value,
        c_rel,
        kappa_closed_form,
        kappa_stationary,
        xi2_closed_form: 2.0 / ((c_rel + 1.0).sqrt() + 1.0),
    })
}

/// `(η + 1)/(Nη + 1)` with `η = Γ/γ_rel`; meaningful for `η ≲ 1` and
/// `Nη ≫ 1`.
pub fn direct_drive_wineland(eta: f64, n: f64) -> Result<f64> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::Domain(format!("η must be finite and non-negative, got {eta}")));
    }
    Ok((eta + 1.0) / (n * eta + 1.0))
}
