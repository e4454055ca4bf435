//! Closed-form objects of the ideal model: dark states, the LMG
//! Hamiltonian `Σ†Σ = e^{−2r}S_x² + e^{2r}S_y² + S_z` and the odd-`N`
//! steady state `ρ ∝ Σ_k λ_k^{-1} |ψ_k⟩⟨ψ_k|`.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::spinspace::CollectiveOps;
use crate::state::{DensityState, Layout};
use crate::{Error, Half, Result};

/// Normalized dark state of `Σ[r]` in block `j`, basis `m = −j, …, j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarkState {
    pub j: Half,
    pub r: f64,
    pub coeffs: Vec<f64>,
}

impl DarkState {
    pub fn amplitudes(&self) -> Vec<C64> {
        self.coeffs.iter().map(|&c| C64::new(c, 0.0)).collect()
    }

    /// Density operator on the single block `j` of `n_spins` spins.
    pub fn density(&self, n_spins: usize) -> Result<DensityState> {
        DensityState::pure(Layout::dicke_single(n_spins, self.j), 0, &self.amplitudes())
    }
}

/// Dark-state coefficients for an integer `j`, built from the ratio
/// `c_{k+1}/c_k = (j−k)/(k+1) · √((2k+1)(2k+2)/((2j−2k)(2j−2k−1))) · tanh r`
/// between `m = −j+2k` and `m = −j+2k+2`, accumulated in log space.
pub fn dark_coefficients(j: Half, r: f64) -> Result<Vec<f64>> {
    if !j.is_integer() || j.twice() < 0 {
        return Err(Error::Domain(format!("a dark state needs an integer j, got {j}")));
    }
    if !r.is_finite() {
        return Err(Error::Domain(format!("r must be finite, got {r}")));
    }
    let jj = (j.twice() / 2) as usize;
    let d = j.dim();
    let mut c = vec![0.0; d];
    if r == 0.0 || jj == 0 {
        c[0] = 1.0;
        return Ok(c);
    }
    let t = r.tanh();
    let (lt, sign) = (t.abs().ln(), t.signum());
    let mut logs = Vec::with_capacity(jj + 1);
    logs.push(0.0f64);
    for k in 0..jj {
        let (kf, jf) = (k as f64, jj as f64);
        let l = ((jf - kf) / (kf + 1.0)).ln()
            + 0.5 * ((2.0 * kf + 1.0) * (2.0 * kf + 2.0) / ((2.0 * jf - 2.0 * kf) * (2.0 * jf - 2.0 * kf - 1.0))).ln()
            + lt;
        logs.push(logs[k] + l);
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for (k, l) in logs.iter().enumerate() {
        let s = if k % 2 == 1 { sign } else { 1.0 };
        c[2 * k] = s * (l - top).exp();
    }
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    c.iter_mut().for_each(|x| *x /= norm);
    Ok(c)
}

/// Dark state of block `j` for `n_spins` spins; odd `N` has none.
pub fn dark_state(n_spins: usize, j: Half, r: f64) -> Result<DarkState> {
    if n_spins % 2 == 1 {
        return Err(Error::Domain(format!("N = {n_spins} is odd: Σ has no dark state")));
    }
    if j.twice() > n_spins as i32 || j.twice() < 0 || j.twice() % 2 != 0 {
        return Err(Error::Domain(format!("j = {j} is not a block of N = {n_spins}")));
    }
    Ok(DarkState { j, r, coeffs: dark_coefficients(j, r)? })
}

/// `e^{−2r}S_x² + e^{2r}S_y² + S_z` as a dense matrix.
pub fn lmg_hamiltonian(j: Half, r: f64) -> Mat<C64> {
    let o = CollectiveOps::spin(j);
    let (a, b) = ((-2.0 * r).exp(), (2.0 * r).exp());
    let x2 = &o.sx * &o.sx;
    let y2 = &o.sy * &o.sy;
    Mat::from_fn(j.dim(), j.dim(), |p, q| x2[(p, q)] * a + y2[(p, q)] * b + o.sz[(p, q)])
}

#[derive(Debug, Clone)]
pub struct LmgSpectrum {
    pub j: Half,
    pub r: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` belongs to `eigenvalues[k]`.
    pub eigenvectors: Mat<C64>,
}

impl LmgSpectrum {
    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        (0..self.eigenvectors.nrows()).map(|i| self.eigenvectors[(i, k)]).collect()
    }
}

pub fn lmg_spectrum(j: Half, r: f64) -> Result<LmgSpectrum> {
    if !r.is_finite() {
        return Err(Error::Domain(format!("r must be finite, got {r}")));
    }
    let h = lmg_hamiltonian(j, r);
    let eig = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numerical(format!("LMG diagonalization: {e:?}")))?;
    let s = eig.S().column_vector();
    let eigenvalues = (0..j.dim()).map(|k| s[k].re).collect();
    Ok(LmgSpectrum { j, r, eigenvalues, eigenvectors: eig.U().to_owned() })
}

/// Steady state of `Γ D[Σ]` on a half-integer block.
pub fn odd_steady_state(n_spins: usize, j: Half, r: f64) -> Result<DensityState> {
    if j.is_integer() {
        return Err(Error::Domain(format!("j = {j} is an integer: the steady state is the dark state")));
    }
    if j.twice() > n_spins as i32 || (n_spins as i32 - j.twice()) % 2 != 0 {
        return Err(Error::Domain(format!("j = {j} is not a block of N = {n_spins}")));
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!("r must be positive, got {r}")));
    }
    let spec = lmg_spectrum(j, r)?;
    let d = j.dim();
    if let Some(&l0) = spec.eigenvalues.iter().find(|&&l| l <= 1e-14) {
        return Err(Error::Singularity(l0));
    }
    let w: Vec<f64> = spec.eigenvalues.iter().map(|l| 1.0 / l).collect();
    let total: f64 = w.iter().sum();
    let u = &spec.eigenvectors;
    let rho = Mat::from_fn(d, d, |p, q| (0..d).map(|k| u[(p, k)] * u[(q, k)].conj() * (w[k] / total)).sum::<C64>());
    DensityState::new(Layout::dicke_single(n_spins, j), vec![rho])
}

/// `(Σλ^{-2}) / (Σλ^{-1})²`: purity of the odd-`N` steady state.
pub fn odd_steady_purity(spec: &LmgSpectrum) -> f64 {
    let s1: f64 = spec.eigenvalues.iter().map(|l| 1.0 / l).sum();
    let s2: f64 = spec.eigenvalues.iter().map(|l| 1.0 / (l * l)).sum();
    s2 / (s1 * s1)
}

/// Closed-form large-`r` and scaling predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Asymptotics {
    pub n_spins: usize,
    pub r: f64,
    pub heisenberg_xi2: f64,
    pub breakdown_r: f64,
    pub even_sy2_large_r: f64,
    pub odd_sy2_large_r: f64,
    pub dephasing_floor_xi2: f64,
    pub dephasing_opt_r: f64,
}

pub fn asymptotics(n_spins: usize, r: f64) -> Result<Asymptotics> {
    if n_spins < 2 {
        return Err(Error::Domain(format!("need N ≥ 2, got {n_spins}")));
    }
    let n = n_spins as f64;
    Ok(Asymptotics {
        n_spins,
        r,
        heisenberg_xi2: 2.0 / (n + 2.0),
        breakdown_r: n.ln() / 2.0,
        even_sy2_large_r: n * n * (-4.0 * r).exp() / 8.0,
        odd_sy2_large_r: n / std::f64::consts::PI.powi(2),
        dephasing_floor_xi2: 0.5 + n.sqrt() / (n + 1.0),
        dephasing_opt_r: n.ln() / 8.0,
    })
}
