use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::analytic::dark_coefficients;
use crate::liouvillian::{build_local_dephasing, Liouvillian};
use crate::spinspace::DickeSpace;
use crate::state::DensityState;
use crate::{Error, Half, Result};

/// Population transfer between dark states of neighbouring blocks under
/// `¼ Σ_k D[σ_z^k]`, the perturbation `(γ_φ/2) Σ_k D[σ_z^k]` divided by
/// `2γ_φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix {
    /// Integer blocks, descending.
    pub js: Vec<Half>,
    pub r: f64,
    pub gamma_phi: f64,
    /// `matrix[a][b]`: rate from block `js[b]` into block `js[a]`.
    pub matrix: Vec<Vec<f64>>,
}

impl RateMatrix {
    /// Eigenvalues of the dimensionless matrix, ascending by magnitude.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.js.len();
        let m = Mat::from_fn(n, n, |a, b| self.matrix[a][b]);
        let mut ev: Vec<f64> = m.eigenvalues().map_err(|e| Error::Numerical(format!("rate-matrix eigenvalues: {e:?}")))?.into_iter().map(|z| z.re).collect();
        ev.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        Ok(ev)
    }

    /// Smallest nonzero `|eigenvalue|` (dimensionless).
    pub fn gap(&self) -> Result<f64> {
        let ev = self.eigenvalues()?;
        let scale = ev.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        ev.into_iter().map(f64::abs).filter(|x| *x > 1e-12 * scale).fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x)))).ok_or_else(|| Error::Numerical("rate matrix has no nonzero eigenvalue".into()))
    }

    /// First-order asymptotic decay rate `2γ_φ · gap`.
    pub fn decay_rate(&self) -> Result<f64> {
        Ok(2.0 * self.gamma_phi * self.gap()?)
    }

    pub fn max_column_sum(&self) -> f64 {
        let n = self.js.len();
        (0..n).map(|b| (0..n).map(|a| self.matrix[a][b]).sum::<f64>().abs()).fold(0.0, f64::max)
    }
}

/// Rate matrix over the integer blocks of an even-`N` space.
pub fn jspace_rate_matrix(space: &DickeSpace, r: f64, gamma_phi: f64) -> Result<RateMatrix> {
    let n = space.n_spins();
    if n % 2 == 1 {
        return Err(Error::Domain(format!("N = {n} is odd: blocks have no dark states")));
    }
    if !(gamma_phi >= 0.0) || !gamma_phi.is_finite() {
        return Err(Error::Domain(format!("γ_φ must be finite and non-negative, got {gamma_phi}")));
    }
    let l1: Liouvillian = build_local_dephasing(space, 0.25)?;
    let layout = space.layout();
    let js = space.js();
    let nb = js.len();
    let mut matrix = vec![vec![0.0; nb]; nb];
    for (b, &j) in js.iter().enumerate() {
        let c = dark_coefficients(j, r)?;
        let psi: Vec<C64> = c.iter().map(|&x| C64::new(x, 0.0)).collect();
        let rho = DensityState::pure(layout.clone(), b, &psi)?;
        let out = l1.apply(&rho)?;
        for (a, t) in out.block_traces().into_iter().enumerate() {
            if a != b {
                matrix[a][b] = t.re.max(0.0);
            }
        }
        matrix[b][b] = -(0..nb).filter(|&a| a != b).map(|a| matrix[a][b]).sum::<f64>();
    }
    Ok(RateMatrix { js, r, gamma_phi, matrix })
}
