//! Exact rewriting of `Γ D[Σ] + Γ′ D[Σ†] + γ D[S₋] + γ′ D[S₊]` as a
//! thermal squeezed reservoir `Γ̃ D[Σ̃] + Γ̃′ D[Σ̃†]` with `Σ̃ = Σ[r̃]`:
//!
//! ```text
//! 1/tanh(2r̃) = 1/tanh(2r) + (γ+γ′) / ((Γ+Γ′) sinh(2r))
//! Γ̃  = ((Γ+Γ′) cosh(2r) + γ + γ′) / (2 cosh(2r̃)) + (Γ − Γ′ + γ − γ′)/2
//! Γ̃′ = Γ̃ − Γ + Γ′ − γ + γ′
//! ```

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveReservoir {
    pub r: f64,
    pub gamma: f64,
    pub gamma_p: f64,
    /// Set when `r = 0` but collective decay/excitation is present: the
    /// squeezing axis is then undefined and `r̃ = 0` is returned.
    pub direction_undefined: bool,
}

impl EffectiveReservoir {
    /// `n_th = Γ̃′ / (Γ̃ − Γ̃′)`.
    pub fn n_th(&self) -> f64 {
        self.gamma_p / (self.gamma - self.gamma_p)
    }

    /// `Γ̃ − Γ̃′`, the rate multiplying `(n_th + 1)` and `n_th`.
    pub fn thermal_gamma(&self) -> f64 {
        self.gamma - self.gamma_p
    }
}

pub fn map_to_effective_reservoir(gamma: f64, gamma_p: f64, gamma_down: f64, gamma_up: f64, r: f64) -> Result<EffectiveReservoir> {
    for (name, v) in [("gamma", gamma), ("gamma'", gamma_p), ("gamma_down", gamma_down), ("gamma_up", gamma_up)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be finite and non-negative, got {v}")));
        }
    }
    if !(gamma + gamma_p > 0.0) {
        return Err(Error::Domain("Γ + Γ′ must be positive".into()));
    }
    if !r.is_finite() {
        return Err(Error::Domain(format!("r must be finite, got {r}")));
    }
    let extra = gamma_down + gamma_up;
    let (rt, undefined) = if r == 0.0 {
        (0.0, extra > 0.0)
    } else {
        let x = 2.0 * r.abs();
        // tanh(2r̃) = 1 / (coth(2r) + extra / ((Γ+Γ′) sinh 2r))
        let inv = 1.0 / x.tanh() + extra / ((gamma + gamma_p) * x.sinh());
        (0.5 * (1.0 / inv).atanh() * r.signum(), false)
    };
    let gt = ((gamma + gamma_p) * (2.0 * r).cosh() + extra) / (2.0 * (2.0 * rt).cosh()) + (gamma - gamma_p + gamma_down - gamma_up) / 2.0;
    let gtp = gt - gamma + gamma_p - gamma_down + gamma_up;
    if gt < -1e-14 * gamma.max(1.0) || gtp < -1e-14 * gamma.max(1.0) {
        return Err(Error::Validity(format!("mapped rates are negative: Γ̃ = {gt:.6e}, Γ̃′ = {gtp:.6e}")));
    }
    Ok(EffectiveReservoir { r: rt, gamma: gt.max(0.0), gamma_p: gtp.max(0.0), direction_undefined: undefined })
}

/// First-order effect of motional heating at `γ_heat/Γ = heat` on a squeezed
/// reservoir: `r̃ = r − sinh(2r)·heat`, `n_th = cosh(2r)·heat`.
pub fn heating_reservoir(r: f64, heat: f64) -> Result<(f64, f64)> {
    if !(heat >= 0.0) || !heat.is_finite() || !r.is_finite() {
        return Err(Error::Domain(format!("need finite r and γ_heat/Γ ≥ 0, got r = {r}, γ_heat/Γ = {heat}")));
    }
    Ok((r - (2.0 * r).sinh() * heat, (2.0 * r).cosh() * heat))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_mapping() {
        let m = map_to_effective_reservoir(1.3, 0.0, 0.0, 0.0, 0.9).unwrap();
        assert!((m.r - 0.9).abs() < 1e-14);
        assert!((m.gamma - 1.3).abs() < 1e-13);
        assert!(m.gamma_p.abs() < 1e-13);
    }

    #[test]
    fn heating_expansion() {
        let (r, h) = (1.0f64, 1e-5);
        let m = map_to_effective_reservoir(1.0, 0.0, h, h, r).unwrap();
        let want_r = r - (2.0 * r).sinh() * h;
        let want_n = (2.0 * r).cosh() * h;
        assert!((m.r - want_r).abs() < 1e-8);
        assert!((m.n_th() - want_n).abs() / want_n < 1e-3);
        assert!(m.r <= r);
    }

    #[test]
    fn heating_reservoir_matches_exact_mapping_to_first_order() {
        let (r, h) = (0.7f64, 1e-6);
        let (rt, n) = heating_reservoir(r, h).unwrap();
        let m = map_to_effective_reservoir(1.0, 0.0, h, h, r).unwrap();
        assert!((rt - m.r).abs() < 1e-9);
        assert!((n - m.n_th()).abs() / n < 1e-4);
        assert_eq!(heating_reservoir(0.3, 0.0).unwrap(), (0.3, 0.0));
        assert!(heating_reservoir(0.3, -1.0).is_err());
    }

    #[test]
    fn collective_decay_expansion() {
        let (r, g) = (0.8f64, 1e-5);
        let m = map_to_effective_reservoir(1.0, 0.0, g, 0.0, r).unwrap();
        let n = r.sinh().powi(2) / (1.0 + g) * g;
        assert!((m.n_th() - n).abs() / n < 1e-3);
        assert!((m.gamma - (1.0 + g) * (1.0 + n)).abs() < 1e-8);
        assert!((m.r - (r - 0.5 * (2.0 * r).sinh() * g)).abs() < 1e-9);
    }

    #[test]
    fn zero_r_flags_direction() {
        let m = map_to_effective_reservoir(1.0, 0.0, 0.1, 0.0, 0.0).unwrap();
        assert!(m.direction_undefined && m.r == 0.0);
        assert!(!map_to_effective_reservoir(1.0, 0.0, 0.0, 0.0, 0.0).unwrap().direction_undefined);
    }
}
