//! Spin ensemble coupled to a cavity mode that is itself damped by a
//! squeezed bath:
//!
//! ```text
//! H = g (a† S₋ + a S₊) + Σ_k Δ_k σ_z^k / 2
//! L = −i[H, ·] + κ_sqz D[cosh(r) a + sinh(r) a†] + κ_int D[a]
//!     + (γ_φ/2) Σ_k D[σ_z^k] + γ_rel Σ_k D[σ₋^k]
//! ```
//!
//! Eliminating the cavity for `√N g ≪ κ_sqz + κ_int` gives
//! `Γ = 4g²κ_sqz/(κ_sqz+κ_int)²` and `γ_coll = 4g²κ_int/(κ_sqz+κ_int)²`.
//!
//! The cavity is stored in a squeezed Fock basis ([`cavity_frame`]) in
//! which its bath-driven state is close to vacuum. A plain Fock basis needs
//! far more levels: the spins see truncation of the squeezed vacuum tail
//! as extra noise.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{Assembler, Liouvillian};
use crate::sparse::CsrMatrix;
use crate::spinspace::{full_space_ops, CollectiveOps, Pauli, DEFAULT_ORACLE_SPINS};
use crate::state::{DensityState, FockFrame, Layout, SpinSector};
use crate::{Error, Half, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridParams {
    pub g: f64,
    pub kappa_sqz: f64,
    pub kappa_int: f64,
    pub r: f64,
    /// Fock-space cutoff (number of retained levels).
    pub n_cut: usize,
    /// Per-spin detunings Δ_k; empty means resonant.
    #[serde(default)]
    pub detunings: Vec<f64>,
    #[serde(default)]
    pub gamma_phi: f64,
    #[serde(default)]
    pub gamma_rel: f64,
}

impl HybridParams {
    /// Parameters with the cutoff chosen by [`fock_cutoff`].
    pub fn new(g: f64, kappa_sqz: f64, kappa_int: f64, r: f64) -> Self {
        HybridParams { g, kappa_sqz, kappa_int, r, n_cut: fock_cutoff(r, kappa_sqz, kappa_int), detunings: vec![], gamma_phi: 0.0, gamma_rel: 0.0 }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for (name, v) in [("g", self.g), ("kappa_sqz", self.kappa_sqz), ("kappa_int", self.kappa_int), ("gamma_phi", self.gamma_phi), ("gamma_rel", self.gamma_rel)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if !self.r.is_finite() {
            return Err(Error::Domain("r must be finite".into()));
        }
        if self.n_cut < 2 {
            return Err(Error::Domain(format!("n_cut must be at least 2, got {}", self.n_cut)));
        }
        if !self.detunings.is_empty() && self.detunings.len() != n {
            return Err(Error::Domain(format!("{} detunings given for {n} spins", self.detunings.len())));
        }
        Ok(())
    }
}

/// `⌈4 sinh²(r) κ_sqz/(κ_sqz+κ_int)⌉ + 10`.
pub fn fock_cutoff(r: f64, kappa_sqz: f64, kappa_int: f64) -> usize {
    let occ = 4.0 * r.sinh().powi(2) * kappa_sqz / (kappa_sqz + kappa_int);
    occ.ceil() as usize + 10
}

/// Basis squeezing matched to the cavity's own steady state: the
/// bath leaves `⟨a†a⟩ = f sinh²r`, `⟨a²⟩ = −f sinh r cosh r` with
/// `f = κ_sqz/(κ_sqz+κ_int)`, and `tanh 2r_f = 2|⟨a²⟩|/(2⟨a†a⟩+1)`.
/// Without intrinsic loss `r_f = r` and the cavity sits in the frame vacuum.
pub fn cavity_frame(r: f64, kappa_sqz: f64, kappa_int: f64) -> FockFrame {
    let k = kappa_sqz + kappa_int;
    if !(k > 0.0) || kappa_sqz == 0.0 || r == 0.0 {
        return FockFrame::LAB;
    }
    let f = kappa_sqz / k;
    let (c, s) = (r.cosh(), r.sinh());
    let ratio = 2.0 * f * c * s / (2.0 * f * s * s + 1.0);
    FockFrame(0.5 * ratio.atanh())
}

/// `(Γ, γ_coll)` after adiabatic elimination of the cavity.
pub fn adiabatic_rates(g: f64, kappa_sqz: f64, kappa_int: f64) -> Result<(f64, f64)> {
    let k = kappa_sqz + kappa_int;
    if !(k > 0.0) {
        return Err(Error::Domain("κ_sqz + κ_int must be positive".into()));
    }
    let c = 4.0 * g * g / (k * k);
    Ok((c * kappa_sqz, c * kappa_int))
}

/// Representation of the spins in the hybrid model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HybridSpins {
    /// Pick the collective `j = N/2` multiplet when the model allows it.
    Auto,
    Full,
    Collective,
}

fn annihilation(n: usize) -> CsrMatrix {
    let t = (1..n).map(|k| (k - 1, k, C64::new((k as f64).sqrt(), 0.0))).collect();
    CsrMatrix::from_triplets(n, n, t)
}

/// Lab-frame `a` on the truncated basis of `frame`.
fn lab_mode(n: usize, frame: FockFrame) -> CsrMatrix {
    let b = annihilation(n);
    if frame == FockFrame::LAB {
        return b;
    }
    b.axpby(C64::new(frame.r().cosh(), 0.0), &b.adjoint(), C64::new(-frame.r().sinh(), 0.0))
}

pub(crate) struct HybridOps {
    pub sector: SpinSector,
    pub n_fock: usize,
    pub frame: FockFrame,
    /// Spin operators lifted to the joint space.
    pub sp: CsrMatrix,
    pub sm: CsrMatrix,
    pub a: CsrMatrix,
    /// Per-site operators (full spin sector only).
    pub sites: Vec<(CsrMatrix, CsrMatrix)>,
}

impl HybridOps {
    pub(crate) fn new(sector: SpinSector, n_fock: usize, frame: FockFrame) -> Result<Self> {
        let idf = CsrMatrix::identity(n_fock);
        let a0 = lab_mode(n_fock, frame);
        let (sp, sm, sites) = match sector {
            SpinSector::Full { n_spins } => {
                let ops = full_space_ops(n_spins)?;
                let sites = (0..n_spins).map(|k| (ops.site(k, Pauli::Z).kron(&idf), ops.site(k, Pauli::Minus).kron(&idf))).collect();
                (ops.sp.kron(&idf), ops.sm.kron(&idf), sites)
            }
            SpinSector::Collective { j, .. } => {
                let ops = CollectiveOps::spin(j);
                (CsrMatrix::from_dense(&ops.sp).kron(&idf), CsrMatrix::from_dense(&ops.sm).kron(&idf), vec![])
            }
        };
        let a = CsrMatrix::identity(sector.dim()).kron(&a0);
        Ok(HybridOps { sector, n_fock, frame, sp, sm, a, sites })
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::Hybrid { spin: self.sector.clone(), n_fock: self.n_fock, frame: self.frame }
    }

    /// `g (a†S₋ + a S₊)`.
    pub(crate) fn coupling(&self, g: f64) -> CsrMatrix {
        let ad = self.a.adjoint();
        ad.matmul(&self.sm).add(&self.a.matmul(&self.sp)).scale(C64::new(g, 0.0))
    }

    /// `g (a†S₊ + a S₋)`, the counter-rotating form.
    pub(crate) fn counter_coupling(&self, g: f64) -> CsrMatrix {
        let ad = self.a.adjoint();
        ad.matmul(&self.sp).add(&self.a.matmul(&self.sm)).scale(C64::new(g, 0.0))
    }

    /// `Σ_k Δ_k σ_z^k / 2`.
    pub(crate) fn detuning(&self, deltas: &[f64]) -> CsrMatrix {
        let d = self.sector.dim() * self.n_fock;
        let mut h = CsrMatrix::zeros(d, d);
        for (k, &dk) in deltas.iter().enumerate() {
            if dk != 0.0 {
                h = h.add(&self.sites[k].0.scale(C64::new(0.5 * dk, 0.0)));
            }
        }
        h
    }
}

fn pick_sector(p: &HybridParams, n: usize, spins: HybridSpins) -> Result<SpinSector> {
    let needs_full = p.gamma_phi > 0.0 || p.gamma_rel > 0.0 || p.detunings.iter().any(|&d| d != 0.0);
    match spins {
        HybridSpins::Collective if needs_full => {
            Err(Error::Domain("local channels or detunings need the full spin space".into()))
        }
        HybridSpins::Collective => Ok(SpinSector::Collective { n_spins: n, j: Half::from_twice(n as i32) }),
        HybridSpins::Auto if !needs_full => Ok(SpinSector::Collective { n_spins: n, j: Half::from_twice(n as i32) }),
        _ => {
            if n > DEFAULT_ORACLE_SPINS {
                return Err(Error::Resource(format!("full spin space for N = {n} exceeds the oracle guard")));
            }
            Ok(SpinSector::Full { n_spins: n })
        }
    }
}

/// Builds the hybrid spin–cavity Liouvillian; the spin representation is
/// collective unless local channels or detunings require the full space.
pub fn build_hybrid(p: &HybridParams, n: usize) -> Result<Liouvillian> {
    build_hybrid_with(p, n, HybridSpins::Auto)
}

pub fn build_hybrid_with(p: &HybridParams, n: usize, spins: HybridSpins) -> Result<Liouvillian> {
    build_hybrid_in(p, n, spins, cavity_frame(p.r, p.kappa_sqz, p.kappa_int))
}

/// As [`build_hybrid_with`] with an explicit cavity basis.
pub fn build_hybrid_in(p: &HybridParams, n: usize, spins: HybridSpins, frame: FockFrame) -> Result<Liouvillian> {
    p.validate(n)?;
    let ops = HybridOps::new(pick_sector(p, n, spins)?, p.n_cut, frame)?;
    let mut h = ops.coupling(p.g);
    if !p.detunings.is_empty() {
        h = h.add(&ops.detuning(&p.detunings));
    }
    Ok(hybrid_liouvillian(&ops, p, &h))
}

pub(crate) fn hybrid_liouvillian(ops: &HybridOps, p: &HybridParams, h: &CsrMatrix) -> Liouvillian {
    let mut asm = Assembler::new(ops.layout());
    asm.hamiltonian(0, h);
    let bog = ops.a.axpby(C64::new(p.r.cosh(), 0.0), &ops.a.adjoint(), C64::new(p.r.sinh(), 0.0));
    asm.dissipator(0, &bog, p.kappa_sqz);
    asm.dissipator(0, &ops.a, p.kappa_int);
    for (sz, sm) in &ops.sites {
        asm.dissipator(0, sz, 0.5 * p.gamma_phi);
        asm.dissipator(0, sm, p.gamma_rel);
    }
    asm.finish()
}

/// All spins down with the cavity in its lab vacuum, for any hybrid
/// layout. In a squeezed frame the vacuum has amplitudes
/// `ψ_{k+1} = tanh r_f √(k/(k+1)) ψ_{k−1}` on even levels; the tail beyond
/// the cutoff is dropped and the rest renormalized.
pub fn hybrid_ground_state(layout: Layout) -> Result<DensityState> {
    let Layout::Hybrid { n_fock, frame, .. } = layout else {
        return Err(Error::Layout(format!("hybrid ground state needs a hybrid layout, got {}", layout.kind())));
    };
    let mut psi = vec![C64::new(0.0, 0.0); layout.block_dims()[0]];
    let t = frame.r().tanh();
    let mut amp = vec![0.0f64; n_fock];
    amp[0] = 1.0;
    for k in (1..n_fock - 1).step_by(2) {
        amp[k + 1] = t * (k as f64 / (k + 1) as f64).sqrt() * amp[k - 1];
    }
    let norm = amp.iter().map(|x| x * x).sum::<f64>().sqrt();
    for (p, a) in psi.iter_mut().zip(&amp) {
        *p = C64::new(a / norm, 0.0);
    }
    DensityState::pure(layout, 0, &psi)
}

fn fock_parts(rho: &DensityState) -> Result<(usize, usize, FockFrame)> {
    match rho.layout() {
        Layout::Hybrid { spin, n_fock, frame } => Ok((spin.dim(), *n_fock, *frame)),
        other => Err(Error::Layout(format!("expected a hybrid state, got {}", other.kind()))),
    }
}

/// Lab-frame cavity occupation `⟨a†a⟩` of a hybrid state.
pub fn cavity_occupation(rho: &DensityState) -> Result<f64> {
    let (ds, nf, frame) = fock_parts(rho)?;
    let a = lab_mode(nf, frame).to_dense();
    let num = a.adjoint() * &a;
    let b = &rho.blocks()[0];
    let mut n = C64::new(0.0, 0.0);
    for s in 0..ds {
        for k in 0..nf {
            for l in 0..nf {
                n += b[(s * nf + k, s * nf + l)] * num[(l, k)];
            }
        }
    }
    Ok(n.re)
}

/// Mean excitation of the stored basis, `Σ_k k p_k`, which is what the
/// truncation sees.
pub fn frame_occupation(rho: &DensityState) -> Result<f64> {
    let (ds, nf, _) = fock_parts(rho)?;
    let b = &rho.blocks()[0];
    Ok((0..ds).flat_map(|s| (0..nf).map(move |k| (s, k))).map(|(s, k)| k as f64 * b[(s * nf + k, s * nf + k)].re).sum())
}

/// Errors when the stored cavity occupation comes within 3 quanta of the
/// cutoff.
pub fn check_cutoff(rho: &DensityState) -> Result<()> {
    if let Layout::Hybrid { n_fock, .. } = rho.layout() {
        let mean = frame_occupation(rho)?;
        if mean >= *n_fock as f64 - 3.0 {
            return Err(Error::Cutoff { mean, n_cut: *n_fock });
        }
    }
    Ok(())
}

/// Partial trace over the cavity.
pub fn reduce_to_spins(rho: &DensityState) -> Result<DensityState> {
    let Layout::Hybrid { spin, n_fock, .. } = rho.layout() else {
        return Err(Error::Layout("partial trace over the cavity needs a hybrid state".into()));
    };
    let b = &rho.blocks()[0];
    let ds = spin.dim();
    let red = faer::Mat::from_fn(ds, ds, |s, t| (0..*n_fock).map(|k| b[(s * n_fock + k, t * n_fock + k)]).sum());
    let layout = match spin {
        SpinSector::Full { n_spins } => Layout::Full { n_spins: *n_spins },
        SpinSector::Collective { n_spins, j } => Layout::dicke_single(*n_spins, *j),
    };
    DensityState::new(layout, vec![red])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adiabatic_rate_examples() {
        let (g, c) = adiabatic_rates(1.0, 50.0, 50.0).unwrap();
        assert!((g - 0.02).abs() < 1e-15 && (c - 0.02).abs() < 1e-15);
        let (g, c) = adiabatic_rates(1.0, 8.0, 0.0).unwrap();
        assert!((g - 0.5).abs() < 1e-15 && c == 0.0);
        let (g_big, _) = adiabatic_rates(1.0, 1e9, 1.0).unwrap();
        assert!(g_big < 1e-8);
        assert!(adiabatic_rates(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn cutoff_rule() {
        assert_eq!(fock_cutoff(0.0, 1.0, 1.0), 10);
        // 4 sinh²(1) · ½ = 2.76 → 3 + 10
        assert_eq!(fock_cutoff(1.0, 1.0, 1.0), 13);
    }

    #[test]
    fn hybrid_builder_invariants() {
        let mut p = HybridParams::new(0.3, 1.0, 0.2, 0.5);
        p.detunings = vec![0.2, -0.2];
        let l = build_hybrid(&p, 2).unwrap();
        assert!(matches!(l.layout(), Layout::Hybrid { spin: SpinSector::Full { n_spins: 2 }, .. }));
        assert!(l.trace_preservation_error() < 1e-12);
        assert!(l.hermiticity_preservation_error(3) < 1e-12);
        p.detunings.clear();
        let l = build_hybrid(&p, 3).unwrap();
        assert!(matches!(l.layout(), Layout::Hybrid { spin: SpinSector::Collective { .. }, .. }));
    }

    #[test]
    fn frame_matches_cavity_squeezing() {
        assert!((cavity_frame(0.7, 1.0, 0.0).r() - 0.7).abs() < 1e-12);
        assert_eq!(cavity_frame(0.7, 0.0, 1.0), FockFrame::LAB);
        let f = cavity_frame(1.0, 1.0, 0.25).r();
        assert!(f > 0.0 && f < 1.0);
    }

    #[test]
    fn squeezed_frame_agrees_with_a_large_lab_basis() {
        use crate::measure::wineland;
        use crate::solver::steady_state_from;
        let mut p = HybridParams::new(0.05, 1.0, 0.25, 0.5);
        let solve = |p: &HybridParams, frame| {
            let l = build_hybrid_in(p, 2, HybridSpins::Collective, frame).unwrap();
            steady_state_from(&l, &hybrid_ground_state(l.layout().clone()).unwrap()).unwrap()
        };
        let framed = solve(&p, cavity_frame(p.r, p.kappa_sqz, p.kappa_int));
        p.n_cut = 40;
        let lab = solve(&p, FockFrame::LAB);
        assert!((wineland(&framed).unwrap() - wineland(&lab).unwrap()).abs() < 1e-8);
        let occ = 0.8 * 0.5f64.sinh().powi(2);
        assert!((cavity_occupation(&framed).unwrap() - occ).abs() < 1e-3);
        assert!(frame_occupation(&framed).unwrap() < 0.05);
    }

    #[test]
    fn ground_state_is_the_lab_vacuum() {
        let mut p = HybridParams::new(0.1, 1.0, 0.0, 0.8);
        p.n_cut = 40;
        let l = build_hybrid(&p, 2).unwrap();
        let rho = hybrid_ground_state(l.layout().clone()).unwrap();
        let occ = cavity_occupation(&rho).unwrap();
        assert!(occ < 1e-6, "{occ}");
    }
}
