//! Sparse Lindblad superoperators.
//!
//! `D[A]ρ = AρA† − ½{A†A, ρ}`. With column stacking,
//! `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`, so
//!
//! ```text
//! D[A]  →  conj(A) ⊗ A − ½ I ⊗ A†A − ½ (A†A)ᵀ ⊗ I
//! −i[H, ·]  →  −i I ⊗ H + i Hᵀ ⊗ I
//! ```
//!
//! Each block of a [`Layout`] is vectorized separately and the blocks are
//! concatenated; local single-spin channels in the Dicke layout are the only
//! terms that couple different blocks.

mod hybrid;
mod local;
mod reservoir;

pub use hybrid::{
    adiabatic_rates, build_hybrid, build_hybrid_in, build_hybrid_with, cavity_frame, cavity_occupation, check_cutoff, fock_cutoff, frame_occupation, hybrid_ground_state,
    reduce_to_spins, HybridParams, HybridSpins,
};
pub(crate) use hybrid::{hybrid_liouvillian, HybridOps};
pub use local::{local_transfer_weight, LocalChannel};
pub use reservoir::{heating_reservoir, map_to_effective_reservoir, EffectiveReservoir};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::sparse::CsrMatrix;
use crate::spinspace::{full_space_ops, CollectiveOps, DickeSpace, FullOps, Pauli, SpinFrame};
use crate::state::{DensityState, Layout};
use crate::{Error, Half, Result};

pub const DEFAULT_ORACLE_GUARD: usize = 6;

/// Rates and squeezing for the spin-only models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Engineered-reservoir coupling Γ.
    pub gamma: f64,
    /// Squeezing parameter (natural-log convention).
    pub r: f64,
    /// Effective thermal occupation of the reservoir.
    #[serde(default)]
    pub n_th: f64,
    #[serde(default)]
    pub gamma_coll: f64,
    #[serde(default)]
    pub gamma_phi: f64,
    #[serde(default)]
    pub gamma_rel: f64,
    /// Collective excitation `γ′ D[S₊]`.
    #[serde(default)]
    pub gamma_up: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { gamma: 1.0, r: 0.0, n_th: 0.0, gamma_coll: 0.0, gamma_phi: 0.0, gamma_rel: 0.0, gamma_up: 0.0 }
    }
}

impl ModelParams {
    pub fn ideal(gamma: f64, r: f64) -> Self {
        ModelParams { gamma, r, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("gamma", self.gamma),
            ("n_th", self.n_th),
            ("gamma_coll", self.gamma_coll),
            ("gamma_phi", self.gamma_phi),
            ("gamma_rel", self.gamma_rel),
            ("gamma_up", self.gamma_up),
        ];
        for (name, v) in rates {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if !self.r.is_finite() {
            return Err(Error::Domain(format!("r must be finite, got {}", self.r)));
        }
        Ok(())
    }

    pub fn has_local(&self) -> bool {
        self.gamma_phi > 0.0 || self.gamma_rel > 0.0
    }

    pub fn max_rate(&self) -> f64 {
        let g = self.gamma * (1.0 + 2.0 * self.n_th) * (2.0 * self.r).cosh();
        [g, self.gamma_coll, self.gamma_phi, self.gamma_rel, self.gamma_up].into_iter().fold(0.0, f64::max)
    }
}

/// A vectorized Lindblad generator tagged with its layout.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    layout: Layout,
    matrix: CsrMatrix,
    max_rate: f64,
}

impl Liouvillian {
    pub fn from_parts(layout: Layout, matrix: CsrMatrix, max_rate: f64) -> Result<Self> {
        let d = layout.vec_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Layout(format!("superoperator is {}×{}, layout needs {d}", matrix.nrows(), matrix.ncols())));
        }
        Ok(Liouvillian { layout, matrix, max_rate })
    }

    pub fn zero(layout: Layout) -> Self {
        let d = layout.vec_dim();
        Liouvillian { layout, matrix: CsrMatrix::zeros(d, d), max_rate: 0.0 }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Hilbert-space dimension (sum over blocks).
    pub fn dim(&self) -> usize {
        self.layout.block_dims().iter().sum()
    }

    pub fn vec_dim(&self) -> usize {
        self.layout.vec_dim()
    }

    /// Largest rate that entered the construction.
    pub fn max_rate(&self) -> f64 {
        self.max_rate
    }

    pub fn apply(&self, rho: &DensityState) -> Result<DensityState> {
        if rho.layout() != &self.layout {
            return Err(Error::Layout(format!("state layout {} does not match {}", rho.layout().kind(), self.layout.kind())));
        }
        DensityState::from_vec(self.layout.clone(), &self.matrix.apply(&rho.to_vec()))
    }

    /// `L₁ + L₂` on the same layout.
    pub fn add(&self, other: &Liouvillian) -> Result<Liouvillian> {
        if self.layout != other.layout {
            return Err(Error::Layout("cannot add Liouvillians on different layouts".into()));
        }
        Ok(Liouvillian { layout: self.layout.clone(), matrix: self.matrix.add(&other.matrix), max_rate: self.max_rate.max(other.max_rate) })
    }

    pub fn scaled(&self, s: f64) -> Liouvillian {
        Liouvillian { layout: self.layout.clone(), matrix: self.matrix.scale(C64::new(s, 0.0)), max_rate: self.max_rate * s.abs() }
    }

    /// `‖L†(I)‖_max`: the adjoint applied to the identity.
    pub fn trace_preservation_error(&self) -> f64 {
        let mut t = vec![C64::new(0.0, 0.0); self.vec_dim()];
        for p in self.layout.trace_positions() {
            t[p] = C64::new(1.0, 0.0);
        }
        self.matrix.apply_adjoint(&t).iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `max |L(ρ†) − L(ρ)†|` over a few seeded random Hermitian states.
    pub fn hermiticity_preservation_error(&self, seed: u64) -> f64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..3 {
            let blocks = self
                .layout
                .block_dims()
                .into_iter()
                .map(|d| {
                    let a = faer::Mat::from_fn(d, d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
                    faer::Mat::from_fn(d, d, |i, k| a[(i, k)] + a[(k, i)].conj())
                })
                .collect();
            let rho = DensityState::new(self.layout.clone(), blocks).expect("shapes follow the layout");
            let out = self.apply(&rho).expect("same layout");
            worst = worst.max(out.hermiticity_error());
        }
        worst
    }

    /// Indices of the blocks whose entries couple to another block.
    pub fn is_block_diagonal(&self) -> bool {
        let offsets = self.layout.offsets();
        let block_of = |p: usize| offsets.partition_point(|&o| o <= p) - 1;
        self.matrix.iter().all(|(r, c, _)| block_of(r) == block_of(c))
    }

    /// Restriction to one layout block (meaningful when block diagonal).
    pub fn block(&self, b: usize) -> Result<Liouvillian> {
        let Layout::Dicke { n_spins, js } = &self.layout else {
            if b == 0 {
                return Ok(self.clone());
            }
            return Err(Error::Layout("only Dicke layouts have several blocks".into()));
        };
        let j = *js.get(b).ok_or_else(|| Error::Layout(format!("no block {b}")))?;
        let off = self.layout.offsets()[b];
        let n = j.dim() * j.dim();
        let t = self
            .matrix
            .iter()
            .filter(|&(r, c, _)| r >= off && r < off + n && c >= off && c < off + n)
            .map(|(r, c, v)| (r - off, c - off, v))
            .collect();
        Ok(Liouvillian { layout: Layout::dicke_single(*n_spins, j), matrix: CsrMatrix::from_triplets(n, n, t), max_rate: self.max_rate })
    }
}

/// Accumulates superoperator triplets block by block.
pub(crate) struct Assembler {
    layout: Layout,
    dims: Vec<usize>,
    offsets: Vec<usize>,
    t: Vec<(usize, usize, C64)>,
    max_rate: f64,
}

impl Assembler {
    pub(crate) fn new(layout: Layout) -> Self {
        let dims = layout.block_dims();
        let offsets = layout.offsets();
        Assembler { layout, dims, offsets, t: Vec::new(), max_rate: 0.0 }
    }

    /// Adds `s · (X ⊗ Y)` on block `b`; `X` acts on the column index of ρ.
    fn kron(&mut self, b: usize, x: &CsrMatrix, y: &CsrMatrix, s: C64) {
        let (d, off) = (self.dims[b], self.offsets[b]);
        for (px, qx, vx) in x.iter() {
            for (iy, ky, vy) in y.iter() {
                self.t.push((off + px * d + iy, off + qx * d + ky, s * vx * vy));
            }
        }
    }

    pub(crate) fn dissipator(&mut self, b: usize, a: &CsrMatrix, rate: f64) {
        if rate == 0.0 {
            return;
        }
        self.max_rate = self.max_rate.max(rate);
        let id = CsrMatrix::identity(self.dims[b]);
        let k = a.adjoint().matmul(a);
        self.kron(b, &a.conj(), a, C64::new(rate, 0.0));
        self.kron(b, &id, &k, C64::new(-0.5 * rate, 0.0));
        self.kron(b, &k.transpose(), &id, C64::new(-0.5 * rate, 0.0));
    }

    pub(crate) fn hamiltonian(&mut self, b: usize, h: &CsrMatrix) {
        if h.nnz() == 0 {
            return;
        }
        self.max_rate = self.max_rate.max(h.max_abs());
        let id = CsrMatrix::identity(self.dims[b]);
        self.kron(b, &id, h, C64::new(0.0, -1.0));
        self.kron(b, &h.transpose(), &id, C64::new(0.0, 1.0));
    }

    pub(crate) fn push(&mut self, row: usize, col: usize, v: C64) {
        self.t.push((row, col, v));
    }

    pub(crate) fn note_rate(&mut self, rate: f64) {
        self.max_rate = self.max_rate.max(rate);
    }

    pub(crate) fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub(crate) fn finish(self) -> Liouvillian {
        let d = self.layout.vec_dim();
        Liouvillian { matrix: CsrMatrix::from_triplets(d, d, self.t), layout: self.layout, max_rate: self.max_rate }
    }
}

fn sparse(m: &faer::Mat<C64>) -> CsrMatrix {
    CsrMatrix::from_dense(m)
}

/// Adds the collective part of a model to block `b` (spin `j`).
fn collective_terms(asm: &mut Assembler, b: usize, ops: &CollectiveOps, rates: [f64; 4], r: f64) {
    let sigma = sparse(&ops.sigma(r));
    asm.dissipator(b, &sigma, rates[0]);
    asm.dissipator(b, &sigma.adjoint(), rates[1]);
    asm.dissipator(b, &sparse(&ops.sm), rates[2]);
    asm.dissipator(b, &sparse(&ops.sp), rates[3]);
}

fn check_rates(rates: &[(&str, f64)], r: f64) -> Result<()> {
    for &(name, v) in rates {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be finite and non-negative, got {v}")));
        }
    }
    if !r.is_finite() {
        return Err(Error::Domain(format!("r must be finite, got {r}")));
    }
    Ok(())
}

/// `Γ D[Σ[r]]` on block `j`.
pub fn build_ideal(space: &DickeSpace, j: Half, gamma: f64, r: f64) -> Result<Liouvillian> {
    build_general_collective(space, j, gamma, 0.0, 0.0, 0.0, r)
}

/// `Γ(n_th+1) D[Σ] + Γ n_th D[Σ†]` on block `j`.
pub fn build_thermal(space: &DickeSpace, j: Half, gamma: f64, r: f64, n_th: f64) -> Result<Liouvillian> {
    check_rates(&[("n_th", n_th)], r)?;
    build_general_collective(space, j, gamma * (n_th + 1.0), gamma * n_th, 0.0, 0.0, r)
}

/// `Γ D[Σ] + Γ′ D[Σ†] + γ D[S₋] + γ′ D[S₊]` on block `j`.
pub fn build_general_collective(
    space: &DickeSpace,
    j: Half,
    gamma: f64,
    gamma_p: f64,
    gamma_down: f64,
    gamma_up: f64,
    r: f64,
) -> Result<Liouvillian> {
    build_collective(space, j, &CollectiveRates { gamma, gamma_p, gamma_down, gamma_up }, r, SpinFrame::Lab)
}

/// Rates of the single-block collective model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CollectiveRates {
    /// on `D[Σ]`
    pub gamma: f64,
    /// on `D[Σ†]`
    pub gamma_p: f64,
    /// on `D[S₋]`
    pub gamma_down: f64,
    /// on `D[S₊]`
    pub gamma_up: f64,
}

impl CollectiveRates {
    pub fn thermal(gamma: f64, n_th: f64) -> Self {
        CollectiveRates { gamma: gamma * (n_th + 1.0), gamma_p: gamma * n_th, ..Default::default() }
    }
}

/// The collective model on block `j`, written in `frame`.
///
/// At large `r` the lab-basis generator stores the slow `e^{−2r}` dynamics
/// only through near-cancelling entries, and rounding swamps it; steady
/// states there should be solved in [`SpinFrame::YDiagonal`] and mapped
/// back with [`crate::spinspace::from_y_frame`].
pub fn build_collective(space: &DickeSpace, j: Half, rates: &CollectiveRates, r: f64, frame: SpinFrame) -> Result<Liouvillian> {
    space.require(j)?;
    let CollectiveRates { gamma, gamma_p, gamma_down, gamma_up } = *rates;
    check_rates(&[("gamma", gamma), ("gamma'", gamma_p), ("gamma_down", gamma_down), ("gamma_up", gamma_up)], r)?;
    let ops = match frame {
        SpinFrame::Lab => CollectiveOps::spin(j),
        SpinFrame::YDiagonal => CollectiveOps::spin_y_frame(j),
    };
    let mut asm = Assembler::new(Layout::dicke_single(space.n_spins(), j));
    collective_terms(&mut asm, 0, &ops, [gamma, gamma_p, gamma_down, gamma_up], r);
    Ok(asm.finish())
}

/// The full spin model over all Dicke blocks:
/// `Γ(n+1)D[Σ] + Γn D[Σ†] + γ_coll D[S₋] + γ_up D[S₊]
///  + (γ_φ/2) Σ_k D[σ_z^k] + γ_rel Σ_k D[σ₋^k]`.
pub fn build_spin_model(space: &DickeSpace, p: &ModelParams) -> Result<Liouvillian> {
    p.validate()?;
    let layout = space.layout();
    let mut asm = Assembler::new(layout);
    let rates = [p.gamma * (p.n_th + 1.0), p.gamma * p.n_th, p.gamma_coll, p.gamma_up];
    for (b, blk) in space.blocks().iter().enumerate() {
        collective_terms(&mut asm, b, &CollectiveOps::spin(blk.j), rates, p.r);
    }
    local::add_local(&mut asm, space, LocalChannel::Dephasing, 0.5 * p.gamma_phi);
    local::add_local(&mut asm, space, LocalChannel::Relaxation, p.gamma_rel);
    Ok(asm.finish())
}

/// `rate · Σ_k D[O^{(k)}]` for one single-spin channel over every block.
pub fn build_local_channel(space: &DickeSpace, channel: LocalChannel, rate: f64) -> Result<Liouvillian> {
    check_rates(&[("rate", rate)], 0.0)?;
    let mut asm = Assembler::new(space.layout());
    local::add_local(&mut asm, space, channel, rate);
    Ok(asm.finish())
}

/// `rate · Σ_k D[σ_z^k]` over every block.
pub fn build_local_dephasing(space: &DickeSpace, rate: f64) -> Result<Liouvillian> {
    build_local_channel(space, LocalChannel::Dephasing, rate)
}

/// Same model as [`build_spin_model`] written directly in the `2^N` product
/// space, for brute-force validation.
pub fn build_full_oracle(n: usize, p: &ModelParams) -> Result<Liouvillian> {
    build_full_oracle_with_limit(n, p, DEFAULT_ORACLE_GUARD)
}

pub fn build_full_oracle_with_limit(n: usize, p: &ModelParams, guard: usize) -> Result<Liouvillian> {
    p.validate()?;
    if n > guard {
        return Err(Error::Resource(format!("oracle Liouvillian for N = {n} exceeds the guard {guard}")));
    }
    let ops = full_space_ops(n)?;
    let mut asm = Assembler::new(Layout::Full { n_spins: n });
    full_collective_terms(&mut asm, &ops, p);
    for k in 0..n {
        asm.dissipator(0, &ops.site(k, Pauli::Z), 0.5 * p.gamma_phi);
        asm.dissipator(0, &ops.site(k, Pauli::Minus), p.gamma_rel);
    }
    Ok(asm.finish())
}

fn full_collective_terms(asm: &mut Assembler, ops: &FullOps, p: &ModelParams) {
    let sigma = ops.sigma(p.r);
    asm.dissipator(0, &sigma, p.gamma * (p.n_th + 1.0));
    asm.dissipator(0, &sigma.adjoint(), p.gamma * p.n_th);
    asm.dissipator(0, &ops.sm, p.gamma_coll);
    asm.dissipator(0, &ops.sp, p.gamma_up);
}

/// Collective-only dynamics (`γ_φ = γ_rel = 0` parts of `p`) on every block.
pub fn build_collective_all_blocks(space: &DickeSpace, p: &ModelParams) -> Result<Liouvillian> {
    let q = ModelParams { gamma_phi: 0.0, gamma_rel: 0.0, ..*p };
    build_spin_model(space, &q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinspace::dicke_space;

    fn check_invariants(l: &Liouvillian) {
        let scale = l.max_rate().max(1.0);
        assert!(l.trace_preservation_error() <= 1e-12 * scale * 10.0, "trace {}", l.trace_preservation_error());
        assert!(l.hermiticity_preservation_error(7) <= 1e-12 * scale * 10.0);
    }

    #[test]
    fn builders_preserve_trace_and_hermiticity() {
        let space = dicke_space(5).unwrap();
        let j = space.j_max();
        check_invariants(&build_ideal(&space, j, 1.0, 0.7).unwrap());
        check_invariants(&build_thermal(&space, j, 1.0, 0.7, 0.3).unwrap());
        check_invariants(&build_general_collective(&space, j, 1.0, 0.2, 0.3, 0.4, 0.7).unwrap());
        let p = ModelParams { gamma: 1.0, r: 0.5, n_th: 0.1, gamma_coll: 0.2, gamma_phi: 0.3, gamma_rel: 0.4, gamma_up: 0.05 };
        check_invariants(&build_spin_model(&space, &p).unwrap());
        check_invariants(&build_full_oracle(4, &p).unwrap());
    }

    #[test]
    fn collective_only_is_block_diagonal() {
        let space = dicke_space(6).unwrap();
        let p = ModelParams { gamma: 1.0, r: 0.5, gamma_coll: 0.2, ..Default::default() };
        assert!(build_spin_model(&space, &p).unwrap().is_block_diagonal());
        let p = ModelParams { gamma_phi: 0.1, ..p };
        assert!(!build_spin_model(&space, &p).unwrap().is_block_diagonal());
    }

    #[test]
    fn spin_model_without_local_terms_matches_ideal_blocks() {
        let space = dicke_space(4).unwrap();
        let l = build_spin_model(&space, &ModelParams::ideal(1.3, 0.8)).unwrap();
        for (b, blk) in space.blocks().iter().enumerate() {
            let ideal = build_ideal(&space, blk.j, 1.3, 0.8).unwrap();
            let diff = l.block(b).unwrap().matrix().sub(ideal.matrix()).max_abs();
            assert!(diff < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_rates() {
        let space = dicke_space(2).unwrap();
        assert!(build_thermal(&space, space.j_max(), 1.0, 0.5, -0.1).is_err());
        assert!(build_ideal(&space, space.j_max(), 1.0, f64::NAN).is_err());
        assert!(matches!(build_full_oracle(7, &ModelParams::default()), Err(Error::Resource(_))));
    }
}
