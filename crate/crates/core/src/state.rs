//! State-space layouts and density operators.
//!
//! A [`Layout`] fixes how a density operator is split into blocks and how
//! each block is vectorized. Every block is column-stacked
//! (`vec(ρ)[i + d·k] = ρ[i, k]`) and the blocks are concatenated in layout
//! order.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::{Error, Half, Result};

/// Spin part of a hybrid spin ⊗ Fock layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinSector {
    /// All `2^N` product states.
    Full { n_spins: usize },
    /// A single collective multiplet `j` of `N` spins.
    Collective { n_spins: usize, j: Half },
}

impl SpinSector {
    pub fn dim(&self) -> usize {
        match self {
            SpinSector::Full { n_spins } => 1 << n_spins,
            SpinSector::Collective { j, .. } => j.dim(),
        }
    }

    pub fn n_spins(&self) -> usize {
        match self {
            SpinSector::Full { n_spins } | SpinSector::Collective { n_spins, .. } => *n_spins,
        }
    }
}

/// Squeezing `r_f` of the cavity basis in a hybrid layout. Basis state `k`
/// is `S(r_f)|k⟩`, so the lab mode reads `a = cosh r_f b − sinh r_f b†`.
/// Zero is the plain Fock basis.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct FockFrame(pub f64);

impl FockFrame {
    pub const LAB: FockFrame = FockFrame(0.0);

    pub fn r(self) -> f64 {
        self.0
    }
}

impl PartialEq for FockFrame {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for FockFrame {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    /// Block-diagonal permutation-symmetric representation; `js` lists the
    /// blocks present, in descending order.
    Dicke { n_spins: usize, js: Vec<Half> },
    /// Full `2^N` product space (spin `k` up ⇔ bit `N−1−k` set).
    Full { n_spins: usize },
    /// Spin sector ⊗ truncated Fock space; the spin index is the slow one.
    Hybrid { spin: SpinSector, n_fock: usize, frame: FockFrame },
}

impl Layout {
    pub fn dicke_single(n_spins: usize, j: Half) -> Self {
        Layout::Dicke { n_spins, js: vec![j] }
    }

    pub fn n_spins(&self) -> usize {
        match self {
            Layout::Dicke { n_spins, .. } | Layout::Full { n_spins } => *n_spins,
            Layout::Hybrid { spin, .. } => spin.n_spins(),
        }
    }

    /// Hilbert-space dimension of each block.
    pub fn block_dims(&self) -> Vec<usize> {
        match self {
            Layout::Dicke { js, .. } => js.iter().map(|j| j.dim()).collect(),
            Layout::Full { n_spins } => vec![1 << n_spins],
            Layout::Hybrid { spin, n_fock, .. } => vec![spin.dim() * n_fock],
        }
    }

    /// Offsets of each block inside the concatenated vectorization.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::new();
        let mut acc = 0;
        for d in self.block_dims() {
            off.push(acc);
            acc += d * d;
        }
        off
    }

    /// Length of the vectorized state.
    pub fn vec_dim(&self) -> usize {
        self.block_dims().iter().map(|d| d * d).sum()
    }

    pub fn n_blocks(&self) -> usize {
        self.block_dims().len()
    }

    pub fn block_index(&self, j: Half) -> Option<usize> {
        match self {
            Layout::Dicke { js, .. } => js.iter().position(|&x| x == j),
            _ => None,
        }
    }

    /// Vector positions of the diagonal entries (the trace functional).
    pub fn trace_positions(&self) -> Vec<usize> {
        let mut pos = Vec::new();
        for (d, off) in self.block_dims().into_iter().zip(self.offsets()) {
            pos.extend((0..d).map(|i| off + i + d * i));
        }
        pos
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layout::Dicke { .. } => "dicke-blocked",
            Layout::Full { .. } => "full-product",
            Layout::Hybrid { .. } => "hybrid-tensor",
        }
    }
}

/// A density operator, stored block by block.
#[derive(Debug, Clone)]
pub struct DensityState {
    layout: Layout,
    blocks: Vec<Mat<C64>>,
}

impl DensityState {
    pub fn new(layout: Layout, blocks: Vec<Mat<C64>>) -> Result<Self> {
        let dims = layout.block_dims();
        if dims.len() != blocks.len() || dims.iter().zip(&blocks).any(|(&d, b)| b.nrows() != d || b.ncols() != d) {
            return Err(Error::Layout(format!("block shapes do not match the {} layout", layout.kind())));
        }
        Ok(DensityState { layout, blocks })
    }

    pub fn zeros(layout: Layout) -> Self {
        let blocks = layout.block_dims().into_iter().map(|d| Mat::zeros(d, d)).collect();
        DensityState { layout, blocks }
    }

    pub fn from_vec(layout: Layout, v: &[C64]) -> Result<Self> {
        if v.len() != layout.vec_dim() {
            return Err(Error::Layout(format!("vector length {} != {}", v.len(), layout.vec_dim())));
        }
        let blocks = layout
            .block_dims()
            .into_iter()
            .zip(layout.offsets())
            .map(|(d, off)| Mat::from_fn(d, d, |i, k| v[off + i + d * k]))
            .collect();
        Ok(DensityState { layout, blocks })
    }

    pub fn to_vec(&self) -> Vec<C64> {
        let mut v = Vec::with_capacity(self.layout.vec_dim());
        for b in &self.blocks {
            for k in 0..b.ncols() {
                for i in 0..b.nrows() {
                    v.push(b[(i, k)]);
                }
            }
        }
        v
    }

    /// Pure state `|ψ⟩⟨ψ|` placed in one block; `psi` is normalized here.
    pub fn pure(layout: Layout, block: usize, psi: &[C64]) -> Result<Self> {
        let mut s = Self::zeros(layout);
        let d = s.blocks.get(block).map(|b| b.nrows()).ok_or_else(|| Error::Layout(format!("no block {block}")))?;
        if psi.len() != d {
            return Err(Error::Layout(format!("state vector length {} != block dim {d}", psi.len())));
        }
        let n2: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        if n2 == 0.0 {
            return Err(Error::Domain("zero state vector".into()));
        }
        s.blocks[block] = Mat::from_fn(d, d, |i, k| psi[i] * psi[k].conj() / n2);
        Ok(s)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn blocks(&self) -> &[Mat<C64>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Mat<C64>] {
        &mut self.blocks
    }

    pub fn into_blocks(self) -> Vec<Mat<C64>> {
        self.blocks
    }

    pub fn trace(&self) -> C64 {
        self.block_traces().into_iter().sum()
    }

    pub fn block_traces(&self) -> Vec<C64> {
        self.blocks.iter().map(|b| (0..b.nrows()).map(|i| b[(i, i)]).sum()).collect()
    }

    /// Replaces every block by `(ρ + ρ†)/2`.
    pub fn hermitize(&mut self) {
        for b in &mut self.blocks {
            let h = Mat::from_fn(b.nrows(), b.ncols(), |i, k| (b[(i, k)] + b[(k, i)].conj()) * 0.5);
            *b = h;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for b in &mut self.blocks {
            for k in 0..b.ncols() {
                for i in 0..b.nrows() {
                    b[(i, k)] *= s;
                }
            }
        }
    }

    /// Divides by the real part of the trace.
    pub fn normalize(&mut self) -> Result<()> {
        let t = self.trace().re;
        if !(t.abs() > 1e-300) {
            return Err(Error::Numerical("cannot normalize a traceless state".into()));
        }
        self.scale(1.0 / t);
        Ok(())
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut e = 0.0f64;
        for b in &self.blocks {
            for k in 0..b.ncols() {
                for i in 0..b.nrows() {
                    e = e.max((b[(i, k)] - b[(k, i)].conj()).norm());
                }
            }
        }
        e
    }

    /// Eigenvalues of every (Hermitized) block, concatenated.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            if b.nrows() == 0 {
                continue;
            }
            let h = Mat::from_fn(b.nrows(), b.ncols(), |i, k| (b[(i, k)] + b[(k, i)].conj()) * 0.5);
            let e = h
                .self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| Error::Numerical(format!("eigenvalues of a state block: {e:?}")))?;
            out.extend(e);
        }
        Ok(out)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Checks the density-operator invariants: Hermitian to 1e−10, unit
    /// trace to 1e−10, minimum eigenvalue ≥ −1e−8.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::Consistency { what: "density operator not Hermitian".into(), residual: herm });
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::Consistency { what: "trace differs from one".into(), residual: (tr - 1.0).norm() });
        }
        let min = self.min_eigenvalue()?;
        if min < -1e-8 {
            return Err(Error::Positivity { min_eig: min });
        }
        Ok(())
    }

    fn check_same_layout(&self, other: &DensityState) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::Layout(format!("{} vs {}", self.layout.kind(), other.layout.kind())));
        }
        Ok(())
    }

    /// Trace distance `½‖ρ − σ‖₁`, block by block.
    pub fn trace_distance(&self, other: &DensityState) -> Result<f64> {
        self.check_same_layout(other)?;
        let mut diff = self.clone();
        for (a, b) in diff.blocks.iter_mut().zip(&other.blocks) {
            *a = &*a - b;
        }
        Ok(0.5 * diff.eigenvalues()?.iter().map(|e| e.abs()).sum::<f64>())
    }

    /// Random full-rank state `AA†/Tr(AA†)` with entries uniform in
    /// the unit square around zero, reproducible from `seed`.
    pub fn random(layout: Layout, seed: u64) -> Result<Self> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let blocks = layout
            .block_dims()
            .into_iter()
            .map(|d| {
                let a = Mat::from_fn(d, d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
                &a * a.adjoint()
            })
            .collect();
        let mut s = DensityState::new(layout, blocks)?;
        s.normalize()?;
        Ok(s)
    }

    /// `⟨ψ|ρ|ψ⟩` for a pure state living in one block.
    pub fn overlap_pure(&self, block: usize, psi: &[C64]) -> f64 {
        let b = &self.blocks[block];
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..b.ncols() {
            for i in 0..b.nrows() {
                acc += psi[i].conj() * b[(i, k)] * psi[k];
            }
        }
        acc.re
    }

    /// `Tr ρ²` of the stored blocks, without degeneracy weights.
    pub fn block_purity(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let mut s = 0.0;
                for k in 0..b.ncols() {
                    for i in 0..b.nrows() {
                        s += b[(i, k)].norm_sqr();
                    }
                }
                s
            })
            .sum()
    }

    /// Maximum absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &DensityState) -> Result<f64> {
        self.check_same_layout(other)?;
        let mut e = 0.0f64;
        for (a, b) in self.blocks.iter().zip(&other.blocks) {
            for k in 0..a.ncols() {
                for i in 0..a.nrows() {
                    e = e.max((a[(i, k)] - b[(i, k)]).norm());
                }
            }
        }
        Ok(e)
    }
}
