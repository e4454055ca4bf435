//! Angular-momentum bases and spin operators.
//!
//! `N` spin-½ systems decompose into total-angular-momentum blocks
//! `j = N/2, N/2 − 1, …` with multiplicities
//!
//! ```text
//! d_N(j) = (2j+1) N! / ((N/2 + j + 1)! (N/2 − j)!)
//! ```
//!
//! Permutation-symmetric states are `⊕_j ρ_j ⊗ I_{d_N(j)} / d_N(j)`, so only
//! one `(2j+1)`-dimensional matrix per block is stored, with
//! `Σ_j Tr ρ_j = 1`. Within a block `m` runs from `−j` upwards.

use faer::{Mat, Side};
use num_bigint::BigUint;
use num_complex::Complex64 as C64;
use num_traits::{ToPrimitive, Zero};

use crate::sparse::CsrMatrix;
use crate::state::{DensityState, Layout};
use crate::{Error, Half, Result};

pub const DEFAULT_MAX_SPINS: usize = 512;
pub const DEFAULT_ORACLE_SPINS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct DickeBlock {
    pub j: Half,
    pub dim: usize,
    pub degeneracy: BigUint,
}

/// The Dicke blocks of `N` spins, `j` descending.
#[derive(Debug, Clone, PartialEq)]
pub struct DickeSpace {
    n_spins: usize,
    blocks: Vec<DickeBlock>,
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Exact multiplicity of total spin `j` among `n` spin-½ particles.
pub fn degeneracy(n: usize, j: Half) -> BigUint {
    let twice = j.twice();
    if twice < 0 || twice as usize > n || (n as i32 - twice) % 2 != 0 {
        return BigUint::zero();
    }
    let k = ((n as i32 - twice) / 2) as u64;
    let n = n as u64;
    let a = binomial(n, k);
    if k == 0 {
        a
    } else {
        a - binomial(n, k - 1)
    }
}

/// Dicke space with the default limit of 512 spins.
pub fn dicke_space(n: usize) -> Result<DickeSpace> {
    DickeSpace::with_limit(n, DEFAULT_MAX_SPINS)
}

impl DickeSpace {
    pub fn with_limit(n: usize, max_spins: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("number of spins must be positive".into()));
        }
        if n > max_spins {
            return Err(Error::Domain(format!("N = {n} exceeds the configured maximum {max_spins}")));
        }
        let mut blocks = Vec::new();
        let mut twice = n as i32;
        while twice >= 0 {
            let j = Half::from_twice(twice);
            blocks.push(DickeBlock { j, dim: j.dim(), degeneracy: degeneracy(n, j) });
            twice -= 2;
        }
        Ok(DickeSpace { n_spins: n, blocks })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn blocks(&self) -> &[DickeBlock] {
        &self.blocks
    }

    pub fn js(&self) -> Vec<Half> {
        self.blocks.iter().map(|b| b.j).collect()
    }

    pub fn j_max(&self) -> Half {
        self.blocks[0].j
    }

    pub fn contains(&self, j: Half) -> bool {
        self.blocks.iter().any(|b| b.j == j)
    }

    pub fn require(&self, j: Half) -> Result<()> {
        if self.contains(j) {
            Ok(())
        } else {
            Err(Error::Domain(format!("j = {j} is not a block of N = {}", self.n_spins)))
        }
    }

    pub fn degeneracy(&self, j: Half) -> BigUint {
        degeneracy(self.n_spins, j)
    }

    pub fn degeneracy_f64(&self, j: Half) -> f64 {
        self.degeneracy(j).to_f64().unwrap_or(f64::INFINITY)
    }

    /// Layout holding every block.
    pub fn layout(&self) -> Layout {
        Layout::Dicke { n_spins: self.n_spins, js: self.js() }
    }

    /// Flattened `(j, m)` basis order.
    pub fn basis(&self) -> Vec<(Half, Half)> {
        let mut out = Vec::new();
        for b in &self.blocks {
            let mut m = -b.j;
            while m <= b.j {
                out.push((b.j, m));
                m = m + Half::from_int(1);
            }
        }
        out
    }

    /// `|j, −j⟩⟨j, −j|` for the top block (all spins down).
    pub fn ground_state(&self) -> DensityState {
        let j = self.j_max();
        let mut psi = vec![C64::new(0.0, 0.0); j.dim()];
        psi[0] = C64::new(1.0, 0.0);
        DensityState::pure(self.layout(), 0, &psi).expect("top block exists")
    }
}

/// Collective operators of a single multiplet `j`, basis `m = −j, …, j`.
#[derive(Debug, Clone)]
pub struct CollectiveOps {
    pub j: Half,
    pub sx: Mat<C64>,
    pub sy: Mat<C64>,
    pub sz: Mat<C64>,
    pub sp: Mat<C64>,
    pub sm: Mat<C64>,
    /// Basis in which the matrices are written.
    pub frame: SpinFrame,
}

/// Basis of a multiplet. `YDiagonal` is the lab basis rotated by
/// `V = exp(−iπ/2 Sₓ)`, so that `V S_y V† = S_z`; there the lab `S_y` is
/// diagonal with exact entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpinFrame {
    #[default]
    Lab,
    YDiagonal,
}

/// `√(j(j+1) − m(m+1))`, the `S₊` element from `m` to `m + 1`.
pub fn ladder_up(j: Half, m: Half) -> f64 {
    let (j, m) = (j.value(), m.value());
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

impl CollectiveOps {
    /// Spin-`j` matrices without reference to a particular `N`.
    pub fn spin(j: Half) -> Self {
        let d = j.dim();
        let mut sp = Mat::<C64>::zeros(d, d);
        let mut sz = Mat::<C64>::zeros(d, d);
        for i in 0..d {
            let m = Half::from_twice(-j.twice() + 2 * i as i32);
            sz[(i, i)] = C64::new(m.value(), 0.0);
            if i + 1 < d {
                sp[(i + 1, i)] = C64::new(ladder_up(j, m), 0.0);
            }
        }
        let sm = sp.adjoint().to_owned();
        let sx = Mat::from_fn(d, d, |a, b| (sp[(a, b)] + sm[(a, b)]) * 0.5);
        let sy = Mat::from_fn(d, d, |a, b| (sp[(a, b)] - sm[(a, b)]) * C64::new(0.0, -0.5));
        CollectiveOps { j, sx, sy, sz, sp, sm, frame: SpinFrame::Lab }
    }

    /// Lab operators written in the [`SpinFrame::YDiagonal`] basis:
    /// `Sₓ → Sₓ`, `S_y → S_z`, `S_z → −S_y`.
    pub fn spin_y_frame(j: Half) -> Self {
        let lab = Self::spin(j);
        let d = j.dim();
        let sy = lab.sz.clone();
        let sz = Mat::from_fn(d, d, |a, b| -lab.sy[(a, b)]);
        let i = C64::new(0.0, 1.0);
        let sp = Mat::from_fn(d, d, |a, b| lab.sx[(a, b)] + i * sy[(a, b)]);
        let sm = Mat::from_fn(d, d, |a, b| lab.sx[(a, b)] - i * sy[(a, b)]);
        CollectiveOps { j, sx: lab.sx, sy, sz, sp, sm, frame: SpinFrame::YDiagonal }
    }

    pub fn dim(&self) -> usize {
        self.j.dim()
    }

    /// `cosh(r) S₋ − sinh(r) S₊`.
    pub fn sigma(&self, r: f64) -> Mat<C64> {
        let d = self.dim();
        match self.frame {
            SpinFrame::Lab => {
                let (c, s) = (r.cosh(), r.sinh());
                Mat::from_fn(d, d, |a, b| self.sm[(a, b)] * c - self.sp[(a, b)] * s)
            }
            // `e^{−r} Sₓ − i e^{r} S_y` keeps the small coefficient exact
            // where Sₓ and S_y do not share entries.
            SpinFrame::YDiagonal => {
                let (lo, hi) = ((-r).exp(), C64::new(0.0, r.exp()));
                Mat::from_fn(d, d, |a, b| self.sx[(a, b)] * lo - self.sy[(a, b)] * hi)
            }
        }
    }
}

/// `V = exp(−iπ/2 Sₓ)` on multiplet `j`, which takes lab states to the
/// [`SpinFrame::YDiagonal`] basis.
pub fn y_frame_rotation(j: Half) -> Result<Mat<C64>> {
    let sx = CollectiveOps::spin(j).sx;
    let eig = sx
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Sx eigenproblem: {e:?}")))?;
    let u = eig.U();
    let s = eig.S();
    let d = j.dim();
    let phase: Vec<C64> = (0..d).map(|k| C64::from_polar(1.0, -std::f64::consts::FRAC_PI_2 * s[k].re)).collect();
    Ok(Mat::from_fn(d, d, |a, b| (0..d).map(|k| u[(a, k)] * phase[k] * u[(b, k)].conj()).sum()))
}

/// Maps a Dicke-layout state from the [`SpinFrame::YDiagonal`] basis back
/// to the lab basis, `ρ = V† ρ′ V` block by block.
pub fn from_y_frame(rho: &DensityState) -> Result<DensityState> {
    let Layout::Dicke { js, .. } = rho.layout() else {
        return Err(Error::Layout(format!("y-frame rotation needs a Dicke layout, got {}", rho.layout().kind())));
    };
    let blocks = js
        .iter()
        .zip(rho.blocks())
        .map(|(&j, b)| {
            let v = y_frame_rotation(j)?;
            Ok(v.adjoint() * b * &v)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = DensityState::new(rho.layout().clone(), blocks)?;
    out.hermitize();
    Ok(out)
}

pub fn collective_ops(space: &DickeSpace, j: Half) -> Result<CollectiveOps> {
    space.require(j)?;
    Ok(CollectiveOps::spin(j))
}

/// Which single-spin operator to embed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

/// Product-space operators for `N ≤` the oracle guard.
#[derive(Debug, Clone)]
pub struct FullOps {
    n_spins: usize,
    pub sx: CsrMatrix,
    pub sy: CsrMatrix,
    pub sz: CsrMatrix,
    pub sp: CsrMatrix,
    pub sm: CsrMatrix,
}

pub fn full_space_ops(n: usize) -> Result<FullOps> {
    FullOps::with_limit(n, DEFAULT_ORACLE_SPINS)
}

#[inline]
fn is_up(idx: usize, n: usize, site: usize) -> bool {
    idx >> (n - 1 - site) & 1 == 1
}

impl FullOps {
    pub fn with_limit(n: usize, max_spins: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("number of spins must be positive".into()));
        }
        if n > max_spins {
            return Err(Error::Resource(format!("full product space for N = {n} exceeds the oracle guard {max_spins}")));
        }
        let sum = |p: Pauli| {
            let mut acc = CsrMatrix::zeros(1 << n, 1 << n);
            for k in 0..n {
                acc = acc.add(&site_op(n, k, p));
            }
            acc.scale(C64::new(0.5, 0.0))
        };
        let sp = sum(Pauli::Plus).scale(C64::new(2.0, 0.0));
        let sm = sum(Pauli::Minus).scale(C64::new(2.0, 0.0));
        Ok(FullOps { n_spins: n, sx: sum(Pauli::X), sy: sum(Pauli::Y), sz: sum(Pauli::Z), sp, sm })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        1 << self.n_spins
    }

    pub fn site(&self, k: usize, p: Pauli) -> CsrMatrix {
        site_op(self.n_spins, k, p)
    }

    /// `cosh(r) S₋ − sinh(r) S₊`.
    pub fn sigma(&self, r: f64) -> CsrMatrix {
        self.sm.axpby(C64::new(r.cosh(), 0.0), &self.sp, C64::new(-r.sinh(), 0.0))
    }
}

/// Pauli operator `σ_p` on site `k` of `n` spins (basis as in [`Layout::Full`]).
pub fn site_op(n: usize, k: usize, p: Pauli) -> CsrMatrix {
    let dim = 1usize << n;
    let bit = 1usize << (n - 1 - k);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let mut t = Vec::with_capacity(dim);
    for idx in 0..dim {
        let up = is_up(idx, n, k);
        match p {
            Pauli::Z => t.push((idx, idx, if up { one } else { -one })),
            Pauli::Plus if !up => t.push((idx | bit, idx, one)),
            Pauli::Minus if up => t.push((idx & !bit, idx, one)),
            Pauli::X => t.push((idx ^ bit, idx, one)),
            // σ_y|↓⟩ = −i|↑⟩, σ_y|↑⟩ = i|↓⟩
            Pauli::Y => t.push((idx ^ bit, idx, if up { i } else { -i })),
            _ => {}
        }
    }
    CsrMatrix::from_triplets(dim, dim, t)
}

/// Product-space index with sites `a` and `b` exchanged.
pub fn swap_sites(idx: usize, n: usize, a: usize, b: usize) -> usize {
    let (ba, bb) = (n - 1 - a, n - 1 - b);
    let (xa, xb) = (idx >> ba & 1, idx >> bb & 1);
    if xa == xb {
        idx
    } else {
        idx ^ (1 << ba) ^ (1 << bb)
    }
}

/// Largest elementwise change of `ρ` under adjacent transpositions.
pub fn symmetry_residual(rho: &Mat<C64>, n: usize) -> f64 {
    let dim = 1usize << n;
    let mut res = 0.0f64;
    for a in 0..n.saturating_sub(1) {
        for c in 0..dim {
            let pc = swap_sites(c, n, a, a + 1);
            for r in 0..dim {
                let pr = swap_sites(r, n, a, a + 1);
                res = res.max((rho[(pr, pc)] - rho[(r, c)]).norm());
            }
        }
    }
    res
}

/// Orthonormal Dicke basis of the product space: for each block `j` and
/// each `m`, a `2^N × d_N(j)` matrix whose columns are `|j, m, α⟩`.
#[derive(Debug, Clone)]
pub struct DickeEmbedding {
    n_spins: usize,
    space: DickeSpace,
    /// `basis[b][k]` holds the columns for `m = −j + k` of block `b`.
    basis: Vec<Vec<Mat<C64>>>,
}

impl DickeEmbedding {
    pub fn new(n: usize) -> Result<Self> {
        let ops = full_space_ops(n)?;
        let space = dicke_space(n)?;
        let dim = 1usize << n;
        let mut basis = Vec::new();
        let spsm = ops.sp.matmul(&ops.sm);
        let sp_dense = ops.sp.to_dense();
        for blk in space.blocks() {
            let j = blk.j;
            let ups = (n as i32 - j.twice()) / 2;
            let sector: Vec<usize> = (0..dim).filter(|i| i.count_ones() as i32 == ups).collect();
            let sd = sector.len();
            // Lowest-weight vectors span ker(S₋) within the m = −j sector.
            let h = Mat::from_fn(sd, sd, |a, b| spsm.get(sector[a], sector[b]));
            let eig = h
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Numerical(format!("lowest-weight eigenproblem: {e:?}")))?;
            let deg = blk.degeneracy.to_usize().expect("small N");
            let s = eig.S().column_vector();
            let u = eig.U();
            let kernel: Vec<usize> = (0..sd).filter(|&k| s[k].re.abs() < 0.5).collect();
            if kernel.len() != deg {
                return Err(Error::Numerical(format!("found {} lowest-weight vectors for j = {j}, expected {deg}", kernel.len())));
            }
            let mut cols = Mat::<C64>::zeros(dim, deg);
            for (a, &k) in kernel.iter().enumerate() {
                for (row, &idx) in sector.iter().enumerate() {
                    cols[(idx, a)] = u[(row, k)];
                }
            }
            let mut ladder = vec![cols];
            for k in 1..j.dim() {
                let m = Half::from_twice(-j.twice() + 2 * (k as i32 - 1));
                let c = ladder_up(j, m);
                let next = (&sp_dense * &ladder[k - 1]) * faer::Scale(C64::new(1.0 / c, 0.0));
                ladder.push(next);
            }
            basis.push(ladder);
        }
        Ok(DickeEmbedding { n_spins: n, space, basis })
    }

    pub fn space(&self) -> &DickeSpace {
        &self.space
    }

    /// `⊕_j ρ_j ⊗ I/d_j` as a full product-space state.
    pub fn embed(&self, rho: &DensityState) -> Result<DensityState> {
        let Layout::Dicke { n_spins, js } = rho.layout() else {
            return Err(Error::Layout("embed expects a Dicke-layout state".into()));
        };
        if *n_spins != self.n_spins {
            return Err(Error::Layout(format!("state has N = {n_spins}, embedding N = {}", self.n_spins)));
        }
        let dim = 1usize << self.n_spins;
        let mut full = Mat::<C64>::zeros(dim, dim);
        for (blk, &j) in rho.blocks().iter().zip(js) {
            let b = self.space.js().iter().position(|&x| x == j).expect("block of the same N");
            let d = self.space.degeneracy_f64(j);
            let basis = &self.basis[b];
            for mp in 0..j.dim() {
                // Σ_M ρ[M, M'] B_M
                let mut acc = Mat::<C64>::zeros(dim, basis[0].ncols());
                for (m, bm) in basis.iter().enumerate() {
                    let w = blk[(m, mp)];
                    if w != C64::new(0.0, 0.0) {
                        acc += bm * faer::Scale(w / d);
                    }
                }
                full += &acc * basis[mp].adjoint();
            }
        }
        DensityState::new(Layout::Full { n_spins: self.n_spins }, vec![full])
    }

    /// Inverse of [`embed`](Self::embed) on permutation-symmetric states.
    pub fn project(&self, rho_full: &DensityState) -> Result<DensityState> {
        let Layout::Full { n_spins } = rho_full.layout() else {
            return Err(Error::Layout("projection expects a full-product state".into()));
        };
        if *n_spins != self.n_spins {
            return Err(Error::Layout(format!("state has N = {n_spins}, embedding N = {}", self.n_spins)));
        }
        let rho = &rho_full.blocks()[0];
        let res = symmetry_residual(rho, self.n_spins);
        if res > 1e-8 {
            return Err(Error::Consistency { what: "state is not permutation symmetric".into(), residual: res });
        }
        let mut blocks = Vec::new();
        for basis in &self.basis {
            let d = basis.len();
            let mut out = Mat::<C64>::zeros(d, d);
            for mp in 0..d {
                let rb = rho * &basis[mp];
                for m in 0..d {
                    let prod = basis[m].adjoint() * &rb;
                    out[(m, mp)] = (0..prod.nrows()).map(|a| prod[(a, a)]).sum();
                }
            }
            blocks.push(out);
        }
        DensityState::new(self.space.layout(), blocks)
    }
}

/// Projects a permutation-symmetric product-space state onto the Dicke
/// representation.
pub fn project_to_dicke(rho_full: &DensityState, space: &DickeSpace) -> Result<DensityState> {
    DickeEmbedding::new(space.n_spins())?.project(rho_full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn commutator(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
        a * b - b * a
    }

    #[test]
    fn y_frame_rotation_maps_sy_to_sz() {
        for twice in 1..=20 {
            let j = Half::from_twice(twice);
            let lab = CollectiveOps::spin(j);
            let yf = CollectiveOps::spin_y_frame(j);
            let v = y_frame_rotation(j).unwrap();
            for (a, b) in [(&lab.sx, &yf.sx), (&lab.sy, &yf.sy), (&lab.sz, &yf.sz), (&lab.sm, &yf.sm)] {
                assert!(max_abs(&(&v * a * v.adjoint() - b)) < 1e-12 * (1.0 + j.value()), "j = {}", j.value());
            }
            let (s_lab, s_y) = (lab.sigma(0.7), yf.sigma(0.7));
            assert!(max_abs(&(&v * &s_lab * v.adjoint() - &s_y)) < 1e-11 * (1.0 + j.value()));
        }
    }

    fn max_abs(m: &Mat<C64>) -> f64 {
        let mut e = 0.0f64;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                e = e.max(m[(i, j)].norm());
            }
        }
        e
    }

    #[test]
    fn block_lists_small_n() {
        let s = dicke_space(4).unwrap();
        let got: Vec<(i32, u64)> = s.blocks().iter().map(|b| (b.j.twice(), b.degeneracy.to_u64().unwrap())).collect();
        assert_eq!(got, vec![(4, 1), (2, 3), (0, 2)]);
        let s = dicke_space(2).unwrap();
        let got: Vec<(i32, u64)> = s.blocks().iter().map(|b| (b.j.twice(), b.degeneracy.to_u64().unwrap())).collect();
        assert_eq!(got, vec![(2, 1), (0, 1)]);
        let s = dicke_space(3).unwrap();
        let got: Vec<(i32, u64)> = s.blocks().iter().map(|b| (b.j.twice(), b.degeneracy.to_u64().unwrap())).collect();
        assert_eq!(got, vec![(3, 1), (1, 2)]);
    }

    #[test]
    fn degeneracy_matches_factorial_formula() {
        // (2j+1) N! / ((N/2+j+1)! (N/2−j)!)
        let fact = |k: u64| (1..=k).fold(BigUint::from(1u32), |a, x| a * x);
        for n in 1..=30usize {
            for b in dicke_space(n).unwrap().blocks() {
                let tj = b.j.twice() as u64;
                let num = BigUint::from(tj + 1) * fact(n as u64);
                let den = fact((n as u64 + tj) / 2 + 1) * fact((n as u64 - tj) / 2);
                assert_eq!(b.degeneracy, num / den);
            }
        }
    }

    #[test]
    fn dimension_count_is_exact() {
        for n in 1..=64usize {
            let s = dicke_space(n).unwrap();
            let total: BigUint = s.blocks().iter().map(|b| &b.degeneracy * BigUint::from(b.dim)).sum();
            assert_eq!(total, BigUint::from(1u32) << n);
            assert_eq!(s.blocks()[0].degeneracy, BigUint::from(1u32));
        }
        let s = dicke_space(512).unwrap();
        assert_eq!(s.blocks().len(), 257);
        let total: BigUint = s.blocks().iter().map(|b| &b.degeneracy * BigUint::from(b.dim)).sum();
        assert_eq!(total, BigUint::from(1u32) << 512usize);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(dicke_space(0), Err(Error::Domain(_))));
        assert!(matches!(dicke_space(513), Err(Error::Domain(_))));
        assert!(matches!(collective_ops(&dicke_space(4).unwrap(), Half::from_twice(3)), Err(Error::Domain(_))));
        assert!(matches!(full_space_ops(13), Err(Error::Resource(_))));
    }

    #[test]
    fn small_spin_matrices() {
        let h = CollectiveOps::spin(Half::from_twice(1));
        assert_eq!(h.sz[(0, 0)].re, -0.5);
        assert_eq!(h.sz[(1, 1)].re, 0.5);
        let one = CollectiveOps::spin(Half::from_int(1));
        assert!((one.sp[(1, 0)].re - 2f64.sqrt()).abs() < 1e-15);
        let ev = one.sy.self_adjoint_eigenvalues(Side::Lower).unwrap();
        for (e, want) in ev.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((e - want).abs() < 1e-12);
        }
    }

    #[test]
    fn full_ops_examples() {
        let f = full_space_ops(2).unwrap();
        let d: Vec<f64> = (0..4).map(|i| f.sz.get(i, i).re).collect();
        assert_eq!(d, vec![-1.0, 0.0, 0.0, 1.0]);
        let pm = f.sp.matmul(&f.sm);
        // Tr S₊S₋ = Tr(S² − S_z² + S_z) = 6 − 2 + 0
        let tr: f64 = (0..4).map(|i| pm.get(i, i).re).sum();
        assert!((tr - 4.0).abs() < 1e-14);

        let f = full_space_ops(3).unwrap();
        let s2 = f.sx.matmul(&f.sx).add(&f.sy.matmul(&f.sy)).add(&f.sz.matmul(&f.sz)).to_dense();
        let mut ev = s2.self_adjoint_eigenvalues(Side::Lower).unwrap();
        ev.sort_by(f64::total_cmp);
        for (k, e) in ev.iter().enumerate() {
            let want = if k < 4 { 0.75 } else { 3.75 };
            assert!((e - want).abs() < 1e-12);
        }
    }

    #[test]
    fn collective_sums_are_permutation_invariant() {
        let n = 5;
        let f = full_space_ops(n).unwrap();
        let dim = 1 << n;
        for (a, b) in [(0, 3), (1, 2), (4, 0)] {
            let p = CsrMatrix::from_triplets(dim, dim, (0..dim).map(|i| (swap_sites(i, n, a, b), i, C64::new(1.0, 0.0))).collect());
            for op in [&f.sx, &f.sy, &f.sz, &f.sp, &f.sm] {
                let lhs = p.matmul(op);
                let rhs = op.matmul(&p);
                assert!(lhs.sub(&rhs).max_abs() < 1e-14);
            }
        }
    }

    #[test]
    fn project_examples() {
        let n = 2;
        let space = dicke_space(n).unwrap();
        // all down
        let mut psi = vec![C64::new(0.0, 0.0); 4];
        psi[0] = C64::new(1.0, 0.0);
        let rho = DensityState::pure(Layout::Full { n_spins: 2 }, 0, &psi).unwrap();
        let p = project_to_dicke(&rho, &space).unwrap();
        assert!((p.blocks()[0][(0, 0)].re - 1.0).abs() < 1e-12);
        // maximally mixed
        let mixed = DensityState::new(Layout::Full { n_spins: 2 }, vec![Mat::from_fn(4, 4, |i, k| if i == k { C64::new(0.25, 0.0) } else { C64::new(0.0, 0.0) })]).unwrap();
        let p = project_to_dicke(&mixed, &space).unwrap();
        let tr = p.block_traces();
        assert!((tr[0].re - 0.75).abs() < 1e-12 && (tr[1].re - 0.25).abs() < 1e-12);
        for i in 0..3 {
            assert!((p.blocks()[0][(i, i)].re - 0.25).abs() < 1e-12);
        }
        // singlet
        let s = 0.5f64.sqrt();
        let psi = [C64::new(0.0, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0), C64::new(0.0, 0.0)];
        let rho = DensityState::pure(Layout::Full { n_spins: 2 }, 0, &psi).unwrap();
        let p = project_to_dicke(&rho, &space).unwrap();
        assert!((p.block_traces()[1].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let mut psi = vec![C64::new(0.0, 0.0); 4];
        psi[1] = C64::new(1.0, 0.0);
        let rho = DensityState::pure(Layout::Full { n_spins: 2 }, 0, &psi).unwrap();
        let err = project_to_dicke(&rho, &dicke_space(2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Consistency { residual, .. } if residual > 0.5));
    }

    proptest! {
        #[test]
        fn ladder_algebra_holds(twice in 0i32..80) {
            let o = CollectiveOps::spin(Half::from_twice(twice));
            let c = commutator(&o.sp, &o.sm);
            let diff = &c - &o.sz * faer::Scale(C64::new(2.0, 0.0));
            prop_assert!(max_abs(&diff) <= 1e-12);
            let cxy = commutator(&o.sx, &o.sy);
            let diff = &cxy - &o.sz * faer::Scale(C64::new(0.0, 1.0));
            prop_assert!(max_abs(&diff) <= 1e-12 * (1.0 + twice as f64));
        }

        #[test]
        fn embed_then_project_is_identity(n in 2usize..6, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let emb = DickeEmbedding::new(n).unwrap();
            let layout = emb.space().layout();
            let blocks: Vec<Mat<C64>> = layout.block_dims().into_iter().map(|d| {
                let a = Mat::from_fn(d, d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
                &a * a.adjoint()
            }).collect();
            let mut rho = DensityState::new(layout, blocks).unwrap();
            rho.normalize().unwrap();
            let back = emb.project(&emb.embed(&rho).unwrap()).unwrap();
            prop_assert!(back.max_abs_diff(&rho).unwrap() <= 1e-10);
        }
    }
}
