//! Observables of collective spin states.
//!
//! The Wineland parameter is
//!
//! ```text
//! ξ² = N ⟨ΔS⊥²⟩_min / |⟨S⟩|²
//! ```
//!
//! where the minimum runs over directions perpendicular to the mean spin.
//! In the Dicke layout every block contributes plain traces; the stored
//! blocks already carry their population weights.

use std::collections::BTreeMap;

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::liouvillian::reduce_to_spins;
use crate::sparse::CsrMatrix;
use crate::spinspace::{full_space_ops, ladder_up, CollectiveOps};
use crate::state::{DensityState, Layout};
use crate::{Error, Half, Result};

/// First and symmetrized second moments of `(S_x, S_y, S_z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinMoments {
    pub n_spins: usize,
    pub mean: [f64; 3],
    /// `⟨(S_k S_l + S_l S_k)/2⟩`
    pub second: [[f64; 3]; 3],
}

impl SpinMoments {
    pub fn covariance(&self) -> [[f64; 3]; 3] {
        let mut c = self.second;
        for (k, row) in c.iter_mut().enumerate() {
            for (l, v) in row.iter_mut().enumerate() {
                *v -= self.mean[k] * self.mean[l];
            }
        }
        c
    }

    pub fn mean_norm(&self) -> f64 {
        self.mean.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Minimum variance perpendicular to the mean spin and its direction.
    pub fn min_perpendicular_variance(&self) -> Option<(f64, [f64; 3])> {
        let norm = self.mean_norm();
        if norm == 0.0 {
            return None;
        }
        let n = self.mean.map(|x| x / norm);
        // reference axis least aligned with n (first one on ties)
        let mut a = 0;
        for k in 1..3 {
            if n[k].abs() < n[a].abs() {
                a = k;
            }
        }
        let mut e1 = [0.0; 3];
        e1[a] = 1.0;
        let proj = n[a];
        for k in 0..3 {
            e1[k] -= proj * n[k];
        }
        let l1 = e1.iter().map(|x| x * x).sum::<f64>().sqrt();
        let e1 = e1.map(|x| x / l1);
        let e2 = cross(n, e1);
        let c = self.covariance();
        let q = |u: [f64; 3], v: [f64; 3]| -> f64 {
            let mut s = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    s += u[k] * c[k][l] * v[l];
                }
            }
            s
        };
        let (p, b, r) = (q(e1, e1), q(e1, e2), q(e2, e2));
        let half = 0.5 * (p - r);
        let rad = (half * half + b * b).sqrt();
        let lam = 0.5 * (p + r) - rad;
        // eigenvector of [[p, b], [b, r]] for lam, stable branch
        let (v1, v2) = if b == 0.0 {
            if p <= r {
                (1.0, 0.0)
            } else {
                (0.0, 1.0)
            }
        } else if p > r {
            (b, lam - p)
        } else {
            (lam - r, b)
        };
        let vn = (v1 * v1 + v2 * v2).sqrt();
        let mut d = [0.0; 3];
        for k in 0..3 {
            d[k] = (v1 * e1[k] + v2 * e2[k]) / vn;
        }
        let flip = if d[1].abs() > 1e-15 { d[1] < 0.0 } else { d.iter().find(|x| x.abs() > 1e-15).is_some_and(|&x| x < 0.0) };
        if flip {
            d = d.map(|x| -x);
        }
        Some((lam, d))
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Wineland parameter with its minimizing direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wineland {
    /// `+∞` when the mean spin vanishes.
    pub xi2: f64,
    pub divergent: bool,
    pub direction: [f64; 3],
    pub min_variance: f64,
    pub mean_norm: f64,
}

pub fn wineland_from_moments(m: &SpinMoments) -> Wineland {
    let norm = m.mean_norm();
    let n = m.n_spins as f64;
    match m.min_perpendicular_variance() {
        Some((var, dir)) if norm >= 1e-12 * n => {
            Wineland { xi2: n * var / (norm * norm), divergent: false, direction: dir, min_variance: var, mean_norm: norm }
        }
        _ => Wineland { xi2: f64::INFINITY, divergent: true, direction: [0.0; 3], min_variance: f64::NAN, mean_norm: norm },
    }
}

/// `ξ²` of a state; `+∞` if the mean spin vanishes.
pub fn wineland(rho: &DensityState) -> Result<f64> {
    Ok(wineland_detail(rho)?.xi2)
}

pub fn wineland_detail(rho: &DensityState) -> Result<Wineland> {
    Ok(wineland_from_moments(&spin_moments(rho)?))
}

/// Expectation values of the ladder primitives in one multiplet.
struct LadderMoments {
    sz: f64,
    sz2: f64,
    sp: C64,
    sp2: C64,
    spsm: f64,
    smsp: f64,
    /// `⟨S₊S_z + S_zS₊⟩`
    spz: C64,
}

fn ladder_moments(j: Half, rho: &Mat<C64>) -> LadderMoments {
    let d = j.dim();
    let mut lm = LadderMoments { sz: 0.0, sz2: 0.0, sp: C64::new(0.0, 0.0), sp2: C64::new(0.0, 0.0), spsm: 0.0, smsp: 0.0, spz: C64::new(0.0, 0.0) };
    for i in 0..d {
        let m = Half::from_twice(-j.twice() + 2 * i as i32);
        let mv = m.value();
        let p = rho[(i, i)].re;
        let cu = ladder_up(j, m);
        let cd = ladder_up(j, m - Half::from_int(1));
        lm.sz += mv * p;
        lm.sz2 += mv * mv * p;
        lm.smsp += cu * cu * p;
        lm.spsm += cd * cd * p;
        if i + 1 < d {
            let x = rho[(i, i + 1)] * cu;
            lm.sp += x;
            lm.spz += x * (2.0 * mv + 1.0);
            if i + 2 < d {
                lm.sp2 += rho[(i, i + 2)] * cu * ladder_up(j, m + Half::from_int(1));
            }
        }
    }
    lm
}

fn moments_from_ladder(n: usize, lm: &LadderMoments) -> SpinMoments {
    let sx2 = 0.25 * (2.0 * lm.sp2.re + lm.spsm + lm.smsp);
    let sy2 = -0.25 * (2.0 * lm.sp2.re - lm.spsm - lm.smsp);
    let sxy = 0.5 * lm.sp2.im;
    let sxz = 0.5 * lm.spz.re;
    let syz = 0.5 * lm.spz.im;
    SpinMoments {
        n_spins: n,
        mean: [lm.sp.re, lm.sp.im, lm.sz],
        second: [[sx2, sxy, sxz], [sxy, sy2, syz], [sxz, syz, lm.sz2]],
    }
}

/// `Tr(ρ A)` for a sparse operator.
fn expect(rho: &Mat<C64>, a: &CsrMatrix) -> C64 {
    a.iter().map(|(r, c, v)| v * rho[(c, r)]).sum()
}

/// Product-space moments; operator products are cached per `N`.
fn full_moments(n: usize, rho: &Mat<C64>) -> Result<SpinMoments> {
    let ops = full_space_ops(n)?;
    let s = [&ops.sx, &ops.sy, &ops.sz];
    let mut m = SpinMoments { n_spins: n, mean: [0.0; 3], second: [[0.0; 3]; 3] };
    for k in 0..3 {
        m.mean[k] = expect(rho, s[k]).re;
        for l in k..3 {
            let v = expect(rho, &s[k].matmul(s[l])).re;
            let w = if k == l { v } else { 0.5 * (v + expect(rho, &s[l].matmul(s[k])).re) };
            m.second[k][l] = w;
            m.second[l][k] = w;
        }
    }
    Ok(m)
}

/// All first and symmetrized second moments of the collective spin.
pub fn spin_moments(rho: &DensityState) -> Result<SpinMoments> {
    match rho.layout() {
        Layout::Dicke { n_spins, js } => {
            let mut acc = LadderMoments { sz: 0.0, sz2: 0.0, sp: C64::new(0.0, 0.0), sp2: C64::new(0.0, 0.0), spsm: 0.0, smsp: 0.0, spz: C64::new(0.0, 0.0) };
            for (b, &j) in rho.blocks().iter().zip(js) {
                let lm = ladder_moments(j, b);
                acc.sz += lm.sz;
                acc.sz2 += lm.sz2;
                acc.sp += lm.sp;
                acc.sp2 += lm.sp2;
                acc.spsm += lm.spsm;
                acc.smsp += lm.smsp;
                acc.spz += lm.spz;
            }
            Ok(moments_from_ladder(*n_spins, &acc))
        }
        Layout::Full { n_spins } => full_moments(*n_spins, &rho.blocks()[0]),
        Layout::Hybrid { .. } => spin_moments(&reduce_to_spins(rho)?),
    }
}

/// Purity of the physical `N`-spin state. In the Dicke layout the full
/// operator is `⊕ ρ_j ⊗ I/d_N(j)`, so `Tr ρ² = Σ_j Tr ρ_j² / d_N(j)`. Hybrid
/// states report the purity of the reduced spin state.
pub fn purity(rho: &DensityState) -> Result<f64> {
    match rho.layout() {
        Layout::Dicke { n_spins, js } => {
            let mut p = 0.0;
            for (b, &j) in rho.blocks().iter().zip(js) {
                let d = crate::spinspace::degeneracy(*n_spins, j);
                let d = num_traits::ToPrimitive::to_f64(&d).unwrap_or(f64::INFINITY);
                let mut s = 0.0;
                for k in 0..b.ncols() {
                    for i in 0..b.nrows() {
                        s += b[(i, k)].norm_sqr();
                    }
                }
                p += s / d;
            }
            Ok(p)
        }
        Layout::Full { .. } => Ok(rho.block_purity()),
        Layout::Hybrid { .. } => Ok(reduce_to_spins(rho)?.block_purity()),
    }
}

/// Outcome probabilities of an `S_y` measurement, aggregated over blocks.
pub fn sy_distribution(rho: &DensityState) -> Result<Vec<(Half, f64)>> {
    let Layout::Dicke { js, .. } = rho.layout() else {
        return Err(Error::Layout("S_y statistics are computed in the Dicke layout".into()));
    };
    let mut dist: BTreeMap<Half, f64> = BTreeMap::new();
    for (b, &j) in rho.blocks().iter().zip(js) {
        let ops = CollectiveOps::spin(j);
        let eig = ops.sy.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numerical(format!("S_y eigenbasis: {e:?}")))?;
        let u = eig.U();
        let vals = eig.S().column_vector();
        for k in 0..j.dim() {
            let my = Half::from_f64(vals[k].re).ok_or_else(|| Error::Numerical("S_y eigenvalue is not a half-integer".into()))?;
            let mut p = C64::new(0.0, 0.0);
            for c in 0..j.dim() {
                for r in 0..j.dim() {
                    p += u[(r, k)].conj() * b[(r, c)] * u[(c, k)];
                }
            }
            *dist.entry(my).or_insert(0.0) += p.re;
        }
    }
    Ok(dist.into_iter().collect())
}

/// The per-point record used by trajectories and sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub xi2: f64,
    pub purity: f64,
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
    pub sx2: f64,
    pub sy2: f64,
    pub sz2: f64,
}

pub fn observe(rho: &DensityState) -> Result<Observables> {
    let m = spin_moments(rho)?;
    let w = wineland_from_moments(&m);
    Ok(Observables {
        xi2: w.xi2,
        purity: purity(rho)?,
        sx: m.mean[0],
        sy: m.mean[1],
        sz: m.mean[2],
        sx2: m.second[0][0],
        sy2: m.second[1][1],
        sz2: m.second[2][2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinspace::{dicke_space, DickeEmbedding};
    use proptest::prelude::*;

    fn dense_moments(j: Half, rho: &Mat<C64>) -> SpinMoments {
        let o = CollectiveOps::spin(j);
        let s = [&o.sx, &o.sy, &o.sz];
        let tr = |a: &Mat<C64>| -> f64 { (0..a.nrows()).map(|i| (rho * a)[(i, i)]).sum::<C64>().re };
        let mut m = SpinMoments { n_spins: j.twice() as usize, mean: [0.0; 3], second: [[0.0; 3]; 3] };
        for k in 0..3 {
            m.mean[k] = tr(s[k]);
            for l in 0..3 {
                let p = s[k] * s[l] + s[l] * s[k];
                m.second[k][l] = 0.5 * tr(&p);
            }
        }
        m
    }

    fn random_state(d: usize, seed: u64) -> Mat<C64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = Mat::from_fn(d, d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let mut r = &a * a.adjoint();
        let t: C64 = (0..d).map(|i| r[(i, i)]).sum();
        r = r * faer::Scale(C64::new(1.0, 0.0) / t);
        r
    }

    #[test]
    fn polarized_state_is_at_the_standard_quantum_limit() {
        for n in [1usize, 2, 7, 40] {
            let s = dicke_space(n).unwrap().ground_state();
            let m = spin_moments(&s).unwrap();
            assert!((m.mean[2] + n as f64 / 2.0).abs() < 1e-12);
            assert!((m.second[0][0] - n as f64 / 4.0).abs() < 1e-12);
            assert!((m.second[1][1] - n as f64 / 4.0).abs() < 1e-12);
            assert!((wineland(&s).unwrap() - 1.0).abs() < 1e-12);
            assert!((purity(&s).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_spin_dark_state_values() {
        let t = 1f64.tanh();
        let psi = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(t, 0.0)];
        let s = DensityState::pure(Layout::dicke_single(2, Half::from_int(1)), 0, &psi).unwrap();
        let m = spin_moments(&s).unwrap();
        assert!((m.mean[2] - (t * t - 1.0) / (1.0 + t * t)).abs() < 1e-12);
        assert!((m.mean[2] + 0.26581).abs() < 1e-5);
        let sy2 = (1.0 - 2.0 * t / (1.0 + t * t)) / 2.0;
        assert!((m.second[1][1] - sy2).abs() < 1e-12);
        assert!((sy2 - 0.01799).abs() < 1e-5);
        let xi2 = wineland(&s).unwrap();
        assert!((xi2 - 2.0 * sy2 / (m.mean[2] * m.mean[2])).abs() < 1e-12);
        assert!((xi2 - 0.5092).abs() < 1e-4);
    }

    #[test]
    fn zero_mean_spin_diverges() {
        // N = 2 singlet has no mean spin
        let s = DensityState::pure(Layout::Dicke { n_spins: 2, js: vec![Half::from_int(1), Half::ZERO] }, 1, &[C64::new(1.0, 0.0)]).unwrap();
        let w = wineland_detail(&s).unwrap();
        assert!(w.divergent && w.xi2.is_infinite());
    }

    #[test]
    fn dicke_purity_matches_full_space() {
        let n = 4;
        let emb = DickeEmbedding::new(n).unwrap();
        let layout = emb.space().layout();
        let blocks = layout.block_dims().into_iter().enumerate().map(|(b, d)| random_state(d, 3 + b as u64) * faer::Scale(C64::new(1.0 / 3.0, 0.0))).collect();
        let rho = DensityState::new(layout, blocks).unwrap();
        let full = emb.embed(&rho).unwrap();
        assert!((purity(&rho).unwrap() - purity(&full).unwrap()).abs() < 1e-12);
        let (a, b) = (spin_moments(&rho).unwrap(), spin_moments(&full).unwrap());
        for k in 0..3 {
            assert!((a.mean[k] - b.mean[k]).abs() < 1e-10);
            for l in 0..3 {
                assert!((a.second[k][l] - b.second[k][l]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sy_distribution_of_polarized_state() {
        let j = Half::from_int(5);
        let s = DensityState::pure(Layout::dicke_single(10, j), 0, &{
            let mut v = vec![C64::new(0.0, 0.0); 11];
            v[0] = C64::new(1.0, 0.0);
            v
        })
        .unwrap();
        let d = sy_distribution(&s).unwrap();
        let mean: f64 = d.iter().map(|(m, p)| m.value() * p).sum();
        let var: f64 = d.iter().map(|(m, p)| m.value() * m.value() * p).sum::<f64>() - mean * mean;
        assert!(mean.abs() < 1e-10);
        assert!((var - 2.5).abs() < 1e-10);
        for k in 0..d.len() {
            assert!((d[k].1 - d[d.len() - 1 - k].1).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn ladder_moments_match_dense_traces(twice in 1i32..14, seed in 0u64..500) {
            let j = Half::from_twice(twice);
            let rho = random_state(j.dim(), seed);
            let fast = moments_from_ladder(twice as usize, &ladder_moments(j, &rho));
            let slow = dense_moments(j, &rho);
            for k in 0..3 {
                prop_assert!((fast.mean[k] - slow.mean[k]).abs() < 1e-10);
                for l in 0..3 {
                    prop_assert!((fast.second[k][l] - slow.second[k][l]).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn sy_distribution_reproduces_moments(twice in 1i32..12, seed in 0u64..500) {
            let j = Half::from_twice(twice);
            let rho = DensityState::new(Layout::dicke_single(twice as usize, j), vec![random_state(j.dim(), seed)]).unwrap();
            let d = sy_distribution(&rho).unwrap();
            let m = spin_moments(&rho).unwrap();
            let total: f64 = d.iter().map(|x| x.1).sum();
            let mean: f64 = d.iter().map(|(my, p)| my.value() * p).sum();
            let sq: f64 = d.iter().map(|(my, p)| my.value() * my.value() * p).sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            prop_assert!((mean - m.mean[1]).abs() < 1e-9);
            prop_assert!((sq - m.second[1][1]).abs() < 1e-9);
        }

        #[test]
        fn wineland_invariant_under_rotation_about_mean(twice in 2i32..12, seed in 0u64..200, angle in 0.0f64..6.28) {
            let j = Half::from_twice(twice);
            let rho = random_state(j.dim(), seed);
            let m = moments_from_ladder(twice as usize, &ladder_moments(j, &rho));
            // rotate the moment tensors about the mean direction
            let n0 = m.mean_norm();
            prop_assume!(n0 > 1e-3);
            let u = m.mean.map(|x| x / n0);
            let (c, s) = (angle.cos(), angle.sin());
            let mut rot = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    let k = [[0.0, -u[2], u[1]], [u[2], 0.0, -u[0]], [-u[1], u[0], 0.0]][a][b];
                    rot[a][b] = if a == b { c } else { 0.0 } + s * k + (1.0 - c) * u[a] * u[b];
                }
            }
            let mut r = m;
            for a in 0..3 {
                r.mean[a] = (0..3).map(|b| rot[a][b] * m.mean[b]).sum();
                for b in 0..3 {
                    let mut v = 0.0;
                    for p in 0..3 {
                        for q in 0..3 {
                            v += rot[a][p] * m.second[p][q] * rot[b][q];
                        }
                    }
                    r.second[a][b] = v;
                }
            }
            let (x0, x1) = (wineland_from_moments(&m).xi2, wineland_from_moments(&r).xi2);
            prop_assert!((x0 - x1).abs() <= 1e-9 * x0.abs().max(1.0));
        }
    }
}
