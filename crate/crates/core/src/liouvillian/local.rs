//! Single-spin channels `Σ_k D[O^{(k)}]` in the Dicke representation.
//!
//! Split `N` spins into the last spin and the other `N − 1`. A copy of
//! `|j, m⟩` is `Σ_σ ⟨j′, m−σ; ½, σ | j, m⟩ |j′, m−σ⟩|σ⟩` with
//! `j′ = j ± ½`, and `O` acting on the last spin leaves the `j′` part
//! untouched. Summing the jump term over all copies of source and target
//! multiplets gives
//!
//! ```text
//! ρ′_J[M, M′] += W(j, j′) · a(J,M; j,m; j′) · a(J,M′; j,m′; j′) · ρ_j[m, m′]
//! a = Σ_σ ⟨j′, m−σ; ½, σ | j, m⟩ ⟨j′, m−σ; ½, σ+δ | J, M⟩ O_{σ+δ, σ}
//! W(j, j′) = N d_{N−1}(j′) / d_N(j)
//! ```
//!
//! with `W(j, j−½) = 2j(N/2+j+1)/(2j+1)` and `W(j, j+½) = (2j+2)(N/2−j)/(2j+1)`.
//! The anticommutator part `Σ_k O^{(k)†}O^{(k)}` is a collective operator.

use num_complex::Complex64 as C64;

use super::Assembler;
use crate::spinspace::DickeSpace;
use crate::Half;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalChannel {
    /// `D[σ_z]`
    Dephasing,
    /// `D[σ₋]`
    Relaxation,
    /// `D[σ₊]`
    Pumping,
}

impl LocalChannel {
    /// Twice the change of `m` caused by the jump.
    fn shift(self) -> i32 {
        match self {
            LocalChannel::Dephasing => 0,
            LocalChannel::Relaxation => -2,
            LocalChannel::Pumping => 2,
        }
    }

    /// Single-spin matrix element `⟨σ_out|O|σ_in⟩` (twice-σ labels).
    fn element(self, s_out: i32, s_in: i32) -> f64 {
        match self {
            LocalChannel::Dephasing if s_out == s_in => s_in as f64,
            LocalChannel::Relaxation if s_out == -1 && s_in == 1 => 1.0,
            LocalChannel::Pumping if s_out == 1 && s_in == -1 => 1.0,
            _ => 0.0,
        }
    }

    /// Diagonal of `Σ_k O^{(k)†}O^{(k)}` at `m` for `N` spins.
    fn number_term(self, n: usize, m: f64) -> f64 {
        match self {
            LocalChannel::Dephasing => n as f64,
            LocalChannel::Relaxation => n as f64 / 2.0 + m,
            LocalChannel::Pumping => n as f64 / 2.0 - m,
        }
    }
}

/// `⟨j′, m₁; ½, s/2 | J, M⟩` for `J = j′ ± ½`; all labels as twice-values.
fn cg_half(jp: i32, m1: i32, s: i32, jj: i32, mm: i32) -> f64 {
    if m1 + s != mm || m1.abs() > jp || mm.abs() > jj || jj < 0 {
        return 0.0;
    }
    let (jpv, mv) = (jp as f64 / 2.0, mm as f64 / 2.0);
    let den = 2.0 * jpv + 1.0;
    if jj == jp + 1 {
        if s == 1 {
            ((jpv + mv + 0.5) / den).sqrt()
        } else {
            ((jpv - mv + 0.5) / den).sqrt()
        }
    } else if jj == jp - 1 {
        if s == 1 {
            -((jpv - mv + 0.5) / den).sqrt()
        } else {
            ((jpv + mv + 0.5) / den).sqrt()
        }
    } else {
        0.0
    }
}

/// `N d_{N−1}(j′) / d_N(j)` in closed form (twice-value labels).
pub fn local_transfer_weight(n: usize, j: Half, jp: Half) -> f64 {
    let (jv, nh) = (j.value(), n as f64 / 2.0);
    if jp.twice() == j.twice() - 1 {
        2.0 * jv * (nh + jv + 1.0) / (2.0 * jv + 1.0)
    } else if jp.twice() == j.twice() + 1 {
        (2.0 * jv + 2.0) * (nh - jv) / (2.0 * jv + 1.0)
    } else {
        0.0
    }
}

fn amplitude(ch: LocalChannel, jj: i32, mm: i32, j: i32, m: i32, jp: i32) -> f64 {
    let mut a = 0.0;
    for s_in in [-1, 1] {
        let s_out = s_in + ch.shift();
        if s_out.abs() != 1 {
            continue;
        }
        let o = ch.element(s_out, s_in);
        if o == 0.0 {
            continue;
        }
        let m1 = m - s_in;
        a += cg_half(jp, m1, s_in, j, m) * cg_half(jp, m1, s_out, jj, mm) * o;
    }
    a
}

/// Adds `rate · Σ_k D[O^{(k)}]` over every block of `space`.
pub(super) fn add_local(asm: &mut Assembler, space: &DickeSpace, ch: LocalChannel, rate: f64) {
    if rate == 0.0 {
        return;
    }
    asm.note_rate(rate * space.n_spins() as f64);
    let n = space.n_spins();
    let js: Vec<i32> = space.js().iter().map(|j| j.twice()).collect();
    let offsets = asm.offsets().to_vec();
    let block_of = |tj: i32| js.iter().position(|&x| x == tj);
    let dlt = ch.shift();

    for (bs, &j) in js.iter().enumerate() {
        let ds = (j + 1) as usize;
        let off_s = offsets[bs];
        // anticommutator: −½ (K ρ + ρ K) with K diagonal
        for ip in 0..ds {
            for i in 0..ds {
                let m = (-j + 2 * i as i32) as f64 / 2.0;
                let mp = (-j + 2 * ip as i32) as f64 / 2.0;
                let k = -0.5 * rate * (ch.number_term(n, m) + ch.number_term(n, mp));
                let pos = off_s + i + ds * ip;
                asm.push(pos, pos, C64::new(k, 0.0));
            }
        }
        // jump term
        for jj in [j - 2, j, j + 2] {
            let Some(bt) = block_of(jj) else { continue };
            let dt = (jj + 1) as usize;
            let off_t = offsets[bt];
            for jp in [j - 1, j + 1] {
                if jp < 0 || (jj - jp).abs() != 1 || jp > n as i32 - 1 {
                    continue;
                }
                let w = local_transfer_weight(n, Half::from_twice(j), Half::from_twice(jp));
                if w == 0.0 {
                    continue;
                }
                let amps: Vec<f64> = (0..ds).map(|i| {
                    let m = -j + 2 * i as i32;
                    amplitude(ch, jj, m + dlt, j, m, jp)
                }).collect();
                for ip in 0..ds {
                    let ap = amps[ip];
                    if ap == 0.0 {
                        continue;
                    }
                    let mp_t = -j + 2 * ip as i32 + dlt;
                    for (i, &a) in amps.iter().enumerate() {
                        if a == 0.0 {
                            continue;
                        }
                        let m_t = -j + 2 * i as i32 + dlt;
                        let ti = ((m_t + jj) / 2) as usize;
                        let tip = ((mp_t + jj) / 2) as usize;
                        let row = off_t + ti + dt * tip;
                        let col = off_s + i + ds * ip;
                        asm.push(row, col, C64::new(rate * w * a * ap, 0.0));
                    }
                }
            }
        }
    }
}
