use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lu::{init_parallelism, SparseLu};
use crate::liouvillian::Liouvillian;
use crate::state::Layout;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Dense diagonalization up to this superoperator dimension.
    pub dense_limit: usize,
    /// `|λ| ≤ zero_tol · max(1, ‖L‖_∞)` counts as a zero mode.
    pub zero_tol: f64,
    /// Relative Ritz residual required for convergence.
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { dense_limit: 1024, zero_tol: 1e-9, tol: 1e-10, max_restarts: 60, seed: 17 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    /// Sorted by `|Re λ|`, ties by `|Im λ|`.
    pub eigenvalues: Vec<C64>,
    /// Smallest `|Re λ|` among the nonzero eigenvalues found.
    pub gap: f64,
    pub zero_modes: usize,
    /// Largest `‖Lx − λx‖/‖x‖` of the returned nonzero pairs (0 when dense).
    pub residual: f64,
}

fn sort_key(a: &C64, b: &C64) -> std::cmp::Ordering {
    a.re.abs().total_cmp(&b.re.abs()).then(a.im.abs().total_cmp(&b.im.abs()))
}

/// The `k` eigenvalues of `L` nearest zero together with the dissipative gap.
pub fn spectrum(l: &Liouvillian, k: usize) -> Result<SpectralResult> {
    spectrum_with(l, k, &SpectrumOptions::default())
}

pub fn spectrum_with(l: &Liouvillian, k: usize, opts: &SpectrumOptions) -> Result<SpectralResult> {
    if k < 2 {
        return Err(Error::Domain(format!("need at least two eigenvalues, got k = {k}")));
    }
    init_parallelism();
    let norm = l.matrix().norm_inf();
    let zero = opts.zero_tol * norm.max(1.0);
    let res = if l.vec_dim() <= opts.dense_limit { dense(l, k, zero)? } else { arnoldi(l, k, zero, opts)? };
    let bound = 1e-10 * norm.max(1.0);
    if let Some(bad) = res.eigenvalues.iter().find(|z| z.re > bound) {
        return Err(Error::Numerical(format!("eigenvalue {bad} lies in the right half-plane")));
    }
    Ok(res)
}

/// Smallest nonzero `|Re λ|`.
pub fn dissipative_gap(l: &Liouvillian) -> Result<f64> {
    Ok(spectrum(l, 2)?.gap)
}

fn dense(l: &Liouvillian, k: usize, zero: f64) -> Result<SpectralResult> {
    let a = l.matrix().to_dense();
    let mut ev = a.eigenvalues().map_err(|e| Error::Numerical(format!("dense eigensolver failed: {e:?}")))?;
    ev.sort_by(sort_key);
    let zero_modes = ev.iter().filter(|z| z.norm() <= zero).count();
    let gap = ev.iter().filter(|z| z.norm() > zero).map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    ev.truncate(k);
    Ok(SpectralResult { eigenvalues: ev, gap, zero_modes, residual: 0.0 })
}

/// Groups of trace positions whose sums the generator conserves.
fn conserved_traces(l: &Liouvillian) -> Vec<Vec<usize>> {
    let layout = l.layout();
    match layout {
        Layout::Dicke { .. } if layout.n_blocks() > 1 && l.is_block_diagonal() => layout
            .block_dims()
            .into_iter()
            .zip(layout.offsets())
            .map(|(d, off)| (0..d).map(|i| off + i * (d + 1)).collect())
            .collect(),
        _ => vec![layout.trace_positions()],
    }
}

fn project_traceless(v: &mut [C64], groups: &[Vec<usize>]) {
    for g in groups {
        let mean = g.iter().map(|&p| v[p]).sum::<C64>() / g.len() as f64;
        for &p in g {
            v[p] -= mean;
        }
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn nrm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Shift-invert Arnoldi with explicit restarts on the subspace of vectors
/// traceless in every conserved block. That subspace is invariant under
/// `(L − σ)^{-1}` and excludes the trivial zero modes, which are counted
/// from the conservation laws instead.
fn arnoldi(l: &Liouvillian, k: usize, zero: f64, opts: &SpectrumOptions) -> Result<SpectralResult> {
    let n = l.vec_dim();
    let norm = l.matrix().norm_inf().max(f64::MIN_POSITIVE);
    let groups = conserved_traces(l);
    let trivial = groups.len();
    let want = k.max(2);
    let sigma = 1e-6 * norm;
    let lu = SparseLu::new(&l.matrix().shifted(C64::new(sigma, 0.0)))?;
    let op = |x: &[C64]| -> Vec<C64> {
        let mut y = lu.solve(x);
        project_traceless(&mut y, &groups);
        y
    };
    let dim_free = n.saturating_sub(trivial);
    let m = (3 * want + 20).max(40).min(dim_free);
    if m < want {
        return Err(Error::Domain(format!("only {dim_free} nontrivial modes, {want} requested")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v0: Vec<C64> = (0..n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    project_traceless(&mut v0, &groups);

    let mut last_resid = f64::INFINITY;
    for _restart in 0..=opts.max_restarts {
        let nv = nrm(&v0);
        let mut basis: Vec<Vec<C64>> = vec![v0.iter().map(|x| x / nv).collect()];
        let mut h = Mat::<C64>::zeros(m + 1, m);
        let mut steps = m;
        for j in 0..m {
            let mut w = op(&basis[j]);
            for _pass in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c = dot(q, &w);
                    h[(i, j)] += c;
                    w.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
                }
            }
            let beta = nrm(&w);
            h[(j + 1, j)] = C64::new(beta, 0.0);
            if beta <= 1e-14 * h.col(j).iter().map(|x| x.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE) {
                steps = j + 1;
                break;
            }
            basis.push(w.iter().map(|x| x / beta).collect());
        }
        let hm = Mat::from_fn(steps, steps, |i, j| h[(i, j)]);
        let eig = hm.eigen().map_err(|e| Error::Numerical(format!("Hessenberg eigensolver failed: {e:?}")))?;
        let theta = eig.S().column_vector();
        let y = eig.U();
        let beta_last = if steps < m || steps == dim_free { 0.0 } else { h[(steps, steps - 1)].norm() };
        let mut order: Vec<usize> = (0..steps).collect();
        order.sort_by(|&a, &b| theta[b].norm().total_cmp(&theta[a].norm()));
        let sel: Vec<usize> = order.into_iter().take(want).collect();
        let mut converged = true;
        let mut resid = 0.0f64;
        for &s in &sel {
            let ny = (0..steps).map(|i| y[(i, s)].norm_sqr()).sum::<f64>().sqrt();
            let r = beta_last * y[(steps - 1, s)].norm() / ny;
            let rel = r / theta[s].norm().max(f64::MIN_POSITIVE);
            resid = resid.max(rel);
            if rel > opts.tol {
                converged = false;
            }
        }
        last_resid = resid;
        let ritz = |s: usize| -> Vec<C64> {
            let mut x = vec![C64::new(0.0, 0.0); n];
            for i in 0..steps {
                let c = y[(i, s)];
                x.iter_mut().zip(&basis[i]).for_each(|(a, b)| *a += c * b);
            }
            x
        };
        if converged || sel.len() < want {
            let mut vals: Vec<C64> = Vec::with_capacity(trivial + sel.len());
            let mut true_res = 0.0f64;
            let mut nontrivial_zero = 0;
            for &s in &sel {
                let lam = C64::new(sigma, 0.0) + C64::new(1.0, 0.0) / theta[s];
                if lam.norm() <= zero {
                    nontrivial_zero += 1;
                    vals.push(lam);
                    continue;
                }
                let x = ritz(s);
                let lx = l.matrix().apply(&x);
                let rr: Vec<C64> = lx.iter().zip(&x).map(|(a, b)| a - lam * b).collect();
                true_res = true_res.max(nrm(&rr) / nrm(&x) / norm);
                vals.push(lam);
            }
            let gap = vals.iter().filter(|z| z.norm() > zero).map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
            vals.extend(std::iter::repeat_n(C64::new(0.0, 0.0), trivial));
            vals.sort_by(sort_key);
            vals.truncate(k);
            return Ok(SpectralResult { eigenvalues: vals, gap, zero_modes: trivial + nontrivial_zero, residual: true_res });
        }
        // restart from the wanted Ritz vectors, weighted by their residuals
        let mut next = vec![C64::new(0.0, 0.0); n];
        for &s in &sel {
            let x = ritz(s);
            let nx = nrm(&x);
            next.iter_mut().zip(&x).for_each(|(a, b)| *a += b / nx);
        }
        project_traceless(&mut next, &groups);
        v0 = next;
    }
    Err(Error::Numerical(format!("shift-invert Arnoldi did not converge: Ritz residual {last_resid:.3e}")))
}
