use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lu::{all_finite, norm_inf, SparseLu};
use crate::liouvillian::{check_cutoff, Liouvillian};
use crate::state::{DensityState, Layout};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyOptions {
    /// Accept when `‖Lρ‖_∞ ≤ residual_tol · ‖L‖_∞`.
    pub residual_tol: f64,
    /// Most negative eigenvalue tolerated before a positivity error.
    pub positivity_tol: f64,
    pub refine_steps: usize,
    pub seed: u64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions { residual_tol: 1e-9, positivity_tol: 1e-8, refine_steps: 3, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SteadyMethod {
    BorderedLu,
    InverseIteration,
}

#[derive(Debug, Clone)]
pub struct SteadyReport {
    pub state: DensityState,
    /// `‖Lρ‖_∞ / ‖L‖_∞`
    pub residual: f64,
    pub min_eigenvalue: f64,
    pub method: SteadyMethod,
}

/// Unique steady state of `L`.
pub fn steady_state(l: &Liouvillian) -> Result<DensityState> {
    Ok(steady_state_with(l, &SteadyOptions::default())?.state)
}

pub fn steady_state_with(l: &Liouvillian, opts: &SteadyOptions) -> Result<SteadyReport> {
    let nb = l.layout().n_blocks();
    if nb > 1 && l.is_block_diagonal() {
        return Err(Error::Ambiguity { zero_modes: nb });
    }
    let v = solve_null(l, opts)?;
    finish(l, v.0, v.1, opts)
}

/// Steady state of a Dicke generator written in the
/// [`SpinFrame::YDiagonal`](crate::spinspace::SpinFrame) basis, returned in
/// the lab basis.
pub fn steady_state_y_frame(l: &Liouvillian, opts: &SteadyOptions) -> Result<SteadyReport> {
    let rep = steady_state_with(l, opts)?;
    Ok(SteadyReport { state: crate::spinspace::from_y_frame(&rep.state)?, ..rep })
}

/// Steady state reached from `rho0`. Block-diagonal generators keep every
/// block's population, so each block is solved on its own and weighted by
/// the initial block trace.
pub fn steady_state_from(l: &Liouvillian, rho0: &DensityState) -> Result<DensityState> {
    Ok(steady_state_from_with(l, rho0, &SteadyOptions::default())?.state)
}

pub fn steady_state_from_with(l: &Liouvillian, rho0: &DensityState, opts: &SteadyOptions) -> Result<SteadyReport> {
    if rho0.layout() != l.layout() {
        return Err(Error::Layout(format!("initial state is {} but L is {}", rho0.layout().kind(), l.layout().kind())));
    }
    let nb = l.layout().n_blocks();
    if nb == 1 || !l.is_block_diagonal() {
        return steady_state_with(l, opts);
    }
    let weights: Vec<f64> = rho0.block_traces().iter().map(|t| t.re).collect();
    let mut blocks = Vec::with_capacity(nb);
    let (mut residual, mut min_eig) = (0.0f64, f64::INFINITY);
    let mut method = SteadyMethod::BorderedLu;
    for (b, &w) in weights.iter().enumerate() {
        let d = l.layout().block_dims()[b];
        if w.abs() <= 1e-14 {
            blocks.push(faer::Mat::zeros(d, d));
            continue;
        }
        let rep = steady_state_with(&l.block(b)?, opts)?;
        residual = residual.max(rep.residual * w.abs());
        min_eig = min_eig.min(rep.min_eigenvalue * w);
        if rep.method == SteadyMethod::InverseIteration {
            method = SteadyMethod::InverseIteration;
        }
        let mut m = rep.state.into_blocks().pop().expect("single block");
        m = m * faer::Scale(C64::new(w, 0.0));
        blocks.push(m);
    }
    let mut state = DensityState::new(l.layout().clone(), blocks)?;
    state.normalize()?;
    Ok(SteadyReport { state, residual, min_eigenvalue: min_eig, method })
}

fn trace_of(v: &[C64], pos: &[usize]) -> C64 {
    pos.iter().map(|&p| v[p]).sum()
}

fn relative_residual(l: &Liouvillian, v: &[C64]) -> f64 {
    let scale = l.matrix().norm_inf().max(f64::MIN_POSITIVE);
    norm_inf(&l.matrix().apply(v)) / scale
}

fn normalized(v: Vec<C64>, pos: &[usize]) -> Option<Vec<C64>> {
    let t = trace_of(&v, pos);
    if !(t.norm() > 1e-12 * norm_inf(&v)) {
        return None;
    }
    Some(v.into_iter().map(|x| x / t).collect())
}

/// Returns the trace-normalized null vector and the method that found it.
fn solve_null(l: &Liouvillian, opts: &SteadyOptions) -> Result<(Vec<C64>, SteadyMethod)> {
    let pos = l.layout().trace_positions();
    if let Some(v) = bordered_lu(l, &pos, opts)? {
        return Ok((v, SteadyMethod::BorderedLu));
    }
    Ok((inverse_iteration(l, &pos, opts)?, SteadyMethod::InverseIteration))
}

/// Solves `Lρ = 0`, `Tr ρ = 1` with one trace row of `L` replaced by the
/// trace functional. Trace preservation makes that row redundant.
fn bordered_lu(l: &Liouvillian, pos: &[usize], opts: &SteadyOptions) -> Result<Option<Vec<C64>>> {
    let n = l.vec_dim();
    let p0 = pos[0];
    let entries: Vec<(usize, C64)> = pos.iter().map(|&p| (p, C64::new(1.0, 0.0))).collect();
    let a = l.matrix().with_row_replaced(p0, &entries);
    let lu = match SparseLu::new(&a) {
        Ok(lu) => lu,
        Err(_) => return Ok(None),
    };
    let mut b = vec![C64::new(0.0, 0.0); n];
    b[p0] = C64::new(1.0, 0.0);
    let mut x = lu.solve(&b);
    if !all_finite(&x) {
        return Ok(None);
    }
    // Residuals in double-double: refinement then converges to the solution
    // of the stored system even when the slow modes make it ill-conditioned.
    for _ in 0..opts.refine_steps {
        let r = residual_dd(&a, &x, &b);
        let dx = lu.solve(&r);
        if !all_finite(&dx) {
            return Ok(None);
        }
        x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        if norm_inf(&dx) <= 1e-15 * norm_inf(&x) {
            break;
        }
    }
    let Some(x) = normalized(x, pos) else { return Ok(None) };
    if relative_residual(l, &x) > opts.residual_tol {
        return Ok(None);
    }
    Ok(Some(x))
}

/// Error-free sum (Knuth).
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `(hi, lo) += p` where `p = x·y` is taken exactly via fused multiply-add.
fn acc_prod(acc: &mut (f64, f64), x: f64, y: f64) {
    let p = x * y;
    let e = x.mul_add(y, -p);
    let (s, t) = two_sum(acc.0, p);
    acc.0 = s;
    acc.1 += t + e;
}

/// `b − A x` with each component accumulated in double-double.
fn residual_dd(a: &crate::sparse::CsrMatrix, x: &[C64], b: &[C64]) -> Vec<C64> {
    (0..b.len())
        .map(|i| {
            let (mut re, mut im) = ((b[i].re, 0.0), (b[i].im, 0.0));
            for (j, v) in a.row(i) {
                acc_prod(&mut re, -v.re, x[j].re);
                acc_prod(&mut re, v.im, x[j].im);
                acc_prod(&mut im, -v.re, x[j].im);
                acc_prod(&mut im, -v.im, x[j].re);
            }
            C64::new(re.0 + re.1, im.0 + im.1)
        })
        .collect()
}

/// Shift-invert power iteration with `σ > 0`, which keeps `L − σ` regular
/// because the spectrum lies in the closed left half-plane. Several random
/// starts expose a degenerate null space.
fn inverse_iteration(l: &Liouvillian, pos: &[usize], opts: &SteadyOptions) -> Result<Vec<C64>> {
    let n = l.vec_dim();
    let norm = l.matrix().norm_inf().max(f64::MIN_POSITIVE);
    let sigma = 1e-7 * norm;
    let lu = SparseLu::new(&l.matrix().shifted(C64::new(sigma, 0.0)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut found: Vec<Vec<C64>> = Vec::new();
    const STARTS: usize = 3;
    for _ in 0..STARTS {
        let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        for _ in 0..40 {
            v = lu.solve(&v);
            let m = norm_inf(&v);
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::Numerical("inverse iteration broke down".into()));
            }
            v.iter_mut().for_each(|x| *x /= m);
        }
        let res = norm_inf(&l.matrix().apply(&v)) / norm;
        if res > opts.residual_tol * 10.0 {
            return Err(Error::Numerical(format!("inverse iteration did not converge: residual {res:.3e}")));
        }
        found.push(v);
    }
    // rank of the converged vectors
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for v in &found {
        let mut w = v.clone();
        for q in &basis {
            let c: C64 = q.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
            w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
        let nw = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if nw > 1e-6 * nv {
            basis.push(w.into_iter().map(|x| x / nw).collect());
        }
    }
    if basis.len() > 1 {
        return Err(Error::Ambiguity { zero_modes: basis.len() });
    }
    normalized(found.swap_remove(0), pos).ok_or_else(|| Error::Numerical("null vector is traceless".into()))
}

fn finish(l: &Liouvillian, v: Vec<C64>, method: SteadyMethod, opts: &SteadyOptions) -> Result<SteadyReport> {
    let mut state = DensityState::from_vec(l.layout().clone(), &v)?;
    state.hermitize();
    state.normalize()?;
    let residual = relative_residual(l, &state.to_vec());
    if residual > opts.residual_tol {
        return Err(Error::Consistency { what: "steady-state residual".into(), residual });
    }
    let min_eigenvalue = state.min_eigenvalue()?;
    if min_eigenvalue < -opts.positivity_tol {
        return Err(Error::Positivity { min_eig: min_eigenvalue });
    }
    if let Layout::Hybrid { .. } = l.layout() {
        check_cutoff(&state)?;
    }
    Ok(SteadyReport { state, residual, min_eigenvalue, method })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::dark_state;
    use crate::liouvillian::{build_ideal, build_spin_model, ModelParams};
    use crate::spinspace::dicke_space;
    use crate::Half;

    #[test]
    fn y_frame_solve_matches_lab_and_stays_exact_at_large_r() {
        use crate::liouvillian::{build_collective, CollectiveRates};
        use crate::spinspace::SpinFrame;
        let space = dicke_space(7).unwrap();
        let rates = CollectiveRates::thermal(0.8, 0.3);
        let lab = steady_state(&build_collective(&space, space.j_max(), &rates, 0.9, SpinFrame::Lab).unwrap()).unwrap();
        let yf = steady_state_y_frame(&build_collective(&space, space.j_max(), &rates, 0.9, SpinFrame::YDiagonal).unwrap(), &SteadyOptions::default()).unwrap();
        assert!(lab.trace_distance(&yf.state).unwrap() < 1e-11);

        // The lab-basis solve is off by ~1e-8 here.
        let space = dicke_space(40).unwrap();
        let l = build_collective(&space, space.j_max(), &CollectiveRates::thermal(1.0, 0.0), 6.0, SpinFrame::YDiagonal).unwrap();
        let rep = steady_state_y_frame(&l, &SteadyOptions::default()).unwrap();
        let d = dark_state(40, space.j_max(), 6.0).unwrap().density(40).unwrap();
        assert!(rep.state.trace_distance(&d).unwrap() < 1e-11);
    }

    #[test]
    fn even_ideal_steady_state_is_dark() {
        let space = dicke_space(8).unwrap();
        let l = build_ideal(&space, space.j_max(), 1.0, 1.2).unwrap();
        let rep = steady_state_with(&l, &SteadyOptions::default()).unwrap();
        let d = dark_state(8, space.j_max(), 1.2).unwrap();
        assert!(1.0 - rep.state.overlap_pure(0, &d.amplitudes()) < 1e-10);
        assert_eq!(rep.method, SteadyMethod::BorderedLu);
    }

    #[test]
    fn relaxation_alone_gives_the_ground_state() {
        let space = dicke_space(5).unwrap();
        let p = ModelParams { gamma: 0.0, gamma_rel: 1.0, ..Default::default() };
        let s = steady_state(&build_spin_model(&space, &p).unwrap()).unwrap();
        let g = space.ground_state();
        assert!(s.max_abs_diff(&g).unwrap() < 1e-10);
    }

    #[test]
    fn collective_blocks_are_ambiguous_without_a_hint() {
        let space = dicke_space(4).unwrap();
        let p = ModelParams { gamma: 1.0, r: 0.5, ..Default::default() };
        let l = build_spin_model(&space, &p).unwrap();
        assert_eq!(steady_state(&l).unwrap_err(), Error::Ambiguity { zero_modes: 3 });
        let g = space.ground_state();
        let s = steady_state_from(&l, &g).unwrap();
        assert!(s.blocks()[1].norm_l2() < 1e-14);
        let d = dark_state(4, Half::from_int(2), 0.5).unwrap();
        assert!(1.0 - s.overlap_pure(0, &d.amplitudes()) < 1e-10);
    }

    #[test]
    fn degenerate_null_space_is_detected_by_inverse_iteration() {
        // two decoupled qubits in one block: D[σ₋] ⊕ D[σ₋] on a 4-level system
        use crate::sparse::CsrMatrix;
        let one = C64::new(1.0, 0.0);
        let a = CsrMatrix::from_triplets(4, 4, vec![(0, 1, one), (2, 3, one)]);
        let layout = Layout::Full { n_spins: 2 };
        let mut asm = crate::liouvillian::Assembler::new(layout);
        asm.dissipator(0, &a, 1.0);
        let l = asm.finish();
        let err = steady_state(&l).unwrap_err();
        assert!(matches!(err, Error::Ambiguity { zero_modes } if zero_modes >= 2), "{err:?}");
    }
}
