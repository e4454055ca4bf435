use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::lu::SparseLu;
use super::ode::{check_grid, Dopri5, OdeOptions, OdeStats};
use crate::liouvillian::Liouvillian;
use crate::measure::{observe, Observables};
use crate::sparse::CsrMatrix;
use crate::state::DensityState;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Explicit unless the horizon spans many stiffness times.
    #[default]
    Auto,
    Dopri5,
    /// Three-stage L-stable SDIRK with step doubling.
    Sdirk3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub integrator: Integrator,
    pub max_steps: usize,
    pub trace_tol: f64,
    pub store_states: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { rtol: 1e-8, atol: 1e-10, integrator: Integrator::Auto, max_steps: 5_000_000, trace_tol: 1e-7, store_states: false }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub factorizations: usize,
    pub max_trace_drift: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub observables: Vec<Observables>,
    /// Filled only with [`EvolveOptions::store_states`].
    pub states: Vec<DensityState>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn xi2(&self) -> Vec<f64> {
        self.observables.iter().map(|o| o.xi2).collect()
    }
}

/// `ρ(t)` on `t_grid` (first entry is the initial time) with observables
/// recorded at every grid point.
pub fn evolve(l: &Liouvillian, rho0: &DensityState, t_grid: &[f64], rtol: f64, atol: f64) -> Result<Trajectory> {
    evolve_with(l, rho0, t_grid, &EvolveOptions { rtol, atol, ..Default::default() })
}

pub fn evolve_with(l: &Liouvillian, rho0: &DensityState, t_grid: &[f64], opts: &EvolveOptions) -> Result<Trajectory> {
    let mut traj = Trajectory { times: Vec::new(), observables: Vec::new(), states: Vec::new(), stats: IntegratorStats::default() };
    let stats = evolve_observed(l, rho0, t_grid, opts, |t, rho| {
        traj.times.push(t);
        traj.observables.push(observe(rho)?);
        if opts.store_states {
            traj.states.push(rho.clone());
        }
        Ok(())
    })?;
    traj.stats = stats;
    Ok(traj)
}

/// Like [`evolve_with`] but hands each grid state to `on_point`.
pub fn evolve_observed<F>(l: &Liouvillian, rho0: &DensityState, t_grid: &[f64], opts: &EvolveOptions, mut on_point: F) -> Result<IntegratorStats>
where
    F: FnMut(f64, &DensityState) -> Result<()>,
{
    check_grid(t_grid)?;
    if rho0.layout() != l.layout() {
        return Err(Error::Layout(format!("initial state is {} but L is {}", rho0.layout().kind(), l.layout().kind())));
    }
    let horizon = t_grid[t_grid.len() - 1] - t_grid[0];
    let mut prop = Propagator::new(l, opts, horizon);
    let mut v = rho0.to_vec();
    on_point(t_grid[0], rho0)?;
    for w in t_grid.windows(2) {
        prop.advance(&mut v, w[0], w[1])?;
        on_point(w[1], &DensityState::from_vec(l.layout().clone(), &v)?)?;
    }
    Ok(prop.stats())
}

enum Stepper {
    Explicit(Dopri5<C64>),
    Implicit(Sdirk3),
}

/// Reusable integrator for one generator. The trace of the first vector it
/// sees is the reference for the drift check.
pub struct Propagator<'a> {
    l: &'a CsrMatrix,
    opts: EvolveOptions,
    stepper: Stepper,
    stats: IntegratorStats,
    trace_pos: Vec<usize>,
    ref_trace: Option<C64>,
}

impl<'a> Propagator<'a> {
    pub fn new(l: &'a Liouvillian, opts: &EvolveOptions, horizon: f64) -> Self {
        super::lu::init_parallelism();
        let norm = l.matrix().norm_inf();
        let implicit = match opts.integrator {
            Integrator::Dopri5 => false,
            Integrator::Sdirk3 => true,
            Integrator::Auto => horizon * norm > 2e4,
        };
        let stepper = if implicit {
            Stepper::Implicit(Sdirk3::new(norm))
        } else {
            Stepper::Explicit(Dopri5::new(l.vec_dim(), OdeOptions { rtol: opts.rtol, atol: opts.atol, max_steps: opts.max_steps, h_max: f64::INFINITY }))
        };
        Propagator { l: l.matrix(), opts: *opts, stepper, stats: IntegratorStats::default(), trace_pos: l.layout().trace_positions(), ref_trace: None }
    }

    pub fn stats(&self) -> IntegratorStats {
        self.stats
    }

    /// Forgets the drift reference, e.g. after a deliberate change of trace.
    pub fn reset_trace_reference(&mut self) {
        self.ref_trace = None;
    }

    pub fn advance(&mut self, v: &mut [C64], t0: f64, t1: f64) -> Result<()> {
        let reference = match self.ref_trace {
            Some(r) => r,
            None => {
                let r: C64 = self.trace_pos.iter().map(|&p| v[p]).sum();
                self.ref_trace = Some(r);
                r
            }
        };
        let trace_pos = &self.trace_pos;
        let tol = self.opts.trace_tol;
        let mut drift_max = self.stats.max_trace_drift;
        let mut check = |t: f64, y: &[C64]| -> Result<()> {
            let d = (trace_pos.iter().map(|&p| y[p]).sum::<C64>() - reference).norm();
            drift_max = drift_max.max(d);
            if d > tol {
                return Err(Error::Integration(format!("trace drift {d:.3e} exceeds {tol:.1e} at t = {t}")));
            }
            Ok(())
        };
        let l = self.l;
        match &mut self.stepper {
            Stepper::Explicit(dp) => {
                let mut st = OdeStats { steps: self.stats.steps, rejected: self.stats.rejected, rhs_evals: self.stats.rhs_evals };
                let mut f = |_: f64, y: &[C64], dy: &mut [C64]| l.matvec(y, dy);
                let r = dp.integrate(&mut f, t0, t1, v, &mut st, &mut check);
                self.stats.steps = st.steps;
                self.stats.rejected = st.rejected;
                self.stats.rhs_evals = st.rhs_evals;
                r?;
            }
            Stepper::Implicit(sd) => sd.integrate(l, t0, t1, v, &self.opts, &mut self.stats, &mut check)?,
        }
        self.stats.max_trace_drift = self.stats.max_trace_drift.max(drift_max);
        Ok(())
    }
}

/// Advances a vectorized state under `l` from `t0` to `t1`.
pub fn propagate(l: &Liouvillian, v: &mut [C64], t0: f64, t1: f64, opts: &EvolveOptions, stats: &mut IntegratorStats) -> Result<()> {
    let mut p = Propagator::new(l, opts, t1 - t0);
    p.advance(v, t0, t1)?;
    let s = p.stats();
    stats.steps += s.steps;
    stats.rejected += s.rejected;
    stats.rhs_evals += s.rhs_evals;
    stats.factorizations += s.factorizations;
    stats.max_trace_drift = stats.max_trace_drift.max(s.max_trace_drift);
    Ok(())
}

const GAMMA: f64 = 0.435_866_521_508_459;

/// Alexander's stiffly accurate SDIRK(3). Proposed steps sit on the grid
/// `2^{k/4}` so factorizations of `I − hγL` can be reused.
struct Sdirk3 {
    h: f64,
    norm: f64,
    cache: Vec<(u64, SparseLu)>,
}

impl Sdirk3 {
    const CACHE: usize = 8;

    fn new(norm: f64) -> Self {
        Sdirk3 { h: 0.0, norm, cache: Vec::new() }
    }

    fn factor(&mut self, l: &CsrMatrix, h: f64, stats: &mut IntegratorStats) -> Result<usize> {
        let key = h.to_bits();
        if let Some(i) = self.cache.iter().position(|(k, _)| *k == key) {
            return Ok(i);
        }
        let m = l.scale(C64::new(-h * GAMMA, 0.0)).shifted(C64::new(-1.0, 0.0));
        let lu = SparseLu::new(&m)?;
        stats.factorizations += 1;
        if self.cache.len() == Self::CACHE {
            self.cache.remove(0);
        }
        self.cache.push((key, lu));
        Ok(self.cache.len() - 1)
    }

    fn step(&mut self, l: &CsrMatrix, y: &[C64], h: f64, stats: &mut IntegratorStats) -> Result<Vec<C64>> {
        let i = self.factor(l, h, stats)?;
        let lu = &self.cache[i].1;
        let a21 = (1.0 - GAMMA) / 2.0;
        let b1 = -(6.0 * GAMMA * GAMMA - 16.0 * GAMMA + 1.0) / 4.0;
        let b2 = (6.0 * GAMMA * GAMMA - 20.0 * GAMMA + 5.0) / 4.0;
        let y1 = lu.solve(y);
        let k1 = l.apply(&y1);
        let rhs: Vec<C64> = y.iter().zip(&k1).map(|(a, k)| a + k * (h * a21)).collect();
        let y2 = lu.solve(&rhs);
        let k2 = l.apply(&y2);
        let rhs: Vec<C64> = y.iter().zip(k1.iter().zip(&k2)).map(|(a, (p, q))| a + p * (h * b1) + q * (h * b2)).collect();
        stats.rhs_evals += 2;
        Ok(lu.solve(&rhs))
    }

    fn quantize(h: f64) -> f64 {
        2f64.powf((4.0 * h.log2()).floor() / 4.0)
    }

    #[allow(clippy::too_many_arguments)]
    fn integrate<G>(&mut self, l: &CsrMatrix, t0: f64, t1: f64, y: &mut [C64], opts: &EvolveOptions, stats: &mut IntegratorStats, on_step: &mut G) -> Result<()>
    where
        G: FnMut(f64, &[C64]) -> Result<()>,
    {
        if t1 <= t0 {
            return Ok(());
        }
        if !(self.h > 0.0) {
            self.h = Self::quantize((1.0 / self.norm.max(1e-300)).min(t1 - t0));
        }
        let mut t = t0;
        let mut h = self.h;
        while t < t1 {
            if stats.steps + stats.rejected >= opts.max_steps {
                return Err(Error::Stiffness { t, h });
            }
            let last = t + h >= t1;
            let hs = if last { t1 - t } else { h };
            if hs < 16.0 * f64::EPSILON * t.abs().max(1e-300) {
                return Err(Error::Stiffness { t, h: hs });
            }
            let full = self.step(l, y, hs, stats)?;
            let mid = self.step(l, y, hs / 2.0, stats)?;
            let fine = self.step(l, &mid, hs / 2.0, stats)?;
            let n = y.len().max(1) as f64;
            let err = (fine
                .iter()
                .zip(&full)
                .zip(y.iter())
                .map(|((a, b), c)| {
                    let sc = opts.atol + opts.rtol * a.norm().max(c.norm());
                    ((a - b).norm() / 7.0 / sc).powi(2)
                })
                .sum::<f64>()
                / n)
                .sqrt();
            let fac = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-0.25)).clamp(0.2, 4.0) };
            if err.is_finite() && err <= 1.0 {
                y.copy_from_slice(&fine);
                t = if last { t1 } else { t + hs };
                stats.steps += 1;
                on_step(t, y)?;
                if !last || fac * hs > h {
                    h = Self::quantize(hs * fac);
                }
            } else {
                stats.rejected += 1;
                h = Self::quantize(hs * if err.is_finite() { fac.min(0.5) } else { 0.2 });
            }
        }
        self.h = h;
        Ok(())
    }
}
