//! Dormand–Prince 5(4) with FSAL, generic over real and complex state.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub trait OdeScalar: Copy + Default + PartialEq + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn magnitude(self) -> f64;
}

impl OdeScalar for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl OdeScalar for C64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on the step, `∞` if unset.
    pub h_max: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-8, atol: 1e-10, max_steps: 2_000_000, h_max: f64::INFINITY }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// Stepper state that survives between calls: the last step size and the
/// FSAL derivative, reused only if the caller hands back the same vector.
pub struct Dopri5<T: OdeScalar> {
    opts: OdeOptions,
    k: [Vec<T>; 7],
    y_new: Vec<T>,
    last_y: Vec<T>,
    last_t: f64,
    fsal_valid: bool,
    h: f64,
}

impl<T: OdeScalar> Dopri5<T> {
    pub fn new(n: usize, opts: OdeOptions) -> Self {
        let z = vec![T::default(); n];
        Dopri5 {
            opts,
            k: std::array::from_fn(|_| z.clone()),
            y_new: z.clone(),
            last_y: z,
            last_t: f64::NAN,
            fsal_valid: false,
            h: 0.0,
        }
    }

    pub fn options(&self) -> &OdeOptions {
        &self.opts
    }

    fn scaled_norm(&self, v: &[T], y: &[T], y2: &[T]) -> f64 {
        let n = v.len().max(1) as f64;
        let s: f64 = v
            .iter()
            .zip(y.iter().zip(y2))
            .map(|(e, (a, b))| {
                let sc = self.opts.atol + self.opts.rtol * a.magnitude().max(b.magnitude());
                let q = e.magnitude() / sc;
                q * q
            })
            .sum();
        (s / n).sqrt()
    }

    fn initial_step<F: FnMut(f64, &[T], &mut [T])>(&mut self, f: &mut F, t: f64, y: &[T], span: f64, stats: &mut OdeStats) -> f64 {
        let zero = vec![T::default(); y.len()];
        let d0 = self.scaled_norm(y, y, &zero);
        let d1 = self.scaled_norm(&self.k[0], y, &zero);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        let y1: Vec<T> = y.iter().zip(&self.k[0]).map(|(&a, &b)| a + b * h0).collect();
        let mut f1 = vec![T::default(); y.len()];
        f(t + h0, &y1, &mut f1);
        stats.rhs_evals += 1;
        let diff: Vec<T> = f1.iter().zip(&self.k[0]).map(|(&a, &b)| (a - b) * (1.0 / h0)).collect();
        let d2 = self.scaled_norm(&diff, y, &zero);
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(span).min(self.opts.h_max)
    }

    /// Advances `y` from `t0` to `t1`; `on_step` sees every accepted state.
    pub fn integrate<F, G>(&mut self, f: &mut F, t0: f64, t1: f64, y: &mut [T], stats: &mut OdeStats, mut on_step: G) -> Result<()>
    where
        F: FnMut(f64, &[T], &mut [T]),
        G: FnMut(f64, &[T]) -> Result<()>,
    {
        if t1 <= t0 {
            return Ok(());
        }
        let n = y.len();
        if !(self.fsal_valid && self.last_t == t0 && self.last_y.as_slice() == &*y) {
            f(t0, y, &mut self.k[0]);
            stats.rhs_evals += 1;
        }
        if !(self.h > 0.0) {
            self.h = self.initial_step(f, t0, y, t1 - t0, stats);
        }
        let mut t = t0;
        let mut h = self.h;
        let mut last_rejected = false;
        let mut ytmp = vec![T::default(); n];
        while t < t1 {
            if stats.steps + stats.rejected >= self.opts.max_steps {
                return Err(Error::Stiffness { t, h });
            }
            let mut hs = h.min(self.opts.h_max);
            let last = t + hs >= t1 || t + 1.01 * hs >= t1;
            if last {
                hs = t1 - t;
            }
            if hs < 16.0 * f64::EPSILON * t.abs().max(1e-300) || hs <= 0.0 {
                return Err(Error::Stiffness { t, h: hs });
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (p, a) in A[s][..s].iter().enumerate() {
                        if *a != 0.0 {
                            acc = acc + self.k[p][i] * (hs * a);
                        }
                    }
                    ytmp[i] = acc;
                }
                let (head, tail) = self.k.split_at_mut(s);
                let _ = head;
                f(t + C[s] * hs, &ytmp, &mut tail[0]);
                stats.rhs_evals += 1;
                if s == 6 {
                    self.y_new.copy_from_slice(&ytmp);
                }
            }
            let mut err_v = vec![T::default(); n];
            for (i, e) in err_v.iter_mut().enumerate() {
                let mut acc = T::default();
                for (p, c) in E.iter().enumerate() {
                    if *c != 0.0 {
                        acc = acc + self.k[p][i] * (hs * c);
                    }
                }
                *e = acc;
            }
            let err = self.scaled_norm(&err_v, y, &self.y_new);
            if !err.is_finite() {
                stats.rejected += 1;
                h = hs * 0.1;
                last_rejected = true;
                continue;
            }
            if err <= 1.0 {
                t = if last { t1 } else { t + hs };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                stats.steps += 1;
                on_step(t, y)?;
                let mut fac = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
                fac = fac.clamp(0.2, 5.0);
                if last_rejected {
                    fac = fac.min(1.0);
                }
                // a truncated final step says nothing about the natural step
                if !last || fac * hs > h {
                    h = hs * fac;
                }
                last_rejected = false;
            } else {
                stats.rejected += 1;
                h = hs * (0.9 * err.powf(-0.2)).max(0.2);
                last_rejected = true;
            }
        }
        self.h = h;
        self.fsal_valid = true;
        self.last_t = t1;
        self.last_y.clear();
        self.last_y.extend_from_slice(y);
        Ok(())
    }
}

/// Integrates `dy/dt = f(t, y)` and samples `y` on `t_grid` (first entry is
/// the initial time).
pub fn integrate_on_grid<F>(mut f: F, y0: &[f64], t_grid: &[f64], opts: OdeOptions) -> Result<(Vec<Vec<f64>>, OdeStats)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    check_grid(t_grid)?;
    let mut y = y0.to_vec();
    let mut out = vec![y.clone()];
    let mut stats = OdeStats::default();
    let mut st = Dopri5::new(y.len(), opts);
    for w in t_grid.windows(2) {
        st.integrate(&mut f, w[0], w[1], &mut y, &mut stats, |_, _| Ok(()))?;
        out.push(y.clone());
    }
    Ok((out, stats))
}

pub(crate) fn check_grid(t: &[f64]) -> Result<()> {
    if t.is_empty() {
        return Err(Error::Domain("time grid is empty".into()));
    }
    if t.iter().any(|x| !x.is_finite()) || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("time grid must be finite and strictly increasing".into()));
    }
    Ok(())
}
