//! Small deterministic optimizers and fits shared by the sweep drivers.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// `n` points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// `n` logarithmically spaced points from `a` to `b` (both > 0).
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

/// Result of a bounded scalar minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    /// The minimizer sits on the first or last grid point.
    pub at_boundary: bool,
    /// Coarse-grid samples `(x, f(x))`.
    pub profile: Vec<(f64, f64)>,
}

/// Golden-section search on `[a, b]` for a unimodal `f`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..max_iter {
        if (b - a).abs() <= tol * (1.0 + c.abs().max(d.abs())) {
            break;
        }
        if lt(fc, fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if lt(fc, fd) {
        (c, fc)
    } else {
        (d, fd)
    }
}

// NaN compares as +∞.
fn lt(a: f64, b: f64) -> bool {
    let key = |x: f64| if x.is_nan() { f64::INFINITY } else { x };
    key(a) < key(b)
}

/// Evaluate on `grid`, then refine between the neighbours of the best point
/// by golden section.
pub fn grid_then_golden<F: FnMut(f64) -> f64>(mut f: F, grid: &[f64], tol: f64) -> Result<Minimum> {
    if grid.is_empty() {
        return Err(Error::Domain("empty optimization grid".into()));
    }
    let profile: Vec<(f64, f64)> = grid.iter().map(|&x| (x, f(x))).collect();
    let best = (0..profile.len()).fold(0, |b, k| if lt(profile[k].1, profile[b].1) { k } else { b });
    if !profile[best].1.is_finite() {
        return Err(Error::Search("objective is non-finite on the whole grid".into()));
    }
    let at_boundary = profile.len() > 1 && (best == 0 || best == profile.len() - 1);
    if profile.len() < 3 {
        return Ok(Minimum { x: profile[best].0, value: profile[best].1, at_boundary, profile });
    }
    let lo = profile[best.saturating_sub(1)].0;
    let hi = profile[(best + 1).min(profile.len() - 1)].0;
    let (x, v) = golden_section(&mut f, lo, hi, tol, 200);
    let (x, value) = if lt(v, profile[best].1) { (x, v) } else { profile[best] };
    Ok(Minimum { x, value, at_boundary, profile })
}

/// Like [`grid_then_golden`] but the search variable is `ln x`.
pub fn log_grid_then_golden<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize, tol: f64) -> Result<Minimum> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Domain(format!("log grid needs 0 < lo < hi, got [{lo}, {hi}]")));
    }
    let grid = linspace(lo.ln(), hi.ln(), n);
    let mut m = grid_then_golden(|u| f(u.exp()), &grid, tol)?;
    m.x = m.x.exp();
    for p in &mut m.profile {
        p.0 = p.0.exp();
    }
    Ok(m)
}

/// Bounded 2-D minimum from a coarse grid followed by alternating
/// golden-section line searches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum2 {
    pub x: [f64; 2],
    pub value: f64,
    pub profile: Vec<([f64; 2], f64)>,
}

pub fn minimize_2d<F: FnMut(f64, f64) -> f64>(mut f: F, gx: &[f64], gy: &[f64], tol: f64, sweeps: usize) -> Result<Minimum2> {
    if gx.is_empty() || gy.is_empty() {
        return Err(Error::Domain("empty optimization grid".into()));
    }
    let mut profile = Vec::with_capacity(gx.len() * gy.len());
    for &x in gx {
        for &y in gy {
            profile.push(([x, y], f(x, y)));
        }
    }
    let best = (0..profile.len()).fold(0, |b, k| if lt(profile[k].1, profile[b].1) { k } else { b });
    let (mut p, mut v) = profile[best];
    if !v.is_finite() {
        return Err(Error::Search("objective is non-finite on the whole grid".into()));
    }
    let bracket = |g: &[f64], x: f64| {
        let k = g.iter().position(|&t| t == x).unwrap_or(0);
        (g[k.saturating_sub(1)], g[(k + 1).min(g.len() - 1)])
    };
    let (bx, by) = (bracket(gx, p[0]), bracket(gy, p[1]));
    for _ in 0..sweeps {
        let before = v;
        if bx.1 > bx.0 {
            let (x, fx) = golden_section(|x| f(x, p[1]), bx.0, bx.1, tol, 200);
            if lt(fx, v) {
                p[0] = x;
                v = fx;
            }
        }
        if by.1 > by.0 {
            let (y, fy) = golden_section(|y| f(p[0], y), by.0, by.1, tol, 200);
            if lt(fy, v) {
                p[1] = y;
                v = fy;
            }
        }
        if (before - v).abs() <= tol * v.abs().max(1e-300) {
            break;
        }
    }
    Ok(Minimum2 { x: p, value: v, profile })
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Domain(format!("linear fit needs ≥ 2 paired points, got {} and {}", x.len(), y.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Domain("linear fit with degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(LinearFit { slope, intercept: my - slope * mx, r_squared })
}

/// Slope of `ln y` against `ln x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Natural cubic spline through strictly increasing knots.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n != y.len() || n < 2 {
            return Err(Error::Domain("spline needs ≥ 2 paired knots".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("spline knots must be strictly increasing".into()));
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm for the second derivatives.
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let rhs = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
                let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
                c[i] = h1 / diag;
                d[i] = (rhs - h0 * d[i - 1]) / diag;
            }
            for i in (1..n - 1).rev() {
                m[i] = d[i] - c[i] * m[i + 1];
            }
        }
        Ok(CubicSpline { x: x.to_vec(), y: y.to_vec(), m })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    /// Minimum of the spline near the smallest sample, refined by golden
    /// section over the two adjacent intervals.
    pub fn minimum(&self) -> (f64, f64) {
        let n = self.x.len();
        let k = (0..n).fold(0, |b, i| if lt(self.y[i], self.y[b]) { i } else { b });
        let lo = self.x[k.saturating_sub(1)];
        let hi = self.x[(k + 1).min(n - 1)];
        let (t, v) = golden_section(|t| self.eval(t), lo, hi, 1e-12, 200);
        if lt(v, self.y[k]) {
            (t, v)
        } else {
            (self.x[k], self.y[k])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, v) = golden_section(|x| (x - 0.3).powi(2) + 1.0, -2.0, 5.0, 1e-12, 500);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_search_reports_boundary() {
        let m = grid_then_golden(|x| x, &linspace(0.0, 1.0, 11), 1e-10).unwrap();
        assert!(m.at_boundary);
        assert_eq!(m.x, 0.0);
        let m = log_grid_then_golden(|x| (x.ln() - 2.0).powi(2), 0.1, 1e4, 40, 1e-12).unwrap();
        assert!(!m.at_boundary);
        assert!((m.x - 2f64.exp()).abs() < 1e-5);
    }

    #[test]
    fn nonfinite_everywhere_is_a_search_error() {
        assert!(matches!(grid_then_golden(|_| f64::NAN, &[1.0, 2.0, 3.0], 1e-8), Err(Error::Search(_))));
    }

    #[test]
    fn two_dimensional_quadratic() {
        let g = linspace(-3.0, 3.0, 13);
        let m = minimize_2d(|x, y| (x - 0.7).powi(2) + 2.0 * (y + 1.1).powi(2), &g, &g, 1e-12, 10).unwrap();
        assert!((m.x[0] - 0.7).abs() < 1e-5 && (m.x[1] + 1.1).abs() < 1e-5);
    }

    #[test]
    fn spline_reproduces_cubic_interior_and_minimum() {
        let x = linspace(0.0, 4.0, 81);
        let y: Vec<f64> = x.iter().map(|t| (t - 1.7f64).powi(2)).collect();
        let s = CubicSpline::new(&x, &y).unwrap();
        assert!((s.eval(2.025) - 0.325f64.powi(2)).abs() < 1e-6);
        let (t, v) = s.minimum();
        assert!((t - 1.7).abs() < 1e-6 && v.abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn fit_recovers_exact_line(a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let x = linspace(-1.0, 2.0, 7);
            let y: Vec<f64> = x.iter().map(|t| a * t + b).collect();
            let f = linear_fit(&x, &y).unwrap();
            prop_assert!((f.slope - a).abs() < 1e-10 && (f.intercept - b).abs() < 1e-10);
        }

        #[test]
        fn spline_interpolates_knots(ys in proptest::collection::vec(-10.0f64..10.0, 3..12)) {
            let x = linspace(0.0, 1.0, ys.len());
            let s = CubicSpline::new(&x, &ys).unwrap();
            for (t, y) in x.iter().zip(&ys) {
                prop_assert!((s.eval(*t) - y).abs() < 1e-10);
            }
        }
    }
}
