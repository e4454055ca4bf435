//! Dynamical decoupling of the hybrid spin–cavity model.
//!
//! Pulses are instantaneous spin rotations. In the toggling frame a π_x
//! pulse maps `σ_z → −σ_z` and `S₋ ↔ S₊`; the composite π_z is
//! `e^{+i(π/2)σ_x/2} e^{iπσ_y/2} e^{−i(π/2)σ_x/2}` on every spin.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::liouvillian::{cavity_frame, hybrid_ground_state, hybrid_liouvillian, HybridOps, HybridParams, Liouvillian};
use crate::measure::{observe, Observables};
use crate::solver::{evolve_with, EvolveOptions, IntegratorStats, Propagator};
use crate::sparse::CsrMatrix;
use crate::spinspace::DEFAULT_ORACLE_SPINS;
use crate::state::{DensityState, SpinSector};
use crate::{Error, Result};

/// Toggling-frame form of a segment's Hamiltonian, with
/// `D = Σ_k Δ_k σ_z^k/2`, `C = a†S₋ + aS₊`, `C′ = a†S₊ + aS₋`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    /// `D + gC`
    H0,
    /// `−D + gC′`
    H1,
    /// `−D − gC′`
    H2,
    /// `−D`, coupling switched off in the lab frame.
    H1GOff,
}

impl SegmentKind {
    fn coupling_on(self) -> bool {
        self != SegmentKind::H1GOff
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pulse {
    PiX,
    PiY,
    PiZ,
    CompositePiZ,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Fraction of the period.
    pub fraction: f64,
    pub kind: SegmentKind,
    /// Applied at the end of the segment.
    pub pulse: Pulse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub period: f64,
    pub segments: Vec<Segment>,
}

impl PulseSequence {
    /// π_x pulses at half periods. With `switch_g_off` the coupling is off
    /// during the second half.
    pub fn sequence_a(period: f64, switch_g_off: bool) -> Self {
        let second = if switch_g_off { SegmentKind::H1GOff } else { SegmentKind::H1 };
        PulseSequence {
            period,
            segments: vec![
                Segment { fraction: 0.5, kind: SegmentKind::H0, pulse: Pulse::PiX },
                Segment { fraction: 0.5, kind: second, pulse: Pulse::PiX },
            ],
        }
    }

    /// π_x, composite π_z, π_y with waiting times 2:1:1.
    pub fn sequence_b(period: f64) -> Self {
        PulseSequence {
            period,
            segments: vec![
                Segment { fraction: 0.5, kind: SegmentKind::H0, pulse: Pulse::PiX },
                Segment { fraction: 0.25, kind: SegmentKind::H1, pulse: Pulse::CompositePiZ },
                Segment { fraction: 0.25, kind: SegmentKind::H2, pulse: Pulse::PiY },
            ],
        }
    }

    pub fn with_period(&self, period: f64) -> Self {
        PulseSequence { period, segments: self.segments.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) || !self.period.is_finite() {
            return Err(Error::Validation(format!("period must be positive, got {}", self.period)));
        }
        if self.segments.is_empty() {
            return Err(Error::Validation("pulse sequence has no segments".into()));
        }
        if let Some(s) = self.segments.iter().find(|s| !(s.fraction > 0.0)) {
            return Err(Error::Validation(format!("segment fraction {} is not positive", s.fraction)));
        }
        let total: f64 = self.segments.iter().map(|s| s.fraction).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("segment fractions sum to {total}, not 1")));
        }
        Ok(())
    }
}

fn single_site(pulse: Pulse) -> [[C64; 2]; 2] {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    // Basis (|↓⟩, |↑⟩); e^{−iπσ/2} = −iσ.
    let sx = [[z, one], [one, z]];
    let sy = [[z, i], [-i, z]];
    let sz = [[-one, z], [z, one]];
    let rot = |s: [[C64; 2]; 2], theta: f64| -> [[C64; 2]; 2] {
        let (c, sn) = ((0.5 * theta).cos(), (0.5 * theta).sin());
        std::array::from_fn(|r| std::array::from_fn(|k| if r == k { C64::new(c, 0.0) } else { z } - i * sn * s[r][k]))
    };
    let mul = |a: [[C64; 2]; 2], b: [[C64; 2]; 2]| -> [[C64; 2]; 2] {
        std::array::from_fn(|r| std::array::from_fn(|k| a[r][0] * b[0][k] + a[r][1] * b[1][k]))
    };
    let pi = std::f64::consts::PI;
    match pulse {
        Pulse::PiX => rot(sx, pi),
        Pulse::PiY => rot(sy, pi),
        Pulse::PiZ => rot(sz, pi),
        Pulse::CompositePiZ => mul(mul(rot(sx, -0.5 * pi), rot(sy, -pi)), rot(sx, 0.5 * pi)),
        Pulse::None => [[one, z], [z, one]],
    }
}

/// The pulse as a `2^N × 2^N` unitary (site 0 is the most significant bit).
pub fn pulse_unitary(n: usize, pulse: Pulse) -> Mat<C64> {
    let u = single_site(pulse);
    let dim = 1usize << n;
    Mat::from_fn(dim, dim, |r, c| {
        let mut v = C64::new(1.0, 0.0);
        for k in 0..n {
            let bit = n - 1 - k;
            v *= u[r >> bit & 1][c >> bit & 1];
        }
        v
    })
}

fn lift(u: &Mat<C64>, n_fock: usize) -> Mat<C64> {
    let ds = u.nrows();
    Mat::from_fn(ds * n_fock, ds * n_fock, |r, c| if r % n_fock == c % n_fock { u[(r / n_fock, c / n_fock)] } else { C64::new(0.0, 0.0) })
}

fn full_ops(p: &HybridParams, n: usize) -> Result<HybridOps> {
    p.validate(n)?;
    if n > DEFAULT_ORACLE_SPINS {
        return Err(Error::Resource(format!("pulse simulation for N = {n} exceeds the oracle guard")));
    }
    HybridOps::new(SpinSector::Full { n_spins: n }, p.n_cut, cavity_frame(p.r, p.kappa_sqz, p.kappa_int))
}

fn detunings(p: &HybridParams, n: usize) -> Vec<f64> {
    if p.detunings.is_empty() {
        vec![0.0; n]
    } else {
        p.detunings.clone()
    }
}

fn max_abs(m: &Mat<C64>) -> f64 {
    let mut x = 0.0f64;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            x = x.max(m[(r, c)].norm());
        }
    }
    x
}

#[derive(Debug, Clone)]
pub struct AverageHamiltonian {
    /// `Σ_k f_k H̃_k` on the joint spin ⊗ Fock space.
    pub average: Mat<C64>,
    /// `average − (g/2)(a†S₋ + aS₊)`.
    pub residual: Mat<C64>,
    pub residual_norm: f64,
    /// Part of the residual proportional to the detunings.
    pub detuning_residual_norm: f64,
    /// Part of the residual proportional to `g`.
    pub coupling_residual_norm: f64,
}

/// First-order average Hamiltonian of `seq`, computed by conjugating the
/// lab Hamiltonian with the accumulated pulses.
pub fn dd_average_hamiltonian(seq: &PulseSequence, p: &HybridParams, n: usize) -> Result<AverageHamiltonian> {
    seq.validate()?;
    let ops = full_ops(p, n)?;
    let nf = ops.n_fock;
    let dense = |m: &CsrMatrix| m.to_dense();
    let d = dense(&ops.detuning(&detunings(p, n)));
    let c = dense(&ops.coupling(1.0));
    let cp = dense(&ops.counter_coupling(1.0));
    let g = C64::new(p.g, 0.0);
    let dim = d.nrows();
    let mut q = Mat::<C64>::identity(dim, dim);
    let mut avg_d = Mat::<C64>::zeros(dim, dim);
    let mut avg_g = Mat::<C64>::zeros(dim, dim);
    for (k, s) in seq.segments.iter().enumerate() {
        let g_on = if s.kind.coupling_on() { g } else { C64::new(0.0, 0.0) };
        let td = q.adjoint() * &d * &q;
        let tg = q.adjoint() * (&c * faer::Scale(g_on)) * &q;
        let (want_d, want_g) = match s.kind {
            SegmentKind::H0 => (d.clone(), &c * faer::Scale(g)),
            SegmentKind::H1 => (-&d, &cp * faer::Scale(g)),
            SegmentKind::H2 => (-&d, &cp * faer::Scale(-g)),
            SegmentKind::H1GOff => (-&d, Mat::zeros(dim, dim)),
        };
        let mismatch = max_abs(&(&td - &want_d)).max(max_abs(&(&tg - &want_g)));
        if mismatch > 1e-10 * (1.0 + max_abs(&d) + p.g * max_abs(&c)) {
            return Err(Error::Validation(format!("segment {k} toggles to a Hamiltonian other than {:?} (deviation {mismatch:.3e})", s.kind)));
        }
        let f = C64::new(s.fraction, 0.0);
        avg_d += &td * faer::Scale(f);
        avg_g += &tg * faer::Scale(f);
        q = lift(&pulse_unitary(n, s.pulse), nf) * &q;
    }
    // The cycle must close up to a global phase.
    let phase = q[(0, 0)];
    let closure = max_abs(&(&q - Mat::<C64>::identity(dim, dim) * faer::Scale(phase)));
    if closure > 1e-12 || (phase.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Validation(format!("pulse sequence does not return to the lab frame (deviation {closure:.3e})")));
    }
    let coupling_res = &avg_g - &c * faer::Scale(C64::new(0.5 * p.g, 0.0));
    let average = &avg_d + &avg_g;
    let residual = &avg_d + &coupling_res;
    Ok(AverageHamiltonian {
        residual_norm: max_abs(&residual),
        detuning_residual_norm: max_abs(&avg_d),
        coupling_residual_norm: max_abs(&coupling_res),
        average,
        residual,
    })
}

/// Stroboscopic record of a pulsed run.
#[derive(Debug, Clone)]
pub struct DdTrajectory {
    /// Ends of cycles (the first entry is `t = 0`).
    pub times: Vec<f64>,
    pub observables: Vec<Observables>,
    pub final_state: DensityState,
    pub stats: IntegratorStats,
    pub warnings: Vec<String>,
}

impl DdTrajectory {
    pub fn xi2(&self) -> Vec<f64> {
        self.observables.iter().map(|o| o.xi2).collect()
    }
}


/// Lab-frame propagation over `cycles` periods with instantaneous pulses,
/// recording observables at the end of each `record_every`-th cycle.
pub fn simulate_dd(seq: &PulseSequence, p: &HybridParams, n: usize, cycles: usize, record_every: usize, opts: &EvolveOptions) -> Result<DdTrajectory> {
    seq.validate()?;
    let ops = full_ops(p, n)?;
    let mut warnings = vec![];
    for (name, k) in [("kappa_sqz", p.kappa_sqz), ("kappa_int", p.kappa_int)] {
        if k * seq.period > 0.2 {
            warnings.push(format!("{name}·T = {:.3} exceeds 0.2; higher-order terms of the average Hamiltonian matter", k * seq.period));
        }
    }
    let d = ops.detuning(&detunings(p, n));
    let l_on: Liouvillian = hybrid_liouvillian(&ops, p, &ops.coupling(p.g).add(&d));
    let l_off: Liouvillian = hybrid_liouvillian(&ops, p, &d);
    let horizon = seq.period * cycles as f64;
    let mut prop_on = Propagator::new(&l_on, opts, horizon);
    let mut prop_off = Propagator::new(&l_off, opts, horizon);
    let layout = ops.layout();
    let pulses: Vec<Option<Mat<C64>>> = seq.segments.iter().map(|s| (s.pulse != Pulse::None).then(|| lift(&pulse_unitary(n, s.pulse), ops.n_fock))).collect();
    let mut rho = hybrid_ground_state(layout.clone())?;
    let mut v = rho.to_vec();
    let mut times = vec![0.0];
    let mut observables = vec![observe(&rho)?];
    let mut t = 0.0;
    let record_every = record_every.max(1);
    for cycle in 1..=cycles {
        for (s, pulse) in seq.segments.iter().zip(&pulses) {
            let t1 = t + s.fraction * seq.period;
            let prop = if s.kind.coupling_on() { &mut prop_on } else { &mut prop_off };
            prop.advance(&mut v, t, t1)?;
            t = t1;
            if let Some(u) = pulse {
                rho = DensityState::from_vec(layout.clone(), &v)?;
                let b = &rho.blocks()[0];
                let rotated = u * b * u.adjoint();
                rho = DensityState::new(layout.clone(), vec![rotated])?;
                v = rho.to_vec();
            }
        }
        if cycle % record_every == 0 || cycle == cycles {
            rho = DensityState::from_vec(layout.clone(), &v)?;
            crate::liouvillian::check_cutoff(&rho)?;
            times.push(t);
            observables.push(observe(&rho)?);
        }
    }
    let mut stats = prop_on.stats();
    let off = prop_off.stats();
    stats.steps += off.steps;
    stats.rejected += off.rejected;
    stats.rhs_evals += off.rhs_evals;
    stats.factorizations += off.factorizations;
    stats.max_trace_drift = stats.max_trace_drift.max(off.max_trace_drift);
    rho = DensityState::from_vec(layout, &v)?;
    Ok(DdTrajectory { times, observables, final_state: rho, stats, warnings })
}

/// Un-pulsed, resonant evolution at coupling `g/2`: the target of the
/// average Hamiltonian, sampled on `t_grid`.
pub fn dd_reference(p: &HybridParams, n: usize, t_grid: &[f64], opts: &EvolveOptions) -> Result<Vec<Observables>> {
    let q = HybridParams { g: 0.5 * p.g, detunings: vec![], ..p.clone() };
    let ops = full_ops(&q, n)?;
    let l = hybrid_liouvillian(&ops, &q, &ops.coupling(q.g));
    let rho0 = hybrid_ground_state(ops.layout())?;
    Ok(evolve_with(&l, &rho0, t_grid, opts)?.observables)
}
