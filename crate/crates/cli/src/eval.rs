//! Single-point evaluations behind every task.

use serde_json::{json, Map, Value};
use spinsqueeze::analytic::dark_state;
use spinsqueeze::liouvillian::{
    adiabatic_rates, build_collective, build_hybrid, build_spin_model, cavity_occupation, fock_cutoff, heating_reservoir,
    hybrid_ground_state, CollectiveRates, HybridParams, Liouvillian, ModelParams,
};
use spinsqueeze::meanfield::{cumulant_steady, cumulant_trajectory, CumulantState, MeanFieldOptions};
use spinsqueeze::measure::{observe, sy_distribution, Observables};
use spinsqueeze::oat::{equator_state, oat_transient, OatParams};
use spinsqueeze::protocols::{sensing_trajectory, simulate_dd, LossSchedule, PulseSequence};
use spinsqueeze::solver::{
    dissipative_gap, evolve_with, jspace_rate_matrix, steady_state_from_with, steady_state_with, steady_state_y_frame, EvolveOptions, SteadyOptions,
};
use spinsqueeze::spinspace::{dicke_space, DickeSpace, SpinFrame};
use spinsqueeze::state::{DensityState, Layout};
use spinsqueeze::{Error, Half, Result};

use crate::config::{GapMethod, ModelConfig, ModelKind, Objective, ProtocolKind, RunConfig, Tolerances};

/// The fixed numeric columns of every CSV row. `NaN` marks "not computed".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Values {
    pub xi2: f64,
    pub purity: f64,
    pub sz: f64,
    pub sy2: f64,
    pub sx2: f64,
    pub gap: f64,
}

impl Values {
    pub const EMPTY: Values = Values { xi2: f64::NAN, purity: f64::NAN, sz: f64::NAN, sy2: f64::NAN, sx2: f64::NAN, gap: f64::NAN };

    pub fn from_observables(o: &Observables) -> Self {
        Values { xi2: o.xi2, purity: o.purity, sz: o.sz, sy2: o.sy2, sx2: o.sx2, gap: f64::NAN }
    }

    fn from_cumulants(s: &CumulantState, n: f64) -> Self {
        Values { xi2: s.xi2(n), purity: f64::NAN, sz: s.sz, sy2: s.sy2, sx2: s.sx2, gap: f64::NAN }
    }

    pub fn objective(&self, obj: Objective) -> f64 {
        match obj {
            Objective::Xi2 => self.xi2,
            Objective::Sy2 | Objective::EvenoddRatio => self.sy2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Point {
    pub values: Values,
    pub extra: Map<String, Value>,
}

impl Point {
    fn new(values: Values) -> Self {
        Point { values, extra: Map::new() }
    }
}

/// JSON number, or the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::String(crate::output::fmt_f64(v))
    }
}

/// Options that apply to every point of a run.
#[derive(Debug, Clone)]
pub struct Settings {
    pub tol: Tolerances,
    pub seed: u64,
    pub compute_gap: bool,
    pub gap_method: GapMethod,
    pub sy_distribution: bool,
    pub rate_matrix: bool,
}

impl Settings {
    pub fn from_config(c: &RunConfig) -> Self {
        Settings {
            tol: c.tolerances.clone(),
            seed: c.seed,
            compute_gap: c.compute_gap,
            gap_method: c.gap_method,
            sy_distribution: c.sy_distribution,
            rate_matrix: c.rate_matrix,
        }
    }

    fn steady_opts(&self) -> SteadyOptions {
        SteadyOptions { residual_tol: self.tol.steady_residual, seed: self.seed, ..Default::default() }
    }

    fn evolve_opts(&self) -> EvolveOptions {
        EvolveOptions { rtol: self.tol.rtol, atol: self.tol.atol, integrator: self.tol.integrator, ..Default::default() }
    }
}

/// Spin-model rates implied by a configuration, including the cavity and
/// heating conveniences.
pub fn model_params(m: &ModelConfig) -> Result<ModelParams> {
    let mut p = ModelParams {
        gamma: m.gamma(),
        r: m.r(),
        n_th: m.rate("n_th"),
        gamma_coll: m.rate("gamma_coll"),
        gamma_phi: m.rate("gamma_phi"),
        gamma_rel: m.rate("gamma_rel"),
        gamma_up: m.rate("gamma_up"),
    };
    if m.kind == ModelKind::Spin {
        if let Some(g) = m.g {
            let (gamma, gamma_coll) = adiabatic_rates(g, m.rate("kappa_sqz"), m.rate("kappa_int"))?;
            p.gamma = gamma;
            p.gamma_coll += gamma_coll;
        }
    }
    if let Some(heat) = m.gamma_heat {
        match m.kind {
            ModelKind::Thermal => {
                let (rt, n_th) = heating_reservoir(p.r, heat)?;
                p.r = rt;
                p.n_th = n_th;
            }
            _ => {
                p.gamma_coll += heat * p.gamma;
                p.gamma_up += heat * p.gamma;
            }
        }
    }
    p.validate()?;
    Ok(p)
}

fn hybrid_params(m: &ModelConfig) -> HybridParams {
    let (g, ks, ki, r) = (m.rate("g"), m.rate("kappa_sqz"), m.rate("kappa_int"), m.r());
    HybridParams {
        g,
        kappa_sqz: ks,
        kappa_int: ki,
        r,
        n_cut: m.n_cut.unwrap_or_else(|| fock_cutoff(r, ks, ki)),
        detunings: m.detunings.clone().unwrap_or_default(),
        gamma_phi: m.rate("gamma_phi"),
        gamma_rel: m.rate("gamma_rel"),
    }
}

fn oat_params(m: &ModelConfig) -> OatParams {
    OatParams { g: m.rate("g"), kappa_int: m.rate("kappa_int"), gamma_rel: m.rate("gamma_rel"), delta_c: m.rate("delta_c") }
}

/// Beyond this squeezing parameter collective steady states are solved with
/// `S_y` diagonal; the lab-basis generator loses the slow dynamics to
/// rounding there.
const Y_FRAME_ABOVE_R: f64 = 2.0;

fn collective_generator(m: &ModelConfig, frame: SpinFrame) -> Result<Liouvillian> {
    let space = dicke_space(m.n)?;
    let rates = match m.kind {
        ModelKind::General => CollectiveRates { gamma: m.gamma(), gamma_p: m.rate("gamma_p"), gamma_down: m.rate("gamma_coll"), gamma_up: m.rate("gamma_up") },
        _ => {
            let p = model_params(m)?;
            CollectiveRates::thermal(p.gamma, p.n_th)
        }
    };
    build_collective(&space, space.j_max(), &rates, m.r(), frame)
}

/// Liouvillian and initial state (all spins down) for the density-matrix
/// models.
fn generator(m: &ModelConfig) -> Result<(Liouvillian, DensityState)> {
    let top = |space: &DickeSpace| -> Result<DensityState> {
        let j = space.j_max();
        let mut psi = vec![spinsqueeze::C64::new(0.0, 0.0); j.dim()];
        psi[0] = spinsqueeze::C64::new(1.0, 0.0);
        DensityState::pure(Layout::dicke_single(m.n, j), 0, &psi)
    };
    match m.kind {
        ModelKind::Ideal | ModelKind::Thermal | ModelKind::General => Ok((collective_generator(m, SpinFrame::Lab)?, top(&dicke_space(m.n)?)?)),
        ModelKind::Spin => {
            let space = dicke_space(m.n)?;
            let p = model_params(m)?;
            Ok((build_spin_model(&space, &p)?, space.ground_state()))
        }
        ModelKind::Hybrid => {
            let l = build_hybrid(&hybrid_params(m), m.n)?;
            let rho0 = hybrid_ground_state(l.layout().clone())?;
            Ok((l, rho0))
        }
        ModelKind::Oat => {
            let space = dicke_space(m.n)?;
            Ok((spinsqueeze::oat::build_oat(&space, &oat_params(m))?, equator_state(&space)?))
        }
        ModelKind::Meanfield | ModelKind::Protocol => Err(Error::Domain(format!("model `{}` has no single Liouvillian", m.kind.name()))),
    }
}

fn gap_value(m: &ModelConfig, l: Option<&Liouvillian>, s: &Settings, extra: &mut Map<String, Value>) -> Result<f64> {
    match s.gap_method {
        GapMethod::RateMatrix => {
            let space = dicke_space(m.n)?;
            let rm = jspace_rate_matrix(&space, m.r(), m.rate("gamma_phi"))?;
            let gap = rm.gap()?;
            extra.insert("decay_rate".into(), num(2.0 * m.rate("gamma_phi") * gap));
            if s.rate_matrix {
                extra.insert("rate_matrix_js".into(), json!(rm.js.iter().map(|j| j.value()).collect::<Vec<f64>>()));
                extra.insert("rate_matrix".into(), json!(rm.matrix));
            }
            Ok(gap)
        }
        GapMethod::Arnoldi => match l {
            Some(l) => dissipative_gap(l),
            None => dissipative_gap(&generator(m)?.0),
        },
    }
}

/// Steady-state observables. For the twisting model this is the transient
/// optimum instead.
pub fn steady(m: &ModelConfig, s: &Settings) -> Result<Point> {
    match m.kind {
        ModelKind::Meanfield => {
            let p = model_params(m)?;
            let d = MeanFieldOptions::default();
            let opts = MeanFieldOptions { method: m.method.unwrap_or(d.method), linearize: m.linearize.unwrap_or(false), ..d };
            let res = cumulant_steady(&p, m.n, &opts)?;
            let mut pt = Point::new(Values::from_cumulants(&res.state, m.n as f64));
            pt.values.xi2 = res.xi2;
            pt.extra.insert("residual".into(), num(res.residual));
            pt.extra.insert("physical".into(), json!(res.physical));
            pt.extra.insert("czz".into(), num(res.state.czz));
            Ok(pt)
        }
        ModelKind::Oat => {
            let p = oat_params(m);
            let tr = oat_transient(m.n, &p, None, 120)?;
            let (l, rho0) = generator(m)?;
            let traj = evolve_with(&l, &rho0, &[0.0, tr.t_opt], &s.evolve_opts())?;
            let mut pt = Point::new(Values::from_observables(&traj.observables[1]));
            pt.values.xi2 = tr.xi2_min.min(pt.values.xi2);
            pt.extra.insert("t_opt".into(), num(tr.t_opt));
            pt.extra.insert("chi".into(), num(p.chi()));
            if s.compute_gap {
                pt.values.gap = gap_value(m, Some(&l), s, &mut pt.extra)?;
            }
            Ok(pt)
        }
        ModelKind::Protocol => Err(Error::Domain("protocol models only support time evolution".into())),
        _ => {
            let (l, rho0) = generator(m)?;
            let opts = s.steady_opts();
            let rep = match m.kind {
                ModelKind::Spin => steady_state_from_with(&l, &rho0, &opts)?,
                ModelKind::Ideal | ModelKind::Thermal | ModelKind::General if m.r().abs() > Y_FRAME_ABOVE_R => {
                    steady_state_y_frame(&collective_generator(m, SpinFrame::YDiagonal)?, &opts)?
                }
                _ => steady_state_with(&l, &opts)?,
            };
            let mut pt = Point::new(Values::from_observables(&observe(&rep.state)?));
            pt.extra.insert("residual".into(), num(rep.residual));
            pt.extra.insert("min_eigenvalue".into(), num(rep.min_eigenvalue));
            if m.kind == ModelKind::Hybrid {
                pt.extra.insert("cavity_occupation".into(), num(cavity_occupation(&rep.state)?));
            }
            if s.sy_distribution {
                let d = sy_distribution(&rep.state)?;
                pt.extra.insert("sy_distribution".into(), json!(d.iter().map(|(m, p)| [m.value(), *p]).collect::<Vec<_>>()));
            }
            if s.compute_gap {
                pt.values.gap = gap_value(m, Some(&l), s, &mut pt.extra)?;
            }
            Ok(pt)
        }
    }
}

/// Only the dissipative gap.
pub fn gap(m: &ModelConfig, s: &Settings) -> Result<Point> {
    let mut pt = Point::new(Values::EMPTY);
    pt.values.gap = gap_value(m, None, s, &mut pt.extra)?;
    Ok(pt)
}

/// Observables along a time grid, starting from all spins down (equator for
/// the twisting model). Returns `(t, point)` pairs.
pub fn evolve(m: &ModelConfig, times: &[f64], s: &Settings) -> Result<Vec<(f64, Point)>> {
    match m.kind {
        ModelKind::Meanfield => {
            let p = model_params(m)?;
            let n = m.n as f64;
            let traj = cumulant_trajectory(&p, m.n, CumulantState::polarized(n), times)?;
            Ok(times.iter().zip(traj).map(|(&t, c)| (t, Point::new(Values::from_cumulants(&c, n)))).collect())
        }
        ModelKind::Protocol => evolve_protocol(m, times, s),
        _ => {
            let (l, rho0) = generator(m)?;
            let traj = evolve_with(&l, &rho0, times, &s.evolve_opts())?;
            Ok(traj.times.iter().zip(&traj.observables).map(|(&t, o)| (t, Point::new(Values::from_observables(o)))).collect())
        }
    }
}

fn evolve_protocol(m: &ModelConfig, times: &[f64], s: &Settings) -> Result<Vec<(f64, Point)>> {
    let kind = m.protocol.ok_or_else(|| Error::Domain("protocol kind missing".into()))?;
    match kind {
        ProtocolKind::Sensing => {
            let schedule = LossSchedule { times: m.loss_times.clone().unwrap_or_default(), seed: s.seed };
            let traj = sensing_trajectory(m.n, m.gamma(), m.r(), &schedule, times)?;
            let mut out = Vec::with_capacity(traj.times.len());
            for k in 0..traj.times.len() {
                let mut pt = Point::new(Values { sy2: traj.sy2[k], ..Values::EMPTY });
                pt.extra.insert("n_spins".into(), json!(traj.n_spins[k]));
                out.push((traj.times[k], pt));
            }
            Ok(out)
        }
        ProtocolKind::DdA | ProtocolKind::DdB => {
            let period = m.period.ok_or_else(|| Error::Domain("decoupling needs `period`".into()))?;
            let seq = match kind {
                ProtocolKind::DdA => PulseSequence::sequence_a(period, m.switch_g_off.unwrap_or(false)),
                _ => PulseSequence::sequence_b(period),
            };
            let t_final = times.last().copied().unwrap_or(period);
            let cycles = m.cycles.unwrap_or_else(|| (t_final / period).ceil().max(1.0) as usize);
            let record_every = (cycles / times.len().saturating_sub(1).max(1)).max(1);
            let traj = simulate_dd(&seq, &hybrid_params(m), m.n, cycles, record_every, &s.evolve_opts())?;
            let mut out: Vec<(f64, Point)> = traj.times.iter().zip(&traj.observables).map(|(&t, o)| (t, Point::new(Values::from_observables(o)))).collect();
            if let Some((_, last)) = out.last_mut() {
                if !traj.warnings.is_empty() {
                    last.extra.insert("warnings".into(), json!(traj.warnings));
                }
            }
            Ok(out)
        }
    }
}

/// `‖Σ[r] ψ_dark‖` and the steady-state fidelity with the dark state, for
/// even `N` on the ideal model.
pub fn dark_state_check(n: usize, r: f64) -> Result<(f64, f64)> {
    let j = Half::from_twice(n as i32);
    let ds = dark_state(n, j, r)?;
    let ops = spinsqueeze::spinspace::CollectiveOps::spin(j);
    let sigma = ops.sigma(r);
    let psi = ds.amplitudes();
    let mut norm2 = 0.0;
    for i in 0..psi.len() {
        let mut acc = spinsqueeze::C64::new(0.0, 0.0);
        for k in 0..psi.len() {
            acc += sigma[(i, k)] * psi[k];
        }
        norm2 += acc.norm_sqr();
    }
    let space = dicke_space(n)?;
    let rho = spinsqueeze::solver::steady_state(&spinsqueeze::liouvillian::build_ideal(&space, j, 1.0, r)?)?;
    let b = &rho.blocks()[0];
    let mut fid = spinsqueeze::C64::new(0.0, 0.0);
    for a in 0..psi.len() {
        for c in 0..psi.len() {
            fid += psi[a].conj() * b[(a, c)] * psi[c];
        }
    }
    Ok((norm2.sqrt(), fid.re))
}
