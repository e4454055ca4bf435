//! The fifteen acceptance criteria. Each prints one line; the test fails if
//! any criterion fails. `ACCEPTANCE_ONLY=2,5` restricts the run to a subset.

use std::error::Error;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinsqueeze::liouvillian::{
    adiabatic_rates, build_collective_all_blocks, build_full_oracle, build_general_collective, build_hybrid_with, build_spin_model,
    hybrid_ground_state, map_to_effective_reservoir, reduce_to_spins, HybridParams, HybridSpins, ModelParams,
};
use spinsqueeze::measure::{observe, spin_moments, wineland, Observables};
use spinsqueeze::meanfield::optimize_kappa_sqz;
use spinsqueeze::oat::{optimize_dissipative, optimize_oat, OatParams};
use spinsqueeze::optim::{linspace, logspace, loglog_fit};
use spinsqueeze::protocols::{dd_average_hamiltonian, dd_reference, remove_spin, sensing_trajectory, settle_time, simulate_dd, LossSchedule, PulseSequence};
use spinsqueeze::solver::{evolve_with, jspace_rate_matrix, steady_state, steady_state_from, EvolveOptions, Integrator};
use spinsqueeze::spinspace::{dicke_space, DickeEmbedding};
use spinsqueeze::state::DensityState;
use spinsqueeze_cli::eval::dark_state_check;
use spinsqueeze_cli::{execute, resolve, RunConfig, Table};

type Res<T> = Result<T, Box<dyn Error>>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Res<Outcome> {
    Ok(Outcome { pass, detail })
}

fn table(toml: &str) -> Res<Table> {
    let c = resolve(RunConfig::from_toml_str(toml)?)?;
    Ok(execute(&c)?.remove(0))
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn c1_dark_state() -> Res<Outcome> {
    let (mut res, mut fid) = (0.0f64, 1.0f64);
    for n in (2..=40).step_by(2) {
        for r in [0.5, 1.0, 2.0, 4.0] {
            let (a, f) = dark_state_check(n, r)?;
            res = res.max(a);
            fid = fid.min(f);
        }
    }
    outcome(res <= 1e-10 && fid >= 1.0 - 1e-8, format!("max |Σψ| = {res:.1e}, min fidelity = 1 - {:.1e}", 1.0 - fid))
}

fn steady_point(kind: &str, n: usize, r: f64) -> Res<Table> {
    table(&format!("task = \"steady\"\n[model]\nkind = \"{kind}\"\nn = {n}\nr = {r}\n"))
}

fn c2_heisenberg() -> Res<Outcome> {
    let t = steady_point("ideal", 200, 6.0)?;
    let xi2 = t.rows[0].values.xi2;
    let target = 2.0 / 202.0;
    outcome(t.rows[0].is_ok() && rel(xi2, target) <= 0.02, format!("xi2 = {xi2:.6e}, 2/(N+2) = {target:.6e}"))
}

fn c3_odd() -> Res<Outcome> {
    let t = steady_point("ideal", 201, 6.0)?;
    let v = t.rows[0].values;
    let sy2_target = 201.0 / std::f64::consts::PI.powi(2);
    let state_ok = t.rows[0].is_ok() && rel(v.purity, 1.0 / 3.0) <= 0.05 && rel(v.sy2, sy2_target) <= 0.10 && !(v.xi2 <= 1.0);
    let opt = table(
        r#"
task = "optimize"
[model]
kind = "ideal"
n = 21
[[sweep]]
param = "n"
grid = { kind = "list", values = [21, 51, 101] }
[optimize]
objective = "xi2"
axes = [{ param = "r", lo = 0.0, hi = 4.0, points = 17 }]
"#,
    )?;
    let ratios: Vec<f64> = opt.rows.iter().zip(opt.column("n")).map(|(r, n)| r.values.xi2 * (n + 2.0) / 2.0).collect();
    let ratio_ok = opt.failed() == 0 && ratios.iter().all(|x| (2.0..=3.5).contains(x));
    outcome(
        state_ok && ratio_ok,
        format!("N=201: purity {:.4}, Sy2 {:.3} (201/pi^2 = {sy2_target:.3}), xi2 {:.2e}; xi2/(2/(N+2)) = {ratios:.3?}", v.purity, v.sy2, v.xi2),
    )
}

fn c4_onset() -> Res<Outcome> {
    let small = [0.1, 0.2, 0.3, 0.5 * 2f64.ln()];
    let large = 0.5 * 100f64.ln();
    let rs: Vec<String> = small.iter().chain([&large]).map(|r| format!("{r}")).collect();
    let t = table(&format!(
        "task = \"sweep\"\n[model]\nkind = \"ideal\"\nn = 20\n[[sweep]]\nparam = \"n\"\ngrid = {{ kind = \"list\", values = [20, 21] }}\n[[sweep]]\nparam = \"r\"\ngrid = {{ kind = \"list\", values = [{}] }}\n",
        rs.join(", ")
    ))?;
    let k = small.len() + 1;
    let ratios: Vec<f64> = (0..k).map(|i| t.rows[k + i].values.xi2 / t.rows[i].values.xi2).collect();
    let near = ratios[..small.len()].iter().fold(0.0f64, |m, x| m.max((x - 1.0).abs()));
    let far = ratios[small.len()];
    outcome(t.failed() == 0 && near <= 0.05 && far > 10.0, format!("max |ratio - 1| for e^2r <= 2: {near:.4}; ratio at e^2r = 100: {far:.3e}"))
}

fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    ModelParams {
        gamma: rng.random_range(0.2..1.5),
        r: rng.random_range(0.0..1.5),
        n_th: rng.random_range(0.0..0.5),
        gamma_coll: rng.random_range(0.0..0.5),
        gamma_phi: rng.random_range(0.05..0.5),
        gamma_rel: rng.random_range(0.05..0.5),
        gamma_up: rng.random_range(0.0..0.3),
    }
}

fn obs_diff(a: &Observables, b: &Observables) -> f64 {
    [a.sx - b.sx, a.sy - b.sy, a.sz - b.sz, a.sx2 - b.sx2, a.sy2 - b.sy2, a.sz2 - b.sz2].iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn c5_oracle() -> Res<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut steady_err, mut traj_err) = (0.0f64, 0.0f64);
    let opts = EvolveOptions { rtol: 1e-10, atol: 1e-12, ..Default::default() };
    for n in 2..=5 {
        let emb = DickeEmbedding::new(n)?;
        for _ in 0..10 {
            let p = random_params(&mut rng);
            let ld = build_spin_model(emb.space(), &p)?;
            let lf = build_full_oracle(n, &p)?;
            let rho0 = emb.space().ground_state();
            let sd = observe(&steady_state_from(&ld, &rho0)?)?;
            let sf = observe(&steady_state(&lf)?)?;
            steady_err = steady_err.max(obs_diff(&sd, &sf));
            let grid = linspace(0.0, 10.0 / p.gamma, 11);
            let td = evolve_with(&ld, &rho0, &grid, &opts)?;
            let tf = evolve_with(&lf, &emb.embed(&rho0)?, &grid, &opts)?;
            for (a, b) in td.observables.iter().zip(&tf.observables) {
                traj_err = traj_err.max(obs_diff(a, b));
            }
        }
    }
    outcome(steady_err <= 1e-8 && traj_err <= 1e-6, format!("40 draws: steady {steady_err:.1e}, trajectory {traj_err:.1e}"))
}

fn c6_adiabatic() -> Res<Outcome> {
    let n = 4;
    let (kappa_sqz, kappa_int, r) = (1.0, 0.25, 1.0);
    let g = 0.05 * (kappa_sqz + kappa_int) / (n as f64).sqrt();
    let hp = HybridParams::new(g, kappa_sqz, kappa_int, r);
    let l = build_hybrid_with(&hp, n, HybridSpins::Collective)?;
    let hybrid = wineland(&reduce_to_spins(&steady_state_from(&l, &hybrid_ground_state(l.layout().clone())?)?)?)?;
    let (gamma, gamma_coll) = adiabatic_rates(g, kappa_sqz, kappa_int)?;
    let space = dicke_space(n)?;
    let adiab = wineland(&steady_state_from(&build_spin_model(&space, &ModelParams { gamma, r, gamma_coll, ..Default::default() })?, &space.ground_state())?)?;
    outcome(rel(hybrid, adiab) <= 0.05, format!("n_cut {}: hybrid xi2 {hybrid:.5}, adiabatic {adiab:.5}, deviation {:.2}%", hp.n_cut, 100.0 * rel(hybrid, adiab)))
}

fn c7_cooperativity() -> Res<Outcome> {
    let (big_g, kappa_int, n) = (10.0, 100.0, 1e12);
    let cs = logspace(1e2, 1e6, 9);
    let mut xi = vec![];
    let mut kappa_dev = f64::NAN;
    for &c in &cs {
        let gamma_rel = 4.0 * big_g * big_g / (kappa_int * c);
        let k = optimize_kappa_sqz(big_g, kappa_int, gamma_rel, n)?;
        xi.push(k.xi2_opt);
        if (c - 1e4).abs() < 1e-6 {
            kappa_dev = rel(k.kappa_opt, kappa_int * c.sqrt());
        }
    }
    let slope = loglog_fit(&cs, &xi)?.slope;
    outcome((slope + 0.5).abs() <= 0.03 && kappa_dev <= 0.05, format!("slope {slope:.4}; kappa_opt vs kappa_int sqrt(C_rel) at 1e4: {:.2}%", 100.0 * kappa_dev))
}

fn c8_fig5() -> Res<Outcome> {
    let ns = [4usize, 6, 8, 10, 14, 18, 22, 26, 30];
    let (g, kappa_int, gamma_rel) = (1.0, 100.0, 0.02);
    let (mut d, mut o) = (vec![], vec![]);
    for &n in &ns {
        d.push(optimize_dissipative(n, g, kappa_int, gamma_rel)?.xi2);
        o.push(optimize_oat(n, &OatParams { g, kappa_int, gamma_rel, delta_c: 0.0 }, 16)?.xi2_min);
    }
    let beats = ns.iter().zip(d.iter().zip(&o)).all(|(&n, (a, b))| n < 6 || a < b);
    let x: Vec<f64> = ns[4..].iter().map(|&n| n as f64).collect();
    let sd = loglog_fit(&x, &d[4..])?.slope;
    let so = loglog_fit(&x, &o[4..])?.slope;
    outcome(
        beats && (sd + 0.5).abs() <= 0.15 && (so + 1.0 / 3.0).abs() <= 0.15,
        format!("dissipative below OAT for N >= 6: {beats}; slopes {sd:.3} (dissipative), {so:.3} (OAT)"),
    )
}

fn c9_prethermal() -> Res<Outcome> {
    let n = 50;
    let space = dicke_space(n)?;
    let noisy = ModelParams { r: 1.0, gamma_phi: 0.005, ..Default::default() };
    let ideal = observe(&steady_state(&build_general_collective(&space, space.j_max(), 1.0, 0.0, 0.0, 0.0, 1.0)?)?)?.xi2;
    let l = build_spin_model(&space, &noisy)?;
    let opts = EvolveOptions { integrator: Integrator::Sdirk3, ..Default::default() };
    let grid: Vec<f64> = std::iter::once(0.0).chain(logspace(1e-2, 2000.0, 61)).collect();
    let traj = evolve_with(&l, &space.ground_state(), &grid, &opts)?;
    let transient = traj.xi2().into_iter().fold(f64::INFINITY, f64::min);
    let steady = wineland(&steady_state_from(&l, &space.ground_state())?)?;
    let with_rel = wineland(&steady_state_from(&build_spin_model(&space, &ModelParams { gamma_rel: 0.001, ..noisy })?, &space.ground_state())?)?;
    let dyn_ok = rel(transient, ideal) <= 0.25 && steady >= 0.5 && steady / with_rel >= 2.0;

    let gap = |n: usize, r: f64| -> Res<f64> { Ok(jspace_rate_matrix(&dicke_space(n)?, r, 1.0)?.gap()?) };
    let g0 = gap(n, 0.0)?;
    let g6 = gap(16, 6.0)?;
    let ns = [32usize, 48, 64, 96, 128];
    let gs = ns.iter().map(|&k| gap(k, 1.0)).collect::<Res<Vec<f64>>>()?;
    let x: Vec<f64> = ns.iter().map(|&k| k as f64).collect();
    let slope = loglog_fit(&x, &gs)?.slope;
    let rate_ok = (g0 - 1.0 / n as f64).abs() <= 1e-10 && rel(g6, 0.5) <= 0.05 && (slope + 1.0).abs() <= 0.05;
    outcome(
        dyn_ok && rate_ok,
        format!(
            "transient min {transient:.4} vs ideal {ideal:.4}; steady {steady:.4}, with gamma_rel {with_rel:.4}; gaps: r=0 {:.1e} off 1/N, r=6 N=16 {g6:.4}, r=1 exponent {slope:.4}",
            (g0 - 1.0 / n as f64).abs()
        ),
    )
}

fn c10_mapping() -> Res<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(2..=8);
        let (g, gp, gd, gu, r) = (rng.random_range(0.5..1.5), rng.random_range(0.0..0.3), rng.random_range(0.0..0.4), rng.random_range(0.0..0.2), rng.random_range(0.1..1.5));
        let space = dicke_space(n)?;
        let j = space.j_max();
        let general = steady_state(&build_general_collective(&space, j, g, gp, gd, gu, r)?)?;
        let m = map_to_effective_reservoir(g, gp, gd, gu, r)?;
        let mapped = steady_state(&build_general_collective(&space, j, m.gamma, m.gamma_p, 0.0, 0.0, m.r)?)?;
        worst = worst.max(general.trace_distance(&mapped)?);
    }
    outcome(worst <= 1e-8, format!("max trace distance {worst:.1e}"))
}

fn thermal_optimum(n: usize, n_th: f64) -> Res<(f64, f64, f64, bool)> {
    let t = table(&format!(
        "task = \"optimize\"\n[model]\nkind = \"thermal\"\nn = {n}\nn_th = {n_th}\n[optimize]\nobjective = \"xi2\"\naxes = [{{ param = \"r\", lo = 0.0, hi = 3.0, points = 13 }}]\n"
    ))?;
    let row = &t.rows[0];
    if !row.is_ok() {
        return Err(row.status.clone().into());
    }
    let interior = row.extra["at_boundary"] == serde_json::Value::Bool(false);
    Ok((t.column("r")[0], row.values.xi2, row.values.purity, interior))
}

fn c11_thermal() -> Res<Outcome> {
    let n = 200;
    let mut ok = true;
    let mut parts = vec![];
    let mut scaled = vec![];
    for n_th in [0.01, 0.1, 0.5] {
        let (r, xi2, purity, interior) = thermal_optimum(n, n_th)?;
        let target = 1.0 / (2.0 * n_th + 1.0);
        ok &= interior && rel(purity, target) <= 0.10;
        scaled.push(xi2 * (n as f64 + 2.0) / 2.0);
        parts.push(format!("n_th {n_th}: r_opt {r:.3}, purity {purity:.4} (target {target:.4})"));
    }
    ok &= scaled.windows(2).all(|w| w[1] > w[0]);
    let ns = [50usize, 100, 200];
    let mut e2r = vec![];
    for &k in &ns {
        e2r.push((2.0 * thermal_optimum(k, 0.1)?.0).exp());
    }
    let x: Vec<f64> = ns.iter().map(|&k| k as f64).collect();
    let slope = loglog_fit(&x, &e2r)?.slope;
    ok &= (slope - 0.75).abs() <= 0.15;
    outcome(ok, format!("{}; xi2/(2/(N+2)) {scaled:.3?}; e^2r_opt exponent {slope:.3}", parts.join("; ")))
}

fn c12_trapped_ion() -> Res<Outcome> {
    let t = table(
        r#"
task = "optimize"
[model]
kind = "thermal"
n = 8
gamma_heat = 0.017
[optimize]
objective = "evenodd_ratio"
axes = [{ param = "r", lo = 0.0, hi = 12.0, points = 13, scale = "db" }]
"#,
    )?;
    let ratio = t.rows[0].extra.get("evenodd_ratio").and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
    outcome(t.failed() == 0 && (ratio - 1.0).abs() >= 0.2, format!("min Sy2 ratio N=8 / N=9 = {ratio:.4}"))
}

fn c13_decoupling() -> Res<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut residual = 0.0f64;
    for n in 2..=4 {
        for _ in 0..5 {
            let mut p = HybridParams::new(1.0, 1.0, 0.0, 0.5);
            p.n_cut = 6;
            p.detunings = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let avg = dd_average_hamiltonian(&PulseSequence::sequence_b(rng.random_range(0.01..1.0)), &p, n)?;
            residual = residual.max(avg.detuning_residual_norm);
        }
    }
    let n = 2;
    let mut p = HybridParams::new(1.0, 1.0, 0.0, 0.5);
    p.n_cut = 8;
    p.detunings = vec![0.3, -0.3];
    let t_final = 20.0;
    let opts = EvolveOptions::default();
    let reference = dd_reference(&p, n, &[0.0, t_final], &opts)?[1].xi2;
    let mut errs = vec![];
    for period in [0.025, 0.0125, 0.00625, 0.003125] {
        let cycles = (t_final / period).round() as usize;
        let traj = simulate_dd(&PulseSequence::sequence_b(period), &p, n, cycles, cycles, &opts)?;
        errs.push((traj.observables.last().ok_or("empty trajectory")?.xi2 - reference).abs());
    }
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    outcome(residual <= 1e-12 && monotone, format!("average-Hamiltonian residual {residual:.1e}; |xi2 - reference| over halvings [{}]", errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", ")))
}

/// `⟨S_y²⟩` of the steady state that follows each loss, computed by direct
/// solves on the reduced states.
fn loss_targets(n0: usize, schedule: &LossSchedule) -> Res<Vec<f64>> {
    let p = ModelParams::ideal(1.0, 1.0);
    let space = dicke_space(n0)?;
    let mut rho = steady_state_from(&build_collective_all_blocks(&space, &p)?, &space.ground_state())?;
    let mut out = vec![];
    let mut n = n0;
    for site in schedule.sites(n0) {
        let reduced = remove_spin(&DickeEmbedding::new(n)?.embed(&rho)?, site)?;
        n -= 1;
        let space = dicke_space(n)?;
        let start: DensityState = DickeEmbedding::new(n)?.project(&reduced)?;
        rho = steady_state_from(&build_collective_all_blocks(&space, &p)?, &start)?;
        out.push(spin_moments(&rho)?.second[1][1]);
    }
    Ok(out)
}

fn c14_sensing() -> Res<Outcome> {
    // Even N relaxes at 2e^{−2r}Γ for every N, so reaching 1e−6 takes ~50/Γ.
    let spacing = 100.0;
    let schedule = LossSchedule { times: vec![spacing, 2.0 * spacing, 3.0 * spacing], seed: 7 };
    let grid = linspace(0.0, 4.0 * spacing, 4001);
    let mut ok = true;
    let mut cs = vec![];
    for n0 in [4usize, 6, 8] {
        let traj = sensing_trajectory(n0, 1.0, 1.0, &schedule, &grid)?;
        let targets = loss_targets(n0, &schedule)?;
        let mut c_max = 0.0f64;
        for (k, (&t_loss, &target)) in schedule.times.iter().zip(&targets).enumerate() {
            let t_end = schedule.times.get(k + 1).copied().unwrap_or(4.0 * spacing);
            let idx: Vec<usize> = (0..traj.times.len()).filter(|&i| traj.times[i] >= t_loss && traj.times[i] < t_end).collect();
            let ts: Vec<f64> = idx.iter().map(|&i| traj.times[i]).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| traj.sy2[i]).collect();
            match settle_time(&ts, &ys, t_loss, target, 1e-6) {
                Some(t) => c_max = c_max.max(t - t_loss),
                None => ok = false,
            }
        }
        cs.push(c_max);
    }
    // One bound for every N0, and no growth with N0.
    let c = cs.iter().fold(0.0f64, |m, &x| m.max(x));
    ok &= c < spacing && cs.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    outcome(ok, format!("settling time per N0 in {{4, 6, 8}}: {cs:.2?}, common bound c = {c:.2} (units 1/Gamma)"))
}

fn preset_csvs(preset: &str, workers: usize, dir: &Path) -> Res<Vec<(String, Vec<u8>)>> {
    let st = Command::new(env!("CARGO_BIN_EXE_spinsqueeze"))
        .args(["preset", preset, "--seed", "11", "--workers", &workers.to_string(), "--out"])
        .arg(dir)
        .output()?;
    if !st.status.success() {
        return Err(format!("preset {preset} exited with {}", st.status).into());
    }
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .map(|e| Ok((e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path())?)))
        .collect::<Res<_>>()?;
    files.sort();
    Ok(files)
}

fn c15_determinism() -> Res<Outcome> {
    let dir = tempfile::tempdir()?;
    let a = preset_csvs("fig2", 1, &dir.path().join("a"))?;
    let b = preset_csvs("fig2", 2, &dir.path().join("b"))?;
    outcome(!a.is_empty() && a == b, format!("{} CSV files compared byte for byte, workers 1 vs 2", a.len()))
}

type Criterion = fn() -> Res<Outcome>;

const CRITERIA: [(&str, f64, Criterion); 15] = [
    ("dark-state exactness", 30.0, c1_dark_state),
    ("Heisenberg limit", 60.0, c2_heisenberg),
    ("odd-N steady state", 300.0, c3_odd),
    ("even-odd onset", 60.0, c4_onset),
    ("oracle equivalence", 300.0, c5_oracle),
    ("adiabatic elimination", 300.0, c6_adiabatic),
    ("cooperativity scaling", 60.0, c7_cooperativity),
    ("dissipative vs one-axis twisting", 7200.0, c8_fig5),
    ("prethermalization and rate-matrix gaps", 1800.0, c9_prethermal),
    ("reservoir mapping exactness", 60.0, c10_mapping),
    ("impure reservoir", 1800.0, c11_thermal),
    ("even-odd sensing with heating", 300.0, c12_trapped_ion),
    ("dynamical decoupling", 600.0, c13_decoupling),
    ("spin-loss sensing", 600.0, c14_sensing),
    ("determinism", 600.0, c15_determinism),
];

#[test]
fn acceptance() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = vec![];
    for (k, (name, budget, run)) in CRITERIA.iter().enumerate() {
        let id = k + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t0 = Instant::now();
        let res = run();
        let secs = t0.elapsed().as_secs_f64();
        let (pass, detail) = match res {
            Ok(o) => (o.pass && secs <= *budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        println!("criterion {id:>2} {}: {name}: {detail} [{secs:.1} s of {budget} s]", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
