//! Figure-reproduction presets. Each preset expands to one or more run
//! configurations; some add fitted summaries to their tables.

use serde_json::{json, Map, Value};
use spinsqueeze::optim::loglog_fit;

use crate::config::{AxisScale, EvolveConfig, FreeAxis, GapMethod, Grid, ModelConfig, ModelKind, Objective, OptimizeConfig, ProtocolKind, RunConfig, Task, TimeGrid};
use crate::error::CliError;
use crate::eval::num;
use crate::output::Table;

pub const PRESETS: [&str; 9] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig12", "fig14"];

fn list(values: &[f64]) -> Grid {
    Grid::List { values: values.to_vec() }
}

fn linear(start: f64, stop: f64, points: usize) -> Grid {
    Grid::Linear { start, stop, points }
}

fn log_times(t_min: f64, t_final: f64, points: usize) -> EvolveConfig {
    EvolveConfig { t_final, points, grid: TimeGrid::Log, t_min: Some(t_min) }
}

fn optimize(objective: Objective, axes: Vec<FreeAxis>) -> OptimizeConfig {
    OptimizeConfig { objective, axes, partner_n: None, sweeps: 4 }
}

fn axis(param: &str, lo: f64, hi: f64, points: usize, scale: AxisScale) -> FreeAxis {
    FreeAxis { param: param.into(), lo, hi, points, scale }
}

fn model(kind: ModelKind, n: usize, f: impl FnOnce(&mut ModelConfig)) -> ModelConfig {
    let mut m = ModelConfig::new(kind, n);
    f(&mut m);
    m
}

/// Expanded configurations of a preset, in output order.
pub fn configs(name: &str) -> Result<Vec<RunConfig>, CliError> {
    let ideal = |n| model(ModelKind::Ideal, n, |_| {});
    Ok(match name {
        "fig2" => {
            let mut c = RunConfig::new("fig2", Task::Sweep, ideal(20)).with_sweep("n", list(&[20.0, 21.0])).with_sweep("r", linear(0.0, 4.0, 21));
            c.compute_gap = true;
            vec![c]
        }
        "fig3" => {
            let sweep = RunConfig::new("fig3", Task::Sweep, ideal(200)).with_sweep("n", list(&[200.0, 201.0])).with_sweep("r", linear(0.0, 6.0, 61));
            let mut ropt = RunConfig::new("fig3_ropt", Task::Optimize, ideal(21)).with_sweep("n", list(&[21.0, 51.0, 101.0, 201.0]));
            ropt.optimize = Some(optimize(Objective::Xi2, vec![axis("r", 0.0, 4.0, 17, AxisScale::Linear)]));
            vec![sweep, ropt]
        }
        "fig4" => {
            let mut a = RunConfig::new("fig4a", Task::Evolve, model(ModelKind::Ideal, 20, |m| m.r = Some(2.5))).with_sweep("n", list(&[20.0, 21.0]));
            a.evolve = Some(log_times(1e-3, 200.0, 61));
            let gap = RunConfig::new("fig4a_gap", Task::Gap, model(ModelKind::Ideal, 10, |m| m.r = Some(2.5)))
                .with_sweep("n", list(&[10.0, 11.0, 20.0, 21.0, 30.0, 31.0, 40.0, 41.0]));
            let mut b = RunConfig::new(
                "fig4b",
                Task::Evolve,
                model(ModelKind::Protocol, 6, |m| {
                    m.protocol = Some(ProtocolKind::Sensing);
                    m.r = Some(1.0);
                    m.loss_times = Some(vec![20.0, 40.0, 60.0]);
                }),
            );
            b.evolve = Some(EvolveConfig { t_final: 80.0, points: 321, grid: TimeGrid::Linear, t_min: None });
            vec![a, gap, b]
        }
        "fig5" => {
            let ns = list(&[4.0, 6.0, 8.0, 10.0, 14.0, 18.0, 22.0, 26.0, 30.0]);
            let cavity = |m: &mut ModelConfig| {
                m.g = Some(1.0);
                m.kappa_int = Some(100.0);
                m.gamma_rel = Some(0.02);
            };
            let mut d = RunConfig::new("fig5_dissipative", Task::Optimize, model(ModelKind::Spin, 4, cavity)).with_sweep("n", ns.clone());
            d.optimize = Some(optimize(Objective::Xi2, vec![axis("kappa_sqz", 10.0, 1e4, 13, AxisScale::Log), axis("r", 0.0, 3.0, 13, AxisScale::Linear)]));
            let mut o = RunConfig::new("fig5_oat", Task::Optimize, model(ModelKind::Oat, 4, cavity)).with_sweep("n", ns);
            o.optimize = Some(optimize(Objective::Xi2, vec![axis("delta_c", 50.0, 1e5, 16, AxisScale::Log)]));
            vec![d, o]
        }
        "fig6" => {
            let noisy = |kind| {
                model(kind, 50, |m| {
                    m.r = Some(1.0);
                    m.gamma_phi = Some(0.005);
                })
            };
            let mut a = RunConfig::new("fig6a", Task::Evolve, noisy(ModelKind::Spin)).with_sweep("gamma_rel", list(&[0.0, 0.001]));
            a.evolve = Some(log_times(1e-2, 2000.0, 41));
            a.tolerances.integrator = spinsqueeze::solver::Integrator::Sdirk3;
            let reference = RunConfig::new("fig6a_ideal", Task::Steady, model(ModelKind::Ideal, 50, |m| m.r = Some(1.0)));
            let mut mf = noisy(ModelKind::Meanfield);
            mf.n = 1000;
            let mut b = RunConfig::new("fig6b", Task::Evolve, mf).with_sweep("gamma_rel", list(&[0.0, 0.001]));
            b.evolve = Some(log_times(1e-2, 2000.0, 81));
            vec![a, reference, b]
        }
        "fig7" => {
            let th = model(ModelKind::Thermal, 200, |_| {});
            let nth = list(&[0.01, 0.1, 0.5]);
            let sweep = RunConfig::new("fig7", Task::Sweep, th.clone()).with_sweep("n_th", nth.clone()).with_sweep("r", linear(0.0, 3.0, 31));
            let mut opt = RunConfig::new("fig7_opt", Task::Optimize, th).with_sweep("n_th", nth);
            opt.optimize = Some(optimize(Objective::Xi2, vec![axis("r", 0.0, 3.0, 13, AxisScale::Linear)]));
            vec![sweep, opt]
        }
        "fig8" => {
            let ion = |n| model(ModelKind::Thermal, n, |m| m.gamma_heat = Some(0.017));
            let ax = || vec![axis("r", 0.0, 12.0, 13, AxisScale::Db)];
            let mut a = RunConfig::new("fig8a", Task::Optimize, ion(8)).with_sweep("gamma_heat", Grid::Log { start: 1e-3, stop: 0.1, points: 7 });
            a.optimize = Some(optimize(Objective::EvenoddRatio, ax()));
            let mut b = RunConfig::new("fig8b", Task::Optimize, ion(2)).with_sweep("n", list(&[2.0, 4.0, 6.0, 8.0, 10.0]));
            b.optimize = Some(optimize(Objective::EvenoddRatio, ax()));
            vec![a, b]
        }
        "fig12" => {
            let mut c = RunConfig::new("fig12", Task::Sweep, ideal(200)).with_sweep("n", list(&[200.0, 201.0])).with_sweep("r", list(&[0.5, 1.0, 2.0, 3.0]));
            c.sy_distribution = true;
            vec![c]
        }
        "fig14" => {
            let spin = |n| {
                model(ModelKind::Spin, n, |m| {
                    m.r = Some(1.0);
                    m.gamma_phi = Some(0.005);
                })
            };
            let mut a = RunConfig::new("fig14a", Task::Gap, spin(128));
            a.gap_method = GapMethod::RateMatrix;
            a.rate_matrix = true;
            let mut b = RunConfig::new("fig14b", Task::Gap, spin(8))
                .with_sweep("r", list(&[0.2, 0.5, 1.0, 1.4, 4.0]))
                .with_sweep("n", list(&[8.0, 16.0, 32.0, 64.0, 128.0]));
            b.gap_method = GapMethod::RateMatrix;
            vec![a, b]
        }
        other => return Err(CliError::schema("preset", format!("unknown preset `{other}`; expected one of {}", PRESETS.join(", ")))),
    })
}

/// Runs a preset, inheriting seed, workers and tolerances from `parent`.
pub fn run(name: &str, parent: &RunConfig) -> Result<Vec<Table>, CliError> {
    let mut tables = vec![];
    for mut c in configs(name)? {
        c.seed = parent.seed;
        c.workers = parent.workers;
        c.out = parent.out.clone();
        if parent.tolerances != Default::default() {
            c.tolerances = parent.tolerances.clone();
        }
        tables.extend(crate::run::execute(&c)?);
    }
    summarize(name, &mut tables);
    Ok(tables)
}

/// Groups rows by the value in `key` and fits `log y` against `log x`.
fn grouped_fit(t: &Table, key: &str, x: &str, y: impl Fn(&crate::output::Row) -> f64) -> Vec<Value> {
    let keys = t.column(key);
    let xs = t.column(x);
    let mut seen: Vec<f64> = vec![];
    for &k in &keys {
        if !seen.iter().any(|&s| s == k) {
            seen.push(k);
        }
    }
    seen.into_iter()
        .map(|k| {
            let idx: Vec<usize> = (0..keys.len()).filter(|&i| keys[i] == k && t.rows[i].is_ok()).collect();
            let fx: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
            let fy: Vec<f64> = idx.iter().map(|&i| y(&t.rows[i])).collect();
            let slope = loglog_fit(&fx, &fy).map(|f| f.slope).unwrap_or(f64::NAN);
            json!({ key: num(k), "slope": num(slope) })
        })
        .collect()
}

/// Log-log slope of `y` against the `n` column over the larger half of the
/// spin numbers.
fn large_n_slope(t: &Table, y: impl Fn(&crate::output::Row) -> f64) -> f64 {
    let ns = t.column("n");
    let pts: Vec<(f64, f64)> = ns.iter().zip(&t.rows).filter(|(_, r)| r.is_ok()).map(|(&n, r)| (n, y(r))).collect();
    let half = &pts[pts.len() / 2..];
    let (x, yv): (Vec<f64>, Vec<f64>) = half.iter().copied().unzip();
    loglog_fit(&x, &yv).map(|f| f.slope).unwrap_or(f64::NAN)
}

fn summarize(name: &str, tables: &mut [Table]) {
    for t in tables.iter_mut() {
        let mut s = Map::new();
        match (name, t.name.as_str()) {
            ("fig3", "fig3_ropt") => {
                let ratios: Vec<Value> =
                    t.rows.iter().zip(t.column("n")).map(|(r, n)| json!({ "n": num(n), "xi2_over_heisenberg": num(r.values.xi2 * (n + 2.0) / 2.0) })).collect();
                s.insert("xi2_over_heisenberg".into(), Value::Array(ratios));
            }
            ("fig5", _) => {
                s.insert("large_n_slope".into(), num(large_n_slope(t, |r| r.values.xi2)));
            }
            ("fig8", _) => {
                let ratios: Vec<Value> = t.rows.iter().step_by(2).map(|r| r.extra.get("evenodd_ratio").cloned().unwrap_or(Value::Null)).collect();
                s.insert("evenodd_ratio".into(), Value::Array(ratios));
            }
            ("fig14", "fig14b") => {
                s.insert("gap_vs_n_slope".into(), Value::Array(grouped_fit(t, "r", "n", |r| r.values.gap)));
            }
            _ => {}
        }
        t.summary = s;
    }
}
