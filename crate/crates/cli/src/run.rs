//! Task execution: outer grids on a worker pool, merged by grid index.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use spinsqueeze::optim::{grid_then_golden, minimize_2d};

use crate::config::{ModelConfig, Objective, OptimizeConfig, RunConfig, Task};
use crate::error::CliError;
use crate::eval::{self, num, Point, Settings};
use crate::output::{Row, Swept, Table};
use crate::{presets, validate};

/// Command-line overrides applied on top of a configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub task: Option<Task>,
    pub preset: Option<String>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, c: &mut RunConfig) {
        if let Some(t) = self.task {
            c.task = Some(t);
        }
        if let Some(p) = &self.preset {
            c.preset = Some(p.clone());
        }
        if let Some(o) = &self.out {
            c.out = Some(o.clone());
        }
        if let Some(w) = self.workers {
            c.workers = Some(w);
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
    }
}

/// Resolves environment overrides and checks the configuration.
pub fn resolve(mut c: RunConfig) -> Result<RunConfig, CliError> {
    c.tolerances.apply_env(|k| std::env::var(k).ok())?;
    c.validate()?;
    Ok(c)
}

/// Runs a validated configuration and returns its tables without writing
/// anything.
pub fn execute(c: &RunConfig) -> Result<Vec<Table>, CliError> {
    c.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(c.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    pool.install(|| match c.task.expect("validated") {
        Task::Preset => presets::run(c.preset.as_deref().expect("validated"), c),
        Task::Validate => Ok(vec![validate::run(c)]),
        _ => Ok(vec![run_grid(c)?]),
    })
}

/// Executes, writes every table under the output directory and reports
/// the file paths. Fails with [`CliError::AllFailed`] when a table has
/// rows and all of them failed.
pub fn run(c: &RunConfig) -> Result<Vec<(Table, PathBuf, PathBuf)>, CliError> {
    let start = Instant::now();
    let tables = execute(c)?;
    let wall = start.elapsed().as_secs_f64();
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut written = vec![];
    for t in tables {
        let (csv, json) = t.write(Path::new(&dir), wall)?;
        written.push((t, csv, json));
    }
    for (t, _, _) in &written {
        if !t.rows.is_empty() && t.failed() == t.rows.len() {
            return Err(CliError::AllFailed(t.rows.len()));
        }
    }
    Ok(written)
}

/// Cartesian product of the sweep axes, first axis slowest.
fn outer_grid(c: &RunConfig, base: &ModelConfig) -> Vec<(Vec<f64>, ModelConfig)> {
    let mut pts = vec![(vec![], base.clone())];
    for ax in &c.sweep {
        let vals = ax.grid.values();
        let mut next = Vec::with_capacity(pts.len() * vals.len());
        for (sw, m) in &pts {
            for &v in &vals {
                let mut m2 = m.clone();
                m2.set(&ax.param, v).expect("validated");
                let mut sw2 = sw.clone();
                sw2.push(v);
                next.push((sw2, m2));
            }
        }
        pts = next;
    }
    pts
}

fn nums(v: &[f64]) -> Vec<Swept> {
    v.iter().map(|&x| Swept::Num(x)).collect()
}

fn row(swept: Vec<Swept>, p: Point, seconds: f64) -> Row {
    Row { swept, values: p.values, status: "ok".into(), seconds, extra: p.extra }
}

fn run_grid(c: &RunConfig) -> Result<Table, CliError> {
    let task = c.task.expect("validated");
    let base = c.model.as_ref().expect("validated");
    let s = Settings::from_config(c);
    let mut columns: Vec<String> = c.sweep.iter().map(|a| a.param.clone()).collect();
    let outer = outer_grid(c, base);
    let times = c.evolve.as_ref().map(|e| e.times()).unwrap_or_default();
    match task {
        Task::Evolve => columns.push("t".into()),
        Task::Optimize => {
            let opt = c.optimize.as_ref().expect("validated");
            if opt.objective == Objective::EvenoddRatio && !columns.iter().any(|x| x == "n") {
                columns.push("n".into());
            }
            for ax in &opt.axes {
                columns.push(ax.param.clone());
            }
        }
        _ => {}
    }
    let n_extra = columns.len() - c.sweep.len();
    let per_point: Vec<Vec<Row>> = outer
        .par_iter()
        .map(|(sw, m)| {
            let t0 = Instant::now();
            let failed = |e: &dyn std::fmt::Display| {
                let mut swept = nums(sw);
                swept.extend(std::iter::repeat(Swept::Num(f64::NAN)).take(n_extra));
                vec![Row::failed(swept, e, t0.elapsed().as_secs_f64())]
            };
            match task {
                Task::Steady | Task::Sweep => match eval::steady(m, &s) {
                    Ok(p) => vec![row(nums(sw), p, t0.elapsed().as_secs_f64())],
                    Err(e) => failed(&e),
                },
                Task::Gap => match eval::gap(m, &s) {
                    Ok(p) => vec![row(nums(sw), p, t0.elapsed().as_secs_f64())],
                    Err(e) => failed(&e),
                },
                Task::Evolve => match eval::evolve(m, &times, &s) {
                    Ok(traj) => {
                        let dt = t0.elapsed().as_secs_f64() / traj.len().max(1) as f64;
                        traj.into_iter()
                            .map(|(t, p)| {
                                let mut swept = nums(sw);
                                swept.push(Swept::Num(t));
                                row(swept, p, dt)
                            })
                            .collect()
                    }
                    Err(e) => failed(&e),
                },
                Task::Optimize => {
                    let opt = c.optimize.as_ref().expect("validated");
                    let add_n = opt.objective == Objective::EvenoddRatio && !c.sweep.iter().any(|a| a.param == "n");
                    match optimize_point(m, opt, &s) {
                        Ok(found) => {
                            let dt = t0.elapsed().as_secs_f64() / found.len().max(1) as f64;
                            found
                                .into_iter()
                                .map(|(mm, p)| {
                                    let mut swept = nums(sw);
                                    if add_n {
                                        swept.push(Swept::Num(mm.n as f64));
                                    }
                                    swept.extend(opt.axes.iter().map(|ax| Swept::Num(mm.get(&ax.param).unwrap_or(f64::NAN))));
                                    row(swept, p, dt)
                                })
                                .collect()
                        }
                        Err(e) => failed(&e),
                    }
                }
                Task::Validate | Task::Preset => unreachable!("handled in execute"),
            }
        })
        .collect();
    let rows: Vec<Row> = per_point.into_iter().flatten().collect();
    Ok(Table { name: c.name.clone(), config: c.clone(), columns, rows, summary: Map::new() })
}

struct Found {
    model: ModelConfig,
    value: f64,
    at_boundary: bool,
    profile: Vec<Value>,
}

/// Bounded minimization over the free axes: coarse grid, then golden
/// section (one axis) or coordinate sweeps (two axes).
fn minimize(m: &ModelConfig, opt: &OptimizeConfig, obj: Objective, s: &Settings) -> Result<Found, CliError> {
    let quiet = Settings { compute_gap: false, sy_distribution: false, rate_matrix: false, ..s.clone() };
    let eval_at = |coords: &[f64]| -> f64 {
        let mut mm = m.clone();
        for (ax, &x) in opt.axes.iter().zip(coords) {
            if mm.set(ax.target(), ax.to_param(x)).is_err() {
                return f64::NAN;
            }
        }
        eval::steady(&mm, &quiet).map(|p| p.values.objective(obj)).unwrap_or(f64::NAN)
    };
    let tol = s.tol.opt_tol;
    let (coords, value, at_boundary, profile) = match opt.axes.as_slice() {
        [ax] => {
            let grid = ax.search_grid();
            let res = grid_then_golden(|x| eval_at(&[x]), &grid, tol)?;
            let profile = res.profile.iter().map(|&(x, f)| json!([num(ax.to_param(x)), num(f)])).collect();
            (vec![res.x], res.value, res.at_boundary, profile)
        }
        [ax, ay] => {
            let (gx, gy) = (ax.search_grid(), ay.search_grid());
            let res = minimize_2d(|x, y| eval_at(&[x, y]), &gx, &gy, tol, opt.sweeps)?;
            let edge = |v: f64, g: &[f64]| (v - g[0]).abs() < 1e-9 * (1.0 + v.abs()) || (v - g[g.len() - 1]).abs() < 1e-9 * (1.0 + v.abs());
            let at_boundary = edge(res.x[0], &gx) || edge(res.x[1], &gy);
            let profile = res.profile.iter().map(|&(p, f)| json!([num(ax.to_param(p[0])), num(ay.to_param(p[1])), num(f)])).collect();
            (res.x.to_vec(), res.value, at_boundary, profile)
        }
        _ => unreachable!("validated: one or two axes"),
    };
    let mut model = m.clone();
    for (ax, &x) in opt.axes.iter().zip(&coords) {
        model.set(ax.target(), ax.to_param(x)).map_err(|e| CliError::schema("optimize.axes", e))?;
    }
    Ok(Found { model, value, at_boundary, profile })
}

fn optimize_point(m: &ModelConfig, opt: &OptimizeConfig, s: &Settings) -> Result<Vec<(ModelConfig, Point)>, CliError> {
    let finish = |f: Found, obj: Objective| -> Result<(ModelConfig, Point), CliError> {
        let mut p = eval::steady(&f.model, s)?;
        p.extra.insert("objective".into(), json!(format!("{obj:?}").to_lowercase()));
        p.extra.insert("optimum".into(), num(f.value));
        p.extra.insert("at_boundary".into(), json!(f.at_boundary));
        p.extra.insert("profile".into(), Value::Array(f.profile));
        Ok((f.model, p))
    };
    match opt.objective {
        Objective::EvenoddRatio => {
            let partner = opt.partner_n.unwrap_or(m.n + 1);
            let mut mp = m.clone();
            mp.n = partner;
            let a = minimize(m, opt, Objective::Sy2, s)?;
            let b = minimize(&mp, opt, Objective::Sy2, s)?;
            let ratio = a.value / b.value;
            let mut out = vec![finish(a, Objective::Sy2)?, finish(b, Objective::Sy2)?];
            for (_, p) in &mut out {
                p.extra.insert("evenodd_ratio".into(), num(ratio));
            }
            Ok(out)
        }
        obj => Ok(vec![finish(minimize(m, opt, obj, s)?, obj)?]),
    }
}
