//! Oracle-equivalence and invariant checks behind `task = "validate"`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map};
use spinsqueeze::liouvillian::{build_full_oracle, build_general_collective, build_spin_model, map_to_effective_reservoir, ModelParams};
use spinsqueeze::solver::{jspace_rate_matrix, steady_state, steady_state_from};
use spinsqueeze::spinspace::{dicke_space, DickeEmbedding};
use spinsqueeze::state::DensityState;
use spinsqueeze::Result;

use crate::config::RunConfig;
use crate::eval::{dark_state_check, num, Values};
use crate::output::{Row, Swept, Table};

struct Check {
    name: &'static str,
    value: f64,
    limit: f64,
    /// `true` when `value` must not drop below `limit`.
    lower: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, limit: f64) -> Self {
        Check { name, value, limit, lower: false }
    }

    fn passed(&self) -> bool {
        if self.lower { self.value >= self.limit } else { self.value <= self.limit }
    }
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

fn oracle_checks(n: usize, draw: u64, seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64) << 32 ^ draw);
    let p = random_params(&mut rng);
    let emb = DickeEmbedding::new(n)?;
    let ld = build_spin_model(emb.space(), &p)?;
    let lf = build_full_oracle(n, &p)?;
    let scale = ld.max_rate().max(1.0);
    let rho = DensityState::random(emb.space().layout(), rng.random())?;
    let via_full = emb.project(&lf.apply(&emb.embed(&rho)?)?)?;
    let action = via_full.max_abs_diff(&ld.apply(&rho)?)?;
    let sd = steady_state_from(&ld, &emb.space().ground_state())?;
    let sf = emb.project(&steady_state(&lf)?)?;
    Ok(vec![
        Check::at_most("generator_equivalence", action / scale, 1e-12),
        Check::at_most("steady_state_equivalence", sd.trace_distance(&sf)?, 1e-8),
        Check::at_most("trace_preservation", ld.trace_preservation_error() / scale, 1e-12),
        Check::at_most("hermiticity_preservation", ld.hermiticity_preservation_error(seed) / scale, 1e-12),
        Check { name: "positivity", value: sd.min_eigenvalue()?, limit: -1e-8, lower: true },
    ])
}

fn mapping_check(n: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31) ^ n as u64);
    let (g, gp, gd, gu, r) = (rng.random_range(0.5..1.5), rng.random_range(0.0..0.3), rng.random_range(0.0..0.4), rng.random_range(0.0..0.2), rng.random_range(0.1..1.5));
    let space = dicke_space(n)?;
    let j = space.j_max();
    let general = steady_state(&build_general_collective(&space, j, g, gp, gd, gu, r)?)?;
    let m = map_to_effective_reservoir(g, gp, gd, gu, r)?;
    let mapped = steady_state(&build_general_collective(&space, j, m.gamma, m.gamma_p, 0.0, 0.0, m.r)?)?;
    Ok(Check::at_most("reservoir_mapping", general.trace_distance(&mapped)?, 1e-8))
}

fn all_checks(seed: u64) -> Vec<(&'static str, usize, Result<Check>)> {
    let mut out: Vec<(&'static str, usize, Result<Check>)> = vec![];
    for n in 2..=5 {
        for draw in 0..2 {
            match oracle_checks(n, draw, seed) {
                Ok(cs) => out.extend(cs.into_iter().map(|c| (c.name, n, Ok(c)))),
                Err(e) => out.push(("oracle", n, Err(e))),
            }
        }
    }
    for n in (2..=12).step_by(2) {
        for r in [0.5, 1.0, 2.0] {
            match dark_state_check(n, r) {
                Ok((res, fid)) => {
                    out.push(("dark_state_annihilated", n, Ok(Check::at_most("dark_state_annihilated", res, 1e-10))));
                    out.push(("dark_state_fidelity", n, Ok(Check { name: "dark_state_fidelity", value: fid, limit: 1.0 - 1e-8, lower: true })));
                }
                Err(e) => out.push(("dark_state", n, Err(e))),
            }
        }
    }
    for n in [3, 4, 6] {
        out.push(("reservoir_mapping", n, mapping_check(n, seed)));
    }
    for n in [8, 16] {
        let c = dicke_space(n).and_then(|s| jspace_rate_matrix(&s, 0.0, 1.0)).and_then(|rm| rm.gap()).map(|g| Check::at_most("rate_matrix_r0_gap", (g - 1.0 / n as f64).abs(), 1e-10));
        out.push(("rate_matrix_r0_gap", n, c));
    }
    out
}

/// Runs every check; rows that fail carry an `error:` status.
pub fn run(c: &RunConfig) -> Table {
    let t0 = Instant::now();
    let checks = all_checks(c.seed);
    let dt = t0.elapsed().as_secs_f64() / checks.len().max(1) as f64;
    let rows = checks
        .into_iter()
        .map(|(name, n, res)| {
            let swept = vec![Swept::Text(name.into()), Swept::Num(n as f64)];
            match res {
                Ok(ch) => {
                    let mut extra = Map::new();
                    extra.insert("value".into(), num(ch.value));
                    extra.insert("limit".into(), num(ch.limit));
                    extra.insert("bound".into(), json!(if ch.lower { "lower" } else { "upper" }));
                    let status = if ch.passed() {
                        "ok".to_string()
                    } else {
                        format!("error: {} = {:e} violates {} bound {:e}", ch.name, ch.value, if ch.lower { "lower" } else { "upper" }, ch.limit)
                    };
                    Row { swept, values: Values::EMPTY, status, seconds: dt, extra }
                }
                Err(e) => Row::failed(swept, e, dt),
            }
        })
        .collect();
    let mut cfg = c.clone();
    if cfg.name == "run" {
        cfg.name = "validate".into();
    }
    Table { name: cfg.name.clone(), config: cfg, columns: vec!["check".into(), "n".into()], rows, summary: Map::new() }
}
