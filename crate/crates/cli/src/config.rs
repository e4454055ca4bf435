//! Run configuration: one TOML file, checked field by field.
//!
//! ```toml
//! name = "thermal-scan"
//! task = "sweep"
//! seed = 7
//!
//! [model]
//! kind = "thermal"
//! n = 200
//! gamma = 1.0
//! n_th = 0.1
//!
//! [[sweep]]
//! param = "r"
//! grid = { kind = "linear", start = 0.0, stop = 3.0, points = 31 }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinsqueeze::meanfield::MeanFieldMethod;
use spinsqueeze::solver::Integrator;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Steady,
    Evolve,
    Gap,
    Sweep,
    Optimize,
    Validate,
    Preset,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Steady => "steady",
            Task::Evolve => "evolve",
            Task::Gap => "gap",
            Task::Sweep => "sweep",
            Task::Optimize => "optimize",
            Task::Validate => "validate",
            Task::Preset => "preset",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// `Γ D[Σ]` on the top block.
    Ideal,
    /// Collective plus local noise over all blocks.
    Spin,
    /// `Γ(n+1) D[Σ] + Γn D[Σ†]` on the top block.
    Thermal,
    /// `Γ D[Σ] + Γ′ D[Σ†] + γ D[S₋] + γ′ D[S₊]` on the top block.
    General,
    /// Spins coupled to an explicit cavity mode.
    Hybrid,
    /// One-axis twisting from a dispersive cavity.
    Oat,
    /// Second-order cumulant equations.
    Meanfield,
    /// Dynamical decoupling or spin-loss sensing.
    Protocol,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ideal => "ideal",
            ModelKind::Spin => "spin",
            ModelKind::Thermal => "thermal",
            ModelKind::General => "general",
            ModelKind::Hybrid => "hybrid",
            ModelKind::Oat => "oat",
            ModelKind::Meanfield => "meanfield",
            ModelKind::Protocol => "protocol",
        }
    }

    /// Parameter names accepted by this model (for fields, sweeps and
    /// free axes alike).
    pub fn params(self) -> &'static [&'static str] {
        match self {
            ModelKind::Ideal => &["n", "gamma", "r", "r_db"],
            ModelKind::Thermal => &["n", "gamma", "r", "r_db", "n_th", "gamma_heat"],
            ModelKind::General => &["n", "gamma", "r", "r_db", "gamma_p", "gamma_coll", "gamma_up"],
            ModelKind::Spin => &[
                "n", "gamma", "r", "r_db", "n_th", "gamma_coll", "gamma_up", "gamma_phi", "gamma_rel", "gamma_heat", "g", "kappa_sqz",
                "kappa_int",
            ],
            ModelKind::Hybrid => &["n", "g", "kappa_sqz", "kappa_int", "r", "r_db", "n_cut", "gamma_phi", "gamma_rel"],
            ModelKind::Oat => &["n", "g", "kappa_int", "gamma_rel", "delta_c"],
            ModelKind::Meanfield => &["n", "gamma", "r", "r_db", "n_th", "gamma_coll", "gamma_up", "gamma_phi", "gamma_rel"],
            ModelKind::Protocol => &["n", "gamma", "r", "r_db", "g", "kappa_sqz", "kappa_int", "n_cut", "period"],
        }
    }

    /// Parameters that must be set (by field, sweep or free axis).
    pub fn required(self) -> &'static [&'static str] {
        match self {
            ModelKind::Hybrid => &["g", "kappa_sqz", "kappa_int"],
            ModelKind::Oat => &["g", "kappa_int", "delta_c"],
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Decoupling sequence (a): π_x, π_z, π_y pulses.
    DdA,
    /// Decoupling sequence (b): composite π_z pulses.
    DdB,
    Sensing,
}

/// Model parameters. Unset rates default to zero, `gamma` to one and `r`
/// to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Squeezing as `10·log₁₀(e^{2r})`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_th: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_coll: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_up: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_rel: Option<f64>,
    /// Motional heating `γ_heat/Γ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_heat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_sqz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_int: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cut: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detunings: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linearize: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MeanFieldMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_g_off: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_times: Option<Vec<f64>>,
}

/// Natural-log squeezing parameter for a level in dB.
pub fn db_to_r(db: f64) -> f64 {
    0.5 * (db / 10.0) * std::f64::consts::LN_10
}

pub fn r_to_db(r: f64) -> f64 {
    10.0 * (2.0 * r).exp().log10()
}

impl ModelConfig {
    pub fn new(kind: ModelKind, n: usize) -> Self {
        ModelConfig {
            kind,
            n,
            gamma: None,
            r: None,
            r_db: None,
            n_th: None,
            gamma_p: None,
            gamma_coll: None,
            gamma_up: None,
            gamma_phi: None,
            gamma_rel: None,
            gamma_heat: None,
            g: None,
            kappa_sqz: None,
            kappa_int: None,
            delta_c: None,
            n_cut: None,
            detunings: None,
            linearize: None,
            method: None,
            protocol: None,
            period: None,
            cycles: None,
            switch_g_off: None,
            loss_times: None,
        }
    }

    /// Sets a numeric parameter by name. `n` and `n_cut` must be
    /// non-negative integers.
    pub fn set(&mut self, name: &str, v: f64) -> Result<(), String> {
        let as_count = |v: f64| -> Result<usize, String> {
            if v >= 0.0 && v.fract() == 0.0 && v < 1e12 {
                Ok(v as usize)
            } else {
                Err(format!("`{name}` must be a non-negative integer, got {v}"))
            }
        };
        match name {
            "n" => self.n = as_count(v)?,
            "n_cut" => self.n_cut = Some(as_count(v)?),
            "r" => {
                self.r = Some(v);
                self.r_db = None;
            }
            "r_db" => {
                self.r_db = Some(v);
                self.r = None;
            }
            _ => *self.slot(name).ok_or_else(|| format!("unknown parameter `{name}`"))? = Some(v),
        }
        Ok(())
    }

    fn slot(&mut self, name: &str) -> Option<&mut Option<f64>> {
        Some(match name {
            "gamma" => &mut self.gamma,
            "n_th" => &mut self.n_th,
            "gamma_p" => &mut self.gamma_p,
            "gamma_coll" => &mut self.gamma_coll,
            "gamma_up" => &mut self.gamma_up,
            "gamma_phi" => &mut self.gamma_phi,
            "gamma_rel" => &mut self.gamma_rel,
            "gamma_heat" => &mut self.gamma_heat,
            "g" => &mut self.g,
            "kappa_sqz" => &mut self.kappa_sqz,
            "kappa_int" => &mut self.kappa_int,
            "delta_c" => &mut self.delta_c,
            "period" => &mut self.period,
            _ => return None,
        })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "n" => Some(self.n as f64),
            "n_cut" => self.n_cut.map(|x| x as f64),
            "r" => self.r.or(self.r_db.map(db_to_r)),
            "r_db" => self.r_db.or(self.r.map(r_to_db)),
            _ => self.clone().slot(name).and_then(|s| *s),
        }
    }

    /// Squeezing parameter in natural-log units.
    pub fn r(&self) -> f64 {
        self.get("r").unwrap_or(0.0)
    }

    pub fn rate(&self, name: &str) -> f64 {
        self.get(name).unwrap_or(0.0)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(1.0)
    }

    /// Names of the fields that are set, in declaration order.
    fn present(&self) -> Vec<&'static str> {
        let mut out = vec![];
        let flags: [(&'static str, bool); 24] = [
            ("gamma", self.gamma.is_some()),
            ("r", self.r.is_some()),
            ("r_db", self.r_db.is_some()),
            ("n_th", self.n_th.is_some()),
            ("gamma_p", self.gamma_p.is_some()),
            ("gamma_coll", self.gamma_coll.is_some()),
            ("gamma_up", self.gamma_up.is_some()),
            ("gamma_phi", self.gamma_phi.is_some()),
            ("gamma_rel", self.gamma_rel.is_some()),
            ("gamma_heat", self.gamma_heat.is_some()),
            ("g", self.g.is_some()),
            ("kappa_sqz", self.kappa_sqz.is_some()),
            ("kappa_int", self.kappa_int.is_some()),
            ("delta_c", self.delta_c.is_some()),
            ("n_cut", self.n_cut.is_some()),
            ("detunings", self.detunings.is_some()),
            ("linearize", self.linearize.is_some()),
            ("method", self.method.is_some()),
            ("protocol", self.protocol.is_some()),
            ("period", self.period.is_some()),
            ("cycles", self.cycles.is_some()),
            ("switch_g_off", self.switch_g_off.is_some()),
            ("loss_times", self.loss_times.is_some()),
            ("n", true),
        ];
        for (name, set) in flags {
            if set {
                out.push(name);
            }
        }
        out
    }

    fn allowed_field(&self, name: &str) -> bool {
        if self.kind.params().contains(&name) {
            return true;
        }
        matches!(
            (self.kind, name),
            (ModelKind::Hybrid, "detunings")
                | (ModelKind::Meanfield, "linearize" | "method")
                | (ModelKind::Protocol, "protocol" | "cycles" | "switch_g_off" | "loss_times" | "detunings")
        )
    }
}

/// A swept or searched parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Grid {
    Linear { start: f64, stop: f64, points: usize },
    Log { start: f64, stop: f64, points: usize },
    /// Squeezing levels in dB, stored as natural-log `r`.
    Db { start: f64, stop: f64, points: usize },
    List { values: Vec<f64> },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        use spinsqueeze::optim::{linspace, logspace};
        match self {
            Grid::Linear { start, stop, points } => linspace(*start, *stop, *points),
            Grid::Log { start, stop, points } => logspace(*start, *stop, *points),
            Grid::Db { start, stop, points } => linspace(*start, *stop, *points).into_iter().map(db_to_r).collect(),
            Grid::List { values } => values.clone(),
        }
    }

    fn check(&self) -> Result<(), (String, String)> {
        match self {
            Grid::Linear { start, stop, points } | Grid::Db { start, stop, points } => {
                if !start.is_finite() || !stop.is_finite() {
                    return Err(("start".into(), "bounds must be finite".into()));
                }
                if *points == 0 {
                    return Err(("points".into(), "grid must be non-empty".into()));
                }
            }
            Grid::Log { start, stop, points } => {
                if !(*start > 0.0 && *stop > 0.0 && start.is_finite() && stop.is_finite()) {
                    return Err(("start".into(), "log grid bounds must be positive and finite".into()));
                }
                if *points == 0 {
                    return Err(("points".into(), "grid must be non-empty".into()));
                }
            }
            Grid::List { values } => {
                if values.is_empty() {
                    return Err(("values".into(), "grid must be non-empty".into()));
                }
                if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                    return Err((format!("values[{i}]"), "values must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: String,
    pub grid: Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeGrid {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub t_final: f64,
    #[serde(default = "default_time_points")]
    pub points: usize,
    #[serde(default = "default_time_grid")]
    pub grid: TimeGrid,
    /// First nonzero time on a log grid; `t = 0` is always included.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
}

fn default_time_points() -> usize {
    101
}

fn default_time_grid() -> TimeGrid {
    TimeGrid::Linear
}

impl EvolveConfig {
    pub fn times(&self) -> Vec<f64> {
        use spinsqueeze::optim::{linspace, logspace};
        match self.grid {
            TimeGrid::Linear => linspace(0.0, self.t_final, self.points),
            TimeGrid::Log => {
                let t_min = self.t_min.unwrap_or(self.t_final * 1e-4);
                let mut t = vec![0.0];
                t.extend(logspace(t_min, self.t_final, self.points.saturating_sub(1).max(1)));
                t
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Xi2,
    #[serde(rename = "Sy2", alias = "sy2")]
    Sy2,
    EvenoddRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisScale {
    Linear,
    Log,
    /// Bounds in dB on the `r` axis.
    Db,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeAxis {
    pub param: String,
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_axis_points")]
    pub points: usize,
    #[serde(default = "default_axis_scale")]
    pub scale: AxisScale,
}

fn default_axis_points() -> usize {
    13
}

fn default_axis_scale() -> AxisScale {
    AxisScale::Linear
}

impl FreeAxis {
    /// Grid in search coordinates (`ln x` for log axes, `r` for dB axes).
    pub fn search_grid(&self) -> Vec<f64> {
        use spinsqueeze::optim::linspace;
        match self.scale {
            AxisScale::Linear => linspace(self.lo, self.hi, self.points),
            AxisScale::Log => linspace(self.lo.ln(), self.hi.ln(), self.points),
            AxisScale::Db => linspace(db_to_r(self.lo), db_to_r(self.hi), self.points),
        }
    }

    /// Maps a search coordinate to the parameter value.
    pub fn to_param(&self, s: f64) -> f64 {
        match self.scale {
            AxisScale::Log => s.exp(),
            _ => s,
        }
    }

    /// Name of the parameter the search coordinate sets.
    pub fn target(&self) -> &str {
        match self.scale {
            AxisScale::Db => "r",
            _ => &self.param,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub objective: Objective,
    pub axes: Vec<FreeAxis>,
    /// Partner spin number for `evenodd_ratio`; defaults to `n + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner_n: Option<usize>,
    /// Coordinate sweeps for two free axes.
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
}

fn default_sweeps() -> usize {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMethod {
    /// Shift-invert Arnoldi on the Liouvillian.
    Arnoldi,
    /// Dark-state hopping rates between blocks (even `N`).
    RateMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub steady_residual: f64,
    pub opt_tol: f64,
    pub integrator: Integrator,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-8, atol: 1e-10, steady_residual: 1e-9, opt_tol: 1e-4, integrator: Integrator::Auto }
    }
}

/// Environment variables that override [`Tolerances`].
pub const ENV_OVERRIDES: [(&str, &str); 4] = [
    ("SPINSQUEEZE_RTOL", "rtol"),
    ("SPINSQUEEZE_ATOL", "atol"),
    ("SPINSQUEEZE_STEADY_TOL", "steady_residual"),
    ("SPINSQUEEZE_OPT_TOL", "opt_tol"),
];

impl Tolerances {
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), CliError> {
        for (var, field) in ENV_OVERRIDES {
            let Some(raw) = lookup(var) else { continue };
            let v: f64 = raw.trim().parse().map_err(|_| CliError::schema(format!("env:{var}"), format!("`{raw}` is not a number")))?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::schema(format!("env:{var}"), "tolerance must be positive and finite"));
            }
            match field {
                "rtol" => self.rtol = v,
                "atol" => self.atol = v,
                "steady_residual" => self.steady_residual = v,
                _ => self.opt_tol = v,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    /// Preset name when `task = "preset"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolve: Option<EvolveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeConfig>,
    /// Fill the gap column during steady/sweep/optimize tasks.
    #[serde(default)]
    pub compute_gap: bool,
    #[serde(default = "default_gap_method")]
    pub gap_method: GapMethod,
    /// Record the `S_y` distribution of each steady state in the JSON record.
    #[serde(default)]
    pub sy_distribution: bool,
    /// Record the block-hopping rate matrix in the JSON record.
    #[serde(default)]
    pub rate_matrix: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_name() -> String {
    "run".into()
}

fn default_gap_method() -> GapMethod {
    GapMethod::Arnoldi
}

impl RunConfig {
    pub fn new(name: &str, task: Task, model: ModelConfig) -> Self {
        RunConfig {
            name: name.into(),
            task: Some(task),
            preset: None,
            model: Some(model),
            sweep: vec![],
            evolve: None,
            optimize: None,
            compute_gap: false,
            gap_method: GapMethod::Arnoldi,
            sy_distribution: false,
            rate_matrix: false,
            out: None,
            seed: 0,
            workers: None,
            tolerances: Tolerances::default(),
        }
    }

    pub fn with_sweep(mut self, param: &str, grid: Grid) -> Self {
        self.sweep.push(SweepAxis { param: param.into(), grid });
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::schema("<document>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::schema(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    /// Checks everything the type system cannot: parameters exist for the
    /// model, grids are non-empty, required inputs for the task are present.
    pub fn validate(&self) -> Result<(), CliError> {
        let task = self.task.ok_or_else(|| CliError::schema("task", "missing task"))?;
        if matches!(task, Task::Validate) {
            return Ok(());
        }
        if matches!(task, Task::Preset) {
            return match &self.preset {
                Some(_) => Ok(()),
                None => Err(CliError::schema("preset", "task `preset` needs a preset name")),
            };
        }
        let model = self.model.as_ref().ok_or_else(|| CliError::schema("model", "missing model table"))?;
        for field in model.present() {
            if !model.allowed_field(field) {
                return Err(CliError::schema(format!("model.{field}"), format!("not a parameter of model `{}`", model.kind.name())));
            }
        }
        if model.r.is_some() && model.r_db.is_some() {
            return Err(CliError::schema("model.r_db", "give either `r` or `r_db`, not both"));
        }
        for name in ["gamma", "n_th", "gamma_p", "gamma_coll", "gamma_up", "gamma_phi", "gamma_rel", "gamma_heat", "g", "kappa_sqz", "kappa_int", "period"] {
            if let Some(v) = model.get(name).filter(|_| model.clone().slot(name).map_or(false, |s| s.is_some())) {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(CliError::schema(format!("model.{name}"), format!("must be finite and non-negative, got {v}")));
                }
            }
        }
        if model.kind == ModelKind::Thermal && model.gamma_heat.is_some() && model.n_th.is_some() {
            return Err(CliError::schema("model.gamma_heat", "`gamma_heat` sets n_th itself; drop `n_th`"));
        }
        if model.kind == ModelKind::Spin && model.g.is_some() && (model.gamma.is_some() || model.gamma_coll.is_some()) {
            return Err(CliError::schema("model.g", "cavity parameters set gamma and gamma_coll; drop those fields"));
        }
        if model.kind == ModelKind::Protocol && model.protocol.is_none() {
            return Err(CliError::schema("model.protocol", "protocol models need `protocol = dd_a | dd_b | sensing`"));
        }
        if model.n == 0 {
            return Err(CliError::schema("model.n", "need at least one spin"));
        }
        let mut set_by_axes: Vec<&str> = vec![];
        for (i, ax) in self.sweep.iter().enumerate() {
            if !model.kind.params().contains(&ax.param.as_str()) {
                return Err(CliError::schema(format!("sweep[{i}].param"), format!("`{}` is not a parameter of model `{}`", ax.param, model.kind.name())));
            }
            if matches!(ax.grid, Grid::Db { .. }) && ax.param != "r" {
                return Err(CliError::schema(format!("sweep[{i}].grid.kind"), "dB grids apply to `r` only"));
            }
            ax.grid.check().map_err(|(f, m)| CliError::schema(format!("sweep[{i}].grid.{f}"), m))?;
            let mut probe = model.clone();
            for v in ax.grid.values() {
                probe.set(&ax.param, v).map_err(|m| CliError::schema(format!("sweep[{i}].grid"), m))?;
            }
            set_by_axes.push(&ax.param);
        }
        match task {
            Task::Steady if !self.sweep.is_empty() => return Err(CliError::schema("sweep", "task `steady` takes no sweep axes; use `sweep`")),
            Task::Sweep if self.sweep.is_empty() => return Err(CliError::schema("sweep", "task `sweep` needs at least one axis")),
            Task::Evolve => {
                let ev = self.evolve.as_ref().ok_or_else(|| CliError::schema("evolve", "task `evolve` needs an [evolve] table"))?;
                if !(ev.t_final > 0.0) || !ev.t_final.is_finite() {
                    return Err(CliError::schema("evolve.t_final", "must be positive and finite"));
                }
                if ev.points < 2 {
                    return Err(CliError::schema("evolve.points", "need at least two time points"));
                }
                if let Some(t) = ev.t_min {
                    if !(t > 0.0 && t < ev.t_final) {
                        return Err(CliError::schema("evolve.t_min", "must lie in (0, t_final)"));
                    }
                }
            }
            Task::Optimize => {
                let opt = self.optimize.as_ref().ok_or_else(|| CliError::schema("optimize", "task `optimize` needs an [optimize] table"))?;
                if opt.axes.is_empty() || opt.axes.len() > 2 {
                    return Err(CliError::schema("optimize.axes", "one or two free axes"));
                }
                for (i, ax) in opt.axes.iter().enumerate() {
                    if !model.kind.params().contains(&ax.param.as_str()) || ax.param == "n" || ax.param == "n_cut" {
                        return Err(CliError::schema(format!("optimize.axes[{i}].param"), format!("`{}` cannot be optimized for model `{}`", ax.param, model.kind.name())));
                    }
                    if ax.scale == AxisScale::Db && !(ax.param == "r" || ax.param == "r_db") {
                        return Err(CliError::schema(format!("optimize.axes[{i}].scale"), "dB scale applies to `r` only"));
                    }
                    if !(ax.lo < ax.hi) || !ax.lo.is_finite() || !ax.hi.is_finite() {
                        return Err(CliError::schema(format!("optimize.axes[{i}].hi"), "need finite lo < hi"));
                    }
                    if ax.scale == AxisScale::Log && !(ax.lo > 0.0) {
                        return Err(CliError::schema(format!("optimize.axes[{i}].lo"), "log axes need lo > 0"));
                    }
                    if ax.points < 3 {
                        return Err(CliError::schema(format!("optimize.axes[{i}].points"), "need at least three grid points"));
                    }
                    set_by_axes.push(&ax.param);
                }
                if opt.objective == Objective::EvenoddRatio && matches!(model.kind, ModelKind::Meanfield | ModelKind::Oat | ModelKind::Protocol) {
                    return Err(CliError::schema("optimize.objective", "evenodd_ratio needs a density-matrix model"));
                }
            }
            _ => {}
        }
        if matches!(task, Task::Steady | Task::Sweep | Task::Gap | Task::Optimize) && model.kind == ModelKind::Protocol {
            return Err(CliError::schema("task", "protocol models only support `evolve`"));
        }
        if task == Task::Gap && self.gap_method == GapMethod::RateMatrix && !matches!(model.kind, ModelKind::Spin | ModelKind::Ideal) {
            return Err(CliError::schema("gap_method", "rate_matrix needs the ideal or spin model"));
        }
        for req in model.kind.required() {
            if model.get(req).is_none() && !set_by_axes.contains(req) {
                return Err(CliError::schema(format!("model.{req}"), format!("required by model `{}`", model.kind.name())));
            }
        }
        if let Some(0) = self.workers {
            return Err(CliError::schema("workers", "need at least one worker"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = r#"
name = "t"
task = "sweep"
[model]
kind = "thermal"
n = 20
n_th = 0.1
[[sweep]]
param = "r"
grid = { kind = "linear", start = 0.0, stop = 2.0, points = 5 }
"#;

    #[test]
    fn parses_and_validates() {
        let c = RunConfig::from_toml_str(SWEEP).unwrap();
        c.validate().unwrap();
        assert_eq!(c.sweep[0].grid.values().len(), 5);
    }

    #[test]
    fn unknown_field_reports_path() {
        let text = SWEEP.replace("n_th = 0.1", "n_th = 0.1\nbogus = 1");
        let e = RunConfig::from_toml_str(&text).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("model"), "{e}");
    }

    #[test]
    fn wrong_type_reports_path() {
        let text = SWEEP.replace("n = 20", "n = \"twenty\"");
        let e = RunConfig::from_toml_str(&text).unwrap_err();
        assert!(e.to_string().contains("model.n"), "{e}");
    }

    #[test]
    fn parameter_not_in_model() {
        let text = SWEEP.replace("n_th = 0.1", "gamma_phi = 0.1");
        let e = RunConfig::from_toml_str(&text).unwrap().validate().unwrap_err();
        assert!(e.to_string().contains("model.gamma_phi"), "{e}");
        let text = SWEEP.replace("param = \"r\"", "param = \"kappa_sqz\"");
        let e = RunConfig::from_toml_str(&text).unwrap().validate().unwrap_err();
        assert!(e.to_string().contains("sweep[0].param"), "{e}");
    }

    #[test]
    fn empty_grid_rejected() {
        let text = SWEEP.replace("points = 5", "points = 0");
        let e = RunConfig::from_toml_str(&text).unwrap().validate().unwrap_err();
        assert!(e.to_string().contains("sweep[0].grid.points"), "{e}");
    }

    #[test]
    fn non_integer_n_rejected() {
        let text = SWEEP.replace("param = \"r\"", "param = \"n\"");
        let e = RunConfig::from_toml_str(&text).unwrap().validate().unwrap_err();
        assert!(e.to_string().contains("sweep[0].grid"), "{e}");
    }

    #[test]
    fn db_round_trip() {
        assert!((r_to_db(db_to_r(12.0)) - 12.0).abs() < 1e-12);
        assert!((db_to_r(10.0) - 0.5 * 10f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn env_overrides() {
        let mut t = Tolerances::default();
        t.apply_env(|k| (k == "SPINSQUEEZE_RTOL").then(|| "1e-6".to_string())).unwrap();
        assert_eq!(t.rtol, 1e-6);
        let e = t.apply_env(|k| (k == "SPINSQUEEZE_ATOL").then(|| "abc".to_string())).unwrap_err();
        assert!(e.to_string().contains("SPINSQUEEZE_ATOL"));
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::from_toml_str(SWEEP).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(c, back);
        let toml_text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml_str(&toml_text).unwrap(), c);
    }
}
