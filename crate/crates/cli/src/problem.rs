//! Problem-file schema, validation and conversion into core types.

use std::collections::BTreeMap;
use std::path::Path;

use resilience_core::exact::{ReductionForm, SearchConfig};
use resilience_core::model::builtin;
use resilience_core::scenario::{Distribution, ScenarioConfig, Template};
use resilience_core::spec::{compile_text, HalfspacePolytope, Norm, NormBall, Region, RegionTable};
use resilience_core::{LtvSystem, Matrix, Plant, TimedSets};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Problem-file errors carry the dotted path of the offending field.
#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(String),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("unknown bundled problem `{0}` (available: {1})")]
    UnknownBundled(String, String),
}

fn field(field: impl Into<String>, message: impl Into<String>) -> ProblemError {
    ProblemError::Field {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub horizon: usize,
    pub x0: Vec<f64>,
    pub system: SystemBlock,
    pub regions: BTreeMap<String, RegionSpec>,
    pub spec: String,
    #[serde(default)]
    pub query: Query,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemBlock {
    /// One matrix pair is repeated over the horizon; otherwise one per step.
    Ltv {
        a: Vec<Vec<Vec<f64>>>,
        b: Vec<Vec<Vec<f64>>>,
    },
    Model {
        name: String,
        params: BTreeMap<String, f64>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        units: BTreeMap<String, String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    Box {
        bounds: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        units: Option<String>,
    },
    Polytope {
        g: Vec<Vec<f64>>,
        h: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        units: Option<String>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "euclidean")]
        norm: Norm,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coords: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        units: Option<String>,
    },
    Exterior {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "euclidean")]
        norm: Norm,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coords: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        units: Option<String>,
    },
}

fn euclidean() -> Norm {
    Norm::Euclidean
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[default]
    Resilience,
    Effort,
    Pareto,
    Scenario,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    #[default]
    Open,
    Linear,
    Polynomial,
    /// No input at all; scenario queries only.
    None,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioGoal {
    #[default]
    Resilience,
    Effort,
    Tradeoff,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Query {
    pub metric: MetricKind,
    pub controller: ControllerKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    /// Input bound for resilience queries; absent means unconstrained inputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    /// Disturbance bound for effort queries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub weight_grid: Vec<[f64; 2]>,
    /// Upper clamp on `ε` for trade-off queries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_cap: Option<f64>,
    pub scenario: ScenarioBlock,
    pub search: SearchBlock,
}

impl Default for Query {
    fn default() -> Self {
        Self {
            metric: MetricKind::Resilience,
            controller: ControllerKind::Open,
            degree: None,
            eps0: None,
            mu0: None,
            weights: None,
            weight_grid: Vec::new(),
            eps_cap: None,
            scenario: ScenarioBlock::default(),
            search: SearchBlock::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioBlock {
    pub samples: usize,
    pub beta: f64,
    pub seed: u64,
    pub distribution: Distribution,
    pub objective: ScenarioGoal,
    /// Fresh samples for the empirical violation estimate; zero skips it.
    pub fresh: usize,
    pub fresh_seed: u64,
    /// Skip the removal re-solves.
    pub skip_support: bool,
}

impl Default for ScenarioBlock {
    fn default() -> Self {
        Self {
            samples: 100,
            beta: 1e-2,
            seed: 0,
            distribution: Distribution::Uniform,
            objective: ScenarioGoal::Resilience,
            fresh: 0,
            fresh_seed: 1,
            skip_support: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchBlock {
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub rebuilds: usize,
    /// Exact closed-loop searches: random gains are drawn from `[−scale, scale]`.
    pub scale: f64,
    pub form: ReductionForm,
    pub mu_cap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_scale: Option<f64>,
    /// Row-major feedback gains tried before the random starts.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warm_starts: Vec<Vec<f64>>,
}

impl Default for SearchBlock {
    fn default() -> Self {
        let s = SearchConfig::default();
        let c = ScenarioConfig::default();
        Self {
            restarts: s.restarts,
            seed: s.seed,
            max_iterations: s.nelder_mead.max_iter,
            rebuilds: s.nelder_mead.rebuilds,
            scale: s.scale,
            form: s.form,
            mu_cap: c.mu_cap,
            input_scale: None,
            warm_starts: Vec::new(),
        }
    }
}

/// A problem converted into core types.
pub struct Instance {
    pub plant: Plant,
    pub sets: TimedSets,
    pub x0: Vec<f64>,
}

impl Instance {
    pub fn ltv(&self) -> Result<&LtvSystem, ProblemError> {
        self.plant.as_ltv().ok_or_else(|| {
            field(
                "system.kind",
                "exact metrics need an `ltv` system; use the scenario subcommand",
            )
        })
    }
}

fn matrix(path: &str, rows: &[Vec<f64>]) -> Result<Matrix, ProblemError> {
    let m = Matrix::try_from_rows(rows).ok_or_else(|| field(path, "rows differ in length"))?;
    if m.rows() == 0 || m.cols() == 0 {
        return Err(field(path, "matrix is empty"));
    }
    if !m.is_finite() {
        return Err(field(path, "entries must be finite"));
    }
    Ok(m)
}

fn finite(path: &str, v: &[f64]) -> Result<(), ProblemError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(field(format!("{path}[{i}]"), "must be finite")),
        None => Ok(()),
    }
}

impl RegionSpec {
    fn to_region(&self, path: &str) -> Result<Region<f64>, ProblemError> {
        match self {
            RegionSpec::Box { bounds, .. } => {
                for (i, [lo, hi]) in bounds.iter().enumerate() {
                    if !(lo <= hi) {
                        return Err(field(
                            format!("{path}.bounds[{i}]"),
                            "lower bound exceeds upper bound",
                        ));
                    }
                }
                let iv: Vec<(f64, f64)> = bounds.iter().map(|[lo, hi]| (*lo, *hi)).collect();
                Ok(Region::from_box(&iv))
            }
            RegionSpec::Polytope { g, h, .. } => {
                let g = matrix(&format!("{path}.g"), g)?;
                finite(&format!("{path}.h"), h)?;
                HalfspacePolytope::new(g, h.clone())
                    .map(Region::Polytope)
                    .map_err(|e| field(path, e.to_string()))
            }
            RegionSpec::Ball {
                center,
                radius,
                norm,
                coords,
                ..
            }
            | RegionSpec::Exterior {
                center,
                radius,
                norm,
                coords,
                ..
            } => {
                finite(&format!("{path}.center"), center)?;
                if !(radius.is_finite() && *radius >= 0.0) {
                    return Err(field(
                        format!("{path}.radius"),
                        "must be finite and non-negative",
                    ));
                }
                let ball = NormBall {
                    center: center.clone(),
                    radius: *radius,
                    norm: *norm,
                    coords: coords.clone(),
                };
                Ok(match self {
                    RegionSpec::Ball { .. } => Region::Ball(ball),
                    _ => Region::Exterior(ball),
                })
            }
        }
    }
}

impl ProblemFile {
    pub fn from_toml(text: &str) -> Result<Self, ProblemError> {
        toml::from_str(text).map_err(|e| ProblemError::Syntax(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("problem files always serialize")
    }

    /// Reads a TOML problem file, or the problem echoed in a JSON result record.
    pub fn load(path: &Path) -> Result<Self, ProblemError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProblemError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            #[derive(Deserialize)]
            struct Echo {
                problem: Option<ProblemFile>,
            }
            let echo: Echo =
                serde_json::from_str(&text).map_err(|e| ProblemError::Syntax(e.to_string()))?;
            return echo
                .problem
                .ok_or_else(|| field("problem", "record carries no problem"));
        }
        Self::from_toml(&text)
    }

    /// Resolves `bundled:<name>` or a filesystem path.
    pub fn resolve(arg: &str) -> Result<Self, ProblemError> {
        match arg.strip_prefix("bundled:") {
            Some(name) => bundled(name),
            None => Self::load(Path::new(arg)),
        }
    }

    pub fn instance(&self) -> Result<Instance, ProblemError> {
        let (n, horizon) = (self.x0.len(), self.horizon);
        if horizon == 0 {
            return Err(field("horizon", "must be at least 1"));
        }
        if n == 0 {
            return Err(field("x0", "must not be empty"));
        }
        finite("x0", &self.x0)?;
        let plant = match &self.system {
            SystemBlock::Ltv { a, b } => {
                for (key, len) in [("system.a", a.len()), ("system.b", b.len())] {
                    if len != 1 && len != horizon {
                        return Err(field(
                            key,
                            format!("need one matrix or {horizon}; got {len}"),
                        ));
                    }
                }
                let am: Vec<Matrix> = a
                    .iter()
                    .enumerate()
                    .map(|(k, m)| matrix(&format!("system.a[{k}]"), m))
                    .collect::<Result<_, _>>()?;
                let bm: Vec<Matrix> = b
                    .iter()
                    .enumerate()
                    .map(|(k, m)| matrix(&format!("system.b[{k}]"), m))
                    .collect::<Result<_, _>>()?;
                for (k, ak) in am.iter().enumerate() {
                    if ak.shape() != (n, n) {
                        return Err(field(
                            format!("system.a[{k}]"),
                            format!("expected {n}×{n} to match x0"),
                        ));
                    }
                }
                for (k, bk) in bm.iter().enumerate() {
                    if bk.rows() != n || bk.cols() != bm[0].cols() {
                        return Err(field(
                            format!("system.b[{k}]"),
                            format!("expected {n} rows and a common column count"),
                        ));
                    }
                }
                let spread = |v: Vec<Matrix>| {
                    if v.len() == 1 {
                        vec![v[0].clone(); horizon]
                    } else {
                        v
                    }
                };
                let (am, bm) = (spread(am), spread(bm));
                Plant::Ltv(LtvSystem::new(am, bm).map_err(|e| field("system", e.to_string()))?)
            }
            SystemBlock::Model { name, params, .. } => {
                let sys = builtin::build(name, params, horizon).map_err(|e| match e {
                    resilience_core::model::ModelError::MissingParameter { param, .. } => {
                        field(format!("system.params.{param}"), "missing")
                    }
                    other => field("system.name", other.to_string()),
                })?;
                let plant = Plant::Nonlinear(sys);
                if resilience_core::model::Dynamics::state_dim(&plant) != n {
                    return Err(field(
                        "x0",
                        format!("model `{name}` has a different state dimension"),
                    ));
                }
                plant
            }
        };
        let mut regions = RegionTable::new();
        for (name, spec) in &self.regions {
            regions.insert(name.clone(), spec.to_region(&format!("regions.{name}"))?);
        }
        let sets = compile_text(&self.spec, &regions, n, horizon)
            .map_err(|e| field("spec", e.to_string()))?;
        Ok(Instance {
            plant,
            sets,
            x0: self.x0.clone(),
        })
    }

    pub fn template(&self) -> Result<Template, ProblemError> {
        Ok(match self.query.controller {
            ControllerKind::Open => Template::OpenLoop,
            ControllerKind::Linear => Template::Linear,
            ControllerKind::None => Template::Autonomous,
            ControllerKind::Polynomial => match self.query.degree {
                Some(d) if d >= 1 => Template::Polynomial { degree: d },
                _ => {
                    return Err(field(
                        "query.degree",
                        "polynomial controllers need a degree of at least 1",
                    ))
                }
            },
        })
    }

    pub fn search_config(&self) -> SearchConfig {
        let s = &self.query.search;
        let mut cfg = SearchConfig {
            restarts: s.restarts,
            warm_starts: s.warm_starts.clone(),
            seed: s.seed,
            scale: s.scale,
            form: s.form,
            ..Default::default()
        };
        cfg.nelder_mead.max_iter = s.max_iterations;
        cfg.nelder_mead.rebuilds = s.rebuilds;
        cfg
    }

    pub fn scenario_config(&self) -> ScenarioConfig {
        let s = &self.query.search;
        let mut cfg = ScenarioConfig {
            restarts: s.restarts,
            seed: s.seed,
            mu_cap: s.mu_cap,
            input_scale: s.input_scale,
            ..Default::default()
        };
        cfg.nelder_mead.max_iter = s.max_iterations;
        cfg.nelder_mead.rebuilds = s.rebuilds;
        cfg
    }

    /// `--seed` sets both the sampling and the search seed.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.query.scenario.seed = s;
            self.query.search.seed = s;
        }
        self
    }
}

const BUNDLED: &[(&str, &str)] = &[
    ("robot_open", include_str!("../problems/robot_open.toml")),
    (
        "robot_closed",
        include_str!("../problems/robot_closed.toml"),
    ),
    ("acc_linear", include_str!("../problems/acc_linear.toml")),
    ("acc_poly", include_str!("../problems/acc_poly.toml")),
    ("collision", include_str!("../problems/collision.toml")),
    ("generator", include_str!("../problems/generator.toml")),
];

pub fn bundled(name: &str) -> Result<ProblemFile, ProblemError> {
    let name = name.trim_end_matches(".toml");
    let (_, text) = BUNDLED.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        ProblemError::UnknownBundled(
            name.into(),
            BUNDLED
                .iter()
                .map(|(n, _)| *n)
                .collect::<Vec<_>>()
                .join(", "),
        )
    })?;
    ProblemFile::from_toml(text)
}

/// Every shipped case study, in a fixed order.
pub fn bundled_case_studies() -> Vec<ProblemFile> {
    BUNDLED
        .iter()
        .map(|(n, _)| bundled(n).expect("bundled problems parse"))
        .collect()
}
