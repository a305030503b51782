//! Result records written by every subcommand.

use std::fmt;

use resilience_core::exact::{MetricResult, ParetoPoint, SearchSummary, Status};
use resilience_core::farkas::VertexCertificate;
use resilience_core::scenario::{ScenarioCertificate, ScenarioObjective, Template};
use resilience_core::{Controller, DisturbanceSequence, Trajectory};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::problem::ProblemFile;

/// A float that survives JSON: non-finite values are written as `"inf"`,
/// `"-inf"` or `"nan"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct NumVisitor;
        impl Visitor<'_> for NumVisitor {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                match v {
                    "inf" => Ok(Num(f64::INFINITY)),
                    "-inf" => Ok(Num(f64::NEG_INFINITY)),
                    "nan" => Ok(Num(f64::NAN)),
                    other => other
                        .parse()
                        .map(Num)
                        .map_err(|_| E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }
        d.deserialize_any(NumVisitor)
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_finite() {
            write!(f, "{}", self.0)
        } else if self.0.is_nan() {
            f.write_str("nan")
        } else if self.0 > 0.0 {
            f.write_str("inf")
        } else {
            f.write_str("-inf")
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Feasible,
    NominalInfeasible,
    /// The trade-off program has no feasible point.
    Infeasible,
    /// No start of the scenario search reached a feasible point.
    NoFeasiblePoint,
    Certified,
    Violated,
}

impl RecordStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RecordStatus::Feasible | RecordStatus::Certified => 0,
            _ => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemFile>,
    pub result: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

impl ResultRecord {
    pub fn new(
        command: &str,
        status: RecordStatus,
        problem: Option<ProblemFile>,
        result: Outcome,
    ) -> Self {
        let seed = problem.as_ref().map(|p| p.query.scenario.seed);
        Self {
            tool: "resil".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            status,
            seed,
            problem,
            result,
            elapsed_ms: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Metric(MetricRecord),
    Frontier {
        points: Vec<FrontierRow>,
    },
    Scenario(ScenarioRecord),
    RiskBound {
        k: usize,
        m: usize,
        beta: f64,
        bound: f64,
    },
    Rollout {
        mu: Num,
        trajectories: Vec<TrajectoryRecord>,
    },
    Certify(CertifyRecord),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub satisfied: bool,
    pub worst_margin: Num,
    pub vertices: u64,
    pub witness: DisturbanceSequence,
}

impl From<&VertexCertificate<f64>> for VertexRecord {
    fn from(c: &VertexCertificate<f64>) -> Self {
        Self {
            satisfied: c.satisfied,
            worst_margin: Num(c.worst_margin),
            vertices: c.vertices,
            witness: c.witness.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub metric: String,
    pub loop_kind: String,
    pub value: Num,
    pub companion: Num,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<Controller>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<VertexRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSummary>,
}

impl MetricRecord {
    pub fn from_result(r: &MetricResult<f64>, loop_kind: &str) -> (RecordStatus, Self) {
        let status = match r.status {
            Status::Feasible => RecordStatus::Feasible,
            Status::NominalInfeasible => RecordStatus::NominalInfeasible,
        };
        let metric = serde_json::to_value(r.metric)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        (
            status,
            Self {
                metric,
                loop_kind: loop_kind.into(),
                value: Num(r.value),
                companion: Num(r.companion),
                controller: r.controller.clone(),
                certificate: r.certificate.as_ref().map(VertexRecord::from),
                search: r.search,
            },
        )
    }

    /// `(μ, ε)` the controller was synthesized for; `None` for unbounded inputs.
    pub fn operating_point(&self) -> (f64, Option<f64>) {
        let (v, c) = (self.value.0, self.companion.0);
        let bounded = |e: f64| e.is_finite().then_some(e);
        if self.metric == "effort" {
            (c, bounded(v))
        } else {
            (v, bounded(c))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub w1: f64,
    pub w2: f64,
    pub mu: Num,
    pub eps: Num,
    pub objective: Num,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<Controller>,
}

impl From<&ParetoPoint<f64>> for FrontierRow {
    fn from(p: &ParetoPoint<f64>) -> Self {
        Self {
            w1: p.w1,
            w2: p.w2,
            mu: Num(p.mu),
            eps: Num(p.eps),
            objective: Num(p.objective),
            controller: p.controller.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub template: Template,
    pub objective_spec: ScenarioObjective<f64>,
    pub mu: Num,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Num>,
    pub objective: Num,
    pub alpha: Vec<f64>,
    pub controller: Controller,
    pub samples: usize,
    pub scenario_seed: u64,
    pub search_seed: u64,
    pub worst_margin: Num,
    pub mu_capped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical_violation: Option<EmpiricalRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRecord {
    pub samples: usize,
    pub seed: u64,
    pub rate: f64,
}

impl From<&ScenarioCertificate<f64>> for ScenarioRecord {
    fn from(c: &ScenarioCertificate<f64>) -> Self {
        Self {
            template: c.template,
            objective_spec: c.objective_spec,
            mu: Num(c.mu),
            eps: c.eps.map(Num),
            objective: Num(c.objective),
            alpha: c.alpha.clone(),
            controller: c.controller.clone(),
            samples: c.samples,
            scenario_seed: c.scenario_seed,
            search_seed: c.search_seed,
            worst_margin: Num(c.worst_margin),
            mu_capped: c.mu_capped,
            support: c.support,
            beta: c.beta,
            bound: c.bound,
            empirical_violation: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub label: String,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
}

impl TrajectoryRecord {
    pub fn new(label: impl Into<String>, t: Trajectory) -> Self {
        Self {
            label: label.into(),
            states: t.states,
            inputs: t.inputs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyRecord {
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Vertex enumeration is exact only for affine dynamics.
    pub exact: bool,
    pub certificate: VertexRecord,
    pub controller: Controller,
}
