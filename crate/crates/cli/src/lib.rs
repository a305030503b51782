//! `resil`: resilience, effort and trade-off metrics from declarative problem files.
//!
//! Exit status is 0 for feasible or certified outcomes, 2 for infeasible,
//! nominally infeasible or violated ones, and 1 for input or tool errors.

pub mod output;
pub mod problem;
pub mod record;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use resilience_core::exact::{
    effort_closed, effort_open, pareto_closed, pareto_open, pareto_sweep, resilience_closed,
    resilience_open, ExactError, SweepMode,
};
use resilience_core::farkas::certify_vertices;
use resilience_core::model::{rollout, Dynamics};
use resilience_core::scenario::{
    empirical_violation, risk_bound, sample_disturbances, solve_scenario, support_count,
    ScenarioError, ScenarioObjective,
};
use resilience_core::{Controller, DisturbanceSequence};

pub use output::{emit_frontier, Format};
pub use problem::{bundled_case_studies, ProblemFile};
use problem::{ControllerKind, MetricKind, ScenarioGoal};
use record::{
    CertifyRecord, EmpiricalRecord, FrontierRow, MetricRecord, Num, Outcome, RecordStatus,
    ResultRecord, ScenarioRecord, TrajectoryRecord, VertexRecord,
};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "RESIL_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "resil",
    version,
    about = "Resilience and effort metrics for finite-horizon specifications"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Problem file (TOML), a JSON result record, or `bundled:<name>`.
    #[arg(long)]
    pub problem: String,
    #[command(flatten)]
    pub io: Io,
    /// Seed for scenario sampling and randomized search starts.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct Io {
    /// Output path; the record goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Suppress the summary line on stderr.
    #[arg(long)]
    pub quiet: bool,
    /// Include wall-clock time in the record.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Largest tolerated disturbance bound.
    Resilience(Common),
    /// Smallest sufficient input bound.
    Effort(Common),
    /// Trade-off point, or a frontier when the query lists a weight grid.
    Pareto(Common),
    /// Sampled program for nonlinear plants or controllers.
    Scenario(Common),
    /// Violation bound for a given complexity.
    RiskBound {
        #[arg(long)]
        k: usize,
        #[arg(long = "M")]
        m: usize,
        #[arg(long)]
        beta: f64,
        #[command(flatten)]
        io: Io,
    },
    /// Trajectories of the synthesized controller for plotting.
    Rollout {
        #[command(flatten)]
        common: Common,
        /// Take the controller from a result record instead of solving.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Disturbance bound for the random trajectories.
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
    /// Vertex check of the synthesized controller at a disturbance bound.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mu: f64,
        /// Input bound to check; defaults to the one the controller was built for.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        record: Option<PathBuf>,
    },
}

impl Command {
    fn io(&self) -> &Io {
        match self {
            Command::Resilience(c)
            | Command::Effort(c)
            | Command::Pareto(c)
            | Command::Scenario(c) => &c.io,
            Command::Rollout { common, .. } | Command::Certify { common, .. } => &common.io,
            Command::RiskBound { io, .. } => io,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Resilience(_) => "resilience",
            Command::Effort(_) => "effort",
            Command::Pareto(_) => "pareto",
            Command::Scenario(_) => "scenario",
            Command::RiskBound { .. } => "risk-bound",
            Command::Rollout { .. } => "rollout",
            Command::Certify { .. } => "certify",
        }
    }
}

/// Errors in the caller's input map to exit status 1, as do tool failures.
#[derive(Debug)]
pub struct Finished {
    pub record: ResultRecord,
    pub summary: String,
}

/// Sizes the global thread pool from [`THREADS_ENV`]; ignored when unset or invalid.
pub fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// Parses `args`, runs the command, writes the record and returns the exit status.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_threads();
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn execute(command: &Command) -> Result<i32> {
    let io = command.io().clone();
    let start = Instant::now();
    let mut done = dispatch(command)?;
    if io.timing {
        done.record.elapsed_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    let bytes = output::render(&done.record, io.format)?;
    match &io.out {
        Some(path) => output::write_atomic(path, &bytes)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
        }
    }
    if !io.quiet {
        eprintln!("{}", done.summary);
    }
    Ok(done.record.status.exit_code())
}

fn load(common: &Common) -> Result<ProblemFile> {
    Ok(ProblemFile::resolve(&common.problem)?.with_seed(common.seed))
}

/// Runs a command without writing anything.
pub fn dispatch(command: &Command) -> Result<Finished> {
    let name = command.name();
    match command {
        Command::Resilience(c) => exact_metric(name, load(c)?, MetricKind::Resilience),
        Command::Effort(c) => exact_metric(name, load(c)?, MetricKind::Effort),
        Command::Pareto(c) => exact_metric(name, load(c)?, MetricKind::Pareto),
        Command::Scenario(c) => scenario(name, load(c)?),
        Command::RiskBound { k, m, beta, .. } => {
            let bound = risk_bound(*k, *m, *beta).context("scenario module")?;
            let record = ResultRecord::new(
                name,
                RecordStatus::Feasible,
                None,
                Outcome::RiskBound {
                    k: *k,
                    m: *m,
                    beta: *beta,
                    bound,
                },
            );
            Ok(Finished {
                record,
                summary: format!("b(k={k}, M={m}, beta={beta}) = {bound:.3}"),
            })
        }
        Command::Rollout {
            common,
            record,
            mu,
            samples,
        } => rollout_cmd(name, load(common)?, record.as_ref(), *mu, *samples),
        Command::Certify {
            common,
            mu,
            eps,
            record,
        } => certify_cmd(name, load(common)?, record.as_ref(), *mu, *eps),
    }
}

fn exact_err(e: ExactError) -> anyhow::Error {
    anyhow!(e).context("exact module")
}

fn closed_loop(problem: &ProblemFile) -> Result<bool> {
    match problem.query.controller {
        ControllerKind::Open => Ok(false),
        ControllerKind::Linear => Ok(true),
        other => {
            bail!("query.controller: `{other:?}` is only available through the scenario subcommand")
        }
    }
}

fn exact_metric(name: &str, problem: ProblemFile, metric: MetricKind) -> Result<Finished> {
    let inst = problem.instance()?;
    let sys = inst.ltv()?;
    let (sets, x0) = (&inst.sets, &inst.x0[..]);
    let closed = closed_loop(&problem)?;
    let loop_kind = if closed { "closed" } else { "open" };
    let q = &problem.query;
    let cfg = problem.search_config();
    match metric {
        MetricKind::Resilience | MetricKind::Effort => {
            let r = if metric == MetricKind::Resilience {
                if closed {
                    resilience_closed(sys, sets, x0, q.eps0, &cfg)
                } else {
                    resilience_open(sys, sets, x0, q.eps0)
                }
            } else {
                let mu0 = q
                    .mu0
                    .ok_or_else(|| anyhow!("query.mu0: required for effort queries"))?;
                if closed {
                    effort_closed(sys, sets, x0, mu0, &cfg)
                } else {
                    effort_open(sys, sets, x0, mu0)
                }
            };
            let r = match r {
                Err(ExactError::InfeasibleAtMu0 { mu0 }) => {
                    let rec = MetricRecord {
                        metric: "effort".into(),
                        loop_kind: loop_kind.into(),
                        value: Num(f64::INFINITY),
                        companion: Num(mu0),
                        controller: None,
                        certificate: None,
                        search: None,
                    };
                    let record = ResultRecord::new(
                        name,
                        RecordStatus::Infeasible,
                        Some(problem),
                        Outcome::Metric(rec),
                    );
                    return Ok(Finished {
                        record,
                        summary: format!("effort: no controller tolerates mu0 = {mu0}"),
                    });
                }
                other => other.map_err(exact_err)?,
            };
            let (status, rec) = MetricRecord::from_result(&r, loop_kind);
            let summary = format!(
                "{} ({loop_kind} loop) = {} [{:?}]",
                rec.metric, rec.value, status
            );
            let record = ResultRecord::new(name, status, Some(problem), Outcome::Metric(rec));
            Ok(Finished { record, summary })
        }
        MetricKind::Pareto | MetricKind::Scenario => {
            let mode = if closed {
                SweepMode::Closed(cfg.clone())
            } else {
                SweepMode::Open
            };
            if !q.weight_grid.is_empty() {
                let weights: Vec<(f64, f64)> =
                    q.weight_grid.iter().map(|[a, b]| (*a, *b)).collect();
                let pts =
                    pareto_sweep(sys, sets, x0, &weights, &mode, q.eps_cap).map_err(exact_err)?;
                let rows: Vec<FrontierRow> =
                    output::sorted_frontier(&pts.iter().map(FrontierRow::from).collect::<Vec<_>>());
                let status = if rows.is_empty() {
                    RecordStatus::Infeasible
                } else {
                    RecordStatus::Feasible
                };
                let summary = format!(
                    "frontier: {} points from {} weight pairs",
                    rows.len(),
                    weights.len()
                );
                let record = ResultRecord::new(
                    name,
                    status,
                    Some(problem),
                    Outcome::Frontier { points: rows },
                );
                return Ok(Finished { record, summary });
            }
            let [w1, w2] = q.weights.ok_or_else(|| {
                anyhow!("query.weights: required for pareto queries without a weight_grid")
            })?;
            let p = if closed {
                pareto_closed(sys, sets, x0, w1, w2, q.eps_cap, &cfg)
            } else {
                pareto_open(sys, sets, x0, w1, w2, q.eps_cap)
            }
            .map_err(exact_err)?;
            let (status, points, summary) = match p {
                Some(p) => {
                    let s = format!(
                        "trade-off ({loop_kind} loop): mu = {}, eps = {}",
                        Num(p.mu),
                        Num(p.eps)
                    );
                    (RecordStatus::Feasible, vec![FrontierRow::from(&p)], s)
                }
                None => (
                    RecordStatus::Infeasible,
                    Vec::new(),
                    "trade-off program is infeasible".to_string(),
                ),
            };
            let record =
                ResultRecord::new(name, status, Some(problem), Outcome::Frontier { points });
            Ok(Finished { record, summary })
        }
    }
}

fn scenario_objective(problem: &ProblemFile) -> Result<ScenarioObjective<f64>> {
    let q = &problem.query;
    Ok(match q.scenario.objective {
        ScenarioGoal::Resilience => ScenarioObjective::resilience(q.eps0),
        ScenarioGoal::Effort => ScenarioObjective::effort(
            q.mu0
                .ok_or_else(|| anyhow!("query.mu0: required for scenario effort"))?,
        ),
        ScenarioGoal::Tradeoff => {
            let [w1, w2] = q
                .weights
                .ok_or_else(|| anyhow!("query.weights: required for scenario trade-off"))?;
            let mut o = ScenarioObjective::tradeoff(w1, w2);
            if let Some(cap) = q.eps_cap {
                o.eps = resilience_core::scenario::InputBound::Fixed(cap);
            }
            o
        }
    })
}

fn scenario(name: &str, problem: ProblemFile) -> Result<Finished> {
    let inst = problem.instance()?;
    let template = problem.template()?;
    let objective = scenario_objective(&problem)?;
    let sb = &problem.query.scenario;
    let cfg = problem.scenario_config();
    let (n, horizon) = (inst.plant.state_dim(), inst.plant.horizon());
    let scen = sample_disturbances::<f64>(sb.samples, horizon, n, sb.seed, sb.distribution)
        .map_err(|e| anyhow!(e).context("query.scenario.samples"))?;
    let solved = solve_scenario(
        &inst.plant,
        &inst.sets,
        &inst.x0,
        template,
        &scen,
        objective,
        &cfg,
    );
    let mut cert = match solved {
        Ok(c) => c,
        Err(ScenarioError::NoFeasiblePoint { starts }) => {
            let rec = ScenarioRecord {
                template,
                objective_spec: objective,
                mu: Num(0.0),
                eps: None,
                objective: Num(f64::NEG_INFINITY),
                alpha: Vec::new(),
                controller: Controller::Zero {
                    input_dim: inst.plant.input_dim(),
                },
                samples: scen.len(),
                scenario_seed: sb.seed,
                search_seed: cfg.seed,
                worst_margin: Num(f64::NEG_INFINITY),
                mu_capped: false,
                support: None,
                beta: None,
                bound: None,
                empirical_violation: None,
            };
            let record = ResultRecord::new(
                name,
                RecordStatus::NoFeasiblePoint,
                Some(problem),
                Outcome::Scenario(rec),
            );
            return Ok(Finished {
                record,
                summary: format!("scenario: no feasible point from {starts} starts"),
            });
        }
        Err(e) => return Err(anyhow!(e).context("scenario module")),
    };
    if !sb.skip_support {
        let s = support_count(&cert, &inst.plant, &inst.sets, &inst.x0, &scen, &cfg)
            .context("scenario module")?;
        cert.support = Some(s);
        cert.beta = Some(sb.beta);
        cert.bound = Some(risk_bound(s, scen.len(), sb.beta).context("query.scenario.beta")?);
    }
    let mut rec = ScenarioRecord::from(&cert);
    if sb.fresh > 0 {
        let fresh =
            sample_disturbances::<f64>(sb.fresh, horizon, n, sb.fresh_seed, sb.distribution)?;
        let rate = empirical_violation(&cert, &inst.plant, &inst.sets, &inst.x0, &fresh)
            .context("scenario module")?;
        rec.empirical_violation = Some(EmpiricalRecord {
            samples: sb.fresh,
            seed: sb.fresh_seed,
            rate,
        });
    }
    let mut summary = format!("scenario (M = {}): mu = {}", scen.len(), rec.mu);
    if let Some(e) = rec.eps {
        summary.push_str(&format!(", eps = {e}"));
    }
    if let (Some(s), Some(b)) = (rec.support, rec.bound) {
        summary.push_str(&format!(", support = {s}, bound = {b:.4}"));
    }
    let record = ResultRecord::new(
        name,
        RecordStatus::Feasible,
        Some(problem),
        Outcome::Scenario(rec),
    );
    Ok(Finished { record, summary })
}

/// Controller and `(μ, ε)` from a record, or from solving the problem's query.
fn synthesize(
    problem: &ProblemFile,
    record: Option<&PathBuf>,
) -> Result<(Controller, f64, Option<f64>)> {
    let rec = match record {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<ResultRecord>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let p = problem.clone();
            match problem.query.metric {
                MetricKind::Scenario => scenario("scenario", p)?.record,
                m => exact_metric("synthesize", p, m)?.record,
            }
        }
    };
    match rec.result {
        Outcome::Metric(m) => {
            let (mu, eps) = m.operating_point();
            let c = m
                .controller
                .clone()
                .ok_or_else(|| anyhow!("the query produced no controller ({:?})", rec.status))?;
            Ok((c, mu, eps))
        }
        Outcome::Scenario(s) if rec.status == RecordStatus::Feasible => {
            Ok((s.controller, s.mu.0, s.eps.map(|e| e.0)))
        }
        Outcome::Frontier { points } => {
            let p = points
                .first()
                .ok_or_else(|| anyhow!("the trade-off query has no feasible point"))?;
            let c = p
                .controller
                .clone()
                .ok_or_else(|| anyhow!("the trade-off point carries no controller"))?;
            Ok((c, p.mu.0, p.eps.0.is_finite().then_some(p.eps.0)))
        }
        _ => bail!("record does not carry a controller"),
    }
}

fn rollout_cmd(
    name: &str,
    problem: ProblemFile,
    record: Option<&PathBuf>,
    mu: Option<f64>,
    samples: usize,
) -> Result<Finished> {
    let inst = problem.instance()?;
    let (controller, mu_synth, _) = synthesize(&problem, record)?;
    let mu = mu.unwrap_or(mu_synth);
    if !(mu.is_finite() && mu >= 0.0) {
        bail!("--mu: need a finite non-negative disturbance bound (got {mu})");
    }
    let (n, horizon) = (inst.plant.state_dim(), inst.plant.horizon());
    let mut trajectories = vec![TrajectoryRecord::new(
        "nominal",
        rollout(
            &inst.plant,
            &controller,
            &inst.x0,
            &DisturbanceSequence::zeros(n, horizon),
        )?,
    )];
    if samples > 0 {
        let sq = &problem.query.scenario;
        let set = sample_disturbances::<f64>(samples, horizon, n, sq.seed, sq.distribution)?;
        for (i, d) in set.samples.iter().enumerate() {
            let t = rollout(&inst.plant, &controller, &inst.x0, &d.scaled(mu))?;
            trajectories.push(TrajectoryRecord::new(format!("sample{i}"), t));
        }
    }
    let summary = format!("rollout: {} trajectories at mu = {mu}", trajectories.len());
    let record = ResultRecord::new(
        name,
        RecordStatus::Feasible,
        Some(problem),
        Outcome::Rollout {
            mu: Num(mu),
            trajectories,
        },
    );
    Ok(Finished { record, summary })
}

fn certify_cmd(
    name: &str,
    problem: ProblemFile,
    record: Option<&PathBuf>,
    mu: f64,
    eps: Option<f64>,
) -> Result<Finished> {
    if !(mu.is_finite() && mu >= 0.0) {
        bail!("--mu: need a finite non-negative disturbance bound (got {mu})");
    }
    let inst = problem.instance()?;
    let (controller, _, eps_synth) = synthesize(&problem, record)?;
    let eps = eps.or(eps_synth);
    let cert = certify_vertices(&inst.plant, &controller, &inst.x0, mu, &inst.sets, eps)
        .context("farkas module")?;
    let exact = inst.plant.as_ltv().is_some() && inst.sets.polytopic;
    let status = if cert.satisfied {
        RecordStatus::Certified
    } else {
        RecordStatus::Violated
    };
    let summary = if cert.satisfied {
        format!(
            "certified at mu = {mu} over {} vertices (worst margin {})",
            cert.vertices,
            Num(cert.worst_margin)
        )
    } else {
        format!(
            "violated at mu = {mu}: worst margin {} at witness {:?}",
            Num(cert.worst_margin),
            cert.witness.0
        )
    };
    let rec = CertifyRecord {
        mu,
        eps,
        exact,
        certificate: VertexRecord::from(&cert),
        controller,
    };
    let record = ResultRecord::new(name, status, Some(problem), Outcome::Certify(rec));
    Ok(Finished { record, summary })
}
