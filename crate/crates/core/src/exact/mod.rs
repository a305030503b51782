//! Exact resilience, effort and trade-off for linear time-varying plants with
//! polytopic specifications.
//!
//! Open-loop queries are single linear programs. Closed-loop queries fix the
//! gain `α₁`, which makes every constraint linear in `(μ, ε, α₂)`, and search
//! over `α₁` with multi-start Nelder–Mead; their results are certified bounds
//! rather than global optima.

mod inner;

pub use inner::{
    build_program, minimal_slack, required_effort, solve_inner, EpsSpec, InnerOutcome, InnerQuery,
    InnerSolution, MuSpec, ReductionForm,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::farkas::{
    certify_vertices, closed_loop_blocks, open_loop_blocks, FarkasBlocks, FarkasError,
    VertexCertificate, VERTEX_GUARD,
};
use crate::linalg::Matrix;
use crate::lp::LpError;
use crate::model::{Controller, Dynamics, LinearFeedback, LtvSystem, OpenLoopSequence};
use crate::optim::NelderMead;
use crate::scalar::Scalar;
use crate::spec::TimedSets;

/// Objective value assigned to gains whose inner program is infeasible, on
/// top of the minimal violation.
pub const INFEASIBLE_PENALTY: f64 = 1e8;

/// Gains whose blocks carry entries beyond this are rejected as numerically
/// meaningless.
pub const CONDITION_LIMIT: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error(transparent)]
    Farkas(#[from] FarkasError),
    #[error("linear program: {0}")]
    Lp(String),
    #[error(
        "no controller tolerates disturbance bound {mu0}; it exceeds the attainable resilience"
    )]
    InfeasibleAtMu0 { mu0: f64 },
    #[error("trade-off objective is unbounded: nothing limits {0}")]
    Unbounded(&'static str),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl From<LpError> for ExactError {
    fn from(e: LpError) -> Self {
        ExactError::Lp(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Resilience,
    Effort,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Feasible,
    NominalInfeasible,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub starts: usize,
    pub feasible_starts: usize,
    pub best_start: usize,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricResult<T> {
    pub metric: Metric,
    /// `μ` for resilience, `ε` for effort; `+∞` when unbounded.
    pub value: T,
    pub status: Status,
    pub controller: Option<Controller<T>>,
    /// Worst-case input magnitude for resilience, `μ₀` for effort.
    pub companion: T,
    /// Vertex certificate, when `n·N` is within the enumeration guard.
    pub certificate: Option<VertexCertificate<T>>,
    /// Present for closed-loop searches, whose infeasibility verdicts are
    /// search-based and therefore not conclusive.
    pub search: Option<SearchSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint<T> {
    pub w1: T,
    pub w2: T,
    pub mu: T,
    pub eps: T,
    pub objective: T,
    pub controller: Option<Controller<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Random starts in addition to `α₁ = 0`.
    pub restarts: usize,
    /// Row-major gains tried right after `α₁ = 0`, before the random starts.
    #[serde(default)]
    pub warm_starts: Vec<Vec<f64>>,
    pub seed: u64,
    /// Random starts draw each gain entry uniformly from `[−scale, scale]`.
    pub scale: f64,
    pub nelder_mead: NelderMead,
    pub form: ReductionForm,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            warm_starts: Vec::new(),
            seed: 0,
            scale: 1.0,
            nelder_mead: NelderMead::default(),
            form: ReductionForm::L1,
        }
    }
}

impl SearchConfig {
    fn starts<T: Scalar>(&self, dim: usize) -> Vec<Vec<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut starts = vec![vec![T::zero(); dim]];
        starts.extend(
            self.warm_starts
                .iter()
                .filter(|g| g.len() == dim)
                .map(|g| g.iter().map(|v| T::of(*v)).collect()),
        );
        for _ in 0..self.restarts {
            starts.push(
                (0..dim)
                    .map(|_| T::of(rng.gen_range(-self.scale..=self.scale)))
                    .collect(),
            );
        }
        starts
    }
}

fn certify<T: Scalar>(
    system: &LtvSystem<T>,
    sets: &TimedSets<T>,
    x0: &[T],
    controller: &Controller<T>,
    mu: T,
    eps: Option<T>,
) -> Result<Option<VertexCertificate<T>>, ExactError> {
    if !mu.is_finite() || system.state_dim() * system.horizon() > VERTEX_GUARD && mu != T::zero() {
        return Ok(None);
    }
    Ok(Some(certify_vertices(
        system,
        controller,
        x0,
        mu,
        sets,
        eps.filter(|e| e.is_finite()),
    )?))
}

fn open_controller<T: Scalar>(blocks: &FarkasBlocks<T>, v: &[T]) -> Controller<T> {
    let m = blocks.input_dim;
    Controller::OpenLoop(OpenLoopSequence {
        inputs: v.chunks(m).map(<[T]>::to_vec).collect(),
    })
}

fn nominal_infeasible<T: Scalar>(
    metric: Metric,
    companion: T,
    search: Option<SearchSummary>,
) -> MetricResult<T> {
    MetricResult {
        metric,
        value: T::zero(),
        status: Status::NominalInfeasible,
        controller: None,
        companion,
        certificate: None,
        search,
    }
}

/// Largest `μ` tolerated by some open-loop input sequence with `‖u_k‖_∞ ≤ ε₀`
/// (`None` or `+∞`: inputs unconstrained).
pub fn resilience_open<T: Scalar>(
    system: &LtvSystem<T>,
    sets: &TimedSets<T>,
    x0: &[T],
    eps0: Option<T>,
) -> Result<MetricResult<T>, ExactError> {
    let blocks = open_loop_blocks(system, sets, x0)?;
    match solve_inner(&blocks, &InnerQuery::resilience(eps0), ReductionForm::L1)? {
        InnerOutcome::Infeasible => Ok(nominal_infeasible(Metric::Resilience, T::zero(), None)),
        InnerOutcome::Unbounded => unbounded_resilience(&blocks, eps0),
        InnerOutcome::Optimal(sol) => {
            let controller = open_controller(&blocks, &sol.param);
            let certificate = certify(system, sets, x0, &controller, sol.mu, eps0)?;
            Ok(MetricResult {
                metric: Metric::Resilience,
                value: sol.mu,
                status: Status::Feasible,
                companion: required_effort(&blocks, sol.mu, &sol.param),
                controller: Some(controller),
                certificate,
                search: None,
            })
        }
    }
}

fn unbounded_resilience<T: Scalar>(
    blocks: &FarkasBlocks<T>,
    eps0: Option<T>,
) -> Result<MetricResult<T>, ExactError> {
    // Any μ works; report the controller found at μ = 0.
    let q = InnerQuery {
        mu: MuSpec::Fixed(T::zero()),
        ..InnerQuery::resilience(eps0)
    };
    let controller = match solve_inner(blocks, &q, ReductionForm::L1)? {
        InnerOutcome::Optimal(sol) => Some(open_controller(blocks, &sol.param)),
        _ => None,
    };
    Ok(MetricResult {
        metric: Metric::Resilience,
        value: T::infinity(),
        status: Status::Feasible,
        controller,
        companion: T::zero(),
        certificate: None,
        search: None,
    })
}

/// Smallest input bound with which some open-loop sequence tolerates `μ₀`.
pub fn effort_open<T: Scalar>(
    system: &LtvSystem<T>,
    sets: &TimedSets<T>,
    x0: &[T],
    mu0: T,
) -> Result<MetricResult<T>, ExactError> {
    check_mu0(mu0)?;
    let blocks = open_loop_blocks(system, sets, x0)?;
    match solve_inner(&blocks, &InnerQuery::effort(mu0), ReductionForm::L1)? {
        InnerOutcome::Optimal(sol) => {
            let controller = open_controller(&blocks, &sol.param);
            let certificate = certify(system, sets, x0, &controller, mu0, Some(sol.eps))?;
            Ok(MetricResult {
                metric: Metric::Effort,
                value: sol.eps,
                status: Status::Feasible,
                controller: Some(controller),
                companion: mu0,
                certificate,
                search: None,
            })
        }
        InnerOutcome::Unbounded => Err(ExactError::Lp("effort program reported unbounded".into())),
        InnerOutcome::Infeasible => {
            let nominal = solve_inner(&blocks, &InnerQuery::effort(T::zero()), ReductionForm::L1)?;
            if matches!(nominal, InnerOutcome::Optimal(_)) {
                Err(ExactError::InfeasibleAtMu0 {
                    mu0: mu0.to_f64_lossy(),
                })
            } else {
                Ok(nominal_infeasible(Metric::Effort, mu0, None))
            }
        }
    }
}

fn check_mu0<T: Scalar>(mu0: T) -> Result<(), ExactError> {
    if !(mu0 >= T::zero()) || !mu0.is_finite() {
        return Err(ExactError::Invalid(format!(
            "disturbance bound must be finite and non-negative, got {mu0}"
        )));
    }
    Ok(())
}

fn check_weights<T: Scalar>(w1: T, w2: T) -> Result<(), ExactError> {
    if !(w1 >= T::zero() && w2 >= T::zero()) || !w1.is_finite() || !w2.is_finite() {
        return Err(ExactError::Invalid(format!(
            "weights must be finite and non-negative, got ({w1}, {w2})"
        )));
    }
    Ok(())
}

/// Maximizes `w₁μ − w₂ε` over open-loop sequences, with optional `ε ≤ cap`.
pub fn pareto_open<T: Scalar>(
    system: &LtvSystem<T>,
    sets: &TimedSets<T>,
    x0: &[T],
    w1: T,
    w2: T,
    eps_cap: Option<T>,
) -> Result<Option<ParetoPoint<T>>, ExactError> {
    check_weights(w1, w2)?;
    let blocks = open_loop_blocks(system, sets, x0)?;
    match solve_inner(
        &blocks,
        &InnerQuery::pareto(w1, w2, eps_cap),
        ReductionForm::L1,
    )? {
        InnerOutcome::Optimal(sol) => Ok(Some(ParetoPoint {
            w1,
            w2,
            mu: sol.mu,
            eps: sol.eps,
            objective: sol.objective,
            controller: Some(open_controller(&blocks, &sol.param)),
        })),
        InnerOutcome::Infeasible => Ok(None),
        InnerOutcome::Unbounded => Err(ExactError::Unbounded(if w2 == T::zero() {
            "mu"
        } else {
            "mu relative to eps"
        })),
    }
}

/// Outcome of the inner program at one gain, ranked for minimization.
enum Probe<T> {
    Optimal(InnerSolution<T>),
    Infeasible(T),
    Unbounded,
}

struct ClosedProblem<'a, T> {
    system: &'a LtvSystem<T>,
    sets: &'a TimedSets<T>,
    x0: &'a [T],
    query: InnerQuery<T>,
    form: ReductionForm,
}

impl<'a, T: Scalar> ClosedProblem<'a, T> {
    fn gain(&self, flat: &[T]) -> Matrix<T> {
        Matrix::from_vec(
            self.system.input_dim(),
            self.system.state_dim(),
            flat.to_vec(),
        )
    }

    fn blocks(&self, flat: &[T]) -> Result<FarkasBlocks<T>, FarkasError> {
        let with_inputs = !matches!(self.query.eps, EpsSpec::Unconstrained);
        closed_loop_blocks(
            self.system,
            self.sets,
            self.x0,
            &self.gain(flat),
            with_inputs,
        )
    }

    fn probe(&self, flat: &[T]) -> Probe<T> {
        if !crate::scalar::all_finite(flat) {
            return Probe::Infeasible(T::infinity());
        }
        let Ok(blocks) = self.blocks(flat) else {
            return Probe::Infeasible(T::infinity());
        };
        let limit = T::of(CONDITION_LIMIT);
        let too_large = |v: &[T]| v.iter().any(|x| !(x.abs() <= limit));
        if too_large(blocks.e.as_slice())
            || too_large(&blocks.f_const)
            || too_large(blocks.f_param.as_slice())
        {
            return Probe::Infeasible(T::of(INFEASIBLE_PENALTY));
        }
        match solve_inner(&blocks, &self.query, self.form) {
            Ok(InnerOutcome::Optimal(sol)) => Probe::Optimal(sol),
            Ok(InnerOutcome::Unbounded) => Probe::Unbounded,
            Ok(InnerOutcome::Infeasible) => {
                Probe::Infeasible(minimal_slack(&blocks, &self.query).unwrap_or(T::infinity()))
            }
            Err(_) => Probe::Infeasible(T::infinity()),
        }
    }

    fn cost(&self, flat: &[T]) -> T {
        match self.probe(flat) {
            Probe::Optimal(sol) => -sol.objective,
            Probe::Infeasible(s) => T::of(INFEASIBLE_PENALTY) + s,
            Probe::Unbounded => T::neg_infinity(),
        }
    }

    /// Best gain over all starts.
    fn search(&self, config: &SearchConfig) -> (Vec<T>, Probe<T>, SearchSummary) {
        let dim = self.system.input_dim() * self.system.state_dim();
        let starts = config.starts::<T>(dim);
        let runs: Vec<_> = {
            use rayon::prelude::*;
            starts
                .par_iter()
                .map(|s| config.nelder_mead.minimize(|x: &[T]| self.cost(x), s))
                .collect()
        };
        let feasible_starts = runs
            .iter()
            .filter(|r| r.value < T::of(INFEASIBLE_PENALTY))
            .count();
        let evaluations = runs.iter().map(|r| r.evaluations).sum();
        let mut best = 0;
        for (i, r) in runs.iter().enumerate() {
            if r.value < runs[best].value {
                best = i;
            }
        }
        let x = runs[best].x.clone();
        let probe = self.probe(&x);
        let summary = SearchSummary {
            starts: starts.len(),
            feasible_starts,
            best_start: best,
            evaluations,
        };
        (x, probe, summary)
    }

    fn controller(&self, flat: &[T], alpha2: &[T]) -> Controller<T> {
        Controller::Linear(LinearFeedback::new(self.gain(flat), alpha2.to_vec()))
    }
}

/// Largest `μ` found over linear feedback `u = α₁x + α₂` with `‖u‖_∞ ≤ ε₀`.
/// A lower bound on the true closed-loop resilience.
pub fn resilience_closed<T: Scalar>(
    system: &LtvSystem<T>,
    sets: &TimedSets<T>,
    x0: &[T],
    eps0: Option<T>,
    config: &SearchConfig,
) -> Result<MetricResult<T>, ExactError> {
    let problem = ClosedProblem {
        system,
        sets,
        x0,
        query: InnerQuery::resilience(eps0),
        form: config.form,
    };
    problem.blocks(&vec![T::zero(); system.input_dim() * system.state_dim()])?;
    let (flat, probe, summary) = problem.search(config);
    match probe {
        Probe::Infeasible(_) => Ok(nominal_infeasible(
            Metric::Resilience,
            T::zero(),
            Some(summary),
        )),
        Probe::Unbounded => {
            let nominal = InnerQuery {
                mu: MuSpec::Fixed(T::zero()),
                ..problem.query
            };
            let blocks = problem.blocks(&flat)?;
            let controller = match solve_inner(&blocks, &nominal, config.form)? {
                InnerOutcome::Optimal(sol) => Some(problem.controller(&flat, &sol.param)),
                _ => None,
            };
            Ok(MetricResult {
                metric: Metric::Resilience,
                value: T::infinity(),
                status: Status::Feasible,
                controller,
                companion: T::zero(),
                certificate: None,
                search: Some(summary),
            })
        }
        Probe::Optimal(sol) => {
            let blocks = closed_loop_blocks(system, sets, x0, &problem.gain(&flat), true)?;
            let controller = problem.controller(&flat, &sol.param);
            let certificate = certify(system, sets, x0, &controller, sol.mu, eps0)?;
            Ok(MetricResult {
                metric: Metric::Resilience,
                value: sol.mu,
                status: Status::Feasible,
                companion: required_effort(&blocks, sol.mu, &sol.param),
                controller: Some(controller),
                certificate,
                search: Some(summary),
            })
        }
    }
}

/// Smallest `ε` found over linear feedback that tolerates `μ₀`. An upper bound
/// on the true closed-loop effort.
pub fn effort_closed<T: Scalar>(
    system: &LtvSystem<T>,
    sets: &TimedSets<T>,
    x0: &[T],
    mu0: T,
    config: &SearchConfig,
) -> Result<MetricResult<T>, ExactError> {
    check_mu0(mu0)?;
    let problem = ClosedProblem {
        system,
        sets,
        x0,
        query: InnerQuery::effort(mu0),
        form: config.form,
    };
    problem.blocks(&vec![T::zero(); system.input_dim() * system.state_dim()])?;
    let (flat, probe, summary) = problem.search(config);
    match probe {
        Probe::Optimal(sol) => {
            let controller = problem.controller(&flat, &sol.param);
            let certificate = certify(system, sets, x0, &controller, mu0, Some(sol.eps))?;
            Ok(MetricResult {
                metric: Metric::Effort,
                value: sol.eps,
                status: Status::Feasible,
                controller: Some(controller),
                companion: mu0,
                certificate,
                search: Some(summary),
            })
        }
        Probe::Unbounded => Err(ExactError::Lp("effort program reported unbounded".into())),
        Probe::Infeasible(_) => {
            if mu0 == T::zero() {
                return Ok(nominal_infeasible(Metric::Effort, mu0, Some(summary)));
            }
            let nominal = ClosedProblem {
                query: InnerQuery::effort(T::zero()),
                ..problem
            };
            match nominal.search(config).1 {
                Probe::Optimal(_) => Err(ExactError::InfeasibleAtMu0 {
                    mu0: mu0.to_f64_lossy(),
                }),
                _ => Ok(nominal_infeasible(Metric::Effort, mu0, Some(summary))),
            }
        }
    }
}

/// Best `w₁μ − w₂ε` found over linear feedback, with optional `ε ≤ cap`.
pub fn pareto_closed<T: Scalar>(
    system: &LtvSystem<T>,
    sets: &TimedSets<T>,
    x0: &[T],
    w1: T,
    w2: T,
    eps_cap: Option<T>,
    config: &SearchConfig,
) -> Result<Option<ParetoPoint<T>>, ExactError> {
    check_weights(w1, w2)?;
    let problem = ClosedProblem {
        system,
        sets,
        x0,
        query: InnerQuery::pareto(w1, w2, eps_cap),
        form: config.form,
    };
    problem.blocks(&vec![T::zero(); system.input_dim() * system.state_dim()])?;
    let (flat, probe, _) = problem.search(config);
    match probe {
        Probe::Optimal(sol) => Ok(Some(ParetoPoint {
            w1,
            w2,
            mu: sol.mu,
            eps: sol.eps,
            objective: sol.objective,
            controller: Some(problem.controller(&flat, &sol.param)),
        })),
        Probe::Infeasible(_) => Ok(None),
        Probe::Unbounded => Err(ExactError::Unbounded(if w2 == T::zero() {
            "mu"
        } else {
            "mu relative to eps"
        })),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SweepMode {
    Open,
    Closed(SearchConfig),
}

/// One trade-off point per weight pair, in weight order; a point whose
/// `(μ, ε)` repeats an earlier one is dropped. Infeasible pairs are skipped.
pub fn pareto_sweep<T: Scalar>(
    system: &LtvSystem<T>,
    sets: &TimedSets<T>,
    x0: &[T],
    weights: &[(T, T)],
    mode: &SweepMode,
    eps_cap: Option<T>,
) -> Result<Vec<ParetoPoint<T>>, ExactError> {
    let mut out: Vec<ParetoPoint<T>> = Vec::new();
    let tol = T::of(1e-9);
    for &(w1, w2) in weights {
        let point = match mode {
            SweepMode::Open => pareto_open(system, sets, x0, w1, w2, eps_cap)?,
            SweepMode::Closed(cfg) => pareto_closed(system, sets, x0, w1, w2, eps_cap, cfg)?,
        };
        if let Some(p) = point {
            let dup = out
                .iter()
                .any(|q| (q.mu - p.mu).abs() <= tol && (q.eps - p.eps).abs() <= tol);
            if !dup {
                out.push(p);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
