//! Scenario optimization for nonlinear plants and controllers.
//!
//! Disturbance sequences are sampled in normalized form `δ ∈ [−1, 1]^{nN}`
//! and applied as `d = μδ`. The sampled program is solved by an exact-penalty
//! multi-start Nelder–Mead search; its support constraints are counted by
//! removal re-solves and turned into an a-posteriori violation bound.

mod risk;

pub use risk::risk_bound;

use std::sync::atomic::{AtomicBool, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::model::{
    monomial_basis, monomial_count, rollout, rollout_scaled_into, Controller, DisturbanceSequence,
    Dynamics, LinearFeedback, ModelError, OpenLoopSequence, PolynomialFeedback, Trajectory,
};
use crate::optim::NelderMead;
use crate::scalar::Scalar;
use crate::spec::{margin_unchecked, TimedSets};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("at least one scenario is required")]
    Empty,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no start reached a point feasible for every scenario ({starts} starts)")]
    NoFeasiblePoint { starts: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("re-solve without scenario {index} failed: {source}")]
    Support {
        index: usize,
        source: Box<ScenarioError>,
    },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// Independent uniform components on `[−1, 1]`.
    #[default]
    Uniform,
    /// Every component zero.
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet<T> {
    pub seed: u64,
    pub distribution: Distribution,
    pub state_dim: usize,
    pub horizon: usize,
    pub samples: Vec<DisturbanceSequence<T>>,
}

impl<T: Scalar> ScenarioSet<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The same set with scenario `index` removed.
    pub fn without(&self, index: usize) -> Self {
        let mut out = self.clone();
        out.samples.remove(index);
        out
    }
}

/// `count` i.i.d. normalized sequences. Scenario `i` draws from its own
/// stream of the seeded generator, so the set does not depend on threading.
pub fn sample_disturbances<T: Scalar>(
    count: usize,
    horizon: usize,
    state_dim: usize,
    seed: u64,
    distribution: Distribution,
) -> Result<ScenarioSet<T>, ScenarioError> {
    if count == 0 {
        return Err(ScenarioError::Empty);
    }
    let samples = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            DisturbanceSequence(
                (0..horizon)
                    .map(|_| {
                        (0..state_dim)
                            .map(|_| match distribution {
                                Distribution::Uniform => T::of(rng.gen_range(-1.0..=1.0)),
                                Distribution::Zero => T::zero(),
                            })
                            .collect()
                    })
                    .collect(),
            )
        })
        .collect();
    Ok(ScenarioSet {
        seed,
        distribution,
        state_dim,
        horizon,
        samples,
    })
}

/// Parametrized controller family searched by the scenario program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Template {
    /// `α₁` row-major, then `α₂`.
    Linear,
    /// Coefficient matrix row-major over the graded-lex monomial basis.
    Polynomial { degree: usize },
    /// Inputs `u_0 … u_{N−1}` concatenated.
    OpenLoop,
    /// No controller; only `μ` (and `ε`) are decided.
    Autonomous,
}

impl Template {
    pub fn param_count(&self, n: usize, m: usize, horizon: usize) -> usize {
        match self {
            Template::Linear => m * (n + 1),
            Template::Polynomial { degree } => m * monomial_count(n, *degree),
            Template::OpenLoop => m * horizon,
            Template::Autonomous => 0,
        }
    }

    pub fn controller<T: Scalar>(&self, alpha: &[T], n: usize, m: usize) -> Controller<T> {
        match self {
            Template::Linear => Controller::Linear(LinearFeedback::new(
                Matrix::from_vec(m, n, alpha[..m * n].to_vec()),
                alpha[m * n..m * (n + 1)].to_vec(),
            )),
            Template::Polynomial { degree } => Controller::Polynomial(PolynomialFeedback {
                degree: *degree,
                coefficients: Matrix::from_vec(m, monomial_count(n, *degree), alpha.to_vec()),
            }),
            Template::OpenLoop => Controller::OpenLoop(OpenLoopSequence {
                inputs: alpha.chunks(m).map(<[T]>::to_vec).collect(),
            }),
            Template::Autonomous => Controller::Zero { input_dim: m },
        }
    }

    /// Magnitude of the feature each parameter multiplies, evaluated at `x0`
    /// and floored at one.
    fn feature_scales<T: Scalar>(&self, x0: &[T], m: usize, horizon: usize) -> Vec<f64> {
        let floor = |v: T| v.to_f64_lossy().abs().max(1.0);
        match self {
            Template::Linear => {
                let mut s: Vec<f64> = (0..m).flat_map(|_| x0.iter().map(|v| floor(*v))).collect();
                s.extend(std::iter::repeat(1.0).take(m));
                s
            }
            Template::Polynomial { degree } => {
                let phi: Vec<f64> = monomial_basis(x0, *degree).into_iter().map(floor).collect();
                (0..m).flat_map(|_| phi.iter().copied()).collect()
            }
            Template::OpenLoop => vec![1.0; m * horizon],
            Template::Autonomous => Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum InputBound<T> {
    /// `ε` is a decision variable.
    Free,
    /// `ε = ε₀`.
    Fixed(T),
    /// Inputs are not bounded and `ε` is not reported.
    Unbounded,
}

/// Maximize `w₁μ − w₂ε` with `μ` optionally fixed to `μ₀`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioObjective<T> {
    pub w1: T,
    pub w2: T,
    pub mu0: Option<T>,
    pub eps: InputBound<T>,
}

impl<T: Scalar> ScenarioObjective<T> {
    pub fn resilience(eps0: Option<T>) -> Self {
        let eps = eps0
            .filter(|e| e.is_finite())
            .map_or(InputBound::Unbounded, InputBound::Fixed);
        Self {
            w1: T::one(),
            w2: T::zero(),
            mu0: None,
            eps,
        }
    }

    pub fn effort(mu0: T) -> Self {
        Self {
            w1: T::zero(),
            w2: T::one(),
            mu0: Some(mu0),
            eps: InputBound::Free,
        }
    }

    pub fn tradeoff(w1: T, w2: T) -> Self {
        Self {
            w1,
            w2,
            mu0: None,
            eps: InputBound::Free,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarmStart {
    pub mu: f64,
    pub alpha: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Random starts in addition to `α = 0`.
    pub restarts: usize,
    pub seed: u64,
    pub nelder_mead: NelderMead,
    /// Ceiling on `μ`; reaching it sets [`ScenarioCertificate::mu_capped`].
    pub mu_cap: f64,
    /// Typical input magnitude used to normalize the parameters; defaults to
    /// `ε₀` when fixed, else one.
    pub input_scale: Option<f64>,
    /// Starts tried right after `α = 0`, in raw parameter units.
    pub warm_starts: Vec<WarmStart>,
    /// Scenario margins down to `−tol` count as satisfied.
    pub feasibility_tol: f64,
    /// Objective or decision change that makes a scenario a support constraint.
    pub support_tol: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            nelder_mead: NelderMead::default(),
            mu_cap: 1e6,
            input_scale: None,
            warm_starts: Vec::new(),
            feasibility_tol: 1e-8,
            support_tol: 1e-6,
        }
    }
}

const RHO_START: f64 = 1e3;
const RHO_MAX: f64 = 1e9;
const BISECTIONS: usize = 60;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCertificate<T> {
    pub template: Template,
    pub objective_spec: ScenarioObjective<T>,
    pub mu: T,
    /// `None` when inputs are unbounded.
    pub eps: Option<T>,
    pub alpha: Vec<T>,
    pub objective: T,
    pub controller: Controller<T>,
    pub samples: usize,
    pub scenario_seed: u64,
    pub search_seed: u64,
    /// Smallest scenario margin at the solution.
    pub worst_margin: T,
    pub mu_capped: bool,
    pub support: Option<usize>,
    pub beta: Option<f64>,
    pub bound: Option<f64>,
    /// Scenarios whose removal could change the search path.
    #[serde(skip)]
    candidates: Option<Vec<usize>>,
}

/// One template, one objective, one scenario set.
struct Problem<'a, T, S: ?Sized> {
    system: &'a S,
    sets: &'a TimedSets<T>,
    x0: &'a [T],
    template: Template,
    scenarios: &'a ScenarioSet<T>,
    objective: ScenarioObjective<T>,
    config: &'a ScenarioConfig,
    /// Per-parameter scale from normalized to raw units.
    scales: Vec<T>,
    input_scale: T,
    decisive: Vec<AtomicBool>,
}

#[derive(Clone, Copy, Debug)]
struct Eval<T> {
    /// `max(0, −min margin)`.
    violation: T,
    /// Largest input magnitude over all scenarios and steps.
    eps_req: T,
    worst_margin: T,
}

#[derive(Clone, Debug)]
struct Point<T> {
    mu: T,
    alpha: Vec<T>,
}

/// Largest two values with the argmax, ties resolved toward the lower index.
#[derive(Clone, Copy)]
struct Top2<T> {
    first: T,
    index: usize,
    second: T,
}

impl<T: Scalar> Top2<T> {
    fn empty() -> Self {
        Self {
            first: T::neg_infinity(),
            index: usize::MAX,
            second: T::neg_infinity(),
        }
    }

    fn single(v: T, i: usize) -> Self {
        Self {
            first: v,
            index: i,
            second: T::neg_infinity(),
        }
    }

    fn merge(a: Self, b: Self) -> Self {
        let (hi, lo) = if b.first > a.first || (b.first == a.first && b.index < a.index) {
            (b, a)
        } else {
            (a, b)
        };
        Self {
            first: hi.first,
            index: hi.index,
            second: hi.second.max(lo.first),
        }
    }

    /// The argmax alone decides `max(0, max)`.
    fn decisive(&self) -> Option<usize> {
        (self.first > T::zero() && self.first > self.second && self.index != usize::MAX)
            .then_some(self.index)
    }
}

impl<'a, T: Scalar, S: Dynamics<T> + ?Sized> Problem<'a, T, S> {
    fn new(
        system: &'a S,
        sets: &'a TimedSets<T>,
        x0: &'a [T],
        template: Template,
        scenarios: &'a ScenarioSet<T>,
        objective: ScenarioObjective<T>,
        config: &'a ScenarioConfig,
    ) -> Result<Self, ScenarioError> {
        let (n, m, horizon) = (system.state_dim(), system.input_dim(), system.horizon());
        if sets.state_dim != n || sets.horizon != horizon {
            return Err(ScenarioError::Dimension(
                "specification does not match system".into(),
            ));
        }
        if scenarios.state_dim != n || scenarios.horizon != horizon {
            return Err(ScenarioError::Dimension(format!(
                "scenarios are {}×{}, system needs {n}×{horizon}",
                scenarios.state_dim, scenarios.horizon
            )));
        }
        if let Template::Polynomial { degree } = template {
            if degree == 0 {
                return Err(ScenarioError::Invalid(
                    "polynomial degree must be at least 1".into(),
                ));
            }
        }
        let finite_nonneg = |v: T| v.is_finite() && v >= T::zero();
        let weights_ok = finite_nonneg(objective.w1) && finite_nonneg(objective.w2);
        let mu_ok = objective.mu0.map_or(true, finite_nonneg);
        let eps_ok = match objective.eps {
            InputBound::Fixed(e) => finite_nonneg(e),
            _ => true,
        };
        if !(weights_ok && mu_ok && eps_ok) {
            return Err(ScenarioError::Invalid(
                "weights and bounds must be finite and non-negative".into(),
            ));
        }
        let probe = vec![T::zero(); template.param_count(n, m, horizon)];
        rollout(
            system,
            &template.controller(&probe, n, m),
            x0,
            &DisturbanceSequence::zeros(n, horizon),
        )?;
        let input_scale = config.input_scale.unwrap_or(match objective.eps {
            InputBound::Fixed(e) if e > T::zero() => e.to_f64_lossy(),
            _ => 1.0,
        });
        let scales = template
            .feature_scales(x0, m, horizon)
            .into_iter()
            .map(|f| T::of(input_scale / f))
            .collect();
        Ok(Self {
            system,
            sets,
            x0,
            template,
            scenarios,
            objective,
            config,
            scales,
            input_scale: T::of(input_scale),
            decisive: (0..scenarios.len())
                .map(|_| AtomicBool::new(false))
                .collect(),
        })
    }

    fn scratch(&self) -> Trajectory<T> {
        Trajectory::zeros(
            self.system.state_dim(),
            self.system.input_dim(),
            self.system.horizon(),
        )
    }

    fn mu_free(&self) -> bool {
        self.objective.mu0.is_none()
    }

    fn controller(&self, alpha: &[T]) -> Controller<T> {
        self.template
            .controller(alpha, self.system.state_dim(), self.system.input_dim())
    }

    fn decode(&self, z: &[T]) -> Point<T> {
        let (mu, rest) = match self.objective.mu0 {
            Some(mu0) => (mu0, z),
            None => ((z[0].abs()).min(T::of(self.config.mu_cap)), &z[1..]),
        };
        Point {
            mu,
            alpha: rest
                .iter()
                .zip(&self.scales)
                .map(|(v, s)| *v * *s)
                .collect(),
        }
    }

    fn encode(&self, p: &Point<T>) -> Vec<T> {
        let mut z = Vec::with_capacity(p.alpha.len() + 1);
        if self.mu_free() {
            z.push(p.mu);
        }
        z.extend(p.alpha.iter().zip(&self.scales).map(|(a, s)| *a / *s));
        z
    }

    fn evaluate(&self, p: &Point<T>) -> Eval<T> {
        let controller = self.controller(&p.alpha);
        let fixed_eps = match self.objective.eps {
            InputBound::Fixed(e) => Some(e),
            _ => None,
        };
        let (viol, input) = self
            .scenarios
            .samples
            .par_iter()
            .enumerate()
            .map_init(
                || self.scratch(),
                |t, (i, delta)| {
                    let (margin, umax) = match rollout_scaled_into(
                        self.system,
                        &controller,
                        self.x0,
                        delta,
                        p.mu,
                        t,
                    ) {
                        Ok(()) => {
                            let umax = t
                                .inputs
                                .iter()
                                .flatten()
                                .fold(T::zero(), |a, u| a.max(u.abs()));
                            let mut margin = margin_unchecked(&t.states, self.sets);
                            if let Some(e) = fixed_eps {
                                margin = margin.min((e - umax) / self.input_scale);
                            }
                            (
                                if margin.is_nan() {
                                    T::neg_infinity()
                                } else {
                                    margin
                                },
                                umax,
                            )
                        }
                        Err(_) => (T::neg_infinity(), T::infinity()),
                    };
                    (Top2::single(-margin, i), Top2::single(umax, i))
                },
            )
            .reduce(
                || (Top2::empty(), Top2::empty()),
                |a, b| (Top2::merge(a.0, b.0), Top2::merge(a.1, b.1)),
            );
        if let Some(i) = viol.decisive() {
            self.decisive[i].store(true, Ordering::Relaxed);
        }
        if self.objective.eps == InputBound::Free {
            if let Some(i) = input.decisive() {
                self.decisive[i].store(true, Ordering::Relaxed);
            }
        }
        Eval {
            violation: viol.first.max(T::zero()),
            eps_req: input.first.max(T::zero()),
            worst_margin: -viol.first,
        }
    }

    fn eps_of(&self, e: &Eval<T>) -> T {
        match self.objective.eps {
            InputBound::Free => e.eps_req,
            InputBound::Fixed(eps0) => eps0,
            InputBound::Unbounded => T::zero(),
        }
    }

    fn value(&self, p: &Point<T>, e: &Eval<T>) -> T {
        self.objective.w1 * p.mu - self.objective.w2 * self.eps_of(e)
    }

    fn feasible(&self, e: &Eval<T>) -> bool {
        e.violation <= T::of(self.config.feasibility_tol)
    }

    fn cost(&self, z: &[T], rho: T) -> T {
        let p = self.decode(z);
        let e = self.evaluate(&p);
        -self.value(&p, &e) + rho * e.violation
    }

    fn starts(&self) -> Vec<Vec<T>> {
        let dim = self.scales.len();
        let mu_start = Point {
            mu: T::zero(),
            alpha: vec![T::zero(); dim],
        };
        let mut starts = vec![self.encode(&mu_start)];
        for w in self
            .config
            .warm_starts
            .iter()
            .filter(|w| w.alpha.len() == dim)
        {
            let p = Point {
                mu: T::of(w.mu),
                alpha: w.alpha.iter().map(|v| T::of(*v)).collect(),
            };
            starts.push(self.encode(&p));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        for _ in 0..self.config.restarts {
            let mut z: Vec<T> = Vec::with_capacity(dim + 1);
            if self.mu_free() {
                z.push(T::zero());
            }
            z.extend((0..dim).map(|_| T::of(rng.gen_range(-1.0..=1.0))));
            starts.push(z);
        }
        starts
    }

    /// Largest `μ` in `[lo, hi]` found by bisection with `lo` feasible.
    fn bisect_mu(&self, alpha: &[T], mut lo: T, mut hi: T) -> T {
        for _ in 0..BISECTIONS {
            if hi - lo <= T::epsilon() * hi.abs().max(T::one()) {
                break;
            }
            let mid = (lo + hi) * T::of(0.5);
            if self.feasible(&self.evaluate(&Point {
                mu: mid,
                alpha: alpha.to_vec(),
            })) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Feasible point derived from a search result, if any.
    fn restore(&self, mut p: Point<T>) -> Option<(Point<T>, Eval<T>)> {
        let cap = T::of(self.config.mu_cap);
        let mut e = self.evaluate(&p);
        if !self.feasible(&e) {
            if !self.mu_free() {
                return None;
            }
            let nominal = Point {
                mu: T::zero(),
                alpha: p.alpha.clone(),
            };
            if !self.feasible(&self.evaluate(&nominal)) {
                return None;
            }
            p.mu = self.bisect_mu(&p.alpha, T::zero(), p.mu);
            e = self.evaluate(&p);
        }
        if self.mu_free()
            && self.objective.w1 > T::zero()
            && self.objective.w2 == T::zero()
            && p.mu < cap
        {
            // Push μ to the feasibility boundary for this controller.
            let mut lo = p.mu;
            let mut hi = p.mu.max(T::of(1e-12));
            loop {
                hi = (hi * T::of(2.0)).min(cap);
                if !self.feasible(&self.evaluate(&Point {
                    mu: hi,
                    alpha: p.alpha.clone(),
                })) {
                    break;
                }
                lo = hi;
                if hi >= cap {
                    break;
                }
            }
            p.mu = if lo >= cap {
                cap
            } else {
                self.bisect_mu(&p.alpha, lo, hi)
            };
            e = self.evaluate(&p);
        }
        Some((p, e))
    }

    fn solve(&self) -> Result<ScenarioCertificate<T>, ScenarioError> {
        let nm = &self.config.nelder_mead;
        let mut points = self.starts();
        let starts = points.len();
        let mut rho = RHO_START;
        loop {
            let r = T::of(rho);
            points = points
                .par_iter()
                .map(|z| nm.minimize(|x: &[T]| self.cost(x, r), z).x)
                .collect();
            let any_feasible = points
                .iter()
                .any(|z| self.feasible(&self.evaluate(&self.decode(z))));
            if any_feasible || rho >= RHO_MAX {
                break;
            }
            rho *= 10.0;
        }
        let restored: Vec<Option<(Point<T>, Eval<T>)>> = points
            .par_iter()
            .map(|z| self.restore(self.decode(z)))
            .collect();
        let mut best: Option<(Point<T>, Eval<T>, T)> = None;
        for (p, e) in restored.into_iter().flatten() {
            let v = self.value(&p, &e);
            if best.as_ref().map_or(true, |b| v > b.2) {
                best = Some((p, e, v));
            }
        }
        let (p, e, value) = best.ok_or(ScenarioError::NoFeasiblePoint { starts })?;
        let candidates = self
            .decisive
            .iter()
            .enumerate()
            .filter(|(_, d)| d.load(Ordering::Relaxed))
            .map(|(i, _)| i)
            .collect();
        Ok(ScenarioCertificate {
            template: self.template,
            objective_spec: self.objective,
            eps: match self.objective.eps {
                InputBound::Unbounded => None,
                _ => Some(self.eps_of(&e)),
            },
            mu_capped: self.mu_free() && p.mu >= T::of(self.config.mu_cap),
            mu: p.mu,
            controller: self.controller(&p.alpha),
            alpha: p.alpha,
            objective: value,
            samples: self.scenarios.len(),
            scenario_seed: self.scenarios.seed,
            search_seed: self.config.seed,
            worst_margin: e.worst_margin,
            support: None,
            beta: None,
            bound: None,
            candidates: Some(candidates),
        })
    }
}

/// Solves the sampled program. The result is feasible for every scenario up
/// to `feasibility_tol`; support count and bound are left empty.
#[allow(clippy::too_many_arguments)]
pub fn solve_scenario<T: Scalar, S: Dynamics<T> + ?Sized>(
    system: &S,
    sets: &TimedSets<T>,
    x0: &[T],
    template: Template,
    scenarios: &ScenarioSet<T>,
    objective: ScenarioObjective<T>,
    config: &ScenarioConfig,
) -> Result<ScenarioCertificate<T>, ScenarioError> {
    if scenarios.is_empty() {
        return Err(ScenarioError::Empty);
    }
    Problem::new(system, sets, x0, template, scenarios, objective, config)?.solve()
}

/// Number of scenarios whose removal changes the solution. Scenarios that
/// never alone decided a penalty, input requirement or feasibility verdict
/// during the solve leave the search path unchanged and are skipped.
#[allow(clippy::too_many_arguments)]
pub fn support_count<T: Scalar, S: Dynamics<T> + ?Sized>(
    result: &ScenarioCertificate<T>,
    system: &S,
    sets: &TimedSets<T>,
    x0: &[T],
    scenarios: &ScenarioSet<T>,
    config: &ScenarioConfig,
) -> Result<usize, ScenarioError> {
    let all: Vec<usize> = (0..scenarios.len()).collect();
    let candidates = result.candidates.as_ref().unwrap_or(&all);
    let tol = T::of(config.support_tol);
    let flags: Vec<Result<bool, ScenarioError>> = candidates
        .par_iter()
        .map(|&i| {
            let reduced = scenarios.without(i);
            if reduced.is_empty() {
                return Ok(true);
            }
            let r = solve_scenario(
                system,
                sets,
                x0,
                result.template,
                &reduced,
                result.objective_spec,
                config,
            )
            .map_err(|e| ScenarioError::Support {
                index: i,
                source: Box::new(e),
            })?;
            let moved = (r.objective - result.objective).abs() > tol
                || (r.mu - result.mu).abs() > tol
                || r.eps
                    .zip(result.eps)
                    .is_some_and(|(a, b)| (a - b).abs() > tol)
                || r.alpha
                    .iter()
                    .zip(&result.alpha)
                    .any(|(a, b)| (*a - *b).abs() > tol);
            Ok(moved)
        })
        .collect();
    let mut count = 0;
    for f in flags {
        count += usize::from(f?);
    }
    Ok(count)
}

/// Solve, count support constraints and attach the violation bound at `beta`.
#[allow(clippy::too_many_arguments)]
pub fn certify<T: Scalar, S: Dynamics<T> + ?Sized>(
    system: &S,
    sets: &TimedSets<T>,
    x0: &[T],
    template: Template,
    scenarios: &ScenarioSet<T>,
    objective: ScenarioObjective<T>,
    config: &ScenarioConfig,
    beta: f64,
) -> Result<ScenarioCertificate<T>, ScenarioError> {
    let mut cert = solve_scenario(system, sets, x0, template, scenarios, objective, config)?;
    let s = support_count(&cert, system, sets, x0, scenarios, config)?;
    cert.bound = Some(risk_bound(s, scenarios.len(), beta)?);
    cert.support = Some(s);
    cert.beta = Some(beta);
    Ok(cert)
}

/// Fraction of `fresh` scenarios that violate the specification or, when the
/// certificate bounds inputs, the input bound.
pub fn empirical_violation<T: Scalar, S: Dynamics<T> + ?Sized>(
    cert: &ScenarioCertificate<T>,
    system: &S,
    sets: &TimedSets<T>,
    x0: &[T],
    fresh: &ScenarioSet<T>,
) -> Result<f64, ScenarioError> {
    if fresh.is_empty() {
        return Err(ScenarioError::Empty);
    }
    let (n, horizon) = (system.state_dim(), system.horizon());
    if fresh.state_dim != n
        || fresh.horizon != horizon
        || sets.state_dim != n
        || sets.horizon != horizon
    {
        return Err(ScenarioError::Dimension(
            "scenarios, specification and system disagree".into(),
        ));
    }
    rollout(
        system,
        &cert.controller,
        x0,
        &DisturbanceSequence::zeros(n, horizon),
    )?;
    let m = system.input_dim();
    let violated: usize = fresh
        .samples
        .par_iter()
        .map_init(
            || Trajectory::zeros(n, m, horizon),
            |t, delta| match rollout_scaled_into(system, &cert.controller, x0, delta, cert.mu, t) {
                Ok(()) => {
                    let state_ok = margin_unchecked(&t.states, sets) >= T::zero();
                    let input_ok = cert
                        .eps
                        .map_or(true, |e| t.inputs.iter().flatten().all(|u| u.abs() <= e));
                    usize::from(!(state_ok && input_ok))
                }
                Err(_) => 1,
            },
        )
        .sum();
    Ok(violated as f64 / fresh.len() as f64)
}
