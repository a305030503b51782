//! Finite-horizon specifications: parsing, compilation to per-step
//! constraint sets, and signed satisfaction margins.
//!
//! A compiled specification is a conjunction of one convex cell per time step
//! (reach-at-step and bounded-safety operators stack their region rows into
//! that cell) plus one disjunctive clause per `eventually` operator. Closed
//! sets are used throughout: a state on a boundary satisfies the constraint.

mod parser;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::model::Trajectory;
use crate::scalar::{dot, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown region `{0}`")]
    UnknownRegion(String),
    #[error("time index {index} exceeds horizon {horizon}")]
    TimeOutOfRange { index: usize, horizon: usize },
    #[error("empty interval [{from}, {to}]")]
    EmptyInterval { from: usize, to: usize },
    #[error("region `{name}`: {message}")]
    BadRegion { name: String, message: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// `{x | G x ≤ H}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfspacePolytope<T> {
    pub g: Matrix<T>,
    pub h: Vec<T>,
}

impl<T: Scalar> HalfspacePolytope<T> {
    pub fn new(g: Matrix<T>, h: Vec<T>) -> Result<Self, SpecError> {
        if g.rows() == 0 || g.rows() != h.len() {
            return Err(SpecError::Dimension(format!(
                "G has {} rows, H has {}",
                g.rows(),
                h.len()
            )));
        }
        Ok(Self { g, h })
    }

    /// Axis-aligned box from `[lo, hi]` intervals, two rows per coordinate
    /// (`x_i ≤ hi`, `-x_i ≤ -lo`).
    pub fn from_box(intervals: &[(T, T)]) -> Self {
        let n = intervals.len();
        let mut g = Matrix::zeros(2 * n, n);
        let mut h = Vec::with_capacity(2 * n);
        for (i, (lo, hi)) in intervals.iter().enumerate() {
            g[(2 * i, i)] = T::one();
            h.push(*hi);
            g[(2 * i + 1, i)] = -T::one();
            h.push(-*lo);
        }
        Self { g, h }
    }

    pub fn dim(&self) -> usize {
        self.g.cols()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Infinity,
    Euclidean,
}

/// `{x | ‖x_S − c‖ ≤ r}` where `x_S` are the selected coordinates (all of
/// them when `coords` is `None`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBall<T> {
    pub center: Vec<T>,
    pub radius: T,
    pub norm: Norm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<usize>>,
}

impl<T: Scalar> NormBall<T> {
    pub fn new(center: Vec<T>, radius: T, norm: Norm) -> Self {
        Self {
            center,
            radius,
            norm,
            coords: None,
        }
    }

    fn coord(&self, i: usize) -> usize {
        self.coords.as_ref().map_or(i, |c| c[i])
    }

    pub fn distance(&self, x: &[T]) -> T {
        let diffs = self
            .center
            .iter()
            .enumerate()
            .map(|(i, c)| x[self.coord(i)] - *c);
        match self.norm {
            Norm::Infinity => diffs.fold(T::zero(), |m, d| m.max(d.abs())),
            Norm::Euclidean => diffs.map(|d| d * d).sum::<T>().sqrt(),
        }
    }

    /// Infinity-norm balls as `2·|S|` halfspace rows over `n` states.
    pub fn to_polytope(&self, n: usize) -> Option<HalfspacePolytope<T>> {
        if self.norm != Norm::Infinity {
            return None;
        }
        let k = self.center.len();
        let mut g = Matrix::zeros(2 * k, n);
        let mut h = Vec::with_capacity(2 * k);
        for i in 0..k {
            let c = self.coord(i);
            g[(2 * i, c)] = T::one();
            h.push(self.center[i] + self.radius);
            g[(2 * i + 1, c)] = -T::one();
            h.push(self.radius - self.center[i]);
        }
        Some(HalfspacePolytope { g, h })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region<T> {
    Polytope(HalfspacePolytope<T>),
    Ball(NormBall<T>),
    /// Complement of the open ball: `‖x_S − c‖ ≥ r`. Not convex.
    Exterior(NormBall<T>),
}

impl<T: Scalar> Region<T> {
    pub fn from_box(intervals: &[(T, T)]) -> Self {
        Region::Polytope(HalfspacePolytope::from_box(intervals))
    }

    fn check(&self, name: &str, n: usize) -> Result<(), SpecError> {
        let bad = |message: String| {
            Err(SpecError::BadRegion {
                name: name.into(),
                message,
            })
        };
        match self {
            Region::Polytope(p) => {
                if p.dim() != n {
                    return bad(format!("polytope has {} columns, state has {n}", p.dim()));
                }
                if p.g.rows() != p.h.len() || p.g.rows() == 0 {
                    return bad("G and H row counts differ".into());
                }
            }
            Region::Ball(b) | Region::Exterior(b) => {
                if !(b.radius >= T::zero()) {
                    return bad("radius must be non-negative".into());
                }
                match &b.coords {
                    None if b.center.len() != n => {
                        return bad(format!(
                            "center has length {}, state has {n}",
                            b.center.len()
                        ))
                    }
                    Some(c) if c.len() != b.center.len() || c.iter().any(|i| *i >= n) => {
                        return bad("coordinate selection does not match center".into())
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Signed distance-like slack: non-negative iff `x` is in the region.
    pub fn slack(&self, x: &[T]) -> T {
        match self {
            Region::Polytope(p) => polytope_slack(&p.g, &p.h, x),
            Region::Ball(b) => b.radius - b.distance(x),
            Region::Exterior(b) => b.distance(x) - b.radius,
        }
    }
}

fn polytope_slack<T: Scalar>(g: &Matrix<T>, h: &[T], x: &[T]) -> T {
    (0..g.rows()).fold(T::infinity(), |m, i| m.min(h[i] - dot(g.row(i), x)))
}

pub type RegionTable<T> = BTreeMap<String, Region<T>>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    Next {
        step: usize,
        region: String,
    },
    Always {
        from: usize,
        to: usize,
        region: String,
    },
    Eventually {
        from: usize,
        to: usize,
        region: String,
    },
    And(Vec<Formula>),
}

/// A validated formula over a fixed horizon.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecFormula {
    pub formula: Formula,
    pub horizon: usize,
}

impl Formula {
    fn validate<T>(&self, regions: &RegionTable<T>, horizon: usize) -> Result<(), SpecError> {
        let region_ok = |r: &String| {
            if regions.contains_key(r) {
                Ok(())
            } else {
                Err(SpecError::UnknownRegion(r.clone()))
            }
        };
        let in_range = |i: usize| {
            if i <= horizon {
                Ok(())
            } else {
                Err(SpecError::TimeOutOfRange { index: i, horizon })
            }
        };
        match self {
            Formula::Next { step, region } => {
                in_range(*step)?;
                region_ok(region)
            }
            Formula::Always { from, to, region } | Formula::Eventually { from, to, region } => {
                if from > to {
                    return Err(SpecError::EmptyInterval {
                        from: *from,
                        to: *to,
                    });
                }
                in_range(*to)?;
                region_ok(region)
            }
            Formula::And(parts) => parts.iter().try_for_each(|p| p.validate(regions, horizon)),
        }
    }
}

/// Parses `text` and checks region names and time bounds against `horizon`.
pub fn parse<T>(
    text: &str,
    regions: &RegionTable<T>,
    horizon: usize,
) -> Result<SpecFormula, SpecError> {
    let formula = parser::Parser::new(text).parse()?;
    formula.validate(regions, horizon)?;
    Ok(SpecFormula { formula, horizon })
}

/// Intersection of halfspace rows, Euclidean balls and ball exteriors.
/// A cell without constraints is the whole state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell<T> {
    pub g: Matrix<T>,
    pub h: Vec<T>,
    pub balls: Vec<NormBall<T>>,
    pub exteriors: Vec<NormBall<T>>,
}

impl<T: Scalar> Cell<T> {
    pub fn unconstrained(n: usize) -> Self {
        Self {
            g: Matrix::zeros(0, n),
            h: Vec::new(),
            balls: Vec::new(),
            exteriors: Vec::new(),
        }
    }

    pub fn is_unconstrained(&self) -> bool {
        self.h.is_empty() && self.balls.is_empty() && self.exteriors.is_empty()
    }

    pub fn is_polyhedral(&self) -> bool {
        self.balls.is_empty() && self.exteriors.is_empty()
    }

    fn add_region(&mut self, region: &Region<T>) {
        let n = self.g.cols();
        match region {
            Region::Polytope(p) => self.stack(&p.g, &p.h),
            Region::Ball(b) => match b.to_polytope(n) {
                Some(p) => self.stack(&p.g, &p.h),
                None => self.balls.push(b.clone()),
            },
            Region::Exterior(b) => self.exteriors.push(b.clone()),
        }
    }

    fn stack(&mut self, g: &Matrix<T>, h: &[T]) {
        self.g = self.g.vstack(g);
        self.h.extend_from_slice(h);
    }

    /// `min` over constraints of the signed slack at `x`; `+∞` when unconstrained.
    pub fn slack(&self, x: &[T]) -> T {
        let mut s = polytope_slack(&self.g, &self.h, x);
        for b in &self.balls {
            s = s.min(b.radius - b.distance(x));
        }
        for b in &self.exteriors {
            s = s.min(b.distance(x) - b.radius);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedSets<T> {
    pub state_dim: usize,
    pub horizon: usize,
    /// One cell per step `0..=N`, all of which must hold.
    pub steps: Vec<Cell<T>>,
    /// Each clause holds when at least one `(step, cell)` alternative holds.
    pub clauses: Vec<Vec<(usize, Cell<T>)>>,
    /// Every step is a single halfspace polytope and there are no clauses.
    pub polytopic: bool,
    pub convex: bool,
}

impl<T: Scalar> TimedSets<T> {
    /// `(G_k, H_k)` of a polytopic specification; zero rows means unconstrained.
    pub fn polytope(&self, k: usize) -> (&Matrix<T>, &[T]) {
        (&self.steps[k].g, &self.steps[k].h)
    }

    pub fn row_counts(&self) -> Vec<usize> {
        self.steps.iter().map(|c| c.h.len()).collect()
    }

    /// Everything unconstrained over `horizon` steps.
    pub fn unconstrained(state_dim: usize, horizon: usize) -> Self {
        Self {
            state_dim,
            horizon,
            steps: vec![Cell::unconstrained(state_dim); horizon + 1],
            clauses: Vec::new(),
            polytopic: true,
            convex: true,
        }
    }

    /// Per-step polytopic specification from `(G_k, H_k)` pairs.
    pub fn from_polytopes(polys: Vec<(Matrix<T>, Vec<T>)>) -> Result<Self, SpecError> {
        let n = polys
            .first()
            .map(|p| p.0.cols())
            .ok_or_else(|| SpecError::Dimension("no steps".into()))?;
        let horizon = polys.len() - 1;
        let mut steps = Vec::with_capacity(polys.len());
        for (g, h) in polys {
            if g.cols() != n || g.rows() != h.len() {
                return Err(SpecError::Dimension("inconsistent polytope shapes".into()));
            }
            steps.push(Cell {
                g,
                h,
                balls: Vec::new(),
                exteriors: Vec::new(),
            });
        }
        Ok(Self {
            state_dim: n,
            horizon,
            steps,
            clauses: Vec::new(),
            polytopic: true,
            convex: true,
        })
    }
}

/// Compiles a validated formula into per-step cells and disjunctive clauses.
pub fn compile<T: Scalar>(
    formula: &SpecFormula,
    regions: &RegionTable<T>,
    state_dim: usize,
) -> Result<TimedSets<T>, SpecError> {
    formula.formula.validate(regions, formula.horizon)?;
    for (name, r) in regions {
        r.check(name, state_dim)?;
    }
    let horizon = formula.horizon;
    let mut sets = TimedSets::unconstrained(state_dim, horizon);
    fn walk<T: Scalar>(f: &Formula, regions: &RegionTable<T>, sets: &mut TimedSets<T>) {
        match f {
            Formula::Next { step, region } => sets.steps[*step].add_region(&regions[region]),
            Formula::Always { from, to, region } => {
                for k in *from..=*to {
                    sets.steps[k].add_region(&regions[region]);
                }
            }
            Formula::Eventually { from, to, region } => {
                let clause = (*from..=*to)
                    .map(|k| {
                        let mut c = Cell::unconstrained(sets.state_dim);
                        c.add_region(&regions[region]);
                        (k, c)
                    })
                    .collect();
                sets.clauses.push(clause);
            }
            Formula::And(parts) => parts.iter().for_each(|p| walk(p, regions, sets)),
        }
    }
    walk(&formula.formula, regions, &mut sets);
    let exterior_free = sets.steps.iter().all(|c| c.exteriors.is_empty());
    sets.polytopic = sets.clauses.is_empty() && sets.steps.iter().all(Cell::is_polyhedral);
    sets.convex = sets.clauses.is_empty() && exterior_free;
    Ok(sets)
}

/// Parse and compile in one go.
pub fn compile_text<T: Scalar>(
    text: &str,
    regions: &RegionTable<T>,
    state_dim: usize,
    horizon: usize,
) -> Result<TimedSets<T>, SpecError> {
    compile(&parse(text, regions, horizon)?, regions, state_dim)
}

/// Signed satisfaction margin of a state sequence: non-negative iff it
/// satisfies the specification.
pub fn margin_states<T: Scalar>(states: &[Vec<T>], sets: &TimedSets<T>) -> Result<T, SpecError> {
    if states.len() != sets.horizon + 1 {
        return Err(SpecError::Dimension(format!(
            "{} states for horizon {}",
            states.len(),
            sets.horizon
        )));
    }
    if states.iter().any(|x| x.len() != sets.state_dim) {
        return Err(SpecError::Dimension(format!(
            "states must have length {}",
            sets.state_dim
        )));
    }
    Ok(margin_unchecked(states, sets))
}

pub(crate) fn margin_unchecked<T: Scalar>(states: &[Vec<T>], sets: &TimedSets<T>) -> T {
    let mut m = T::infinity();
    for (cell, x) in sets.steps.iter().zip(states) {
        m = m.min(cell.slack(x));
    }
    for clause in &sets.clauses {
        let best = clause.iter().fold(T::neg_infinity(), |b, (k, cell)| {
            b.max(cell.slack(&states[*k]))
        });
        m = m.min(best);
    }
    m
}

pub fn margin<T: Scalar>(trajectory: &Trajectory<T>, sets: &TimedSets<T>) -> Result<T, SpecError> {
    margin_states(&trajectory.states, sets)
}
