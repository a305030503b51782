//! Dense two-phase primal simplex.
//!
//! Pivoting uses Dantzig's most-negative reduced cost and falls back to
//! Bland's smallest-index rule once a run of degenerate pivots is observed,
//! so the method terminates on degenerate programs. Every choice is made by a
//! fixed rule: solving the same program twice visits the same bases.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{dot, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// `a · x ≤ b` or `a · x = b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row<T> {
    pub coeffs: Vec<T>,
    pub rhs: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram<T> {
    pub sense: Sense,
    pub objective: Vec<T>,
    pub inequalities: Vec<Row<T>>,
    pub equalities: Vec<Row<T>>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub x: Vec<T>,
    pub objective: T,
    pub iterations: usize,
    /// Row multipliers (inequalities first, then equalities) in the sense of
    /// the original program: at an optimum, `objective - Σ y_i b_i` is carried
    /// entirely by the variable bounds, `y_i ≥ 0` on `≤` rows of a
    /// maximization and `y_i ≤ 0` on `≤` rows of a minimization.
    pub duals: Vec<T>,
}

impl<T: Scalar> LpSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("simplex stalled after {iterations} pivots despite Bland's rule recovery")]
    DegeneratePivot { iterations: usize },
    #[error("solution violates a constraint by {violation:e} relative to its magnitude")]
    Inaccurate { violation: f64 },
}

impl<T: Scalar> LinearProgram<T> {
    /// Program over `n` variables, all non-negative by default.
    pub fn new(sense: Sense, objective: Vec<T>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            inequalities: Vec::new(),
            equalities: Vec::new(),
            lower: vec![T::zero(); n],
            upper: vec![T::infinity(); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_le(&mut self, coeffs: Vec<T>, rhs: T) -> &mut Self {
        self.inequalities.push(Row { coeffs, rhs });
        self
    }

    pub fn add_ge(&mut self, coeffs: Vec<T>, rhs: T) -> &mut Self {
        let coeffs = coeffs.into_iter().map(|c| -c).collect();
        self.inequalities.push(Row { coeffs, rhs: -rhs });
        self
    }

    pub fn add_eq(&mut self, coeffs: Vec<T>, rhs: T) -> &mut Self {
        self.equalities.push(Row { coeffs, rhs });
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: T, upper: T) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.set_bounds(var, T::neg_infinity(), T::infinity())
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed(
                "bound vectors do not match objective length".into(),
            ));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed(
                "non-finite objective coefficient".into(),
            ));
        }
        for (i, row) in self.inequalities.iter().chain(&self.equalities).enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "row {i} has {} coefficients, expected {n}",
                    row.coeffs.len()
                )));
            }
            if row.coeffs.iter().any(|c| !c.is_finite()) || row.rhs.is_nan() {
                return Err(LpError::Malformed(format!("row {i} has non-finite data")));
            }
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(LpError::Malformed(format!(
                    "variable {j} has inconsistent bounds"
                )));
            }
            if self.lower[j] == T::infinity() || self.upper[j] == T::neg_infinity() {
                return Err(LpError::Malformed(format!(
                    "variable {j} has an empty domain"
                )));
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound at `x` (zero when feasible).
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for row in &self.inequalities {
            worst = worst.max(dot(&row.coeffs, x) - row.rhs);
        }
        for row in &self.equalities {
            worst = worst.max((dot(&row.coeffs, x) - row.rhs).abs());
        }
        for (j, v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - *v).max(*v - self.upper[j]);
        }
        worst
    }

    /// Largest row violation divided by `1 + Σ|a_j x_j| + |b|`, the scale of
    /// rounding error in evaluating that row.
    pub fn relative_violation(&self, x: &[T]) -> T {
        let rel = |row: &Row<T>, eq: bool| {
            let mag = row
                .coeffs
                .iter()
                .zip(x)
                .fold(T::one() + row.rhs.abs(), |m, (a, v)| m + (*a * *v).abs());
            let r = dot(&row.coeffs, x) - row.rhs;
            (if eq { r.abs() } else { r }) / mag
        };
        let mut worst = T::zero();
        for row in &self.inequalities {
            worst = worst.max(rel(row, false));
        }
        for row in &self.equalities {
            worst = worst.max(rel(row, true));
        }
        for (j, v) in x.iter().enumerate() {
            worst = worst
                .max((self.lower[j] - *v) / (T::one() + v.abs()))
                .max((*v - self.upper[j]) / (T::one() + v.abs()));
        }
        worst
    }

    pub fn objective_at(&self, x: &[T]) -> T {
        dot(&self.objective, x)
    }

    /// Plain-text tableau dump, one row per line, for debugging.
    ///
    /// ```text
    /// sense max
    /// obj 1 0
    /// le 1 1 | 4
    /// eq 1 -1 | 0
    /// bounds 0 inf
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let fmt_row = |v: &[T]| {
            v.iter()
                .map(|c| format!("{c}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let sense = match self.sense {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        };
        let _ = writeln!(out, "sense {sense}");
        let _ = writeln!(out, "obj {}", fmt_row(&self.objective));
        for row in &self.inequalities {
            let _ = writeln!(out, "le {} | {}", fmt_row(&row.coeffs), row.rhs);
        }
        for row in &self.equalities {
            let _ = writeln!(out, "eq {} | {}", fmt_row(&row.coeffs), row.rhs);
        }
        for j in 0..self.num_vars() {
            let _ = writeln!(out, "bounds {} {}", self.lower[j], self.upper[j]);
        }
        out
    }
}

/// How an original variable is expressed through non-negative columns.
#[derive(Clone, Copy, Debug)]
enum VarMap<T> {
    /// `x = offset + y`
    Shift { col: usize, offset: T },
    /// `x = offset - y`
    Mirror { col: usize, offset: T },
    /// `x = y⁺ - y⁻`
    Split { pos: usize, neg: usize },
}

/// Primal slack the Harris ratio test may spend to prefer a larger pivot.
fn harris_tol<T: Scalar>() -> T {
    T::PIVOT_TOL * T::of(1e-2)
}

struct Tableau<T> {
    m: usize,
    ncols: usize,
    /// `m` rows of width `ncols + 1`, last entry is the right-hand side.
    a: Vec<T>,
    basis: Vec<usize>,
    artificial_start: usize,
}

impl<T: Scalar> Tableau<T> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.a[i * (self.ncols + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> T {
        self.a[i * (self.ncols + 1) + self.ncols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.ncols + 1;
        let p = self.at(r, c);
        let inv = T::one() / p;
        for j in 0..w {
            self.a[r * w + j] = self.a[r * w + j] * inv;
        }
        self.a[r * w + c] = T::one();
        let (before, rest) = self.a.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for chunk in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = chunk[c];
            if f != T::zero() {
                for (x, y) in chunk.iter_mut().zip(prow.iter()) {
                    *x = *x - f * *y;
                }
                chunk[c] = T::zero();
            }
        }
        self.basis[r] = c;
        let w = self.ncols + 1;
        for i in 0..self.m {
            let v = &mut self.a[i * w + self.ncols];
            if *v < T::zero() && *v > -harris_tol::<T>() {
                *v = T::zero();
            }
        }
    }

    /// Replaces the tableau by `B⁻¹[A | b]` computed afresh from `original`
    /// with Gauss–Jordan elimination. Returns false if `B` is singular.
    fn refactor(&mut self, original: &[T]) -> bool {
        let w = self.ncols + 1;
        let mut a = original.to_vec();
        let mut used = vec![false; self.m];
        let mut row_of = vec![0usize; self.m];
        for k in 0..self.m {
            let c = self.basis[k];
            let mut piv = None;
            let mut mag = T::zero();
            for i in 0..self.m {
                if !used[i] && a[i * w + c].abs() > mag {
                    mag = a[i * w + c].abs();
                    piv = Some(i);
                }
            }
            let Some(p) = piv else { return false };
            if mag <= T::PIVOT_TOL * T::of(1e-3) {
                return false;
            }
            used[p] = true;
            row_of[k] = p;
            let inv = T::one() / a[p * w + c];
            for j in 0..w {
                a[p * w + j] = a[p * w + j] * inv;
            }
            a[p * w + c] = T::one();
            let prow: Vec<T> = a[p * w..(p + 1) * w].to_vec();
            for i in 0..self.m {
                if i == p {
                    continue;
                }
                let f = a[i * w + c];
                if f != T::zero() {
                    for j in 0..w {
                        a[i * w + j] = a[i * w + j] - f * prow[j];
                    }
                    a[i * w + c] = T::zero();
                }
            }
        }
        if !a.iter().all(|v| v.is_finite()) {
            return false;
        }
        for (k, &p) in row_of.iter().enumerate() {
            self.a[k * w..(k + 1) * w].copy_from_slice(&a[p * w..(p + 1) * w]);
        }
        true
    }

    /// Dual simplex pivots from a dual-feasible basis until every basic value
    /// is non-negative. Returns false if some row proves infeasibility.
    fn dual_repair(
        &mut self,
        cost: &[T],
        allowed: impl Fn(usize) -> bool,
        iterations: &mut usize,
        limit: usize,
    ) -> Result<bool, LpError> {
        loop {
            if *iterations >= limit {
                return Err(LpError::DegeneratePivot {
                    iterations: *iterations,
                });
            }
            let mut r = None;
            let mut worst = -harris_tol::<T>();
            for i in 0..self.m {
                if self.rhs(i) < worst {
                    worst = self.rhs(i);
                    r = Some(i);
                }
            }
            let Some(r) = r else { return Ok(true) };
            let (d, _) = self.reduced_costs(cost);
            let mut enter: Option<(usize, T, T)> = None;
            for j in 0..self.ncols {
                let arj = self.at(r, j);
                if !allowed(j) || self.basis.contains(&j) || arj >= -T::PIVOT_TOL {
                    continue;
                }
                let ratio = d[j].max(T::zero()) / -arj;
                let better = match enter {
                    None => true,
                    Some((_, best, mag)) => ratio < best || (ratio == best && -arj > mag),
                };
                if better {
                    enter = Some((j, ratio, -arj));
                }
            }
            let Some((c, _, _)) = enter else {
                return Ok(false);
            };
            self.pivot(r, c);
            *iterations += 1;
        }
    }

    /// Textbook minimum-ratio row, smallest basic index on ties.
    fn ratio_bland(&self, c: usize) -> Option<usize> {
        let mut leave: Option<(usize, T)> = None;
        for i in 0..self.m {
            let aic = self.at(i, c);
            if aic > T::PIVOT_TOL {
                let ratio = self.rhs(i).max(T::zero()) / aic;
                let better = match leave {
                    None => true,
                    Some((l, best)) => {
                        ratio < best || (ratio == best && self.basis[i] < self.basis[l])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        leave.map(|(i, _)| i)
    }

    /// Two-pass Harris ratio test: among rows whose ratio is within the
    /// small tolerance of the minimum, take the largest pivot element.
    fn ratio_harris(&self, c: usize) -> Option<usize> {
        let mut bound = T::infinity();
        for i in 0..self.m {
            let aic = self.at(i, c);
            if aic > T::PIVOT_TOL {
                bound = bound.min((self.rhs(i).max(T::zero()) + harris_tol::<T>()) / aic);
            }
        }
        if bound == T::infinity() {
            return None;
        }
        let mut leave: Option<(usize, T)> = None;
        for i in 0..self.m {
            let aic = self.at(i, c);
            if aic > T::PIVOT_TOL && self.rhs(i).max(T::zero()) / aic <= bound {
                let better = match leave {
                    None => true,
                    Some((l, best)) => aic > best || (aic == best && self.basis[i] < self.basis[l]),
                };
                if better {
                    leave = Some((i, aic));
                }
            }
        }
        leave.map(|(i, _)| i)
    }

    /// Reduced costs `d_j = c_j - c_B B^{-1} A_j` and the current objective.
    fn reduced_costs(&self, cost: &[T]) -> (Vec<T>, T) {
        let mut d = cost.to_vec();
        let mut obj = T::zero();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == T::zero() {
                continue;
            }
            let w = self.ncols + 1;
            let row = &self.a[i * w..(i + 1) * w];
            for j in 0..self.ncols {
                d[j] = d[j] - cb * row[j];
            }
            obj = obj + cb * row[self.ncols];
        }
        (d, obj)
    }

    /// Runs primal simplex minimizing `cost`. Columns for which `allowed`
    /// returns false never enter. Returns `Ok(true)` at optimality,
    /// `Ok(false)` when unbounded.
    fn optimize(
        &mut self,
        cost: &[T],
        allowed: impl Fn(usize) -> bool,
        iterations: &mut usize,
        limit: usize,
    ) -> Result<bool, LpError> {
        const DEGENERATE_RUN: usize = 50;
        let (mut d, _) = self.reduced_costs(cost);
        let mut bland = false;
        let mut degenerate_run = 0usize;
        let scale = cost.iter().fold(T::one(), |m, c| m.max(c.abs()));
        let opt_tol = T::FEAS_TOL * scale;
        loop {
            if *iterations >= limit {
                return Err(LpError::DegeneratePivot {
                    iterations: *iterations,
                });
            }
            let mut enter = None;
            let mut best = -opt_tol;
            for (j, &dj) in d.iter().enumerate() {
                if !allowed(j) || dj >= -opt_tol {
                    continue;
                }
                if bland {
                    enter = Some(j);
                    break;
                }
                if dj < best {
                    best = dj;
                    enter = Some(j);
                }
            }
            let Some(c) = enter else { return Ok(true) };

            let leave = if bland {
                self.ratio_bland(c)
            } else {
                self.ratio_harris(c)
            };
            let Some(r) = leave else { return Ok(false) };
            let best_ratio = self.rhs(r).max(T::zero()) / self.at(r, c);
            if best_ratio <= T::PIVOT_TOL {
                degenerate_run += 1;
                if degenerate_run > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, c);
            *iterations += 1;
            // Update reduced costs with the pivot row.
            let f = d[c];
            let w = self.ncols + 1;
            let row = &self.a[r * w..(r + 1) * w];
            for j in 0..self.ncols {
                d[j] = d[j] - f * row[j];
            }
            d[c] = T::zero();
        }
    }
}

/// Recomputes basic values from the original rows by Gaussian elimination
/// with partial pivoting, removing error accumulated over pivots. `None` if
/// the basis matrix is numerically singular.
fn basic_solution<T: Scalar>(
    original: &[T],
    m: usize,
    total: usize,
    basis: &[usize],
) -> Option<Vec<T>> {
    let w = total + 1;
    let mut b: Vec<T> = Vec::with_capacity(m * (m + 1));
    for i in 0..m {
        for &col in basis {
            b.push(original[i * w + col]);
        }
        b.push(original[i * w + total]);
    }
    let bw = m + 1;
    for k in 0..m {
        let (piv, mag) = (k..m)
            .map(|i| (i, b[i * bw + k].abs()))
            .fold((k, T::zero()), |acc, c| if c.1 > acc.1 { c } else { acc });
        if mag <= T::PIVOT_TOL * T::of(1e-3) {
            return None;
        }
        if piv != k {
            for j in 0..bw {
                b.swap(k * bw + j, piv * bw + j);
            }
        }
        let inv = T::one() / b[k * bw + k];
        for i in k + 1..m {
            let f = b[i * bw + k] * inv;
            if f != T::zero() {
                for j in k..bw {
                    b[i * bw + j] = b[i * bw + j] - f * b[k * bw + j];
                }
            }
        }
    }
    let mut x = vec![T::zero(); m];
    for k in (0..m).rev() {
        let mut acc = b[k * bw + m];
        for j in k + 1..m {
            acc = acc - b[k * bw + j] * x[j];
        }
        x[k] = acc / b[k * bw + k];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Solves the program. Deterministic: no randomness, fixed tie-breaking.
pub fn solve<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpSolution<T>, LpError> {
    lp.validate()?;
    let n = lp.num_vars();

    // Column layout for structural variables.
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut bound_rows: Vec<(usize, T)> = Vec::new();
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l.is_finite() {
            maps.push(VarMap::Shift {
                col: ncols,
                offset: l,
            });
            if u.is_finite() {
                bound_rows.push((ncols, u - l));
            }
            ncols += 1;
        } else if u.is_finite() {
            maps.push(VarMap::Mirror {
                col: ncols,
                offset: u,
            });
            ncols += 1;
        } else {
            maps.push(VarMap::Split {
                pos: ncols,
                neg: ncols + 1,
            });
            ncols += 2;
        }
    }
    let n_struct = ncols;

    // Structural cost for minimization.
    let sign = match lp.sense {
        Sense::Minimize => T::one(),
        Sense::Maximize => -T::one(),
    };
    let mut struct_cost = vec![T::zero(); n_struct];
    for (j, map) in maps.iter().enumerate() {
        let c = lp.objective[j] * sign;
        match *map {
            VarMap::Shift { col, .. } => struct_cost[col] = c,
            VarMap::Mirror { col, .. } => struct_cost[col] = -c,
            VarMap::Split { pos, neg } => {
                struct_cost[pos] = c;
                struct_cost[neg] = -c;
            }
        }
    }

    // Transformed rows: (coeffs over structural columns, rhs, is_equality, user index).
    struct TRow<T> {
        coeffs: Vec<T>,
        rhs: T,
        eq: bool,
        user: Option<usize>,
    }
    let transform = |row: &Row<T>| -> (Vec<T>, T) {
        let mut coeffs = vec![T::zero(); n_struct];
        let mut rhs = row.rhs;
        for (j, map) in maps.iter().enumerate() {
            let a = row.coeffs[j];
            if a == T::zero() {
                continue;
            }
            match *map {
                VarMap::Shift { col, offset } => {
                    coeffs[col] = a;
                    rhs = rhs - a * offset;
                }
                VarMap::Mirror { col, offset } => {
                    coeffs[col] = -a;
                    rhs = rhs - a * offset;
                }
                VarMap::Split { pos, neg } => {
                    coeffs[pos] = a;
                    coeffs[neg] = -a;
                }
            }
        }
        (coeffs, rhs)
    };
    let mut trows: Vec<TRow<T>> = Vec::new();
    for (i, row) in lp.inequalities.iter().enumerate() {
        let (coeffs, rhs) = transform(row);
        trows.push(TRow {
            coeffs,
            rhs,
            eq: false,
            user: Some(i),
        });
    }
    for (i, row) in lp.equalities.iter().enumerate() {
        let (coeffs, rhs) = transform(row);
        trows.push(TRow {
            coeffs,
            rhs,
            eq: true,
            user: Some(lp.inequalities.len() + i),
        });
    }
    for &(col, ub) in &bound_rows {
        let mut coeffs = vec![T::zero(); n_struct];
        coeffs[col] = T::one();
        trows.push(TRow {
            coeffs,
            rhs: ub,
            eq: false,
            user: None,
        });
    }
    // Rows with +inf right-hand side never bind.
    trows.retain(|r| !(r.rhs == T::infinity() && !r.eq));
    if trows.iter().any(|r| r.rhs.is_infinite()) {
        // -inf on an inequality or any infinite equality.
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![T::zero(); n],
            objective: T::nan(),
            iterations: 0,
            duals: vec![T::zero(); lp.inequalities.len() + lp.equalities.len()],
        });
    }

    let m = trows.len();
    // Slack / surplus columns, one per inequality row.
    let n_ineq = trows.iter().filter(|r| !r.eq).count();
    let slack_start = n_struct;
    let artificial_start = slack_start + n_ineq;
    // Each row needs an artificial unless it is a `≤` row with rhs ≥ 0.
    let mut negated = vec![false; m];
    let mut needs_art = vec![false; m];
    for (i, r) in trows.iter().enumerate() {
        negated[i] = r.rhs < T::zero();
        needs_art[i] = r.eq || negated[i];
    }
    let n_art = needs_art.iter().filter(|b| **b).count();
    let total = artificial_start + n_art;
    let w = total + 1;
    let mut a = vec![T::zero(); m * w];
    let mut basis = vec![0usize; m];
    // Identity column per row, used to read duals.
    let mut unit_col = vec![0usize; m];
    let mut slack_idx = slack_start;
    let mut art_idx = artificial_start;
    for (i, r) in trows.iter().enumerate() {
        let s = if negated[i] { -T::one() } else { T::one() };
        for j in 0..n_struct {
            a[i * w + j] = r.coeffs[j] * s;
        }
        a[i * w + total] = r.rhs * s;
        let mut slack_col = None;
        if !r.eq {
            a[i * w + slack_idx] = s;
            slack_col = Some(slack_idx);
            slack_idx += 1;
        }
        if needs_art[i] {
            a[i * w + art_idx] = T::one();
            basis[i] = art_idx;
            unit_col[i] = art_idx;
            art_idx += 1;
        } else {
            let sc = slack_col.expect("non-artificial row has a slack");
            basis[i] = sc;
            unit_col[i] = sc;
        }
    }
    let original = a.clone();
    let mut tab = Tableau {
        m,
        ncols: total,
        a,
        basis,
        artificial_start,
    };
    let limit = 50_000 + 100 * (m + total);
    let mut iterations = 0usize;

    // Phase 1.
    if n_art > 0 {
        let mut phase1 = vec![T::zero(); total];
        for c in phase1.iter_mut().skip(artificial_start) {
            *c = T::one();
        }
        tab.optimize(&phase1, |_| true, &mut iterations, limit)?;
        let (_, tableau_infeas) = tab.reduced_costs(&phase1);
        let infeas = match basic_solution(&original, m, total, &tab.basis) {
            Some(r) => (0..m)
                .filter(|i| tab.basis[*i] >= artificial_start)
                .map(|i| r[i].abs())
                .sum(),
            None => tableau_infeas,
        };
        let rhs_scale = trows.iter().fold(T::one(), |acc, r| acc.max(r.rhs.abs()));
        if infeas > harris_tol::<T>() * rhs_scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: vec![T::zero(); n],
                objective: T::nan(),
                iterations,
                duals: vec![T::zero(); lp.inequalities.len() + lp.equalities.len()],
            });
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..m {
            if tab.basis[i] >= artificial_start {
                let mut best: Option<(usize, T)> = None;
                for j in 0..artificial_start {
                    let v = tab.at(i, j).abs();
                    if v > T::PIVOT_TOL && best.map_or(true, |(_, b)| v > b) {
                        best = Some((j, v));
                    }
                }
                if let Some((j, _)) = best {
                    tab.pivot(i, j);
                    iterations += 1;
                }
            }
        }
    }

    // Phase 2.
    let mut cost = vec![T::zero(); total];
    cost[..n_struct].copy_from_slice(&struct_cost);
    let art0 = tab.artificial_start;
    let mut bounded = tab.optimize(&cost, |j| j < art0, &mut iterations, limit)?;
    // Rebuild the tableau from the original rows for the final basis; if that
    // exposes negative basic values, restore feasibility with dual pivots.
    let mut feasible = true;
    for _ in 0..4 {
        if !bounded || !tab.refactor(&original) {
            break;
        }
        let worst = (0..m).map(|i| tab.rhs(i)).fold(T::zero(), T::min);
        if worst >= -harris_tol::<T>() {
            break;
        }
        if !tab.dual_repair(&cost, |j| j < art0, &mut iterations, limit)? {
            feasible = false;
            break;
        }
        bounded = tab.optimize(&cost, |j| j < art0, &mut iterations, limit)?;
    }
    if !feasible {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![T::zero(); n],
            objective: T::nan(),
            iterations,
            duals: vec![T::zero(); lp.inequalities.len() + lp.equalities.len()],
        });
    }
    if !bounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: vec![T::zero(); n],
            objective: match lp.sense {
                Sense::Maximize => T::infinity(),
                Sense::Minimize => T::neg_infinity(),
            },
            iterations,
            duals: vec![T::zero(); lp.inequalities.len() + lp.equalities.len()],
        });
    }

    let mut y = vec![T::zero(); total];
    for i in 0..m {
        y[tab.basis[i]] = tab.rhs(i).max(T::zero());
    }
    let x: Vec<T> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shift { col, offset } => offset + y[col],
            VarMap::Mirror { col, offset } => offset - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();

    // Duals of the minimization form: pi_i = -d_{unit col}; undo row negation
    // and the objective sign to report them in the original sense.
    let (d, _) = tab.reduced_costs(&cost);
    let mut duals = vec![T::zero(); lp.inequalities.len() + lp.equalities.len()];
    for (i, r) in trows.iter().enumerate() {
        if let Some(u) = r.user {
            let mut pi = -d[unit_col[i]];
            if negated[i] {
                pi = -pi;
            }
            duals[u] = pi * sign;
        }
    }
    let violation = lp.relative_violation(&x);
    if violation > T::FEAS_TOL * T::of(100.0) {
        return Err(LpError::Inaccurate {
            violation: violation.to_f64_lossy(),
        });
    }
    let objective = lp.objective_at(&x);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        iterations,
        duals,
    })
}
