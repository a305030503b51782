//! Deterministic Nelder–Mead simplex search and a parallel multi-start driver.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NelderMead {
    /// Iteration cap per simplex run.
    pub max_iter: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// ... and the simplex diameter falls below this.
    pub x_tol: f64,
    /// Edge length of the initial simplex.
    pub step: f64,
    /// Fresh simplices built around the incumbent after convergence.
    pub rebuilds: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_iter: 500,
            f_tol: 1e-6,
            x_tol: 1e-6,
            step: 0.25,
            rebuilds: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub evaluations: usize,
}

fn better<T: Scalar>(a: T, b: T) -> bool {
    // NaN ranks last.
    match (a.is_nan(), b.is_nan()) {
        (false, true) => true,
        (true, _) => false,
        _ => a < b,
    }
}

impl NelderMead {
    /// Minimizes `f` starting from `x0`. Non-finite values are treated as `+∞`.
    pub fn minimize<T: Scalar>(&self, f: impl Fn(&[T]) -> T, x0: &[T]) -> Minimum<T> {
        let eval = |x: &[T]| {
            let v = f(x);
            if v.is_nan() {
                T::infinity()
            } else {
                v
            }
        };
        let n = x0.len();
        let mut evaluations = 0usize;
        if n == 0 {
            return Minimum {
                x: Vec::new(),
                value: eval(x0),
                iterations: 0,
                evaluations: 1,
            };
        }
        let mut best = (x0.to_vec(), eval(x0));
        evaluations += 1;
        let mut iterations = 0usize;
        let mut step = T::of(self.step);
        for _ in 0..=self.rebuilds {
            let (x, v, it, ev) = self.run(&eval, &best.0, best.1, step);
            iterations += it;
            evaluations += ev;
            let improved = better(v, best.1);
            if improved || v == best.1 {
                best = (x, v);
            }
            if !improved {
                break;
            }
            step = step * T::of(0.5);
        }
        Minimum {
            x: best.0,
            value: best.1,
            iterations,
            evaluations,
        }
    }

    fn run<T: Scalar>(
        &self,
        f: &impl Fn(&[T]) -> T,
        x0: &[T],
        f0: T,
        step: T,
    ) -> (Vec<T>, T, usize, usize) {
        let n = x0.len();
        let (alpha, gamma, rho, sigma) = (T::one(), T::of(2.0), T::of(0.5), T::of(0.5));
        let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), f0));
        let mut evals = 0;
        for i in 0..n {
            let mut x = x0.to_vec();
            let h = step.max(T::of(0.05) * x[i].abs());
            x[i] = x[i] + h;
            let v = f(&x);
            evals += 1;
            simplex.push((x, v));
        }
        let (f_tol, x_tol) = (T::of(self.f_tol), T::of(self.x_tol));
        let mut it = 0;
        while it < self.max_iter {
            // Stable sort keeps earlier vertices first on ties.
            simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
            let (lo, hi) = (simplex[0].1, simplex[n].1);
            let spread = if hi.is_infinite() && lo.is_infinite() {
                T::zero()
            } else {
                (hi - lo).abs()
            };
            let diameter = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (*a - *b).abs()))
                .fold(T::zero(), T::max);
            if spread <= f_tol && diameter <= x_tol {
                break;
            }
            if diameter <= x_tol * T::of(1e-3) {
                break;
            }
            it += 1;
            let centroid: Vec<T> = (0..n)
                .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<T>() / T::of(n as f64))
                .collect();
            let along = |t: T| -> Vec<T> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| *c + t * (*c - *w))
                    .collect()
            };
            let xr = along(alpha);
            let fr = f(&xr);
            evals += 1;
            if better(fr, simplex[0].1) {
                let xe = along(gamma);
                let fe = f(&xe);
                evals += 1;
                simplex[n] = if better(fe, fr) { (xe, fe) } else { (xr, fr) };
            } else if better(fr, simplex[n - 1].1) {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if better(fr, simplex[n].1) {
                    let xc = along(rho);
                    let fc = f(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-rho);
                    let fc = f(&xc);
                    (xc, fc)
                };
                evals += 1;
                if better(fc, simplex[n].1.min(fr)) {
                    simplex[n] = (xc, fc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        let x: Vec<T> = x_best
                            .iter()
                            .zip(&vertex.0)
                            .map(|(b, v)| *b + sigma * (*v - *b))
                            .collect();
                        let v = f(&x);
                        evals += 1;
                        *vertex = (x, v);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let (x, v) = simplex.swap_remove(0);
        (x, v, it, evals)
    }

    /// Runs one search per start in parallel and keeps the best, breaking ties
    /// by the lowest start index. Returns the winner and its index.
    pub fn multi_start<T: Scalar>(
        &self,
        f: impl Fn(&[T]) -> T + Sync,
        starts: &[Vec<T>],
    ) -> Option<(usize, Minimum<T>)> {
        let results: Vec<Minimum<T>> = starts.par_iter().map(|s| self.minimize(&f, s)).collect();
        let mut best: Option<(usize, Minimum<T>)> = None;
        for (i, r) in results.into_iter().enumerate() {
            match &best {
                Some((_, b)) if !better(r.value, b.value) => {}
                _ => best = Some((i, r)),
            }
        }
        best
    }
}
