//! Monomial basis in graded lexicographic order.
//!
//! Degree 0 first (the constant 1), then degree 1 `x_1 … x_n`, then each
//! higher degree in lexicographic order of the non-decreasing index tuple:
//! for `n = 2, l = 2` this is `(1, x1, x2, x1², x1·x2, x2²)`. Polynomial
//! coefficient matrices are laid out in this order.

use crate::scalar::Scalar;

/// `C(n + l, n)`.
pub fn monomial_count(n: usize, degree: usize) -> usize {
    let mut c: u128 = 1;
    for i in 1..=degree as u128 {
        c = c * (n as u128 + i) / i;
    }
    c as usize
}

/// Index tuples `i_1 ≤ … ≤ i_d` of every monomial, in basis order.
pub fn monomial_exponents(n: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..degree {
        let mut next = Vec::new();
        for tuple in &layer {
            let start = tuple.last().copied().unwrap_or(0);
            for i in start..n {
                let mut t = tuple.clone();
                t.push(i);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

pub fn monomial_basis<T: Scalar>(x: &[T], degree: usize) -> Vec<T> {
    let mut out = vec![T::one()];
    // Each layer keeps (last index, value) so products are built incrementally.
    let mut layer: Vec<(usize, T)> = vec![(0, T::one())];
    for _ in 0..degree {
        let mut next = Vec::with_capacity(layer.len() * x.len());
        for &(start, v) in &layer {
            for (i, xi) in x.iter().enumerate().skip(start) {
                next.push((i, v * *xi));
            }
        }
        out.extend(next.iter().map(|(_, v)| *v));
        layer = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_one_basis() {
        assert_eq!(monomial_basis(&[2.0, 3.0], 1), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn degree_two_basis_in_two_variables() {
        let (h, v) = (2.0, 5.0);
        assert_eq!(
            monomial_basis(&[h, v], 2),
            vec![1.0, h, v, h * h, h * v, v * v]
        );
        assert_eq!(monomial_count(2, 2), 6);
    }

    #[test]
    fn counts_match_binomial() {
        assert_eq!(monomial_count(3, 2), 10);
        assert_eq!(monomial_basis(&[1.0, 2.0, 3.0], 2).len(), 10);
        for n in 1..5 {
            for l in 0..5 {
                assert_eq!(monomial_exponents(n, l).len(), monomial_count(n, l));
                assert_eq!(monomial_basis(&vec![1.5; n], l).len(), monomial_count(n, l));
            }
        }
    }

    #[test]
    fn exponents_agree_with_values() {
        let x = [1.3, -0.7, 2.1];
        let vals = monomial_basis(&x, 3);
        for (e, v) in monomial_exponents(3, 3).iter().zip(vals) {
            let p: f64 = e.iter().map(|i| x[*i]).product();
            assert!((p - v).abs() < 1e-12);
        }
    }
}
