use super::ScenarioError;

/// Violation bound `b(k) = 1 − t(k)` for complexity `k` out of `m` scenarios
/// at confidence `beta`, with `t(k)` the root in `(0, 1)` of
/// `(β/M) Σ_{j=k}^{M−1} C(j,k) t^{j−k} − C(M,k) t^{M−k}`; `b(M) = 1`.
///
/// Terms are compared in log space so that large `M` does not overflow.
pub fn risk_bound(k: usize, m: usize, beta: f64) -> Result<f64, ScenarioError> {
    if m == 0 || k > m {
        return Err(ScenarioError::Invalid(format!(
            "complexity {k} out of {m} scenarios"
        )));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(ScenarioError::Invalid(format!(
            "confidence parameter must lie in (0, 1], got {beta}"
        )));
    }
    if k == m {
        return Ok(1.0);
    }
    // ln C(j, k) for j = k … M.
    let mut ln_binom = Vec::with_capacity(m - k + 1);
    ln_binom.push(0.0f64);
    for j in k + 1..=m {
        let prev = *ln_binom.last().unwrap();
        ln_binom.push(prev + (j as f64).ln() - ((j - k) as f64).ln());
    }
    let ln_scale = (beta / m as f64).ln();
    // Sign of the polynomial at t.
    let positive = |t: f64| {
        let lt = t.ln();
        let terms = (0..m - k).map(|i| ln_binom[i] + i as f64 * lt);
        let peak = terms.clone().fold(f64::NEG_INFINITY, f64::max);
        let lse = peak + terms.map(|v| (v - peak).exp()).sum::<f64>().ln();
        ln_scale + lse > ln_binom[m - k] + (m - k) as f64 * lt
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if positive(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((1.0 - 0.5 * (lo + hi)).clamp(0.0, 1.0))
}
