//! Log-likelihood of one item's parameters given weighted `(theta, level)`
//! observations, with analytic gradients.

use crate::grm::log_logistic;

/// `(theta, level, weight)`.
pub(crate) type Obs = (f64, usize, f64);

/// Weighted log-likelihood and its gradient in `a` and in each threshold.
pub(crate) fn loglik_grad(a: f64, b: &[f64], obs: &[Obs]) -> (f64, f64, Vec<f64>) {
    let big_m = b.len();
    let mut ll = 0.0;
    let mut ga = 0.0;
    let mut gb = vec![0.0; big_m];
    for &(theta, m, w) in obs {
        if w == 0.0 {
            continue;
        }
        let z = |k: usize| a * (theta - b[k - 1]);
        let logp = if m == 0 {
            log_logistic(-z(1))
        } else if m == big_m {
            log_logistic(z(big_m))
        } else {
            let (lo, hi) = (z(m), z(m + 1));
            log_logistic(lo) + log_logistic(-hi) + (-(hi - lo).exp_m1()).ln()
        };
        ll += w * logp;
        // d logP / dz_m = p_m q_m / P and d logP / dz_{m+1} = -p_{m+1} q_{m+1} / P.
        if m >= 1 {
            let zm = z(m);
            let r = (log_logistic(zm) + log_logistic(-zm) - logp).exp();
            ga += w * r * (theta - b[m - 1]);
            gb[m - 1] -= w * r * a;
        }
        if m < big_m {
            let zn = z(m + 1);
            let r = (log_logistic(zn) + log_logistic(-zn) - logp).exp();
            ga -= w * r * (theta - b[m]);
            gb[m] += w * r * a;
        }
    }
    (ll, ga, gb)
}

/// Weighted log-likelihood only.
pub(crate) fn loglik(a: f64, b: &[f64], obs: &[Obs]) -> f64 {
    let big_m = b.len();
    obs.iter()
        .filter(|o| o.2 != 0.0)
        .map(|&(theta, m, w)| {
            let z = |k: usize| a * (theta - b[k - 1]);
            let logp = if m == 0 {
                log_logistic(-z(1))
            } else if m == big_m {
                log_logistic(z(big_m))
            } else {
                let (lo, hi) = (z(m), z(m + 1));
                log_logistic(lo) + log_logistic(-hi) + (-(hi - lo).exp_m1()).ln()
            };
            w * logp
        })
        .sum()
}

/// Thresholds from a first threshold and increments.
pub(crate) fn thresholds_from_increments(b1: f64, increments: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(increments.len() + 1);
    out.push(b1);
    for d in increments {
        let last = *out.last().expect("nonempty");
        out.push(last + d);
    }
    out
}

/// Map a threshold gradient onto `(b1, d2, ..., dM)`: threshold `m` depends
/// on every increment up to `m`.
pub(crate) fn increment_gradient(gb: &[f64]) -> Vec<f64> {
    let mut suffix = vec![0.0; gb.len()];
    let mut acc = 0.0;
    for m in (0..gb.len()).rev() {
        acc += gb[m];
        suffix[m] = acc;
    }
    suffix
}
