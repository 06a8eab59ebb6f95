//! Independent reference computations used as test oracles.
#![allow(dead_code)]

use grmsel_core::{ItemBank, ItemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Category probabilities from the cumulative curves, written out directly.
pub fn oracle_probs(a: f64, b: &[f64], theta: f64) -> Vec<f64> {
    let star = |m: usize| -> f64 {
        if m == 0 {
            1.0
        } else if m > b.len() {
            0.0
        } else {
            sigmoid(a * (theta - b[m - 1]))
        }
    };
    (0..=b.len()).map(|m| star(m) - star(m + 1)).collect()
}

/// Fisher information as the sum over categories of (dP/dθ)² / P, with the
/// derivatives taken from the cumulative curves.
pub fn oracle_information(a: f64, b: &[f64], theta: f64) -> f64 {
    let dstar = |m: usize| -> f64 {
        if m == 0 || m > b.len() {
            0.0
        } else {
            let p = sigmoid(a * (theta - b[m - 1]));
            a * p * (1.0 - p)
        }
    };
    oracle_probs(a, b, theta)
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(m, &p)| (dstar(m) - dstar(m + 1)).powi(2) / p)
        .sum()
}

/// Log-likelihood of `(item index, level)` responses at θ.
pub fn oracle_loglik(bank: &ItemBank, responses: &[(usize, usize)], theta: f64) -> f64 {
    responses
        .iter()
        .map(|&(i, m)| {
            let it = &bank.items()[i];
            oracle_probs(it.a(), it.thresholds(), theta)[m].ln()
        })
        .sum()
}

pub fn random_item(rng: &mut ChaCha8Rng, id: String, max_levels: usize) -> ItemParams {
    let a = rng.random_range(0.7..3.5);
    let m = rng.random_range(1..=max_levels);
    let mut b: Vec<f64> = (0..m).map(|_| rng.random_range(-2.5..2.5)).collect();
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    for j in 1..m {
        if b[j] - b[j - 1] < 0.05 {
            b[j] = b[j - 1] + 0.05;
        }
    }
    ItemParams::new(id, a, b).unwrap()
}

pub fn random_bank(rng: &mut ChaCha8Rng, n: usize, max_levels: usize) -> ItemBank {
    ItemBank::new(
        (0..n)
            .map(|i| random_item(rng, format!("r{i:02}"), max_levels))
            .collect(),
    )
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Maximizer of `f` over a grid of the given step on `[lo, hi]`.
pub fn grid_argmax(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (f64::NEG_INFINITY, lo);
    for i in 0..=n {
        let t = lo + i as f64 * step;
        let v = f(t);
        if v > best.0 {
            best = (v, t);
        }
    }
    best.1
}
