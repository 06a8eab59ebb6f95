//! Population-level precision: expected Fisher information and expected
//! standard deviation of the trait estimate, integrated against a latent-trait
//! distribution by quadrature.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grm::{sd_from_information, ItemBank, ItemParams};
use crate::par;

/// Gauss–Hermite node count used when none is given.
pub const DEFAULT_NODES: usize = 61;

/// Population law of the latent trait.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatentDistribution {
    Normal { mean: f64, sd: f64 },
    EmpiricalSample { values: Vec<f64> },
    ExplicitGrid { nodes: Vec<f64>, weights: Vec<f64> },
}

impl LatentDistribution {
    pub fn standard_normal() -> Self {
        LatentDistribution::Normal { mean: 0.0, sd: 1.0 }
    }

    /// Point mass at `theta`.
    pub fn point_mass(theta: f64) -> Self {
        LatentDistribution::ExplicitGrid {
            nodes: vec![theta],
            weights: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        match self {
            LatentDistribution::Normal { mean, sd } => {
                if !mean.is_finite() {
                    return bad(format!("normal mean must be finite, got {mean}"));
                }
                if !(sd.is_finite() && *sd > 0.0) {
                    return bad(format!("normal sd must be positive, got {sd}"));
                }
            }
            LatentDistribution::EmpiricalSample { values } => {
                if values.is_empty() {
                    return bad("empirical sample is empty".into());
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return bad("empirical sample contains a non-finite value".into());
                }
            }
            LatentDistribution::ExplicitGrid { nodes, weights } => {
                if nodes.is_empty() || nodes.len() != weights.len() {
                    return bad(format!(
                        "grid needs matching nonempty node/weight lists (got {} and {})",
                        nodes.len(),
                        weights.len()
                    ));
                }
                if nodes.iter().any(|v| !v.is_finite()) {
                    return bad("grid contains a non-finite node".into());
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return bad("grid weights must be nonnegative".into());
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-10 {
                    return bad(format!("grid weights sum to {total}, expected 1"));
                }
            }
        }
        Ok(())
    }
}

/// Discrete approximation of a latent-trait distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::InvalidDistribution(
                "quadrature rule needs matching nonempty node/weight lists".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidDistribution(
                "quadrature weights must be nonnegative".into(),
            ));
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_k f(θ_k)`, summed in node order.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }
}

/// Gauss–Hermite nodes and weights for the weight function `exp(-x^2)`,
/// ascending in `x`. Eigenvalues of the Jacobi matrix give starting points
/// that Newton iteration on the orthonormal Hermite recurrence then polishes.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PI_M4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut x: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    x.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut w = vec![0.0; n];
    for (z, wi) in x.iter_mut().zip(w.iter_mut()) {
        let mut pp = 0.0;
        for _ in 0..20 {
            let mut p1 = PI_M4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = *z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let step = p1 / pp;
            *z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        *wi = 2.0 / (pp * pp);
    }
    // Exact symmetry about zero.
    for i in 0..n / 2 {
        let (a, b) = (x[n - 1 - i], 0.5 * (w[i] + w[n - 1 - i]));
        x[i] = -a;
        w[i] = b;
        w[n - 1 - i] = b;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Discretize `dist`. Normal laws use an `n_nodes`-point Gauss–Hermite rule
/// rescaled to the mean and sd; samples get equal weights; grids pass
/// through unchanged.
pub fn make_quadrature(dist: &LatentDistribution, n_nodes: usize) -> Result<QuadratureRule> {
    dist.validate()?;
    if n_nodes < 3 {
        return Err(Error::InvalidDistribution(format!(
            "at least 3 quadrature nodes are required, got {n_nodes}"
        )));
    }
    match dist {
        LatentDistribution::Normal { mean, sd } => {
            let (x, w) = gauss_hermite(n_nodes);
            let total: f64 = w.iter().sum();
            let scale = sd * std::f64::consts::SQRT_2;
            QuadratureRule::new(
                x.iter().map(|xi| mean + scale * xi).collect(),
                w.iter().map(|wi| wi / total).collect(),
            )
        }
        LatentDistribution::EmpiricalSample { values } => {
            let w = 1.0 / values.len() as f64;
            QuadratureRule::new(values.clone(), vec![w; values.len()])
        }
        LatentDistribution::ExplicitGrid { nodes, weights } => QuadratureRule::new(nodes.clone(), weights.clone()),
    }
}

/// Item information tabulated at every node of a quadrature rule.
///
/// Set-level quantities computed from the table sum item rows in ascending
/// bank order, so a set has one value no matter how its members are listed.
#[derive(Debug, Clone)]
pub struct InformationTable {
    rule: QuadratureRule,
    n_items: usize,
    values: Vec<f64>,
}

impl InformationTable {
    pub fn new(bank: &ItemBank, rule: QuadratureRule) -> Self {
        let nodes = rule.nodes();
        let rows = par::map_slice(bank.items(), |item| {
            nodes.iter().map(|&t| item.information(t)).collect::<Vec<_>>()
        });
        Self {
            n_items: bank.len(),
            values: rows.concat(),
            rule,
        }
    }

    pub fn from_distribution(bank: &ItemBank, dist: &LatentDistribution, n_nodes: usize) -> Result<Self> {
        Ok(Self::new(bank, make_quadrature(dist, n_nodes)?))
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_nodes(&self) -> usize {
        self.rule.len()
    }

    /// Information of item `item` at each node.
    pub fn row(&self, item: usize) -> &[f64] {
        let n = self.n_nodes();
        &self.values[item * n..(item + 1) * n]
    }

    pub fn expected_item_information(&self, item: usize) -> f64 {
        self.row(item).iter().zip(self.rule.weights()).map(|(i, w)| w * i).sum()
    }

    pub fn expected_set_information(&self, items: &[usize]) -> f64 {
        items.iter().map(|&i| self.expected_item_information(i)).sum()
    }

    /// Expected standard deviation of the set `items` (any order, no
    /// duplicates).
    pub fn expected_sd(&self, items: &[usize]) -> Result<f64> {
        let mut sorted = items.to_vec();
        sorted.sort_unstable();
        self.expected_sd_sorted(&sorted)
    }

    /// As [`expected_sd`](Self::expected_sd) for an ascending index list.
    pub fn expected_sd_sorted(&self, sorted: &[usize]) -> Result<f64> {
        let mut acc = 0.0;
        for (k, (&theta, &w)) in self.rule.nodes().iter().zip(self.rule.weights()).enumerate() {
            let total = self.node_total(sorted, k);
            acc += w * sd_from_information(total, theta)?;
        }
        Ok(acc)
    }

    /// Set information at node `k`, summed over `sorted` in the given order.
    #[inline]
    pub fn node_total(&self, sorted: &[usize], k: usize) -> f64 {
        let n = self.n_nodes();
        sorted.iter().map(|&i| self.values[i * n + k]).sum()
    }
}

fn default_rule(dist: &LatentDistribution) -> Result<QuadratureRule> {
    make_quadrature(dist, DEFAULT_NODES)
}

/// Expected Fisher information of one item under `dist`.
pub fn expected_item_information(item: &ItemParams, dist: &LatentDistribution) -> Result<f64> {
    Ok(expected_item_information_with(item, &default_rule(dist)?))
}

pub fn expected_item_information_with(item: &ItemParams, rule: &QuadratureRule) -> f64 {
    rule.integrate(|t| item.information(t))
}

/// Expected Fisher information of a set: the sum of its items' expected
/// information.
pub fn expected_set_information(items: &[ItemParams], dist: &LatentDistribution) -> Result<f64> {
    Ok(expected_set_information_with(items, &default_rule(dist)?))
}

pub fn expected_set_information_with(items: &[ItemParams], rule: &QuadratureRule) -> f64 {
    items.iter().map(|it| expected_item_information_with(it, rule)).sum()
}

/// Expected asymptotic standard deviation of the trait estimate from `items`
/// for a respondent drawn from `dist`.
pub fn expected_sd(items: &[ItemParams], dist: &LatentDistribution) -> Result<f64> {
    expected_sd_with(items, &default_rule(dist)?)
}

pub fn expected_sd_with(items: &[ItemParams], rule: &QuadratureRule) -> Result<f64> {
    let per_node = par::map_range(rule.len(), |k| {
        let theta = rule.nodes()[k];
        let info: f64 = items.iter().map(|it| it.information(theta)).sum();
        sd_from_information(info, theta)
    });
    let mut acc = 0.0;
    for (sd, w) in per_node.into_iter().zip(rule.weights()) {
        acc += w * sd?;
    }
    Ok(acc)
}
