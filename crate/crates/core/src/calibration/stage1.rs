use nalgebra::DMatrix;
use serde::Serialize;

use super::itemfit::{self, Obs};
use crate::error::{Error, Result};
use crate::grm::{ItemBank, ItemParams};
use crate::optim::{fd_hessian, newton_ascent, Bounds};
use crate::panel::ResponsePanel;
use crate::par;
use crate::population::{make_quadrature, LatentDistribution};

/// Item ids with their number of thresholds.
pub type ItemLayout = Vec<(String, usize)>;

/// Layout of an existing bank.
pub fn layout_of(bank: &ItemBank) -> ItemLayout {
    bank.items()
        .iter()
        .map(|it| (it.id().to_string(), it.max_level()))
        .collect()
}

/// Items in first-appearance order, each with its highest observed level as
/// the number of thresholds.
pub fn layout_from_panel(panel: &ResponsePanel) -> ItemLayout {
    let mut out: ItemLayout = Vec::new();
    for rec in &panel.records {
        match out.iter_mut().find(|(id, _)| *id == rec.item_id) {
            Some(entry) => entry.1 = entry.1.max(rec.level),
            None => out.push((rec.item_id.clone(), rec.level)),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stage1Config {
    pub n_nodes: usize,
    pub max_iter: usize,
    /// Stop when the marginal log-likelihood changes by less than
    /// `tol * (1 + |loglik|)`.
    pub tol: f64,
    /// Newton steps per item in each M-step.
    pub m_step_iter: usize,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Self {
            n_nodes: 41,
            max_iter: 2000,
            tol: 1e-10,
            m_step_iter: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectTheta {
    pub subject_id: String,
    /// Posterior mean.
    pub theta: f64,
    /// Posterior standard deviation.
    pub sd: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stage1Fit {
    pub bank: ItemBank,
    pub subjects: Vec<SubjectTheta>,
    pub loglik: f64,
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const LOG_A_RANGE: (f64, f64) = (-3.0, 3.0);
const B1_RANGE: (f64, f64) = (-10.0, 10.0);
const LOG_INCREMENT_RANGE: (f64, f64) = (-7.0, 3.0);

fn unpack(x: &[f64]) -> (f64, Vec<f64>) {
    let inc: Vec<f64> = x[2..].iter().map(|v| v.exp()).collect();
    (x[0].exp(), itemfit::thresholds_from_increments(x[1], &inc))
}

fn pack(a: f64, b: &[f64]) -> Vec<f64> {
    let mut x = vec![a.ln(), b[0]];
    x.extend(b.windows(2).map(|w| (w[1] - w[0]).ln()));
    x
}

fn bounds_for(m: usize) -> Bounds {
    let mut lower = vec![LOG_A_RANGE.0, B1_RANGE.0];
    let mut upper = vec![LOG_A_RANGE.1, B1_RANGE.1];
    lower.extend(std::iter::repeat_n(LOG_INCREMENT_RANGE.0, m - 1));
    upper.extend(std::iter::repeat_n(LOG_INCREMENT_RANGE.1, m - 1));
    Bounds { lower, upper }
}

/// Gradient of the weighted item log-likelihood in `(ln a, b1, ln d2, ...)`.
fn packed_gradient(x: &[f64], obs: &[Obs]) -> Vec<f64> {
    let (a, b) = unpack(x);
    let (_, ga, gb) = itemfit::loglik_grad(a, &b, obs);
    let suffix = itemfit::increment_gradient(&gb);
    let mut g = vec![a * ga, suffix[0]];
    g.extend((1..b.len()).map(|m| (b[m] - b[m - 1]) * suffix[m]));
    g
}

/// Starting values from marginal level proportions with `a = 1`.
fn initial_params(counts: &[usize]) -> Vec<f64> {
    let n: usize = counts.iter().sum();
    let m = counts.len() - 1;
    let mut b = Vec::with_capacity(m);
    let mut above = n;
    for k in 1..=m {
        above -= counts[k - 1];
        let p = (above as f64 / n as f64).clamp(0.005, 0.995);
        let mut bk = -1.2 * (p / (1.0 - p)).ln();
        if let Some(&prev) = b.last() {
            bk = f64::max(bk, prev + 0.05);
        }
        b.push(bk);
    }
    pack(1.0, &b)
}

/// Marginal maximum likelihood for GRM items from each subject's first
/// visit, with a standard normal trait, by EM over Gauss–Hermite nodes.
///
/// Thresholds are parameterized by the first threshold and log increments,
/// so they stay strictly increasing. Each M-step takes a few damped Newton
/// steps per item that never decrease the expected complete-data
/// log-likelihood, so the marginal log-likelihood is non-decreasing.
pub fn fit_grm_cross_sectional(
    panel: &ResponsePanel,
    layout: &[(String, usize)],
    config: &Stage1Config,
) -> Result<Stage1Fit> {
    if layout.is_empty() {
        return Err(Error::InvalidBank("no items to calibrate".into()));
    }
    if let Some((id, _)) = layout.iter().find(|(_, m)| *m == 0) {
        return Err(Error::DegenerateItem(id.clone()));
    }
    let template = ItemBank::new(
        layout
            .iter()
            .map(|(id, m)| ItemParams::new(id.clone(), 1.0, (0..*m).map(|k| k as f64).collect()))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let subjects = panel.first_visits(&template)?;
    if subjects.is_empty() {
        return Err(Error::InvalidPanel("no responses".into()));
    }
    let responses: Vec<&[(usize, usize)]> = subjects.iter().map(|s| s.visits[0].responses.as_slice()).collect();

    let n_items = layout.len();
    let mut level_counts: Vec<Vec<usize>> = layout.iter().map(|(_, m)| vec![0; m + 1]).collect();
    for r in &responses {
        for &(i, l) in r.iter() {
            level_counts[i][l] += 1;
        }
    }
    for (i, counts) in level_counts.iter().enumerate() {
        if counts.iter().filter(|&&c| c > 0).count() < 2 {
            return Err(Error::DegenerateItem(layout[i].0.clone()));
        }
    }

    let rule = make_quadrature(&LatentDistribution::standard_normal(), config.n_nodes)?;
    let nodes = rule.nodes().to_vec();
    let log_w: Vec<f64> = rule.weights().iter().map(|w| w.ln()).collect();
    let n_nodes = nodes.len();
    let mut params: Vec<Vec<f64>> = level_counts.iter().map(|c| initial_params(c)).collect();

    // Per-subject posterior over nodes and the subject's log marginal.
    let e_step = |params: &[Vec<f64>]| -> (Vec<Vec<f64>>, f64) {
        let items: Vec<ItemParams> = params
            .iter()
            .zip(layout)
            .map(|(x, (id, _))| {
                let (a, b) = unpack(x);
                ItemParams::new(id.clone(), a, b).expect("increments keep thresholds ordered")
            })
            .collect();
        // log P(level | node) per item, flattened as [item][node][level].
        let table: Vec<Vec<Vec<f64>>> = par::map_slice(&items, |it| {
            nodes
                .iter()
                .map(|&t| (0..=it.max_level()).map(|m| it.log_prob_eq_unchecked(m, t)).collect())
                .collect()
        });
        let post = par::map_slice(&responses, |r| {
            let mut lp = log_w.clone();
            for &(i, l) in r.iter() {
                for (k, v) in lp.iter_mut().enumerate() {
                    *v += table[i][k][l];
                }
            }
            let max = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = lp.iter().map(|v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            (lp.iter().map(|v| (v - lse).exp()).collect::<Vec<f64>>(), lse)
        });
        let total = post.iter().map(|p| p.1).sum();
        (post.into_iter().map(|p| p.0).collect(), total)
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let (mut posterior, mut ll) = e_step(&params);
    trace.push(ll);
    while iterations < config.max_iter {
        iterations += 1;
        // Expected counts per item, node, and level.
        let mut expected: Vec<Vec<Vec<f64>>> = layout.iter().map(|(_, m)| vec![vec![0.0; m + 1]; n_nodes]).collect();
        for (r, post) in responses.iter().zip(&posterior) {
            for &(i, l) in r.iter() {
                for (k, w) in post.iter().enumerate() {
                    expected[i][k][l] += w;
                }
            }
        }
        params = par::map_range(n_items, |i| {
            let obs: Vec<Obs> = expected[i]
                .iter()
                .enumerate()
                .flat_map(|(k, row)| row.iter().enumerate().map(move |(l, &w)| (k, l, w)))
                .map(|(k, l, w)| (nodes[k], l, w))
                .collect();
            let objective = |x: &[f64]| {
                let (a, b) = unpack(x);
                itemfit::loglik(a, &b, &obs)
            };
            let grad = |x: &[f64]| packed_gradient(x, &obs);
            let grad_hess = |x: &[f64]| -> (Vec<f64>, DMatrix<f64>) { (grad(x), fd_hessian(grad, x, 1e-5)) };
            let m = layout[i].1;
            newton_ascent(
                objective,
                grad_hess,
                params[i].clone(),
                &bounds_for(m),
                1e-9,
                config.m_step_iter,
            )
            .x
        });
        let (next_post, next_ll) = e_step(&params);
        posterior = next_post;
        let change = next_ll - ll;
        ll = next_ll;
        trace.push(ll);
        if change.abs() < config.tol * (1.0 + ll.abs()) {
            converged = true;
            break;
        }
    }

    let items = params
        .iter()
        .zip(layout)
        .map(|(x, (id, _))| {
            let (a, b) = unpack(x);
            ItemParams::new(id.clone(), a, b)
        })
        .collect::<Result<Vec<_>>>()?;
    let thetas = subjects
        .iter()
        .zip(&posterior)
        .map(|(s, post)| {
            let mean: f64 = post.iter().zip(&nodes).map(|(w, t)| w * t).sum();
            let var: f64 = post.iter().zip(&nodes).map(|(w, t)| w * (t - mean).powi(2)).sum();
            SubjectTheta {
                subject_id: s.id.clone(),
                theta: mean,
                sd: var.sqrt(),
            }
        })
        .collect();
    Ok(Stage1Fit {
        bank: ItemBank::new(items)?,
        subjects: thetas,
        loglik: ll,
        loglik_trace: trace,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::PanelRecord;

    fn rec(s: usize, item: &str, level: usize) -> PanelRecord {
        PanelRecord {
            subject_id: format!("s{s}"),
            time_years: 0.0,
            item_id: item.into(),
            level,
        }
    }

    #[test]
    fn degenerate_item_is_named() {
        let panel = ResponsePanel::new(vec![rec(1, "x", 0), rec(1, "y", 1), rec(2, "x", 0), rec(2, "y", 0)]);
        let layout = vec![("x".to_string(), 1), ("y".to_string(), 1)];
        let err = fit_grm_cross_sectional(&panel, &layout, &Stage1Config::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateItem(ref id) if id == "x"), "{err}");
    }

    #[test]
    fn symmetric_single_item() {
        let records = (0..200).map(|s| rec(s, "x", s % 2)).collect();
        let panel = ResponsePanel::new(records);
        let fit = fit_grm_cross_sectional(&panel, &[("x".to_string(), 1)], &Stage1Config::default()).unwrap();
        assert!(fit.bank.items()[0].thresholds()[0].abs() < 1e-6);
        assert!(fit.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
    }

    #[test]
    fn layout_inference() {
        let panel = ResponsePanel::new(vec![rec(1, "b", 2), rec(1, "a", 0), rec(2, "b", 3)]);
        assert_eq!(
            layout_from_panel(&panel),
            vec![("b".to_string(), 3), ("a".to_string(), 0)]
        );
    }
}
