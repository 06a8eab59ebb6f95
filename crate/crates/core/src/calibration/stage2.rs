use nalgebra::DMatrix;
use serde::Serialize;

use super::itemfit::{self, Obs};
use super::ledger::ParameterLedger;
use super::priors::PriorSpec;
use crate::error::{Error, Result};
use crate::estimation::{loglik_derivs, trajectory_map_resolved, TrajectoryEstimate, TrajectoryPrior};
use crate::grm::{ItemBank, ItemParams};
use crate::optim::{fd_hessian, newton_ascent, Bounds};
use crate::panel::{ResponsePanel, SubjectPanel};
use crate::par;

/// Number of leading thresholds per item held at their first-stage values.
pub const FIXED_THRESHOLDS: usize = 2;

/// Correlations are kept inside `[-RHO_BOUND, RHO_BOUND]`.
pub const RHO_BOUND: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stage2Config {
    pub max_sweeps: usize,
    /// Stop when a sweep raises the objective by less than this. The block
    /// proposals neglect how the subjects' posterior curvature moves with
    /// the population values, so the stopping point can leave a small
    /// gradient, reported in [`FitResult::grad_norm`].
    pub tol: f64,
    pub init_beta1: f64,
    pub init_var_u1: f64,
    pub init_rho: f64,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Self {
            max_sweeps: 5000,
            tol: 1e-8,
            init_beta1: 0.0,
            init_var_u1: 0.1,
            init_rho: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectEffects {
    pub subject_id: String,
    pub u0: f64,
    pub u1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub bank: ItemBank,
    pub beta0: f64,
    pub beta1: f64,
    pub var_u0: f64,
    pub var_u1: f64,
    pub rho: f64,
    pub subjects: Vec<SubjectEffects>,
    /// Laplace-approximated log marginal posterior, up to a constant.
    pub objective: f64,
    /// Objective at the start and after each sweep.
    pub objective_trace: Vec<f64>,
    /// Projected gradient norm of the population-level parameters at exit.
    pub grad_norm: f64,
    pub sweeps: usize,
    /// The last sweep improved the objective by less than the tolerance.
    pub converged: bool,
    pub warnings: Vec<String>,
    pub ledger: ParameterLedger,
}

impl FitResult {
    pub fn trajectory_prior(&self) -> TrajectoryPrior {
        TrajectoryPrior {
            beta0: self.beta0,
            beta1: self.beta1,
            var_u0: self.var_u0,
            var_u1: self.var_u1,
            rho: self.rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Params {
    beta1: f64,
    var_u1: f64,
    rho: f64,
    increments: Vec<Vec<f64>>,
}

impl Params {
    fn prior(&self) -> TrajectoryPrior {
        TrajectoryPrior {
            beta0: 0.0,
            beta1: self.beta1,
            var_u0: 1.0,
            var_u1: self.var_u1,
            rho: self.rho,
        }
    }

    fn bank(&self, fixed: &ItemBank) -> ItemBank {
        let items = fixed
            .items()
            .iter()
            .zip(&self.increments)
            .map(|(it, inc)| {
                let mut b = it.thresholds()[..it.max_level().min(FIXED_THRESHOLDS)].to_vec();
                for d in inc {
                    let last = *b.last().expect("nonempty");
                    b.push(last + d);
                }
                ItemParams::new(it.id(), it.a(), b).expect("positive increments keep thresholds ordered")
            })
            .collect();
        ItemBank::new(items).expect("same ids as the fixed bank")
    }

    /// `self + step * (target - self)`.
    fn toward(&self, target: &Params, step: f64) -> Params {
        let lerp = |a: f64, b: f64| a + step * (b - a);
        Params {
            beta1: lerp(self.beta1, target.beta1),
            var_u1: lerp(self.var_u1, target.var_u1),
            rho: lerp(self.rho, target.rho),
            increments: self
                .increments
                .iter()
                .zip(&target.increments)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| lerp(*x, *y)).collect())
                .collect(),
        }
    }

    fn log_prior(&self, priors: &PriorSpec) -> f64 {
        if self.rho.abs() > RHO_BOUND {
            return f64::NEG_INFINITY;
        }
        priors.slope.log_kernel(self.beta1)
            + priors.slope_variance.log_kernel(self.var_u1)
            + self
                .increments
                .iter()
                .flatten()
                .map(|&d| priors.threshold_increment.log_kernel(d))
                .sum::<f64>()
    }
}

/// Parameters with every subject's conditional mode and the resulting
/// objective.
struct Evaluated {
    params: Params,
    bank: ItemBank,
    fits: Vec<TrajectoryEstimate>,
    value: f64,
}

/// Laplace approximation to the log marginal posterior: for each subject,
/// the penalized log-likelihood at its mode minus half the log determinant
/// of `Σ` times the negative Hessian, plus the prior kernels.
fn evaluate(
    params: Params,
    fixed: &ItemBank,
    subjects: &[SubjectPanel],
    priors: &PriorSpec,
    warm: &[[f64; 2]],
) -> Evaluated {
    let bank = params.bank(fixed);
    let prior = params.prior();
    let fits = par::map_range(subjects.len(), |j| {
        trajectory_map_resolved(&subjects[j].visits, &bank, &prior, warm[j])
    });
    let cov = prior.covariance();
    let det_sigma = cov.determinant();
    let per_subject: f64 = fits
        .iter()
        .map(|f| {
            let c = f.covariance;
            let det_post = c[0][0] * c[1][1] - c[0][1] * c[1][0];
            f.objective - 0.5 * (det_sigma / det_post).ln()
        })
        .sum();
    let value = per_subject + params.log_prior(priors);
    Evaluated {
        params,
        bank,
        fits,
        value: if value.is_nan() { f64::NEG_INFINITY } else { value },
    }
}

fn modes(e: &Evaluated) -> Vec<[f64; 2]> {
    e.fits.iter().map(|f| [f.u0, f.u1]).collect()
}

/// Move from `current` toward `proposal`, halving the step until the
/// objective does not decrease. Returns whether a move was accepted.
fn line_search(
    current: &mut Evaluated,
    proposal: &Params,
    fixed: &ItemBank,
    subjects: &[SubjectPanel],
    priors: &PriorSpec,
) -> bool {
    if *proposal == current.params {
        return false;
    }
    let warm = modes(current);
    let mut step = 1.0;
    for _ in 0..12 {
        let cand = evaluate(current.params.toward(proposal, step), fixed, subjects, priors, &warm);
        if cand.value >= current.value {
            *current = cand;
            return true;
        }
        step *= 0.5;
    }
    false
}

fn theta(prior: &TrajectoryPrior, u: [f64; 2], t: f64) -> f64 {
    prior.beta0 + u[0] + (prior.beta1 + u[1]) * t
}

/// Newton step for the mean slope on the profile objective: the slope's own
/// curvature less what the subjects' effects absorb.
fn slope_proposal(e: &Evaluated, subjects: &[SubjectPanel], priors: &PriorSpec) -> f64 {
    let prior = e.params.prior();
    let parts = par::map_range(subjects.len(), |j| {
        let fit = &e.fits[j];
        let u = [fit.u0, fit.u1];
        let (mut g, mut h_bb, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0);
        for v in &subjects[j].visits {
            let t = v.time;
            let (_, gt, ht) = loglik_derivs(&v.responses, &e.bank, theta(&prior, u, t));
            g += t * gt;
            h_bb += t * t * ht;
            b0 += t * ht;
            b1 += t * t * ht;
        }
        let c = fit.covariance;
        let absorbed = b0 * b0 * c[0][0] + 2.0 * b0 * b1 * c[0][1] + b1 * b1 * c[1][1];
        (g, h_bb + absorbed)
    });
    let slope = priors.slope;
    let g: f64 = parts.iter().map(|p| p.0).sum::<f64>() + slope.grad(e.params.beta1);
    let h: f64 = parts.iter().map(|p| p.1).sum::<f64>() + slope.curvature();
    let step = if h < 0.0 { -g / h } else { g.signum() * 0.01 };
    slope.project(e.params.beta1 + step)
}

/// Per-item Newton ascent on the free increments with subjects held at
/// their modes.
fn increment_proposal(e: &Evaluated, fixed: &ItemBank, subjects: &[SubjectPanel], priors: &PriorSpec) -> Vec<Vec<f64>> {
    let prior = e.params.prior();
    let inc_prior = priors.threshold_increment;
    let mut obs: Vec<Vec<Obs>> = vec![Vec::new(); fixed.len()];
    for (s, fit) in subjects.iter().zip(&e.fits) {
        for v in &s.visits {
            let t = theta(&prior, [fit.u0, fit.u1], v.time);
            for &(i, l) in &v.responses {
                obs[i].push((t, l, 1.0));
            }
        }
    }
    par::map_range(fixed.len(), |i| {
        let current = &e.params.increments[i];
        if current.is_empty() || obs[i].is_empty() {
            return current.clone();
        }
        let it = &fixed.items()[i];
        let lower = &it.thresholds()[..FIXED_THRESHOLDS];
        let full = |x: &[f64]| itemfit::thresholds_from_increments(lower[0], &[&[lower[1] - lower[0]][..], x].concat());
        let f = |x: &[f64]| {
            itemfit::loglik(it.a(), &full(x), &obs[i]) + x.iter().map(|&d| inc_prior.log_kernel(d)).sum::<f64>()
        };
        let grad = |x: &[f64]| {
            let (_, _, gb) = itemfit::loglik_grad(it.a(), &full(x), &obs[i]);
            let suffix = itemfit::increment_gradient(&gb);
            x.iter()
                .enumerate()
                .map(|(k, &d)| suffix[FIXED_THRESHOLDS + k] + inc_prior.grad(d))
                .collect::<Vec<f64>>()
        };
        let grad_hess = |x: &[f64]| -> (Vec<f64>, DMatrix<f64>) { (grad(x), fd_hessian(grad, x, 1e-6)) };
        let bounds = Bounds {
            lower: vec![inc_prior.lower; current.len()],
            upper: vec![inc_prior.upper; current.len()],
        };
        newton_ascent(f, grad_hess, current.clone(), &bounds, 1e-10, 20).x
    })
}

/// Second moments `(S00, S01, S11)` of the random effects, each mode's
/// posterior covariance included.
fn moments(fits: &[TrajectoryEstimate]) -> (f64, f64, f64) {
    let n = fits.len() as f64;
    let s = fits.iter().fold((0.0, 0.0, 0.0), |acc, f| {
        let c = f.covariance;
        (
            acc.0 + f.u0 * f.u0 + c[0][0],
            acc.1 + f.u0 * f.u1 + c[0][1],
            acc.2 + f.u1 * f.u1 + c[1][1],
        )
    });
    (s.0 / n, s.1 / n, s.2 / n)
}

/// Expected random-effect log density (with `var_u0 = 1`) given second
/// moments `s`, plus the variance prior kernel, as a function of
/// `(var_u1, rho)`, and its gradient.
fn covariance_objective(x: &[f64], n: f64, s: (f64, f64, f64), priors: &PriorSpec) -> (f64, Vec<f64>) {
    let (v, rho) = (x[0], x[1]);
    let d = 1.0 - rho * rho;
    let rv = v.sqrt();
    let q = (s.0 - 2.0 * rho * s.1 / rv + s.2 / v) / d;
    let f = -n * (2.0 * std::f64::consts::PI).ln() - 0.5 * n * ((v * d).ln() + q) + priors.slope_variance.log_kernel(v);
    let dq_dv = (rho * s.1 / (v * rv) - s.2 / (v * v)) / d;
    let dq_drho = -2.0 * s.1 / (rv * d) + q * 2.0 * rho / d;
    let gv = -0.5 * n * (1.0 / v + dq_dv) + priors.slope_variance.grad(v);
    let grho = -0.5 * n * (-2.0 * rho / d + dq_drho);
    (f, vec![gv, grho])
}

/// Maximizer of [`covariance_objective`] inside the bounds, started from
/// the better of the current values and the unpenalized optimum.
fn covariance_proposal(e: &Evaluated, priors: &PriorSpec) -> (f64, f64) {
    let s = moments(&e.fits);
    let n = e.fits.len() as f64;
    let vb = priors.slope_variance;
    let bounds = Bounds {
        lower: vec![vb.lower, -RHO_BOUND],
        upper: vec![vb.upper, RHO_BOUND],
    };
    let f = |x: &[f64]| covariance_objective(x, n, s, priors).0;
    let mut start = vec![e.params.var_u1, e.params.rho];
    if s.0 > 0.0 {
        // Regression of u1 on u0 gives the optimum without the prior.
        let gamma = s.1 / s.0;
        let v = s.2 - s.1 * s.1 / s.0 + gamma * gamma;
        if v > 0.0 {
            let mut x = vec![v, gamma / v.sqrt()];
            bounds.project(&mut x);
            if f(&x) > f(&start) {
                start = x;
            }
        }
    }
    let grad = |x: &[f64]| covariance_objective(x, n, s, priors).1;
    let gh = |x: &[f64]| -> (Vec<f64>, DMatrix<f64>) { (grad(x), fd_hessian(grad, x, 1e-7)) };
    let out = newton_ascent(f, gh, start, &bounds, 1e-10, 50);
    (out.x[0], out.x[1])
}

/// Penalized MAP fit of the longitudinal model by block coordinate ascent.
///
/// Discriminations and the two lowest thresholds of every item come from
/// `fixed` and are held constant; higher thresholds are re-estimated as
/// increments starting from `fixed`'s values. The intercept mean is 0 and
/// the intercept variance 1.
///
/// Population parameters maximize the Laplace-approximated log marginal
/// posterior; subject effects are the conditional modes given them and are
/// re-solved by Newton's method whenever the population values change. Each
/// sweep proposes, in turn, a profile Newton step for the mean slope,
/// per-item Newton steps for the free increments, and the covariance that
/// maximizes the expected random-effect density given the modes and their
/// posterior covariances. A proposal is accepted, possibly shortened, only
/// if it does not lower the objective.
pub fn fit_longitudinal_map(
    panel: &ResponsePanel,
    fixed: &ItemBank,
    priors: &PriorSpec,
    config: &Stage2Config,
) -> Result<FitResult> {
    priors.validate()?;
    if panel.is_empty() {
        return Err(Error::InvalidPanel("no responses".into()));
    }
    let subjects = panel.subjects(fixed)?;
    let mut warnings = Vec::new();
    let mut project = |name: &str, value: f64, lo: f64, hi: f64| -> f64 {
        let p = value.clamp(lo, hi);
        if p != value {
            let msg = format!("initial {name} {value} projected onto [{lo}, {hi}]");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        p
    };
    let inc_prior = priors.threshold_increment;
    let increments = fixed
        .items()
        .iter()
        .map(|it| {
            let b = it.thresholds();
            (FIXED_THRESHOLDS..b.len())
                .map(|m| {
                    let name = format!("increment {} of item `{}`", m + 1, it.id());
                    project(&name, b[m] - b[m - 1], inc_prior.lower, inc_prior.upper)
                })
                .collect()
        })
        .collect();
    let params = Params {
        beta1: project("slope", config.init_beta1, priors.slope.lower, priors.slope.upper),
        var_u1: project(
            "slope variance",
            config.init_var_u1,
            priors.slope_variance.lower,
            priors.slope_variance.upper,
        ),
        rho: project("correlation", config.init_rho, -RHO_BOUND, RHO_BOUND),
        increments,
    };

    let mut current = evaluate(params, fixed, &subjects, priors, &vec![[0.0, 0.0]; subjects.len()]);
    let mut trace = vec![current.value];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < config.max_sweeps {
        sweeps += 1;
        let start = current.value;

        let beta1 = slope_proposal(&current, &subjects, priors);
        let proposal = Params {
            beta1,
            ..current.params.clone()
        };
        line_search(&mut current, &proposal, fixed, &subjects, priors);

        let increments = increment_proposal(&current, fixed, &subjects, priors);
        let proposal = Params {
            increments,
            ..current.params.clone()
        };
        line_search(&mut current, &proposal, fixed, &subjects, priors);

        let (var_u1, rho) = covariance_proposal(&current, priors);
        let proposal = Params {
            var_u1,
            rho,
            ..current.params.clone()
        };
        line_search(&mut current, &proposal, fixed, &subjects, priors);

        trace.push(current.value);
        if current.value - start < config.tol {
            converged = true;
            break;
        }
    }

    let grad_norm = population_gradient_norm(&current, fixed, &subjects, priors);
    let p = &current.params;
    let vb = priors.slope_variance;
    for (name, v, lo, hi) in [
        ("mean slope", p.beta1, priors.slope.lower, priors.slope.upper),
        ("slope variance", p.var_u1, vb.lower, vb.upper),
        ("correlation", p.rho, -RHO_BOUND, RHO_BOUND),
    ] {
        if v <= lo || v >= hi {
            let msg = format!("{name} {v} is at a bound of [{lo}, {hi}]");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    if !converged {
        let msg = format!("no convergence after {sweeps} sweeps");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    if let Some(s) = current.fits.iter().zip(&subjects).find(|(f, _)| !f.converged) {
        let msg = format!("random effects of subject `{}` did not converge", s.1.id);
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let thresholds: Vec<usize> = fixed.items().iter().map(|it| it.max_level()).collect();
    Ok(FitResult {
        beta0: 0.0,
        beta1: p.beta1,
        var_u0: 1.0,
        var_u1: p.var_u1,
        rho: p.rho,
        subjects: subjects
            .iter()
            .zip(&current.fits)
            .map(|(s, f)| SubjectEffects {
                subject_id: s.id.clone(),
                u0: f.u0,
                u1: f.u1,
            })
            .collect(),
        objective: current.value,
        objective_trace: trace,
        grad_norm,
        sweeps,
        converged,
        warnings,
        ledger: ParameterLedger::new(&thresholds, subjects.len()),
        bank: current.bank,
    })
}

/// Norm of the bound-projected finite-difference gradient of the objective
/// in the population-level parameters.
fn population_gradient_norm(e: &Evaluated, fixed: &ItemBank, subjects: &[SubjectPanel], priors: &PriorSpec) -> f64 {
    let h = 1e-6;
    let warm = modes(e);
    let mut sq = 0.0;
    let mut probe = |edit: &dyn Fn(&mut Params, f64), x: f64, lo: f64, hi: f64| {
        // One-sided differences stay inside the bounds.
        let step = if x + h <= hi { h } else { -h };
        let mut p = e.params.clone();
        edit(&mut p, step);
        let g = (evaluate(p, fixed, subjects, priors, &warm).value - e.value) / step;
        if !((x <= lo && g < 0.0) || (x >= hi && g > 0.0)) {
            sq += g * g;
        }
    };
    let p = &e.params;
    probe(&|p, s| p.beta1 += s, p.beta1, priors.slope.lower, priors.slope.upper);
    let vb = priors.slope_variance;
    probe(&|p, s| p.var_u1 += s, p.var_u1, vb.lower, vb.upper);
    probe(&|p, s| p.rho += s, p.rho, -RHO_BOUND, RHO_BOUND);
    let ib = priors.threshold_increment;
    for i in 0..p.increments.len() {
        for k in 0..p.increments[i].len() {
            probe(&|p, s| p.increments[i][k] += s, p.increments[i][k], ib.lower, ib.upper);
        }
    }
    sq.sqrt()
}
