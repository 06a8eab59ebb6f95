//! Latent-trait scoring: single-occasion MLE and MAP, and per-subject
//! intercept/slope trajectories under a bivariate normal random-effects
//! prior.

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grm::{conditional_sd, ItemBank};
use crate::optim::{maximize_concave_1d, newton_ascent, Bounds};
use crate::panel::{ResponseSet, Visit};

/// Search interval for single-occasion scoring.
pub const THETA_BOUND: f64 = 8.0;

const GRID_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMethod {
    Mle,
    Map,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateFlag {
    /// Finite interior optimum.
    Ok,
    /// Every response at its item's lowest level; the MLE is at -inf.
    LowerBoundary,
    /// Every response at its item's highest level; the MLE is at +inf.
    UpperBoundary,
    /// The optimum lies outside the search interval.
    Clipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub point_estimate: f64,
    pub sd: f64,
    pub method: ScoringMethod,
    pub flag: EstimateFlag,
}

/// Log-likelihood with first and second derivatives in theta.
pub(crate) fn loglik_derivs(resolved: &[(usize, usize)], bank: &ItemBank, theta: f64) -> (f64, f64, f64) {
    let mut out = (0.0, 0.0, 0.0);
    for &(idx, level) in resolved {
        let (f, g, h) = bank.items()[idx].log_prob_eq_derivs(level, theta);
        out.0 += f;
        out.1 += g;
        out.2 += h;
    }
    out
}

fn resolve_nonempty(responses: &ResponseSet, bank: &ItemBank) -> Result<Vec<(usize, usize)>> {
    if responses.is_empty() {
        return Err(Error::EmptyResponses);
    }
    responses.resolve(bank)
}

/// `Σ ln P(Y_i = y_i | theta)` over the response set.
pub fn log_likelihood_theta(responses: &ResponseSet, bank: &ItemBank, theta: f64) -> Result<f64> {
    Ok(loglik_derivs(&resolve_nonempty(responses, bank)?, bank, theta).0)
}

/// Analytic derivative of [`log_likelihood_theta`] in theta.
pub fn log_likelihood_gradient(responses: &ResponseSet, bank: &ItemBank, theta: f64) -> Result<f64> {
    Ok(loglik_derivs(&resolve_nonempty(responses, bank)?, bank, theta).1)
}

/// Grid maximum of a concave function on `[lo, hi]` followed by safeguarded
/// Newton refinement inside the neighbouring grid cells.
fn grid_then_refine(eval: impl Fn(f64) -> (f64, f64, f64), lo: f64, hi: f64) -> f64 {
    let steps = ((hi - lo) / GRID_STEP).round() as usize;
    let grid = |i: usize| lo + (hi - lo) * i as f64 / steps as f64;
    let best =
        (0..=steps).map(|i| (i, eval(grid(i)).0)).fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
        );
    let left = grid(best.0.saturating_sub(1));
    let right = grid((best.0 + 1).min(steps));
    maximize_concave_1d(eval, left, right, grid(best.0)).0
}

/// Maximum-likelihood trait estimate on `[-8, 8]`.
///
/// Response patterns entirely at the lowest or highest levels have no finite
/// MLE; they are returned clipped to the interval and flagged.
pub fn estimate_theta_mle(responses: &ResponseSet, bank: &ItemBank) -> Result<PosteriorSummary> {
    let resolved = resolve_nonempty(responses, bank)?;
    let items: Vec<_> = resolved.iter().map(|&(i, _)| bank.items()[i].clone()).collect();
    let all_low = resolved.iter().all(|&(_, l)| l == 0);
    let all_high = resolved.iter().all(|&(i, l)| l == bank.items()[i].max_level());
    let (theta, flag) = if all_low {
        (-THETA_BOUND, EstimateFlag::LowerBoundary)
    } else if all_high {
        (THETA_BOUND, EstimateFlag::UpperBoundary)
    } else {
        let eval = |t: f64| loglik_derivs(&resolved, bank, t);
        if eval(-THETA_BOUND).1 <= 0.0 {
            (-THETA_BOUND, EstimateFlag::Clipped)
        } else if eval(THETA_BOUND).1 >= 0.0 {
            (THETA_BOUND, EstimateFlag::Clipped)
        } else {
            (grid_then_refine(eval, -THETA_BOUND, THETA_BOUND), EstimateFlag::Ok)
        }
    };
    Ok(PosteriorSummary {
        point_estimate: theta,
        sd: conditional_sd(&items, theta)?,
        method: ScoringMethod::Mle,
        flag,
    })
}

/// Normal prior on the latent trait for MAP scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub sd: f64,
}

impl NormalPrior {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        if !(mean.is_finite() && sd.is_finite() && sd > 0.0) {
            return Err(Error::InvalidPrior(format!(
                "normal prior needs finite mean and sd > 0, got ({mean}, {sd})"
            )));
        }
        Ok(Self { mean, sd })
    }
}

/// Posterior mode under a normal prior; the sd is the inverse square root of
/// observed information plus prior precision. An empty response set returns
/// the prior.
pub fn estimate_theta_map(responses: &ResponseSet, bank: &ItemBank, prior: NormalPrior) -> Result<PosteriorSummary> {
    let resolved = responses.resolve(bank)?;
    let precision = prior.sd.powi(-2);
    let eval = |t: f64| {
        let (f, g, h) = loglik_derivs(&resolved, bank, t);
        let z = t - prior.mean;
        (f - 0.5 * z * z * precision, g - z * precision, h - precision)
    };
    // The penalized objective is strictly concave; widen the bracket until
    // the derivative changes sign.
    let mut lo = (-THETA_BOUND).min(prior.mean - 1.0);
    let mut hi = THETA_BOUND.max(prior.mean + 1.0);
    while eval(lo).1 < 0.0 && lo > -1e9 {
        lo -= 2.0 * (hi - lo);
    }
    while eval(hi).1 > 0.0 && hi < 1e9 {
        hi += 2.0 * (hi - lo);
    }
    let theta = if resolved.is_empty() {
        prior.mean
    } else if hi - lo <= 2.0 * THETA_BOUND + 2.0 {
        grid_then_refine(eval, lo, hi)
    } else {
        maximize_concave_1d(eval, lo, hi, prior.mean).0
    };
    let curvature = -eval(theta).2;
    Ok(PosteriorSummary {
        point_estimate: theta,
        sd: curvature.sqrt().recip(),
        method: ScoringMethod::Map,
        flag: EstimateFlag::Ok,
    })
}

/// Population trajectory and random-effect covariance of the longitudinal
/// model: `theta(t) = beta0 + u0 + (beta1 + u1) t` with
/// `(u0, u1) ~ N(0, [[var_u0, c], [c, var_u1]])`, `c = rho sqrt(var_u0 var_u1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct TrajectoryPrior {
    pub beta0: f64,
    pub beta1: f64,
    pub var_u0: f64,
    pub var_u1: f64,
    pub rho: f64,
}

impl Default for TrajectoryPrior {
    /// Fitted population values: intercept 0 and intercept variance 1 (both
    /// fixed), slope 0.075 per year, slope variance 0.027, correlation 0.085.
    fn default() -> Self {
        Self {
            beta0: 0.0,
            beta1: 0.075,
            var_u0: 1.0,
            var_u1: 0.027,
            rho: 0.085,
        }
    }
}

impl TrajectoryPrior {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.beta0, self.beta1, self.var_u0, self.var_u1, self.rho]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.var_u0 <= 0.0 || self.var_u1 <= 0.0 || self.rho.abs() >= 1.0 {
            return Err(Error::InvalidPrior(format!(
                "random-effect covariance must be positive definite (var_u0 = {}, var_u1 = {}, rho = {})",
                self.var_u0, self.var_u1, self.rho
            )));
        }
        Ok(())
    }

    pub fn covariance(&self) -> Matrix2<f64> {
        let c = self.rho * (self.var_u0 * self.var_u1).sqrt();
        Matrix2::new(self.var_u0, c, c, self.var_u1)
    }

    pub fn precision(&self) -> Matrix2<f64> {
        let det = self.var_u0 * self.var_u1 * (1.0 - self.rho * self.rho);
        let c = self.rho * (self.var_u0 * self.var_u1).sqrt();
        Matrix2::new(self.var_u1, -c, -c, self.var_u0) / det
    }

    /// `ln N(u; 0, Σ)` including the normalizing constant.
    pub fn log_density(&self, u: [f64; 2]) -> f64 {
        let det = self.var_u0 * self.var_u1 * (1.0 - self.rho * self.rho);
        let v = Vector2::new(u[0], u[1]);
        let quad = (v.transpose() * self.precision() * v)[(0, 0)];
        -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * quad
    }

    pub fn mean_severity(&self, t: f64) -> f64 {
        self.beta0 + self.beta1 * t
    }
}

/// Severity predicted at time `t` from one visit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeverityPoint {
    pub time: f64,
    pub theta: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryEstimate {
    pub u0: f64,
    pub u1: f64,
    /// Inverse negative Hessian at the mode, `[[u0u0, u0u1], [u1u0, u1u1]]`.
    pub covariance: [[f64; 2]; 2],
    pub severities: Vec<SeverityPoint>,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

pub fn predict_severity(traj: &TrajectoryEstimate, prior: &TrajectoryPrior, t: f64) -> f64 {
    prior.beta0 + traj.u0 + (prior.beta1 + traj.u1) * t
}

/// Gradient tolerance for trajectory fits.
pub const TRAJECTORY_TOL: f64 = 1e-8;
const TRAJECTORY_MAX_ITER: usize = 100;

/// Penalized log-likelihood of one subject's random effects and its
/// gradient and Hessian.
pub(crate) fn trajectory_derivs(
    visits: &[Visit],
    bank: &ItemBank,
    prior: &TrajectoryPrior,
    u: [f64; 2],
) -> (f64, Vector2<f64>, Matrix2<f64>) {
    let p = prior.precision();
    let uv = Vector2::new(u[0], u[1]);
    let mut f = -0.5 * (uv.transpose() * p * uv)[(0, 0)];
    let mut g = -p * uv;
    let mut h = -p;
    for visit in visits {
        let t = visit.time;
        let theta = prior.beta0 + u[0] + (prior.beta1 + u[1]) * t;
        let (lf, lg, lh) = loglik_derivs(&visit.responses, bank, theta);
        f += lf;
        g += Vector2::new(lg, lg * t);
        h += Matrix2::new(lh, lh * t, lh * t, lh * t * t);
    }
    (f, g, h)
}

/// MAP random effects for one subject from resolved visits, starting at
/// `start`.
pub(crate) fn trajectory_map_resolved(
    visits: &[Visit],
    bank: &ItemBank,
    prior: &TrajectoryPrior,
    start: [f64; 2],
) -> TrajectoryEstimate {
    let objective = |x: &[f64]| trajectory_derivs(visits, bank, prior, [x[0], x[1]]).0;
    let grad_hess = |x: &[f64]| {
        let (_, g, h) = trajectory_derivs(visits, bank, prior, [x[0], x[1]]);
        (vec![g[0], g[1]], DMatrix::from_column_slice(2, 2, h.as_slice()))
    };
    let out = newton_ascent(
        objective,
        grad_hess,
        start.to_vec(),
        &Bounds::unbounded(2),
        TRAJECTORY_TOL,
        TRAJECTORY_MAX_ITER,
    );
    let u = [out.x[0], out.x[1]];
    let (_, _, h) = trajectory_derivs(visits, bank, prior, u);
    let cov = (-h).try_inverse().unwrap_or_else(|| prior.covariance());
    let severities = visits
        .iter()
        .map(|v| {
            let t = v.time;
            let var = cov[(0, 0)] + 2.0 * t * cov[(0, 1)] + t * t * cov[(1, 1)];
            SeverityPoint {
                time: t,
                theta: prior.beta0 + u[0] + (prior.beta1 + u[1]) * t,
                sd: var.max(0.0).sqrt(),
            }
        })
        .collect();
    TrajectoryEstimate {
        u0: u[0],
        u1: u[1],
        covariance: [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]],
        severities,
        objective: out.value,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        converged: out.converged,
        objective_trace: out.trace,
    }
}

/// MAP intercept and slope deviations for one subject observed at several
/// times (years since the first visit).
pub fn estimate_trajectory_map(
    visits: &[(f64, ResponseSet)],
    bank: &ItemBank,
    prior: &TrajectoryPrior,
) -> Result<TrajectoryEstimate> {
    prior.validate()?;
    let mut resolved = Vec::with_capacity(visits.len());
    for (t, rs) in visits {
        if !(t.is_finite() && *t >= 0.0) {
            return Err(Error::InvalidPanel(format!(
                "visit time must be finite and nonnegative, got {t}"
            )));
        }
        resolved.push(Visit {
            time: *t,
            responses: rs.resolve(bank)?,
        });
    }
    Ok(trajectory_map_resolved(&resolved, bank, prior, [0.0, 0.0]))
}
