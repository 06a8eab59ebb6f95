//! Small maximizers shared by scoring and calibration.

use nalgebra::{DMatrix, DVector};

/// Maximize a concave function on `[lo, hi]` given `(f, f', f'')` at a point.
///
/// Newton steps are taken when they stay inside the current bracket and
/// bisection otherwise. The bracket must satisfy `f'(lo) >= 0 >= f'(hi)`.
pub fn maximize_concave_1d(
    eval: impl Fn(f64) -> (f64, f64, f64),
    mut lo: f64,
    mut hi: f64,
    start: f64,
) -> (f64, usize) {
    let mut x = start.clamp(lo, hi);
    for iter in 1..=200 {
        let (_, g, h) = eval(x);
        if g.abs() < 1e-13 {
            return (x, iter);
        }
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 1e-15 * (1.0 + x.abs()) {
            return (x, iter);
        }
        let newton = x - g / h;
        x = if h < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    (x, 200)
}

/// Componentwise box constraints.
#[derive(Debug, Clone)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Gradient with components zeroed where a bound blocks ascent.
    fn projected_gradient(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        g.iter()
            .enumerate()
            .map(|(i, &gi)| {
                if (x[i] <= self.lower[i] && gi < 0.0) || (x[i] >= self.upper[i] && gi > 0.0) {
                    0.0
                } else {
                    gi
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

/// Projected, damped Newton ascent.
///
/// `grad_hess` returns the gradient and Hessian at a point. Steps that do not
/// increase `objective` are halved; a Levenberg shift is added when the
/// Hessian is not negative definite.
pub fn newton_ascent(
    objective: impl Fn(&[f64]) -> f64,
    grad_hess: impl Fn(&[f64]) -> (Vec<f64>, DMatrix<f64>),
    x0: Vec<f64>,
    bounds: &Bounds,
    tol: f64,
    max_iter: usize,
) -> NewtonOutcome {
    let n = x0.len();
    let mut x = x0;
    bounds.project(&mut x);
    let mut value = objective(&x);
    let mut trace = vec![value];
    let mut grad_norm;
    for iter in 0..max_iter {
        let (g, h) = grad_hess(&x);
        let pg = bounds.projected_gradient(&x, &g);
        grad_norm = pg.iter().map(|v| v * v).sum::<f64>().sqrt();
        if grad_norm < tol {
            return NewtonOutcome {
                x,
                value,
                grad_norm,
                iterations: iter,
                converged: true,
                trace,
            };
        }
        let neg_h = -h;
        let gv = DVector::from_vec(g.clone());
        let mut shift = 0.0;
        let dir = loop {
            let mut m = neg_h.clone();
            for i in 0..n {
                m[(i, i)] += shift;
            }
            if let Some(chol) = m.cholesky() {
                break chol.solve(&gv);
            }
            shift = if shift == 0.0 {
                1e-8 * (1.0 + neg_h.diagonal().amax())
            } else {
                shift * 10.0
            };
            if !shift.is_finite() {
                break gv.clone();
            }
        };
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let mut cand: Vec<f64> = x.iter().zip(dir.iter()).map(|(xi, di)| xi + step * di).collect();
            bounds.project(&mut cand);
            let gain: f64 = cand.iter().zip(&x).zip(&g).map(|((c, xi), gi)| (c - xi) * gi).sum();
            let v = objective(&cand);
            if v.is_finite() && v >= value + 1e-4 * gain && v >= value {
                if v == value && cand == x {
                    break;
                }
                x = cand;
                value = v;
                trace.push(v);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No ascent possible at working precision.
            return NewtonOutcome {
                x,
                value,
                grad_norm,
                iterations: iter + 1,
                converged: grad_norm < tol.sqrt(),
                trace,
            };
        }
    }
    let (g, _) = grad_hess(&x);
    grad_norm = bounds
        .projected_gradient(&x, &g)
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    NewtonOutcome {
        x,
        value,
        grad_norm,
        iterations: max_iter,
        converged: grad_norm < tol,
        trace,
    }
}

/// Central-difference Hessian of an analytic gradient, symmetrized.
pub fn fd_hessian(grad: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut out = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let step = h * (1.0 + x[j].abs());
        xp[j] = x[j] + step;
        let gp = grad(&xp);
        xp[j] = x[j] - step;
        let gm = grad(&xp);
        xp[j] = x[j];
        for i in 0..n {
            out[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    (&out + out.transpose()) * 0.5
}
