//! Damped least squares (Levenberg–Marquardt) with a central-difference
//! Jacobian and optional box bounds.
//!
//! Steps solve `(JᵀJ + λ·diag(JᵀJ))·δ = −Jᵀr` through an SVD of the
//! column-scaled Jacobian rather than the normal equations. A trial point is accepted
//! only if it lowers `Σr²`, so the cost sequence of accepted iterates is
//! non-increasing.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative cost decrease below which an accepted step counts as converged.
    pub ftol: f64,
    /// Relative step size below which the iteration stops.
    pub xtol: f64,
    /// Infinity norm of the gradient below which the iteration stops.
    pub gtol: f64,
    /// Absolute cost at or below which the residual counts as zero.
    pub cost_floor: f64,
    pub initial_damping: f64,
    /// Central-difference step, absolute in parameter space.
    pub fd_step: f64,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 400,
            ftol: 1e-14,
            xtol: 1e-12,
            gtol: 1e-14,
            cost_floor: 0.0,
            initial_damping: 1e-3,
            fd_step: 1e-6,
            lower: None,
            upper: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    CostTolerance,
    StepTolerance,
    GradientTolerance,
    ZeroResidual,
    DampingExhausted,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// `Σr²` at `params`.
    pub cost: f64,
    pub initial_cost: f64,
    /// Cost after each accepted step, starting with the initial cost.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: StopReason,
    /// `JᵀJ` at the solution.
    pub normal_matrix: DMatrix<f64>,
    pub jacobian: DMatrix<f64>,
    pub residuals: Vec<f64>,
}

impl LmReport {
    pub fn converged(&self) -> bool {
        !matches!(self.reason, StopReason::MaxIterations)
    }

    /// Parameters pinned to a bound.
    pub fn at_bounds(&self, opts: &LmOptions) -> Vec<usize> {
        (0..self.params.len())
            .filter(|&i| {
                let p = self.params[i];
                opts.lower.as_ref().is_some_and(|l| p <= l[i])
                    || opts.upper.as_ref().is_some_and(|u| p >= u[i])
            })
            .collect()
    }

    /// Standard errors from `s²·(JᵀJ)⁻¹` with `s² = cost/(m − n)`.
    pub fn standard_errors(&self) -> Option<Vec<f64>> {
        let m = self.residuals.len();
        let n = self.params.len();
        if m <= n {
            return None;
        }
        let s2 = self.cost / (m - n) as f64;
        let inv = self.normal_matrix.clone().try_inverse()?;
        Some((0..n).map(|i| (s2 * inv[(i, i)]).max(0.0).sqrt()).collect())
    }
}

fn project(x: &mut [f64], opts: &LmOptions) {
    for (i, v) in x.iter_mut().enumerate() {
        if let Some(l) = &opts.lower {
            *v = v.max(l[i]);
        }
        if let Some(u) = &opts.upper {
            *v = v.min(u[i]);
        }
    }
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

struct Counter<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> Option<Vec<f64>>> Counter<F> {
    fn eval(&mut self, x: &[f64]) -> Option<Vec<f64>> {
        self.evaluations += 1;
        (self.f)(x).filter(|r| r.iter().all(|v| v.is_finite()))
    }
}

/// Numerical Jacobian by central differences.
pub fn jacobian<F>(f: &mut F, x: &[f64], m: usize, step: f64) -> Option<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = step * (1.0 + x[j].abs());
        xp[j] = x[j] + h;
        let fp = f(&xp)?;
        xp[j] = x[j] - h;
        let fm = f(&xp)?;
        xp[j] = x[j];
        if fp.len() != m || fm.len() != m {
            return None;
        }
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Some(jac)
}

/// Minimizes `Σ r(x)²` from `x0`. `f` returns `None` where the model is
/// undefined; such trial points are rejected.
pub fn minimize<F>(f: F, x0: &[f64], opts: &LmOptions) -> Result<LmReport>
where
    F: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    let n = x0.len();
    if n == 0 {
        return Err(Error::Invalid("no free parameters".into()));
    }
    for b in [&opts.lower, &opts.upper].into_iter().flatten() {
        if b.len() != n {
            return Err(Error::Invalid("bound length does not match parameters".into()));
        }
    }
    let mut fc = Counter { f, evaluations: 0 };
    let mut x = x0.to_vec();
    project(&mut x, opts);
    let mut r = fc
        .eval(&x)
        .ok_or_else(|| Error::Invalid("model undefined at the initial guess".into()))?;
    let m = r.len();
    let mut cost = cost_of(&r);
    let initial_cost = cost;
    let mut history = vec![cost];
    let mut damping = opts.initial_damping;
    let mut iterations = 0;

    let mut eval = |x: &[f64]| fc.eval(x);
    let mut jac = jacobian(&mut eval, &x, m, opts.fd_step)
        .ok_or_else(|| Error::Invalid("model undefined near the initial guess".into()))?;

    let reason = loop {
        if cost <= 1e-30 * initial_cost.max(f64::MIN_POSITIVE) || cost <= opts.cost_floor {
            break StopReason::ZeroResidual;
        }
        if iterations >= opts.max_iterations {
            break StopReason::MaxIterations;
        }
        iterations += 1;

        let rv = DVector::from_column_slice(&r);
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * &rv;
        if g.amax() <= opts.gtol * (1.0 + cost) {
            break StopReason::GradientTolerance;
        }
        let diag_floor = 1e-12 * a.diagonal().amax().max(f64::MIN_POSITIVE);
        let scale: Vec<f64> = (0..n).map(|i| a[(i, i)].max(diag_floor).sqrt()).collect();
        let mut scaled = jac.clone();
        for (j, d) in scale.iter().enumerate() {
            scaled.column_mut(j).scale_mut(1.0 / d);
        }
        let svd = scaled.svd(true, true);
        let (Some(u), Some(v_t)) = (svd.u.as_ref(), svd.v_t.as_ref()) else {
            return Err(Error::Singular("Jacobian SVD failed".into()));
        };
        let utr = u.transpose() * &rv;

        let mut accepted = false;
        let mut small_step = false;
        while damping < 1e16 {
            let coef = DVector::from_iterator(
                svd.singular_values.len(),
                svd.singular_values.iter().zip(utr.iter()).map(|(s, c)| -s * c / (s * s + damping)),
            );
            let delta: Vec<f64> = (v_t.transpose() * coef).iter().zip(&scale).map(|(d, s)| d / s).collect();
            let mut trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            project(&mut trial, opts);
            let step_norm: f64 = trial.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let x_norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if step_norm <= opts.xtol * (x_norm + opts.xtol) {
                small_step = true;
                break;
            }
            match eval(&trial) {
                Some(rt) if cost_of(&rt) < cost => {
                    let new_cost = cost_of(&rt);
                    let rel_drop = (cost - new_cost) / cost;
                    x = trial;
                    r = rt;
                    cost = new_cost;
                    history.push(cost);
                    damping = (damping / 3.0).max(1e-15);
                    accepted = true;
                    if rel_drop < opts.ftol {
                        small_step = true;
                    }
                    break;
                }
                _ => damping = (damping * 4.0).max(1e-12),
            }
        }
        if accepted {
            match jacobian(&mut eval, &x, m, opts.fd_step) {
                Some(j) => jac = j,
                None => return Err(Error::Convergence("model undefined near the iterate".into())),
            }
        }
        if small_step {
            break if accepted {
                StopReason::CostTolerance
            } else {
                StopReason::StepTolerance
            };
        }
        if !accepted {
            break StopReason::DampingExhausted;
        }
    };

    let normal_matrix = jac.transpose() * &jac;
    Ok(LmReport {
        params: x,
        cost,
        initial_cost,
        history,
        iterations,
        evaluations: fc.evaluations,
        reason,
        normal_matrix,
        jacobian: jac,
        residuals: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |p: &[f64]| Some(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]]);
        let rep = minimize(f, &[-1.2, 1.0], &LmOptions::default()).unwrap();
        assert!(rep.converged());
        assert!((rep.params[0] - 1.0).abs() < 1e-8, "{:?}", rep.params);
        assert!((rep.params[1] - 1.0).abs() < 1e-8);
        for w in rep.history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn exponential_fit_with_noise_free_data() {
        let ts: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let f = |p: &[f64]| Some(ts.iter().zip(&ys).map(|(t, y)| p[0] * (-p[1] * t).exp() - y).collect());
        let rep = minimize(f, &[1.0, 0.1], &LmOptions::default()).unwrap();
        assert!((rep.params[0] - 3.0).abs() < 1e-9);
        assert!((rep.params[1] - 0.7).abs() < 1e-9);
    }

    #[test]
    fn bounds_are_respected() {
        let f = |p: &[f64]| Some(vec![p[0] - 5.0]);
        let opts = LmOptions {
            upper: Some(vec![2.0]),
            ..Default::default()
        };
        let rep = minimize(f, &[0.0], &opts).unwrap();
        assert_eq!(rep.params[0], 2.0);
        assert_eq!(rep.at_bounds(&opts), vec![0]);
    }
}
