//! Damped Gauss–Newton (Levenberg–Marquardt) least squares.
//!
//! Minimizes `½‖r(p)‖²`. The damped normal equations are solved in the
//! column-scaled basis `D = √diag(JᵀJ)`, which makes the step invariant under
//! rescaling of individual parameters.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// A residual vector `r(p)` with an optional analytic Jacobian.
pub trait LeastSquaresProblem {
    fn num_params(&self) -> usize;
    fn num_residuals(&self) -> usize;
    /// Writes `r(p)` into `out` (length `num_residuals`).
    fn residuals(&self, p: &[f64], out: &mut [f64]);
    /// Writes `∂r_i/∂p_j` into `jac` (`num_residuals × num_params`).
    /// Returns `false` if no analytic Jacobian is available.
    fn jacobian(&self, _p: &[f64], _jac: &mut DMatrix<f64>) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JacobianMode {
    Analytic,
    ForwardDifference { relative_step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    /// Maximum number of accepted steps.
    pub max_iterations: usize,
    /// Stop when every Jacobian column is nearly orthogonal to the residual:
    /// `max_j |Jⱼ·r| / (‖Jⱼ‖‖r‖) ≤ gradient_tolerance`.
    pub gradient_tolerance: f64,
    /// Stop when `‖Dδ‖ ≤ step_tolerance·(‖Dp‖ + step_tolerance)`.
    pub step_tolerance: f64,
    pub initial_damping: f64,
    pub damping_increase: f64,
    pub damping_decrease: f64,
    pub jacobian: JacobianMode,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-10,
            step_tolerance: 1e-12,
            initial_damping: 1e-3,
            damping_increase: 10.0,
            damping_decrease: 10.0,
            jacobian: JacobianMode::Analytic,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<(), LmError> {
        let bad = |what: &str| Err(LmError::InvalidSettings(what.to_string()));
        if self.max_iterations == 0 {
            return bad("max_iterations must be > 0");
        }
        if !(self.gradient_tolerance > 0.0 && self.gradient_tolerance.is_finite()) {
            return bad("gradient_tolerance must be > 0");
        }
        if !(self.step_tolerance > 0.0 && self.step_tolerance.is_finite()) {
            return bad("step_tolerance must be > 0");
        }
        if !(self.initial_damping > 0.0 && self.initial_damping.is_finite()) {
            return bad("initial_damping must be > 0");
        }
        if !(self.damping_increase > 1.0 && self.damping_increase.is_finite()) {
            return bad("damping_increase must be > 1");
        }
        if !(self.damping_decrease > 1.0 && self.damping_decrease.is_finite()) {
            return bad("damping_decrease must be > 1");
        }
        if let JacobianMode::ForwardDifference { relative_step } = self.jacobian {
            if !(relative_step > 0.0 && relative_step < 1.0) {
                return bad("relative_step must be in (0, 1)");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LmError {
    #[error("invalid optimizer settings: {0}")]
    InvalidSettings(String),
    #[error("expected {expected} parameters, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("problem has no residuals or no parameters")]
    Empty,
    #[error("residuals are not finite at the initial parameters")]
    NonFiniteInitial,
    #[error("analytic Jacobian requested but the problem does not provide one")]
    MissingJacobian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    StepTolerance,
    /// Zero residual reached.
    ExactFit,
    /// No descent direction found even under heavy damping; the iterate is
    /// stationary to working precision.
    Stalled,
    MaxIterations,
    /// Residuals or Jacobian became non-finite; the last good iterate is kept.
    NonFinite,
}

impl Termination {
    pub fn is_converged(self) -> bool {
        !matches!(self, Termination::MaxIterations | Termination::NonFinite)
    }
}

#[derive(Debug, Clone)]
pub struct LeastSquaresResult {
    pub params: Vec<f64>,
    /// `½‖r‖²` at `params`.
    pub cost: f64,
    /// `2·cost/(m − n)`, `NaN` when `m ≤ n`.
    pub residual_variance: f64,
    /// `(JᵀJ)⁻¹` at the solution, `None` if rank deficient.
    pub jtj_inverse: Option<DMatrix<f64>>,
    pub rank_deficient: bool,
    pub converged: bool,
    pub termination: Termination,
    /// Accepted steps.
    pub iterations: usize,
    /// Residual evaluations, Jacobian differences included.
    pub evaluations: usize,
    /// Cost after the initial evaluation and after each accepted step.
    pub cost_history: Vec<f64>,
}

impl LeastSquaresResult {
    /// `(JᵀJ)⁻¹·s²` with `s²` the residual variance.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        self.covariance_with_variance(self.residual_variance)
    }

    /// `(JᵀJ)⁻¹·σ²` for a known residual variance.
    pub fn covariance_with_variance(&self, variance: f64) -> Option<DMatrix<f64>> {
        if !variance.is_finite() {
            return None;
        }
        self.jtj_inverse.as_ref().map(|m| m * variance)
    }

    /// 1σ errors from [`covariance`](Self::covariance).
    pub fn standard_errors(&self) -> Option<Vec<f64>> {
        self.covariance()
            .map(|c| (0..c.nrows()).map(|i| c[(i, i)].max(0.0).sqrt()).collect())
    }
}

/// Forward-difference Jacobian with steps `relative_step·|p_j|` (or
/// `relative_step` for a zero parameter).
pub fn forward_difference_jacobian<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    p: &[f64],
    r0: &[f64],
    relative_step: f64,
    jac: &mut DMatrix<f64>,
) {
    let mut q = p.to_vec();
    let mut r1 = vec![0.0; r0.len()];
    for j in 0..p.len() {
        let h = if p[j] != 0.0 {
            relative_step * p[j].abs()
        } else {
            relative_step
        };
        q[j] = p[j] + h;
        let h = q[j] - p[j];
        problem.residuals(&q, &mut r1);
        for i in 0..r0.len() {
            jac[(i, j)] = (r1[i] - r0[i]) / h;
        }
        q[j] = p[j];
    }
}

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

fn all_finite(r: &[f64]) -> bool {
    r.iter().all(|x| x.is_finite())
}

struct Evaluator<'a, P: ?Sized> {
    problem: &'a P,
    mode: JacobianMode,
    evaluations: usize,
}

impl<P: LeastSquaresProblem + ?Sized> Evaluator<'_, P> {
    fn residuals(&mut self, p: &[f64], out: &mut [f64]) {
        self.evaluations += 1;
        self.problem.residuals(p, out);
    }

    fn jacobian(&mut self, p: &[f64], r: &[f64], jac: &mut DMatrix<f64>) -> Result<(), LmError> {
        match self.mode {
            JacobianMode::Analytic => {
                if !self.problem.jacobian(p, jac) {
                    return Err(LmError::MissingJacobian);
                }
            }
            JacobianMode::ForwardDifference { relative_step } => {
                forward_difference_jacobian(self.problem, p, r, relative_step, jac);
                self.evaluations += p.len();
            }
        }
        Ok(())
    }
}

/// Column scale `√diag(A)`, with columns that do not affect the residuals
/// given unit scale.
fn column_scale(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        a.nrows(),
        (0..a.nrows()).map(|i| {
            let d = a[(i, i)].sqrt();
            if d > 0.0 && d.is_finite() {
                d
            } else {
                1.0
            }
        }),
    )
}

/// Inverse of `JᵀJ`, or `None` if its scaled form is numerically singular.
fn normal_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    if (0..n).any(|i| !(a[(i, i)] > 0.0)) {
        return None;
    }
    let d = column_scale(a);
    let scaled = DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (d[i] * d[j]));
    let eig = SymmetricEigen::new(scaled.clone()).eigenvalues;
    let max = eig.iter().cloned().fold(0.0, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 1e-14 * max) {
        return None;
    }
    let inv = scaled.cholesky()?.inverse();
    Some(DMatrix::from_fn(n, n, |i, j| inv[(i, j)] / (d[i] * d[j])))
}

/// Runs damped Gauss–Newton from `initial`.
///
/// Each accepted step strictly lowers the cost. When the gain ratio of an
/// accepted step equals one to within `1e-6` the local model is exact and the
/// next step is taken undamped, so linear problems finish in two steps.
pub fn least_squares<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    initial: &[f64],
    settings: &OptimizerSettings,
) -> Result<LeastSquaresResult, LmError> {
    settings.validate()?;
    let n = problem.num_params();
    let m = problem.num_residuals();
    if n == 0 || m == 0 {
        return Err(LmError::Empty);
    }
    if initial.len() != n {
        return Err(LmError::Dimension {
            expected: n,
            got: initial.len(),
        });
    }

    let mut ev = Evaluator {
        problem,
        mode: settings.jacobian,
        evaluations: 0,
    };
    let mut p = initial.to_vec();
    let mut r = vec![0.0; m];
    ev.residuals(&p, &mut r);
    if !all_finite(&r) {
        return Err(LmError::NonFiniteInitial);
    }
    let mut cost = cost_of(&r);
    let mut history = vec![cost];
    let mut jac = DMatrix::zeros(m, n);
    let mut lambda = settings.initial_damping;
    let mut iterations = 0;
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];

    let termination = 'outer: loop {
        if cost == 0.0 {
            break Termination::ExactFit;
        }
        ev.jacobian(&p, &r, &mut jac)?;
        if jac.iter().any(|x| !x.is_finite()) {
            break Termination::NonFinite;
        }
        let a = jac.tr_mul(&jac);
        let g = jac.tr_mul(&DVector::from_column_slice(&r));
        let d = column_scale(&a);

        let r_norm = (2.0 * cost).sqrt();
        let cosine = (0..n)
            .filter(|&j| a[(j, j)] > 0.0)
            .map(|j| g[j].abs() / (a[(j, j)].sqrt() * r_norm))
            .fold(0.0, f64::max);
        if cosine <= settings.gradient_tolerance {
            break Termination::GradientTolerance;
        }
        if iterations >= settings.max_iterations {
            break Termination::MaxIterations;
        }

        let scaled_a = DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (d[i] * d[j]));
        let scaled_g = g.component_div(&d);
        let p_norm = p
            .iter()
            .zip(d.iter())
            .map(|(x, s)| (x * s).powi(2))
            .sum::<f64>()
            .sqrt();
        let mut first_attempt = true;

        loop {
            let mut mat = scaled_a.clone();
            for i in 0..n {
                mat[(i, i)] += lambda;
            }
            let step_scaled = match mat.cholesky() {
                Some(ch) => -ch.solve(&scaled_g),
                None => {
                    lambda = if lambda == 0.0 {
                        settings.initial_damping
                    } else {
                        lambda * settings.damping_increase
                    };
                    if lambda > 1e20 {
                        break 'outer Termination::Stalled;
                    }
                    continue;
                }
            };
            let step = step_scaled.component_div(&d);
            let step_norm = step_scaled.norm();
            if first_attempt
                && step_norm <= settings.step_tolerance * (p_norm + settings.step_tolerance)
            {
                break 'outer Termination::StepTolerance;
            }
            first_attempt = false;

            for i in 0..n {
                trial[i] = p[i] + step[i];
            }
            ev.residuals(&trial, &mut r_trial);
            if !all_finite(&r_trial) {
                break 'outer Termination::NonFinite;
            }
            let trial_cost = cost_of(&r_trial);
            // predicted reduction of the undamped quadratic model
            let predicted = -(g.dot(&step) + 0.5 * step.dot(&(&a * &step)));
            let actual = cost - trial_cost;

            if actual > 0.0 {
                let rho = if predicted > 0.0 { actual / predicted } else { 0.0 };
                lambda = if (rho - 1.0).abs() < 1e-6 {
                    0.0
                } else if rho > 0.75 {
                    lambda / settings.damping_decrease
                } else if rho < 0.25 {
                    lambda * settings.damping_increase
                } else {
                    lambda
                };
                std::mem::swap(&mut p, &mut trial);
                std::mem::swap(&mut r, &mut r_trial);
                cost = trial_cost;
                history.push(cost);
                iterations += 1;
                if step_norm <= settings.step_tolerance * (p_norm + settings.step_tolerance) {
                    break 'outer Termination::StepTolerance;
                }
                break;
            }
            lambda = if lambda == 0.0 {
                settings.initial_damping
            } else {
                lambda * settings.damping_increase
            };
            if lambda > 1e20 {
                break 'outer Termination::Stalled;
            }
        }
    };

    // Covariance from a Jacobian at the final iterate.
    let mut final_jac = DMatrix::zeros(m, n);
    let jtj_inverse = match ev.jacobian(&p, &r, &mut final_jac) {
        Ok(()) if final_jac.iter().all(|x| x.is_finite()) => {
            normal_inverse(&final_jac.tr_mul(&final_jac))
        }
        _ => None,
    };
    let residual_variance = if m > n {
        2.0 * cost / (m - n) as f64
    } else {
        f64::NAN
    };

    Ok(LeastSquaresResult {
        params: p,
        cost,
        residual_variance,
        rank_deficient: jtj_inverse.is_none(),
        jtj_inverse,
        converged: termination.is_converged(),
        termination,
        iterations,
        evaluations: ev.evaluations,
        cost_history: history,
    })
}
