//! ε-support vector regression in coefficient form.
//!
//! The dual objective written for `α = α⁺ - α⁻` is
//! `y^T α - ½ α^T K α - ε̄ ‖α‖₁`, with subgradient `y - Kα - ε̄ sign(α)`.
//! The region evaluator transforms only the residual part:
//! `Z(α; G) = ‖G (y - Kα) - ε̄ sign(α)‖²`.

use nalgebra::{DMatrix, DVector};

use super::{sign, EstimatorError, SolverSettings};
use crate::perturbation::{Transform, TransformGroup};
use crate::rank::{GradientPerturbationProblem, Weighting};

pub fn svr_dual_objective(
    k: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: &DVector<f64>,
    eps: f64,
) -> f64 {
    y.dot(alpha) - 0.5 * alpha.dot(&(k * alpha)) - eps * alpha.lp_norm(1)
}

/// Dual objective in the split variables `(α⁺, α⁻)`.
pub fn svr_split_dual_objective(
    k: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha_plus: &DVector<f64>,
    alpha_minus: &DVector<f64>,
    eps: f64,
) -> f64 {
    let a = alpha_plus - alpha_minus;
    y.dot(&a) - 0.5 * a.dot(&(k * &a)) - eps * (alpha_plus.sum() + alpha_minus.sum())
}

/// `y - Kα - ε̄ sign(α)` with `sign(0) = 0`.
pub fn svr_subgradient(
    k: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: &DVector<f64>,
    eps: f64,
) -> DVector<f64> {
    y - k * alpha - alpha.map(sign) * eps
}

/// `‖t(y - Kα) - ε̄ sign(α)‖²`
pub fn svr_z(
    k: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: &DVector<f64>,
    eps: f64,
    t: &Transform,
) -> Result<f64, EstimatorError> {
    let problem = SvrProblem::new(k.clone(), y.clone(), eps, TransformGroup::SignChange)?;
    Ok(problem.z(alpha, t)?)
}

/// Region evaluator for ε-SVR.
#[derive(Debug, Clone)]
pub struct SvrProblem {
    k: DMatrix<f64>,
    y: DVector<f64>,
    eps: f64,
    group: TransformGroup,
    weighting: Weighting,
}

impl SvrProblem {
    pub fn new(
        k: DMatrix<f64>,
        y: DVector<f64>,
        eps: f64,
        group: TransformGroup,
    ) -> Result<Self, EstimatorError> {
        if !k.is_square() || k.nrows() != y.len() {
            return Err(EstimatorError::Dimension(format!(
                "Gram matrix {}x{} with {} outputs",
                k.nrows(),
                k.ncols(),
                y.len()
            )));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(EstimatorError::Negative("eps", eps));
        }
        Ok(Self {
            k,
            y,
            eps,
            group,
            weighting: Weighting::Identity,
        })
    }

    pub fn with_weighting(mut self, weighting: Weighting) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn outputs(&self) -> &DVector<f64> {
        &self.y
    }
}

impl GradientPerturbationProblem for SvrProblem {
    fn dim(&self) -> usize {
        self.y.len()
    }

    fn residual_dim(&self) -> usize {
        self.y.len()
    }

    fn group(&self) -> TransformGroup {
        self.group.clone()
    }

    fn residuals(&self, alpha: &DVector<f64>) -> DVector<f64> {
        &self.y - &self.k * alpha
    }

    fn z_from_residuals(&self, alpha: &DVector<f64>, residuals: &DVector<f64>) -> f64 {
        let g = DVector::from_iterator(
            residuals.len(),
            residuals
                .iter()
                .zip(alpha.iter())
                .map(|(r, a)| r - self.eps * sign(*a)),
        );
        self.weighting.weighted_sq_norm(&g)
    }
}

#[derive(Debug, Clone)]
pub struct SvrSolution {
    pub alpha: DVector<f64>,
    pub alpha_plus: DVector<f64>,
    pub alpha_minus: DVector<f64>,
    pub dual_objective: f64,
    pub iterations: usize,
    /// `‖u - P(u + ∇D(u))‖_∞` at the returned iterate.
    pub kkt_residual: f64,
}

/// Euclidean projection onto `{u ∈ [0, ub]^{2n} : Σ u⁺ - Σ u⁻ = 0}`.
fn project(v: &[f64], n: usize, ub: f64, out: &mut [f64]) {
    let clip = |x: f64| x.clamp(0.0, ub);
    // Σ clip(v⁺ - θ) - Σ clip(v⁻ + θ) is non-increasing in θ.
    let balance = |theta: f64| -> f64 {
        v[..n].iter().map(|&x| clip(x - theta)).sum::<f64>()
            - v[n..].iter().map(|&x| clip(x + theta)).sum::<f64>()
    };
    let span = v.iter().fold(0.0_f64, |a, &x| a.max(x.abs())) + ub;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if balance(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * span.max(1.0) {
            break;
        }
    }
    let theta = 0.5 * (lo + hi);
    for (j, o) in out.iter_mut().enumerate() {
        *o = if j < n {
            clip(v[j] - theta)
        } else {
            clip(v[j] + theta)
        };
    }
}

/// Projected-gradient ascent on the ε-SVR dual over
/// `α⁺, α⁻ ∈ [0, c/n]^n`, `Σ(α⁺ - α⁻) = 0`, with step `1 / (2 λ_max(K))`.
/// Stops when the iterate moves by at most `tol` in the max norm.
pub fn svr_estimate(
    k: &DMatrix<f64>,
    y: &DVector<f64>,
    eps: f64,
    c: f64,
    settings: SolverSettings,
) -> Result<SvrSolution, EstimatorError> {
    let n = y.len();
    if !k.is_square() || k.nrows() != n {
        return Err(EstimatorError::Dimension(format!(
            "Gram {}x{} with {n} outputs",
            k.nrows(),
            k.ncols()
        )));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(EstimatorError::Negative("eps", eps));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(EstimatorError::NonPositive("c", c));
    }
    let ub = c / n as f64;
    let lmax = nalgebra::SymmetricEigen::new(k.clone())
        .eigenvalues
        .max()
        .max(f64::MIN_POSITIVE);
    let step = 1.0 / (2.0 * lmax);

    let grad = |u: &[f64]| -> Vec<f64> {
        let a = DVector::from_iterator(n, (0..n).map(|j| u[j] - u[n + j]));
        let ka = k * &a;
        let mut g = vec![0.0; 2 * n];
        for j in 0..n {
            g[j] = y[j] - ka[j] - eps;
            g[n + j] = -y[j] + ka[j] - eps;
        }
        g
    };
    let objective = |u: &[f64]| -> f64 {
        let a = DVector::from_iterator(n, (0..n).map(|j| u[j] - u[n + j]));
        y.dot(&a) - 0.5 * a.dot(&(k * &a)) - eps * u.iter().sum::<f64>()
    };

    let mut u = vec![0.0; 2 * n];
    let mut next = vec![0.0; 2 * n];
    let mut trial = vec![0.0; 2 * n];
    let mut obj = objective(&u);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.max_iter {
        iterations += 1;
        let g = grad(&u);
        for j in 0..2 * n {
            trial[j] = u[j] + step * g[j];
        }
        project(&trial, n, ub, &mut next);
        let change = u
            .iter()
            .zip(&next)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let new_obj = objective(&next);
        // Step 1/L guarantees ascent up to round-off.
        debug_assert!(new_obj >= obj - 1e-9 * (1.0 + obj.abs()));
        std::mem::swap(&mut u, &mut next);
        obj = new_obj;
        if change <= settings.tol {
            converged = true;
            break;
        }
    }
    let g = grad(&u);
    for j in 0..2 * n {
        trial[j] = u[j] + g[j];
    }
    project(&trial, n, ub, &mut next);
    let kkt = u
        .iter()
        .zip(&next)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if !converged {
        return Err(EstimatorError::NotConverged {
            iterations,
            detail: format!("dual objective {obj:e}, KKT residual {kkt:e}"),
        });
    }
    let alpha_plus = DVector::from_row_slice(&u[..n]);
    let alpha_minus = DVector::from_row_slice(&u[n..]);
    Ok(SvrSolution {
        alpha: &alpha_plus - &alpha_minus,
        alpha_plus,
        alpha_minus,
        dual_objective: obj,
        iterations,
        kkt_residual: kkt,
    })
}
