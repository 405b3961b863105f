//! Kernelized LASSO: `½‖y - Kα‖² + λ‖α‖₁`.

use nalgebra::{DMatrix, DVector};

use super::{sign, EstimatorError, SolverSettings};
use crate::perturbation::{Transform, TransformGroup};
use crate::rank::{GradientPerturbationProblem, Weighting};

pub fn klasso_objective(
    k: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: &DVector<f64>,
    lambda: f64,
) -> f64 {
    0.5 * (y - k * alpha).norm_squared() + lambda * alpha.lp_norm(1)
}

/// `K(Kα - y) + λ sign(α)` with `sign(0) = 0`.
pub fn klasso_subgradient(
    k: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: &DVector<f64>,
    lambda: f64,
) -> DVector<f64> {
    k * (k * alpha - y) + alpha.map(sign) * lambda
}

/// `‖K t(Kα - y) + λ sign(α)‖²`: the transform acts inside the product with `K`.
pub fn klasso_z(
    k: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: &DVector<f64>,
    lambda: f64,
    t: &Transform,
) -> Result<f64, EstimatorError> {
    let problem = KlassoProblem::new(k.clone(), y.clone(), lambda, TransformGroup::SignChange)?;
    Ok(problem.z(alpha, t)?)
}

/// Region evaluator for kernelized LASSO.
///
/// Residuals are `y - Kα`; both groups act linearly, so transforming
/// `Kα - y` equals negating the transformed residuals.
#[derive(Debug, Clone)]
pub struct KlassoProblem {
    k: DMatrix<f64>,
    y: DVector<f64>,
    lambda: f64,
    group: TransformGroup,
    weighting: Weighting,
}

impl KlassoProblem {
    pub fn new(
        k: DMatrix<f64>,
        y: DVector<f64>,
        lambda: f64,
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
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(EstimatorError::NonPositive("lambda", lambda));
        }
        Ok(Self {
            k,
            y,
            lambda,
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

impl GradientPerturbationProblem for KlassoProblem {
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
        let mut g = -(&self.k * residuals);
        for (gi, a) in g.iter_mut().zip(alpha.iter()) {
            *gi += self.lambda * sign(*a);
        }
        self.weighting.weighted_sq_norm(&g)
    }
}

#[derive(Debug, Clone)]
pub struct KlassoSolution {
    pub alpha: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Accelerated proximal gradient (FISTA) with step `1/L`, `L = λ_max(KᵀK)`,
/// started at zero, restarting the momentum whenever a step would increase
/// the objective, so accepted iterates are monotone. Stops when the iterate
/// moves by at most `tol` in the max norm, or when a plain proximal step from
/// the current iterate no longer decreases the objective.
pub fn klasso_estimate(
    k: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    settings: SolverSettings,
) -> Result<KlassoSolution, EstimatorError> {
    let n = y.len();
    if !k.is_square() || k.nrows() != n {
        return Err(EstimatorError::Dimension(format!(
            "Gram {}x{} with {n} outputs",
            k.nrows(),
            k.ncols()
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(EstimatorError::NonPositive("lambda", lambda));
    }
    let ktk = k.transpose() * k;
    let lip = nalgebra::SymmetricEigen::new(ktk.clone())
        .eigenvalues
        .max()
        .max(f64::MIN_POSITIVE);
    let step = 1.0 / lip;
    let kty = k.transpose() * y;
    let prox = |v: &DVector<f64>| -> DVector<f64> {
        let grad = &ktk * v - &kty;
        DVector::from_iterator(
            n,
            v.iter()
                .zip(grad.iter())
                .map(|(a, g)| soft_threshold(a - step * g, step * lambda)),
        )
    };

    let mut alpha = DVector::zeros(n);
    let mut obj = klasso_objective(k, y, &alpha, lambda);
    let mut extrapolated = alpha.clone();
    let mut t = 1.0_f64;
    let mut restarted = true;
    let mut last_change = f64::INFINITY;
    for it in 1..=settings.max_iter {
        let candidate = prox(&extrapolated);
        let cand_obj = klasso_objective(k, y, &candidate, lambda);
        if cand_obj > obj {
            if restarted {
                // A plain proximal step no longer decreases the objective.
                return Ok(KlassoSolution {
                    alpha,
                    objective: obj,
                    iterations: it,
                });
            }
            extrapolated = alpha.clone();
            t = 1.0;
            restarted = true;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        extrapolated = &candidate + (&candidate - &alpha) * ((t - 1.0) / t_next);
        t = t_next;
        restarted = false;
        let change = (&candidate - &alpha).amax();
        last_change = obj - cand_obj;
        alpha = candidate;
        obj = cand_obj;
        if change <= settings.tol {
            return Ok(KlassoSolution {
                alpha,
                objective: obj,
                iterations: it,
            });
        }
    }
    Err(EstimatorError::NotConverged {
        iterations: settings.max_iter,
        detail: format!("objective {obj:e}, last decrease {last_change:e}"),
    })
}
