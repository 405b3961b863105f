//! Estimator-specific reductions to the perturbed-gradient framework.
//!
//! KRR and LS-SVC are rewritten as canonical least-squares problems and
//! handled by [`crate::sps`]. ε-SVR and kernelized LASSO use their
//! subgradients directly.

mod canonical;
mod klasso;
mod svr;

pub use canonical::{
    krr_canonical, krr_objective, ls_estimate, lssvc_canonical, lssvc_classify, lssvc_objective,
    CanonicalLS,
};
pub use klasso::{
    klasso_estimate, klasso_objective, klasso_subgradient, klasso_z, KlassoProblem, KlassoSolution,
};
pub use svr::{
    svr_dual_objective, svr_estimate, svr_split_dual_objective, svr_subgradient, svr_z, SvrProblem,
    SvrSolution,
};

use std::collections::HashMap;
use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, DataSample};
use crate::kernels::{gram_matrix, GramMatrix, KernelError, KernelSpec, DEFAULT_PD_TOL};
use crate::perturbation::TransformGroup;
use crate::rank::{GradientPerturbationProblem, RegionError};
use crate::sps::SpsProblem;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("{0} must be positive, got {1}")]
    NonPositive(&'static str, f64),
    #[error("{0} must be non-negative, got {1}")]
    Negative(&'static str, f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("regressor is rank deficient: {0}")]
    RankDeficient(String),
    #[error("labels must be -1 or +1, got {0}")]
    Labels(f64),
    #[error("solver did not converge after {iterations} iterations ({detail})")]
    NotConverged { iterations: usize, detail: String },
    #[error("kernel {0} is not positive semidefinite in general; pass an explicit override")]
    NonPsdKernel(KernelSpec),
    #[error("cannot parse estimator `{0}`")]
    Parse(String),
    #[error("synthetic noiseless outputs are required")]
    MissingTruth,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Region(#[from] RegionError),
}

/// Iteration controls for the point-estimate solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            tol: 1e-10,
        }
    }
}

/// Subgradient selection: `sign(0) = 0`.
pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Which estimator a region is built for, with its hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum EstimatorConfig {
    Krr {
        lambda: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    Lssvc {
        lambda: f64,
    },
    Svr {
        c: f64,
        eps: f64,
    },
    Klasso {
        lambda: f64,
    },
}

impl EstimatorConfig {
    pub fn krr(lambda: f64) -> Self {
        Self::Krr {
            lambda,
            weights: None,
        }
    }

    /// Parses `krr:lambda=0.1`, `lssvc:lambda=0.1`, `svr:c=250,eps=0.2`,
    /// `klasso:lambda=1`.
    pub fn parse(text: &str) -> Result<Self, EstimatorError> {
        let err = || EstimatorError::Parse(text.to_string());
        let (name, params) = text.split_once(':').unwrap_or((text, ""));
        let mut kv = HashMap::new();
        for part in params.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(err)?;
            kv.insert(
                k.trim().to_ascii_lowercase(),
                v.trim().parse::<f64>().map_err(|_| err())?,
            );
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(err);
        let cfg = match name.trim().to_ascii_lowercase().as_str() {
            "krr" => Self::krr(get("lambda")?),
            "lssvc" | "ls-svc" => Self::Lssvc {
                lambda: get("lambda")?,
            },
            "svr" => Self::Svr {
                c: get("c")?,
                eps: get("eps")?,
            },
            "klasso" => Self::Klasso {
                lambda: get("lambda")?,
            },
            _ => return Err(err()),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        match *self {
            Self::Krr { lambda, .. } | Self::Lssvc { lambda } | Self::Klasso { lambda } => {
                if !(lambda.is_finite() && lambda > 0.0) {
                    return Err(EstimatorError::NonPositive("lambda", lambda));
                }
            }
            Self::Svr { c, eps } => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(EstimatorError::NonPositive("c", c));
                }
                if !(eps.is_finite() && eps >= 0.0) {
                    return Err(EstimatorError::Negative("eps", eps));
                }
            }
        }
        Ok(())
    }

    /// True for estimators with a canonical least-squares form.
    pub fn is_quadratic(&self) -> bool {
        matches!(self, Self::Krr { .. } | Self::Lssvc { .. })
    }
}

impl fmt::Display for EstimatorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Krr { lambda, .. } => write!(f, "krr:lambda={lambda}"),
            Self::Lssvc { lambda } => write!(f, "lssvc:lambda={lambda}"),
            Self::Svr { c, eps } => write!(f, "svr:c={c},eps={eps}"),
            Self::Klasso { lambda } => write!(f, "klasso:lambda={lambda}"),
        }
    }
}

/// A region problem built from data, kernel and estimator.
#[derive(Debug, Clone)]
pub enum KernelProblem {
    Sps(SpsProblem),
    Svr(SvrProblem),
    Klasso(KlassoProblem),
}

impl KernelProblem {
    pub fn as_sps(&self) -> Option<&SpsProblem> {
        match self {
            Self::Sps(p) => Some(p),
            _ => None,
        }
    }
}

impl GradientPerturbationProblem for KernelProblem {
    fn dim(&self) -> usize {
        match self {
            Self::Sps(p) => p.dim(),
            Self::Svr(p) => p.dim(),
            Self::Klasso(p) => p.dim(),
        }
    }

    fn residual_dim(&self) -> usize {
        match self {
            Self::Sps(p) => p.residual_dim(),
            Self::Svr(p) => p.residual_dim(),
            Self::Klasso(p) => p.residual_dim(),
        }
    }

    fn group(&self) -> TransformGroup {
        match self {
            Self::Sps(p) => p.group(),
            Self::Svr(p) => p.group(),
            Self::Klasso(p) => p.group(),
        }
    }

    fn residuals(&self, alpha: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Sps(p) => p.residuals(alpha),
            Self::Svr(p) => p.residuals(alpha),
            Self::Klasso(p) => p.residuals(alpha),
        }
    }

    fn z_from_residuals(&self, alpha: &DVector<f64>, residuals: &DVector<f64>) -> f64 {
        match self {
            Self::Sps(p) => p.z_from_residuals(alpha, residuals),
            Self::Svr(p) => p.z_from_residuals(alpha, residuals),
            Self::Klasso(p) => p.z_from_residuals(alpha, residuals),
        }
    }
}

/// Gram matrix of the sample, required to be strictly positive definite.
/// Kernels that are not PSD in general need `allow_non_psd`.
pub fn strict_gram(
    kernel: &KernelSpec,
    sample: &DataSample,
    allow_non_psd: bool,
) -> Result<GramMatrix, EstimatorError> {
    if !kernel.is_psd_family() && !allow_non_psd {
        return Err(EstimatorError::NonPsdKernel(*kernel));
    }
    let g = gram_matrix(kernel, sample.inputs())?;
    g.require_strict_pd(DEFAULT_PD_TOL)?;
    Ok(g)
}

/// Builds the region problem. `group` is the base group acting on the
/// observation residuals; auxiliary rows of canonical forms are added as a
/// fixed tail automatically. For LS-SVC the outputs are the class labels and
/// the kernel is unused.
pub fn build_problem(
    estimator: &EstimatorConfig,
    kernel: &KernelSpec,
    sample: &DataSample,
    group: &TransformGroup,
) -> Result<KernelProblem, EstimatorError> {
    build_problem_with(estimator, kernel, sample, group, BuildOptions::default())
}

/// Overrides for [`build_problem_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildOptions {
    /// Accept kernel families that are not positive semidefinite.
    pub allow_non_psd: bool,
    /// Let ε-SVR and KLASSO run on a Gram matrix that fails the strict
    /// positive definiteness check. Their regions need no inverse; the ideal
    /// coefficient vector is then not unique. Quadratic problems ignore this.
    pub allow_singular_gram: bool,
}

pub fn build_problem_with(
    estimator: &EstimatorConfig,
    kernel: &KernelSpec,
    sample: &DataSample,
    group: &TransformGroup,
    options: BuildOptions,
) -> Result<KernelProblem, EstimatorError> {
    estimator.validate()?;
    let allow_non_psd = options.allow_non_psd;
    let gram = |k: &KernelSpec, s: &DataSample| -> Result<GramMatrix, EstimatorError> {
        if options.allow_singular_gram {
            if !k.is_psd_family() && !allow_non_psd {
                return Err(EstimatorError::NonPsdKernel(*k));
            }
            Ok(gram_matrix(k, s.inputs())?)
        } else {
            strict_gram(k, s, allow_non_psd)
        }
    };
    let y = DVector::from_row_slice(sample.outputs());
    Ok(match estimator {
        EstimatorConfig::Lssvc { lambda } => {
            let c = lssvc_canonical(sample.inputs(), sample.outputs(), *lambda)?;
            KernelProblem::Sps(SpsProblem::new(c, group.clone())?)
        }
        EstimatorConfig::Krr { lambda, weights } => {
            let g = strict_gram(kernel, sample, allow_non_psd)?;
            let c = krr_canonical(&g, sample.outputs(), weights.as_deref(), *lambda)?;
            KernelProblem::Sps(SpsProblem::new(c, group.clone())?)
        }
        EstimatorConfig::Svr { eps, .. } => {
            let g = gram(kernel, sample)?;
            KernelProblem::Svr(SvrProblem::new(g.into_entries(), y, *eps, group.clone())?)
        }
        EstimatorConfig::Klasso { lambda } => {
            let g = gram(kernel, sample)?;
            KernelProblem::Klasso(KlassoProblem::new(
                g.into_entries(),
                y,
                *lambda,
                group.clone(),
            )?)
        }
    })
}

/// The point estimate of the configured estimator.
pub fn point_estimate(
    estimator: &EstimatorConfig,
    problem: &KernelProblem,
    settings: SolverSettings,
) -> Result<DVector<f64>, EstimatorError> {
    match (estimator, problem) {
        (_, KernelProblem::Sps(p)) => ls_estimate(p.canonical()),
        (EstimatorConfig::Svr { c, eps }, KernelProblem::Svr(p)) => {
            Ok(svr_estimate(p.gram(), p.outputs(), *eps, *c, settings)?.alpha)
        }
        (EstimatorConfig::Klasso { lambda }, KernelProblem::Klasso(p)) => {
            Ok(klasso_estimate(p.gram(), p.outputs(), *lambda, settings)?.alpha)
        }
        _ => Err(EstimatorError::Dimension(
            "estimator and problem kinds differ".into(),
        )),
    }
}

/// The ideal coefficient vector `α* = K⁻¹ y*` for synthetic data, via a
/// Cholesky solve.
pub fn ideal_coefficients(
    gram: &GramMatrix,
    true_outputs: &[f64],
) -> Result<DVector<f64>, EstimatorError> {
    gram.require_strict_pd(DEFAULT_PD_TOL)?;
    let chol = gram
        .entries()
        .clone()
        .cholesky()
        .ok_or(KernelError::NotStrictlyPd {
            min_eigenvalue: gram.min_eigenvalue(),
            condition_estimate: gram.condition_estimate(),
        })?;
    Ok(chol.solve(&DVector::from_row_slice(true_outputs)))
}
