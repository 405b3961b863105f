//! Monte Carlo coverage of the ideal coefficient vector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{normalized_rank, z_values, GradientPerturbationProblem, RegionConfig, RegionError};
use crate::data::{generate_synthetic, DataError, DataSample, NoiseSpec, TrueFunction};
use crate::estimators::{
    build_problem, ideal_coefficients, strict_gram, EstimatorConfig, EstimatorError, KernelProblem,
};
use crate::kernels::KernelSpec;
use crate::perturbation::{draw_perturbations, TransformGroup};
use crate::seeding::derive_seed;

#[derive(Debug, Error)]
pub enum CoverageError {
    #[error("coverage needs at least one trial")]
    NoTrials,
    #[error("{0}")]
    Unsupported(String),
    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: EstimatorError,
    },
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    SignChange,
    Permutation,
}

impl GroupKind {
    pub fn group(self) -> TransformGroup {
        match self {
            Self::SignChange => TransformGroup::SignChange,
            Self::Permutation => TransformGroup::Permutation,
        }
    }
}

/// Data-generating setup and region construction for a coverage run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageScenario {
    pub true_fn: TrueFunction,
    pub n: usize,
    pub range: (f64, f64),
    pub noise: NoiseSpec,
    pub kernel: KernelSpec,
    pub estimator: EstimatorConfig,
    pub group: GroupKind,
    /// Use `Ψ = I` for quadratic problems instead of the inverse square-root
    /// Hessian.
    #[serde(default)]
    pub identity_weighting: bool,
}

impl CoverageScenario {
    /// x sin x on [0, 10], n = 20, Gaussian kernel σ = 0.5, KRR with
    /// λ = 0.1, Laplace noise with scale 0.5, sign changes.
    pub fn krr_default() -> Self {
        Self {
            true_fn: TrueFunction::XSinX,
            n: 20,
            range: (0.0, 10.0),
            noise: NoiseSpec::Laplace {
                location: 0.0,
                scale: 0.5,
            },
            kernel: KernelSpec::Gaussian { sigma: 0.5 },
            estimator: EstimatorConfig::krr(0.1),
            group: GroupKind::SignChange,
            identity_weighting: false,
        }
    }

    pub fn sample(&self, seed: u64) -> Result<DataSample, DataError> {
        generate_synthetic(&self.true_fn, self.n, self.range, &self.noise, seed)
    }

    pub fn problem(&self, sample: &DataSample) -> Result<KernelProblem, EstimatorError> {
        let p = build_problem(&self.estimator, &self.kernel, sample, &self.group.group())?;
        Ok(match p {
            KernelProblem::Sps(s) if self.identity_weighting => {
                KernelProblem::Sps(s.with_identity_weighting())
            }
            other => other,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub trials: usize,
    pub members: usize,
    pub empirical_coverage: f64,
    pub p_nominal: f64,
    /// Wilson score interval at 95%.
    pub ci: (f64, f64),
    /// `rank_counts[k - 1]` trials had rank `k/m`.
    pub rank_counts: Vec<usize>,
}

fn wilson(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let mid = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((mid - half).max(0.0), (mid + half).min(1.0))
}

/// Rank of `α*` in one trial. The sample, transforms and tie order all come
/// from the trial seed, on separate streams.
fn trial_rank(scenario: &CoverageScenario, m: usize, seed: u64) -> Result<usize, EstimatorError> {
    let sample = scenario.sample(seed)?;
    let truth = sample.true_outputs().ok_or(EstimatorError::MissingTruth)?;
    let gram = strict_gram(&scenario.kernel, &sample, false)?;
    let target = ideal_coefficients(&gram, truth)?;
    let problem = scenario.problem(&sample)?;
    let pset = draw_perturbations(&problem.group(), m, problem.residual_dim(), seed)
        .map_err(RegionError::from)?;
    let zs = z_values(&problem, &target, &pset)?;
    Ok(normalized_rank(&zs, pset.tie_order())?.k)
}

/// Fraction of `trials` fresh samples whose ideal coefficient vector
/// `α* = K⁻¹ y*` lies in the region. Trial `t` uses `derive_seed(seed, t)`,
/// so results do not depend on thread count.
pub fn coverage_experiment(
    scenario: &CoverageScenario,
    trials: usize,
    config: RegionConfig,
    seed: u64,
) -> Result<CoverageReport, CoverageError> {
    config.validate()?;
    if trials == 0 {
        return Err(CoverageError::NoTrials);
    }
    if matches!(scenario.estimator, EstimatorConfig::Lssvc { .. }) {
        return Err(CoverageError::Unsupported(
            "coverage of the ideal representation is defined for regression estimators".into(),
        ));
    }
    let ranks = (0..trials)
        .into_par_iter()
        .map(|t| {
            trial_rank(scenario, config.m, derive_seed(seed, t as u64))
                .map_err(|source| CoverageError::Trial { trial: t, source })
        })
        .collect::<Result<Vec<usize>, CoverageError>>()?;
    let mut rank_counts = vec![0; config.m];
    for k in &ranks {
        rank_counts[k - 1] += 1;
    }
    let members = ranks.iter().filter(|&&k| k + config.q <= config.m).count();
    Ok(CoverageReport {
        trials,
        members,
        empirical_coverage: members as f64 / trials as f64,
        p_nominal: config.confidence(),
        ci: wilson(members, trials, 1.959_963_984_540_054),
        rank_counts,
    })
}

/// Histogram of the rank of `α*` over `trials`; entry `k - 1` counts rank `k/m`.
pub fn rank_histogram(
    scenario: &CoverageScenario,
    trials: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<usize>, CoverageError> {
    Ok(coverage_experiment(scenario, trials, RegionConfig::new(m, 1, seed)?, seed)?.rank_counts)
}
