//! Exact, distribution-free confidence regions for the coefficients of
//! kernel estimates.
//!
//! A region collects the coefficient vectors `α` whose gradient, evaluated
//! with the observed residuals, is not unusually large compared with
//! gradients evaluated on randomly transformed residuals (sign flips or
//! permutations). For symmetric or exchangeable noise the region contains
//! the ideal representation of the true function with probability exactly
//! `1 - q/m`, for any sample size.
//!
//! ```
//! use kernel_regions::prelude::*;
//!
//! let sample = generate_synthetic(
//!     &TrueFunction::XSinX, 20, (0.0, 10.0),
//!     &NoiseSpec::laplace(0.0, 0.5).unwrap(), 1,
//! ).unwrap();
//! let kernel = KernelSpec::gaussian(0.5).unwrap();
//! let problem = build_problem(
//!     &EstimatorConfig::krr(0.1), &kernel, &sample, &TransformGroup::SignChange,
//! ).unwrap();
//! let region = Region::new(&problem, RegionConfig::new(20, 2, 7).unwrap()).unwrap();
//! let center = problem.as_sps().unwrap().estimate();
//! assert!(region.contains(center).unwrap());
//! ```

// `!(a < b)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod estimators;
pub mod explorer;
pub mod kernels;
pub mod perturbation;
pub mod rank;
pub mod seeding;
pub mod sps;

pub use nalgebra::{DMatrix, DVector};

pub mod prelude {
    pub use crate::data::{
        generate_synthetic, load_csv, save_csv, DataSample, NoiseSpec, TrueFunction,
    };
    pub use crate::estimators::{
        build_problem, build_problem_with, ideal_coefficients, point_estimate, BuildOptions,
        EstimatorConfig, KernelProblem, SolverSettings,
    };
    pub use crate::explorer::{
        bands_by_rays, boundary_samples, default_grid, evaluate_model, mc_region, model_band,
        ray_scan, RankedSample, RayBandSettings, Sampler,
    };
    pub use crate::kernels::{gram_matrix, KernelSpec};
    pub use crate::perturbation::{draw_perturbations, TransformGroup};
    pub use crate::rank::{
        coverage_experiment, is_member, normalized_rank, CoverageScenario,
        GradientPerturbationProblem, GroupKind, Region, RegionConfig,
    };
    pub use crate::sps::{outer_ellipsoid, Ellipsoid, SpsProblem};
    pub use nalgebra::{DMatrix, DVector};
}
