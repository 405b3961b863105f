//! Sign-perturbed sums for canonical least-squares problems, and the
//! ellipsoidal outer approximation of their regions.
//!
//! With `H = Φ^T Φ` the functions are
//! `Z_i(α) = ‖H^{-1/2} Φ^T G_i (z - Φα)‖²`. Only the first `n_real` residual
//! rows are perturbed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

use crate::estimators::{ls_estimate, CanonicalLS, EstimatorError};
use crate::kernels::{pd_inv_sqrt, KernelError, DEFAULT_PD_TOL};
use crate::perturbation::{PerturbationSet, Transform, TransformGroup};
use crate::rank::{
    is_member, GradientPerturbationProblem, MembershipResult, RegionConfig, RegionError,
};

#[derive(Debug, Error)]
pub enum SpsError {
    #[error("the outer approximation needs the inverse square-root Hessian weighting")]
    IdentityWeighting,
    #[error("q = {q} is not admissible for m = {m}")]
    InvalidLevel { m: usize, q: usize },
    #[error(
        "multiplier search for perturbation {index} did not converge, bracket [{lo:e}, {hi:e}]"
    )]
    Bisection { index: usize, lo: f64, hi: f64 },
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Region evaluator for a canonical least-squares problem.
#[derive(Debug, Clone)]
pub struct SpsProblem {
    canonical: CanonicalLS,
    base: TransformGroup,
    hessian: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
    estimate: DVector<f64>,
    hessian_weighting: bool,
}

impl SpsProblem {
    /// `base` acts on the `n_real` observation rows; the auxiliary tail is
    /// kept fixed.
    pub fn new(canonical: CanonicalLS, base: TransformGroup) -> Result<Self, EstimatorError> {
        let hessian = canonical.hessian();
        let inv_sqrt = pd_inv_sqrt(&hessian, DEFAULT_PD_TOL)?;
        let estimate = ls_estimate(&canonical)?;
        Ok(Self {
            canonical,
            base,
            hessian,
            inv_sqrt,
            estimate,
            hessian_weighting: true,
        })
    }

    /// Use `Ψ = I`. The confidence level is unchanged; the shape is not.
    pub fn with_identity_weighting(mut self) -> Self {
        self.hessian_weighting = false;
        self
    }

    pub fn uses_hessian_weighting(&self) -> bool {
        self.hessian_weighting
    }

    pub fn canonical(&self) -> &CanonicalLS {
        &self.canonical
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn inv_sqrt_hessian(&self) -> &DMatrix<f64> {
        &self.inv_sqrt
    }

    /// The least-squares estimate, which is the star center of every region.
    pub fn estimate(&self) -> &DVector<f64> {
        &self.estimate
    }

    /// `Z_0(α) = (α - α̂)^T H (α - α̂)` in closed form.
    pub fn reference_closed_form(&self, alpha: &DVector<f64>) -> f64 {
        let d = alpha - &self.estimate;
        d.dot(&(&self.hessian * &d))
    }
}

impl GradientPerturbationProblem for SpsProblem {
    fn dim(&self) -> usize {
        self.canonical.dim()
    }

    fn residual_dim(&self) -> usize {
        self.canonical.rows()
    }

    fn group(&self) -> TransformGroup {
        if self.canonical.n_aug() == 0 {
            self.base.clone()
        } else {
            TransformGroup::block(self.base.clone(), self.canonical.n_aug())
        }
    }

    fn residuals(&self, alpha: &DVector<f64>) -> DVector<f64> {
        self.canonical.residuals(alpha)
    }

    fn z_from_residuals(&self, _alpha: &DVector<f64>, residuals: &DVector<f64>) -> f64 {
        let g = self.canonical.regressor().tr_mul(residuals);
        if self.hessian_weighting {
            (&self.inv_sqrt * g).norm_squared()
        } else {
            g.norm_squared()
        }
    }
}

/// `Z(α; t)` for a canonical problem with sign-change perturbations.
pub fn sps_z(c: &CanonicalLS, alpha: &DVector<f64>, t: &Transform) -> Result<f64, SpsError> {
    let p = SpsProblem::new(c.clone(), TransformGroup::SignChange)?;
    Ok(p.z(alpha, t)?)
}

pub fn sps_membership(
    c: &CanonicalLS,
    alpha: &DVector<f64>,
    config: RegionConfig,
) -> Result<MembershipResult, SpsError> {
    let p = SpsProblem::new(c.clone(), TransformGroup::SignChange)?;
    Ok(is_member(&p, alpha, config)?)
}

/// `{α : (α - α̂)^T S (α - α̂) ≤ r}` with `S = (1/n) Φ^T Φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    pub radius: f64,
    /// Set when the radius is infinite because a selected subproblem was
    /// unbounded.
    pub degenerate: bool,
    /// Per-perturbation bounds `γ_i` on `Z_0`, in perturbation order
    /// (`i = 1..m-1`).
    pub gammas: Vec<f64>,
    /// The `n` in `S = (1/n) Φ^T Φ`.
    pub n: usize,
}

impl Ellipsoid {
    pub fn quad_form(&self, alpha: &DVector<f64>) -> f64 {
        let d = alpha - &self.center;
        d.dot(&(&self.shape * &d))
    }

    /// Boundary counts as inside.
    pub fn contains(&self, alpha: &DVector<f64>) -> bool {
        self.quad_form(alpha) <= self.radius
    }

    /// Radius for another `q` from the same perturbation set.
    pub fn radius_for(&self, q: usize) -> Result<f64, SpsError> {
        let m = self.gammas.len() + 1;
        if q == 0 || q >= m {
            return Err(SpsError::InvalidLevel { m, q });
        }
        Ok(qth_largest(&self.gammas, q) / self.n as f64)
    }

    pub fn with_q(&self, q: usize) -> Result<Self, SpsError> {
        let radius = self.radius_for(q)?;
        Ok(Self {
            radius,
            degenerate: radius.is_infinite(),
            ..self.clone()
        })
    }
}

fn qth_largest(values: &[f64], q: usize) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v[q - 1]
}

const BISECTION_TOL: f64 = 1e-9;
const BISECTION_MAX_ITER: usize = 200;

/// Outer approximation of the region with parameter `q` under `pset`.
///
/// A member has `Z_0 ≤ Z_i` for at least `q` indices `i ≥ 1`, so
/// `Z_0 ≤ γ_i` for `q` of the bounds
/// `γ_i = max {Z_0(α) : Z_0(α) ≤ Z_i(α)}` and hence `Z_0` is at most the
/// `q`-th largest `γ_i`. In whitened coordinates `u = H^{1/2}(α - α̂)` the
/// constraint reads `‖u‖² ≤ ‖A u - b‖²`, and `γ_i` is the value of the
/// one-multiplier dual, which is exact for a single quadratic constraint
/// and an upper bound for any feasible multiplier.
pub fn outer_ellipsoid(
    problem: &SpsProblem,
    pset: &PerturbationSet,
    q: usize,
) -> Result<Ellipsoid, SpsError> {
    if !problem.uses_hessian_weighting() {
        return Err(SpsError::IdentityWeighting);
    }
    let m = pset.m();
    if q == 0 || q >= m {
        return Err(SpsError::InvalidLevel { m, q });
    }
    if pset.dim() != problem.residual_dim() {
        return Err(RegionError::ResidualDimension {
            expected: problem.residual_dim(),
            found: pset.dim(),
        }
        .into());
    }
    let c = problem.canonical();
    let phi = c.regressor();
    let phi_w = phi * problem.inv_sqrt_hessian();
    let e = c.residuals(problem.estimate());

    let gammas = pset.transforms()[1..]
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let ge = DVector::from_vec(t.apply(e.as_slice()).map_err(RegionError::from)?);
            let mut g_phi_w = DMatrix::zeros(phi_w.nrows(), phi_w.ncols());
            for j in 0..phi_w.ncols() {
                let col = t
                    .apply(phi_w.column(j).as_slice())
                    .map_err(RegionError::from)?;
                g_phi_w.set_column(j, &DVector::from_vec(col));
            }
            let a = phi_w.tr_mul(&g_phi_w);
            let a = (&a + a.transpose()) * 0.5;
            let b = phi_w.tr_mul(&ge);
            constrained_max(&a, &b, i + 1)
        })
        .collect::<Result<Vec<f64>, SpsError>>()?;

    let n = c.n_real();
    let radius = qth_largest(&gammas, q) / n as f64;
    Ok(Ellipsoid {
        center: problem.estimate().clone(),
        shape: problem.hessian() / n as f64,
        radius,
        degenerate: radius.is_infinite(),
        gammas,
        n,
    })
}

/// `max ‖u‖²` subject to `‖u‖² ≤ ‖A u - b‖²` for symmetric `A`, through
/// `min_{μ} μ‖b‖² + μ² Σ a_j² b_j² / (μ(1 - a_j²) - 1)` over
/// `μ(I - A²) - I ⪰ 0`.
fn constrained_max(a: &DMatrix<f64>, b: &DVector<f64>, index: usize) -> Result<f64, SpsError> {
    let eig = SymmetricEigen::new(a.clone());
    let bt = eig.eigenvectors.tr_mul(b);
    let a2: Vec<f64> = eig.eigenvalues.iter().map(|v| v * v).collect();
    let bb = b.norm_squared();
    let w: Vec<f64> = a2.iter().zip(bt.iter()).map(|(s, v)| s * v * v).collect();

    let slack = a2.iter().map(|s| 1.0 - s).fold(f64::INFINITY, f64::min);
    // A unit eigenvalue leaves Z_0 - Z_i linear along its eigenvector, so
    // the constraint set is unbounded.
    if slack <= DEFAULT_PD_TOL {
        return Ok(f64::INFINITY);
    }
    if bb == 0.0 {
        return Ok(0.0);
    }
    let mu0 = 1.0 / slack;

    let dual = |mu: f64| -> f64 {
        let mut v = mu * bb;
        for (s, wj) in a2.iter().zip(&w) {
            if *wj != 0.0 {
                v += mu * mu * wj / (mu * (1.0 - s) - 1.0);
            }
        }
        v
    };
    let slope = |mu: f64| -> f64 {
        let mut v = bb;
        for (s, wj) in a2.iter().zip(&w) {
            if *wj != 0.0 {
                let d = mu * (1.0 - s) - 1.0;
                v += wj * (mu * mu * (1.0 - s) - 2.0 * mu) / (d * d);
            }
        }
        v
    };

    // Feasible multipliers are μ > μ0; the dual is convex on that ray.
    let mut lo = mu0;
    let mut hi = mu0 * 2.0;
    let mut grow = 0;
    while slope(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > BISECTION_MAX_ITER {
            return Err(SpsError::Bisection { index, lo, hi });
        }
    }
    let lo_slope = slope(lo * (1.0 + 1e-15) + f64::MIN_POSITIVE);
    if lo == mu0 && lo_slope.is_finite() && lo_slope >= 0.0 {
        let v = dual(mu0);
        if v.is_finite() {
            return Ok(v);
        }
    }
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= BISECTION_TOL * hi {
            // The upper end is feasible, so its dual value bounds the maximum.
            return Ok(dual(hi));
        }
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(SpsError::Bisection { index, lo, hi })
}

/// Half-widths `sqrt(r (S^{-1})_jj)` of the box circumscribing an ellipsoid.
pub fn bounding_box_half_widths(e: &Ellipsoid) -> Result<DVector<f64>, SpsError> {
    let inv = e
        .shape
        .clone()
        .try_inverse()
        .ok_or(EstimatorError::RankDeficient(
            "ellipsoid shape is singular".into(),
        ))?;
    Ok(DVector::from_fn(e.shape.nrows(), |j, _| {
        (e.radius * inv[(j, j)]).max(0.0).sqrt()
    }))
}

/// Maps `u` on the unit sphere to the ellipsoid boundary.
pub fn ellipsoid_boundary_map(e: &Ellipsoid) -> Result<DMatrix<f64>, SpsError> {
    Ok(pd_inv_sqrt(&e.shape, DEFAULT_PD_TOL)? * e.radius.sqrt())
}
