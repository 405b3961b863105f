//! Canonical least-squares forms `‖z - Φα‖²` with auxiliary rows.

use nalgebra::{DMatrix, DVector};

use super::EstimatorError;
use crate::kernels::{psd_sqrt, GramMatrix, DEFAULT_PD_TOL};

/// A least-squares problem whose first `n_real` residual rows carry noise
/// and whose last `n_aug` rows are deterministic auxiliary terms.
#[derive(Debug, Clone)]
pub struct CanonicalLS {
    regressor: DMatrix<f64>,
    target: DVector<f64>,
    n_real: usize,
    n_aug: usize,
}

impl CanonicalLS {
    /// Validates shapes and full column rank of the regressor.
    pub fn new(
        regressor: DMatrix<f64>,
        target: DVector<f64>,
        n_real: usize,
        n_aug: usize,
    ) -> Result<Self, EstimatorError> {
        if regressor.nrows() != target.len() || regressor.nrows() != n_real + n_aug {
            return Err(EstimatorError::Dimension(format!(
                "regressor has {} rows, target {}, n_real + n_aug = {}",
                regressor.nrows(),
                target.len(),
                n_real + n_aug
            )));
        }
        if regressor.ncols() == 0 || regressor.ncols() > regressor.nrows() {
            return Err(EstimatorError::RankDeficient(format!(
                "regressor is {}x{}",
                regressor.nrows(),
                regressor.ncols()
            )));
        }
        let gram = regressor.transpose() * &regressor;
        let eig = nalgebra::SymmetricEigen::new(gram);
        let hi = eig.eigenvalues.max();
        let lo = eig.eigenvalues.min();
        if !(lo > DEFAULT_PD_TOL * hi) {
            return Err(EstimatorError::RankDeficient(format!(
                "Φ^T Φ has eigenvalue range [{lo:e}, {hi:e}]"
            )));
        }
        Ok(Self {
            regressor,
            target,
            n_real,
            n_aug,
        })
    }

    pub fn regressor(&self) -> &DMatrix<f64> {
        &self.regressor
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }

    pub fn n_real(&self) -> usize {
        self.n_real
    }

    pub fn n_aug(&self) -> usize {
        self.n_aug
    }

    /// Coefficient dimension.
    pub fn dim(&self) -> usize {
        self.regressor.ncols()
    }

    pub fn rows(&self) -> usize {
        self.regressor.nrows()
    }

    /// `z - Φα`
    pub fn residuals(&self, alpha: &DVector<f64>) -> DVector<f64> {
        &self.target - &self.regressor * alpha
    }

    pub fn objective(&self, alpha: &DVector<f64>) -> f64 {
        self.residuals(alpha).norm_squared()
    }

    /// `Φ^T Φ`
    pub fn hessian(&self) -> DMatrix<f64> {
        let h = self.regressor.transpose() * &self.regressor;
        (&h + h.transpose()) * 0.5
    }
}

/// Kernel ridge regression
/// `(1/n) (y - Kα)^T W (y - Kα) + λ α^T K α` as
/// `Φ = [n^{-1/2} W^{1/2} K ; √λ K^{1/2}]`, `z = [n^{-1/2} W^{1/2} y ; 0]`.
/// `weights = None` means `W = I`.
pub fn krr_canonical(
    gram: &GramMatrix,
    y: &[f64],
    weights: Option<&[f64]>,
    lambda: f64,
) -> Result<CanonicalLS, EstimatorError> {
    let n = gram.n();
    if y.len() != n {
        return Err(EstimatorError::Dimension(format!(
            "{} outputs for a {n}x{n} Gram matrix",
            y.len()
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(EstimatorError::NonPositive("lambda", lambda));
    }
    let w_sqrt: Vec<f64> = match weights {
        None => vec![1.0; n],
        Some(w) => {
            if w.len() != n {
                return Err(EstimatorError::Dimension(format!(
                    "{} weights for {n} outputs",
                    w.len()
                )));
            }
            if let Some(&bad) = w.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(EstimatorError::NonPositive("weight", bad));
            }
            w.iter().map(|v| v.sqrt()).collect()
        }
    };
    gram.require_strict_pd(DEFAULT_PD_TOL)?;
    let k = gram.entries();
    let k_sqrt = psd_sqrt(k)?;
    let scale = 1.0 / (n as f64).sqrt();
    let mut phi = DMatrix::zeros(2 * n, n);
    let mut z = DVector::zeros(2 * n);
    let sl = lambda.sqrt();
    for i in 0..n {
        for j in 0..n {
            phi[(i, j)] = scale * w_sqrt[i] * k[(i, j)];
            phi[(n + i, j)] = sl * k_sqrt[(i, j)];
        }
        z[i] = scale * w_sqrt[i] * y[i];
    }
    CanonicalLS::new(phi, z, n, n)
}

/// Linear least-squares support vector classification
/// `½‖Bα‖² + λ‖1 - y ⊙ (Xα)‖²` with `α = [b, w]`, `X` rows `[1, x_k]` and
/// `B = diag(0, 1, ..., 1)`, as
/// `Φ = [√λ (y 1^T) ⊙ X ; 2^{-1/2} B]`, `z = [√λ 1 ; 0]`.
///
/// The auxiliary block keeps all `d + 1` rows of `B`; its bias row is zero.
pub fn lssvc_canonical<P: AsRef<[f64]>>(
    inputs: &[P],
    labels: &[f64],
    lambda: f64,
) -> Result<CanonicalLS, EstimatorError> {
    let n = inputs.len();
    if n == 0 || labels.len() != n {
        return Err(EstimatorError::Dimension(format!(
            "{n} inputs, {} labels",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l != 1.0 && l != -1.0) {
        return Err(EstimatorError::Labels(bad));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(EstimatorError::NonPositive("lambda", lambda));
    }
    let d = inputs[0].as_ref().len();
    if let Some(p) = inputs.iter().find(|p| p.as_ref().len() != d) {
        return Err(EstimatorError::Dimension(format!(
            "input of dimension {} among dimension {d}",
            p.as_ref().len()
        )));
    }
    let cols = d + 1;
    let sl = lambda.sqrt();
    let mut phi = DMatrix::zeros(n + cols, cols);
    let mut z = DVector::zeros(n + cols);
    for (k, (x, &label)) in inputs.iter().zip(labels).enumerate() {
        phi[(k, 0)] = sl * label;
        for (j, v) in x.as_ref().iter().enumerate() {
            phi[(k, j + 1)] = sl * label * v;
        }
        z[k] = sl;
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for j in 1..cols {
        phi[(n + j, j)] = h;
    }
    CanonicalLS::new(phi, z, n, cols)
}

/// The LS-SVC objective written directly.
pub fn lssvc_objective<P: AsRef<[f64]>>(
    inputs: &[P],
    labels: &[f64],
    lambda: f64,
    alpha: &DVector<f64>,
) -> f64 {
    let reg: f64 = alpha.iter().skip(1).map(|w| w * w).sum::<f64>() * 0.5;
    let loss: f64 = inputs
        .iter()
        .zip(labels)
        .map(|(x, &l)| {
            let score = alpha[0]
                + x.as_ref()
                    .iter()
                    .zip(alpha.iter().skip(1))
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            (1.0 - l * score).powi(2)
        })
        .sum();
    reg + lambda * loss
}

/// The KRR objective written directly.
pub fn krr_objective(
    k: &DMatrix<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    lambda: f64,
    alpha: &DVector<f64>,
) -> f64 {
    let n = y.len();
    let fitted = k * alpha;
    let loss: f64 = (0..n)
        .map(|i| weights.map_or(1.0, |w| w[i]) * (y[i] - fitted[i]).powi(2))
        .sum();
    loss / n as f64 + lambda * alpha.dot(&fitted)
}

/// Least-squares estimate via a thin QR factorization.
pub fn ls_estimate(c: &CanonicalLS) -> Result<DVector<f64>, EstimatorError> {
    let qr = c.regressor().clone().qr();
    let r = qr.r();
    let qtz = qr.q().transpose() * c.target();
    let diag_max = r.diagonal().amax();
    if r.diagonal().iter().any(|v| v.abs() <= 1e-14 * diag_max) {
        return Err(EstimatorError::RankDeficient("zero pivot in QR".into()));
    }
    r.solve_upper_triangular(&qtz)
        .ok_or_else(|| EstimatorError::RankDeficient("triangular solve failed".into()))
}

/// Classifier decision `sign(α^T [1, x])`.
pub fn lssvc_classify(alpha: &DVector<f64>, x: &[f64]) -> f64 {
    let s = alpha[0]
        + x.iter()
            .zip(alpha.iter().skip(1))
            .map(|(a, b)| a * b)
            .sum::<f64>();
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram_matrix, KernelSpec};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn krr_one_point() {
        let g = GramMatrix::from_matrix(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let c = krr_canonical(&g, &[2.0], Some(&[1.0]), 1.0).unwrap();
        assert_eq!(c.regressor().as_slice(), &[1.0, 1.0]);
        assert_eq!(c.target().as_slice(), &[2.0, 0.0]);
        let a = ls_estimate(&c).unwrap();
        assert_relative_eq!(a[0], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn mean_estimate() {
        let c = CanonicalLS::new(
            DMatrix::from_element(2, 1, 1.0),
            DVector::from_vec(vec![1.0, 3.0]),
            2,
            0,
        )
        .unwrap();
        assert_relative_eq!(ls_estimate(&c).unwrap()[0], 2.0, max_relative = 1e-14);
    }

    #[test]
    fn krr_small_lambda_interpolates() {
        let xs: Vec<Vec<f64>> = [0.0, 1.0, 2.5, 4.0].iter().map(|&x| vec![x]).collect();
        let g = gram_matrix(&KernelSpec::gaussian(0.8).unwrap(), &xs).unwrap();
        let y = [1.0, -0.5, 2.0, 0.3];
        let c = krr_canonical(&g, &y, None, 1e-10).unwrap();
        let a = ls_estimate(&c).unwrap();
        let interp = g
            .entries()
            .clone()
            .cholesky()
            .unwrap()
            .solve(&DVector::from_row_slice(&y));
        assert!((a - &interp).norm() / interp.norm() < 1e-5);
    }

    #[test]
    fn krr_hessian_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<Vec<f64>> = (0..6)
            .map(|i| vec![i as f64 * 0.7 + rng.random_range(0.0..0.1)])
            .collect();
        let g = gram_matrix(&KernelSpec::gaussian(1.0).unwrap(), &xs).unwrap();
        let w: Vec<f64> = (0..6).map(|_| rng.random_range(0.5..2.0)).collect();
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = krr_canonical(&g, &y, Some(&w), 0.3).unwrap();
        let k = g.entries();
        let wm = DMatrix::from_diagonal(&DVector::from_vec(w));
        let expected = k * &wm * k / 6.0 + k * 0.3;
        assert!((c.hessian() - &expected).norm() / expected.norm() < 1e-12);
        assert_eq!((c.n_real(), c.n_aug()), (6, 6));
    }

    #[test]
    fn krr_rejects_bad_inputs() {
        let g = GramMatrix::from_matrix(DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            krr_canonical(&g, &[1.0, 2.0], None, 0.0),
            Err(EstimatorError::NonPositive(..))
        ));
        assert!(matches!(
            krr_canonical(&g, &[1.0, 2.0], Some(&[1.0, -1.0]), 0.1),
            Err(EstimatorError::NonPositive(..))
        ));
        assert!(krr_canonical(&g, &[1.0], None, 0.1).is_err());
        let lin = gram_matrix(&KernelSpec::linear(), &[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(
            krr_canonical(&lin, &[1.0, 2.0], None, 0.1),
            Err(EstimatorError::Kernel(_))
        ));
    }

    #[test]
    fn lssvc_symmetric_pair_has_zero_bias() {
        let c = lssvc_canonical(&[vec![1.0], vec![-1.0]], &[1.0, -1.0], 1.0).unwrap();
        assert_eq!((c.n_real(), c.n_aug()), (2, 2));
        let a = ls_estimate(&c).unwrap();
        assert!(a[0].abs() < 1e-14);
        assert!(a[1] > 0.0);
        // ½w² + 2(1 - w)² is minimized at w = 4/5
        assert_relative_eq!(a[1], 0.8, max_relative = 1e-12);
    }

    #[test]
    fn lssvc_sign_scale_invariant() {
        let a = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        for x in [[0.5, 0.1], [-1.0, 3.0], [2.0, -2.0]] {
            assert_eq!(lssvc_classify(&a, &x), lssvc_classify(&(&a * 7.5), &x));
        }
    }

    #[test]
    fn lssvc_rejects_degenerate() {
        assert!(matches!(
            lssvc_canonical(&[vec![1.0]], &[0.5], 1.0),
            Err(EstimatorError::Labels(_))
        ));
        // The B rows keep Φ full rank even for identical points.
        assert!(lssvc_canonical(&[vec![1.0], vec![1.0]], &[1.0, 1.0], 1.0).is_ok());
    }

    #[test]
    fn canonical_rank_checked() {
        let phi = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(
            CanonicalLS::new(phi, DVector::zeros(3), 3, 0),
            Err(EstimatorError::RankDeficient(_))
        ));
    }

    #[test]
    fn gradient_vanishes_at_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let phi = DMatrix::from_fn(12, 4, |_, _| rng.random_range(-1.0..1.0));
            let z = DVector::from_fn(12, |_, _| rng.random_range(-3.0..3.0));
            let c = CanonicalLS::new(phi.clone(), z.clone(), 12, 0).unwrap();
            let a = ls_estimate(&c).unwrap();
            let grad = phi.transpose() * (&z - &phi * &a);
            assert!(grad.norm() <= 1e-8 * (phi.transpose() * &z).norm());
        }
    }
}
