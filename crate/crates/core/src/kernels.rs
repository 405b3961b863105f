//! Kernel functions, Gram matrices and symmetric matrix square roots.
//!
//! Every spectral quantity in the crate (minimum eigenvalue, conditioning,
//! square roots and inverse square roots) goes through one symmetric
//! eigendecomposition. Eigenvalues in `[-tol, 0)` are clamped to zero and
//! anything below `-tol` is rejected as non-PSD, where `tol = rel_tol * λ_max`.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default relative tolerance for strict positive definiteness.
pub const DEFAULT_PD_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("empty input set")]
    EmptyInputs,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error(
        "matrix is not positive semidefinite: eigenvalue {min_eigenvalue:e} below -{threshold:e}"
    )]
    NotPsd { min_eigenvalue: f64, threshold: f64 },
    #[error("matrix is not strictly positive definite: min eigenvalue {min_eigenvalue:e}, condition {condition_estimate:e}")]
    NotStrictlyPd {
        min_eigenvalue: f64,
        condition_estimate: f64,
    },
    #[error("cannot parse kernel `{0}`")]
    Parse(String),
}

/// A kernel family together with its hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `exp(-|z-s|^2 / (2 sigma^2))`
    Gaussian { sigma: f64 },
    /// `exp(-|z-s| / sigma)`
    Laplacian { sigma: f64 },
    /// `(<z,s> + c)^degree`
    Polynomial { c: f64, degree: u32 },
    /// `tanh(a <z,s> + b)`, not positive semidefinite in general.
    Sigmoidal { a: f64, b: f64 },
    /// `max(1 - c |z-s|^2, 0)`
    TruncatedParabolic { c: f64 },
    /// `1` if `|z-s| <= c`, else `0`.
    Rectangular { c: f64 },
}

fn positive(name: &str, v: f64) -> Result<(), KernelError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(KernelError::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn nonneg(name: &str, v: f64) -> Result<(), KernelError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(KernelError::InvalidParameter(format!(
            "{name} must be non-negative, got {v}"
        )))
    }
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self, KernelError> {
        Self::Gaussian { sigma }.validated()
    }

    pub fn laplacian(sigma: f64) -> Result<Self, KernelError> {
        Self::Laplacian { sigma }.validated()
    }

    pub fn polynomial(c: f64, degree: u32) -> Result<Self, KernelError> {
        Self::Polynomial { c, degree }.validated()
    }

    /// The plain inner product, `polynomial(0, 1)`.
    pub fn linear() -> Self {
        Self::Polynomial { c: 0.0, degree: 1 }
    }

    pub fn sigmoidal(a: f64, b: f64) -> Result<Self, KernelError> {
        Self::Sigmoidal { a, b }.validated()
    }

    pub fn truncated_parabolic(c: f64) -> Result<Self, KernelError> {
        Self::TruncatedParabolic { c }.validated()
    }

    pub fn rectangular(c: f64) -> Result<Self, KernelError> {
        Self::Rectangular { c }.validated()
    }

    /// Checks the sign constraints of the hyper-parameters.
    pub fn validated(self) -> Result<Self, KernelError> {
        match self {
            Self::Gaussian { sigma } | Self::Laplacian { sigma } => positive("sigma", sigma)?,
            Self::Polynomial { c, degree } => {
                nonneg("c", c)?;
                if degree == 0 {
                    return Err(KernelError::InvalidParameter(
                        "degree must be positive".into(),
                    ));
                }
            }
            Self::Sigmoidal { a, b } => {
                nonneg("a", a)?;
                nonneg("b", b)?;
            }
            Self::TruncatedParabolic { c } | Self::Rectangular { c } => positive("c", c)?,
        }
        Ok(self)
    }

    /// False for families that are not positive semidefinite in general.
    pub fn is_psd_family(&self) -> bool {
        !matches!(self, Self::Sigmoidal { .. })
    }

    pub fn eval(&self, z: &[f64], s: &[f64]) -> Result<f64, KernelError> {
        if z.len() != s.len() {
            return Err(KernelError::DimensionMismatch {
                left: z.len(),
                right: s.len(),
            });
        }
        Ok(self.eval_unchecked(z, s))
    }

    /// Evaluates without the dimension check. Symmetric in its arguments
    /// bit-for-bit: distances and inner products are accumulated in the
    /// same coordinate order either way.
    pub(crate) fn eval_unchecked(&self, z: &[f64], s: &[f64]) -> f64 {
        match *self {
            Self::Gaussian { sigma } => (-sq_dist(z, s) / (2.0 * sigma * sigma)).exp(),
            Self::Laplacian { sigma } => (-sq_dist(z, s).sqrt() / sigma).exp(),
            Self::Polynomial { c, degree } => (dot(z, s) + c).powi(degree as i32),
            Self::Sigmoidal { a, b } => (a * dot(z, s) + b).tanh(),
            Self::TruncatedParabolic { c } => (1.0 - c * sq_dist(z, s)).max(0.0),
            Self::Rectangular { c } => {
                if sq_dist(z, s).sqrt() <= c {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Parses `gaussian:sigma=0.5`, `polynomial:c=1,p=2`, `rectangular:c=0.026` etc.
    pub fn parse(text: &str) -> Result<Self, KernelError> {
        let err = || KernelError::Parse(text.to_string());
        let (name, params) = match text.split_once(':') {
            Some((n, p)) => (n.trim(), p),
            None => (text.trim(), ""),
        };
        let mut kv = std::collections::HashMap::new();
        for part in params.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(err)?;
            let v: f64 = v.trim().parse().map_err(|_| err())?;
            kv.insert(k.trim().to_ascii_lowercase(), v);
        }
        let get = |keys: &[&str]| {
            keys.iter()
                .find_map(|k| kv.get(*k).copied())
                .ok_or_else(err)
        };
        match name.to_ascii_lowercase().as_str() {
            "gaussian" | "rbf" => Self::gaussian(get(&["sigma"])?),
            "laplacian" => Self::laplacian(get(&["sigma"])?),
            "polynomial" | "poly" => {
                let p = get(&["p", "degree"])?;
                if p.fract() != 0.0 || p < 1.0 {
                    return Err(err());
                }
                Self::polynomial(get(&["c"]).unwrap_or(0.0), p as u32)
            }
            "linear" => Ok(Self::linear()),
            "sigmoidal" | "sigmoid" => Self::sigmoidal(get(&["a"])?, get(&["b"]).unwrap_or(0.0)),
            "truncated_parabolic" | "parabolic" => Self::truncated_parabolic(get(&["c"])?),
            "rectangular" => Self::rectangular(get(&["c"])?),
            _ => Err(err()),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian { sigma } => write!(f, "gaussian:sigma={sigma}"),
            Self::Laplacian { sigma } => write!(f, "laplacian:sigma={sigma}"),
            Self::Polynomial { c, degree } => write!(f, "polynomial:c={c},p={degree}"),
            Self::Sigmoidal { a, b } => write!(f, "sigmoidal:a={a},b={b}"),
            Self::TruncatedParabolic { c } => write!(f, "truncated_parabolic:c={c}"),
            Self::Rectangular { c } => write!(f, "rectangular:c={c}"),
        }
    }
}

fn sq_dist(z: &[f64], s: &[f64]) -> f64 {
    z.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn dot(z: &[f64], s: &[f64]) -> f64 {
    z.iter().zip(s).map(|(a, b)| a * b).sum()
}

/// Spectral summary of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdDiagnostics {
    pub strictly_pd: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `λ_max / λ_min`, infinite when `λ_min <= 0`.
    pub condition_estimate: f64,
}

/// The Gram matrix `[K]_{ij} = k(x_i, x_j)` of a set of inputs.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
    condition_estimate: f64,
}

impl GramMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eigenvalue
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    /// Wraps an explicit symmetric matrix (used for hand-built fixtures).
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self, KernelError> {
        if !entries.is_square() {
            return Err(KernelError::NotSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        if entries.nrows() == 0 {
            return Err(KernelError::EmptyInputs);
        }
        let (lo, hi) = extreme_eigenvalues(&entries);
        Ok(Self {
            entries,
            min_eigenvalue: lo,
            max_eigenvalue: hi,
            condition_estimate: condition(lo, hi),
        })
    }

    /// Diagnostics with the default tolerance.
    pub fn diagnostics(&self) -> PdDiagnostics {
        check_strict_pd(self, DEFAULT_PD_TOL)
    }

    /// Returns `self` if strictly positive definite at `rel_tol`, else an error.
    pub fn require_strict_pd(&self, rel_tol: f64) -> Result<&Self, KernelError> {
        let d = check_strict_pd(self, rel_tol);
        if d.strictly_pd {
            Ok(self)
        } else {
            Err(KernelError::NotStrictlyPd {
                min_eigenvalue: d.min_eigenvalue,
                condition_estimate: d.condition_estimate,
            })
        }
    }
}

fn condition(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

fn extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let lo = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn eval_kernel(spec: &KernelSpec, z: &[f64], s: &[f64]) -> Result<f64, KernelError> {
    spec.eval(z, s)
}

/// Builds the Gram matrix, filling the upper triangle and mirroring it.
pub fn gram_matrix<P: AsRef<[f64]>>(
    spec: &KernelSpec,
    inputs: &[P],
) -> Result<GramMatrix, KernelError> {
    let n = inputs.len();
    if n == 0 {
        return Err(KernelError::EmptyInputs);
    }
    let d = inputs[0].as_ref().len();
    for p in inputs {
        if p.as_ref().len() != d {
            return Err(KernelError::DimensionMismatch {
                left: d,
                right: p.as_ref().len(),
            });
        }
    }
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = spec.eval_unchecked(inputs[i].as_ref(), inputs[j].as_ref());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    GramMatrix::from_matrix(k)
}

/// Cross-kernel matrix `[K]_{ij} = k(a_i, b_j)`.
pub fn cross_kernel<P: AsRef<[f64]>, Q: AsRef<[f64]>>(
    spec: &KernelSpec,
    a: &[P],
    b: &[Q],
) -> Result<DMatrix<f64>, KernelError> {
    let mut out = DMatrix::zeros(a.len(), b.len());
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            out[(i, j)] = spec.eval(p.as_ref(), q.as_ref())?;
        }
    }
    Ok(out)
}

pub fn check_strict_pd(g: &GramMatrix, rel_tol: f64) -> PdDiagnostics {
    PdDiagnostics {
        strictly_pd: g.min_eigenvalue > rel_tol * g.max_eigenvalue && g.max_eigenvalue > 0.0,
        min_eigenvalue: g.min_eigenvalue,
        max_eigenvalue: g.max_eigenvalue,
        condition_estimate: g.condition_estimate,
    }
}

/// Eigendecomposition with the crate-wide clamping policy applied.
struct ClampedEigen {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

fn clamped_eigen(m: &DMatrix<f64>, rel_tol: f64) -> Result<ClampedEigen, KernelError> {
    if !m.is_square() {
        return Err(KernelError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    // Symmetrize to absorb round-off in products like A^T A.
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let hi = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let threshold = rel_tol * hi;
    let mut values = Vec::with_capacity(eig.eigenvalues.len());
    for &v in eig.eigenvalues.iter() {
        if v < -threshold {
            return Err(KernelError::NotPsd {
                min_eigenvalue: v,
                threshold,
            });
        }
        values.push(v.max(0.0));
    }
    Ok(ClampedEigen {
        values,
        vectors: eig.eigenvectors,
    })
}

fn spectral_map(e: &ClampedEigen, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = e.values.len();
    let mut scaled = e.vectors.clone();
    for j in 0..n {
        let s = f(e.values[j]);
        scaled.column_mut(j).scale_mut(s);
    }
    let out = &scaled * e.vectors.transpose();
    (&out + out.transpose()) * 0.5
}

/// Symmetric PSD square root `S` with `S S = M`.
pub fn psd_sqrt(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>, KernelError> {
    psd_sqrt_with_tol(matrix, DEFAULT_PD_TOL)
}

pub fn psd_sqrt_with_tol(matrix: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>, KernelError> {
    let e = clamped_eigen(matrix, rel_tol)?;
    Ok(spectral_map(&e, f64::sqrt))
}

/// Symmetric inverse square root `M^{-1/2}`; requires strict positive definiteness.
pub fn pd_inv_sqrt(matrix: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>, KernelError> {
    let e = clamped_eigen(matrix, rel_tol)?;
    let hi = e.values.iter().copied().fold(0.0_f64, f64::max);
    let lo = e.values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(lo > rel_tol * hi) {
        return Err(KernelError::NotStrictlyPd {
            min_eigenvalue: lo,
            condition_estimate: condition(lo, hi),
        });
    }
    Ok(spectral_map(&e, |v| 1.0 / v.sqrt()))
}
