//! Finite transformation groups acting on residual vectors.
//!
//! Transforms are stored compactly: sign vectors for the sign-change group,
//! index arrays for the permutation group. A permutation `perm` acts by
//! `out[i] = v[perm[i]]` (output coordinate `i` takes input coordinate
//! `perm[i]`). The block group applies an inner transform to the leading
//! coordinates and leaves a fixed tail untouched, which is how auxiliary
//! (non-random) residual rows of canonical least-squares forms are protected.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::{stream_rng, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbationError {
    #[error("need at least m = 2 transforms, got {0}")]
    TooFewTransforms(usize),
    #[error("dimension mismatch: transform acts on {expected} coordinates, vector has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("fixed tail {tail} exceeds dimension {dim}")]
    TailTooLong { tail: usize, dim: usize },
    #[error("the first transform must be the identity")]
    FirstNotIdentity,
    #[error("tie order must be a permutation of 0..{0}")]
    BadTieOrder(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformGroup {
    /// Diagonal matrices with `±1` entries.
    SignChange,
    /// Permutation matrices.
    Permutation,
    /// `diag(inner, I_tail)`.
    Block {
        inner: Box<TransformGroup>,
        fixed_tail: usize,
    },
}

impl TransformGroup {
    pub fn block(inner: TransformGroup, fixed_tail: usize) -> Self {
        Self::Block {
            inner: Box::new(inner),
            fixed_tail,
        }
    }

    /// The group identity acting on `dim` coordinates.
    pub fn identity(&self, dim: usize) -> Result<Transform, PerturbationError> {
        Ok(match self {
            Self::SignChange => Transform::Signs(vec![1; dim]),
            Self::Permutation => Transform::Permutation((0..dim).collect()),
            Self::Block { inner, fixed_tail } => {
                let head = dim
                    .checked_sub(*fixed_tail)
                    .ok_or(PerturbationError::TailTooLong {
                        tail: *fixed_tail,
                        dim,
                    })?;
                Transform::Block {
                    inner: Box::new(inner.identity(head)?),
                    fixed_tail: *fixed_tail,
                }
            }
        })
    }

    /// A uniform random element acting on `dim` coordinates.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        dim: usize,
        rng: &mut R,
    ) -> Result<Transform, PerturbationError> {
        Ok(match self {
            Self::SignChange => Transform::Signs(
                (0..dim)
                    .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                    .collect(),
            ),
            Self::Permutation => {
                let mut p: Vec<usize> = (0..dim).collect();
                p.shuffle(rng);
                Transform::Permutation(p)
            }
            Self::Block { inner, fixed_tail } => {
                let head = dim
                    .checked_sub(*fixed_tail)
                    .ok_or(PerturbationError::TailTooLong {
                        tail: *fixed_tail,
                        dim,
                    })?;
                Transform::Block {
                    inner: Box::new(inner.draw(head, rng)?),
                    fixed_tail: *fixed_tail,
                }
            }
        })
    }

    /// Strips block wrappers.
    pub fn base(&self) -> &TransformGroup {
        match self {
            Self::Block { inner, .. } => inner.base(),
            g => g,
        }
    }
}

/// One group element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Signs(Vec<i8>),
    Permutation(Vec<usize>),
    Block {
        inner: Box<Transform>,
        fixed_tail: usize,
    },
}

impl Transform {
    pub fn dim(&self) -> usize {
        match self {
            Self::Signs(s) => s.len(),
            Self::Permutation(p) => p.len(),
            Self::Block { inner, fixed_tail } => inner.dim() + fixed_tail,
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            Self::Signs(s) => s.iter().all(|&x| x == 1),
            Self::Permutation(p) => p.iter().enumerate().all(|(i, &j)| i == j),
            Self::Block { inner, .. } => inner.is_identity(),
        }
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>, PerturbationError> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out)?;
        Ok(out)
    }

    /// Writes the transformed vector into `out`.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) -> Result<(), PerturbationError> {
        let dim = self.dim();
        if v.len() != dim || out.len() != dim {
            return Err(PerturbationError::DimensionMismatch {
                expected: dim,
                found: if v.len() != dim { v.len() } else { out.len() },
            });
        }
        self.apply_unchecked(v, out);
        Ok(())
    }

    fn apply_unchecked(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Self::Signs(s) => {
                for ((o, x), &sg) in out.iter_mut().zip(v).zip(s) {
                    *o = if sg < 0 { -x } else { *x };
                }
            }
            Self::Permutation(p) => {
                for (o, &j) in out.iter_mut().zip(p) {
                    *o = v[j];
                }
            }
            Self::Block { inner, .. } => {
                let head = inner.dim();
                inner.apply_unchecked(&v[..head], &mut out[..head]);
                out[head..].copy_from_slice(&v[head..]);
            }
        }
    }

    /// `self ∘ other` for permutations: applying the result equals applying
    /// `other` first and then `self`.
    pub fn compose(&self, other: &Transform) -> Option<Transform> {
        match (self, other) {
            (Self::Permutation(a), Self::Permutation(b)) if a.len() == b.len() => {
                // (self ∘ other)(v)[i] = other(v)[a[i]] = v[b[a[i]]]
                Some(Self::Permutation(a.iter().map(|&i| b[i]).collect()))
            }
            (Self::Signs(a), Self::Signs(b)) if a.len() == b.len() => {
                Some(Self::Signs(a.iter().zip(b).map(|(x, y)| x * y).collect()))
            }
            _ => None,
        }
    }
}

/// `m` transforms (the first is the identity) and the tie-breaking order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSet {
    transforms: Vec<Transform>,
    tie_order: Vec<usize>,
    seed: Option<u64>,
}

impl PerturbationSet {
    /// Builds a set from explicit parts. Used for fixtures; production code
    /// goes through [`draw_perturbations`].
    pub fn from_parts(
        transforms: Vec<Transform>,
        tie_order: Vec<usize>,
    ) -> Result<Self, PerturbationError> {
        let m = transforms.len();
        if m < 2 {
            return Err(PerturbationError::TooFewTransforms(m));
        }
        if !transforms[0].is_identity() {
            return Err(PerturbationError::FirstNotIdentity);
        }
        let dim = transforms[0].dim();
        if let Some(t) = transforms.iter().find(|t| t.dim() != dim) {
            return Err(PerturbationError::DimensionMismatch {
                expected: dim,
                found: t.dim(),
            });
        }
        let mut seen = vec![false; m];
        for &i in &tie_order {
            if i >= m || std::mem::replace(&mut seen[i], true) {
                return Err(PerturbationError::BadTieOrder(m));
            }
        }
        if tie_order.len() != m {
            return Err(PerturbationError::BadTieOrder(m));
        }
        Ok(Self {
            transforms,
            tie_order,
            seed: None,
        })
    }

    pub fn m(&self) -> usize {
        self.transforms.len()
    }

    pub fn dim(&self) -> usize {
        self.transforms[0].dim()
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn tie_order(&self) -> &[usize] {
        &self.tie_order
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
}

/// Draws `G_0 = I` and `m - 1` i.i.d. uniform elements of `group` acting on
/// `n` coordinates, plus a uniform tie-breaking permutation of `0..m`.
/// Depends only on `(group, m, n, seed)`.
pub fn draw_perturbations(
    group: &TransformGroup,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<PerturbationSet, PerturbationError> {
    if m < 2 {
        return Err(PerturbationError::TooFewTransforms(m));
    }
    let mut rng = stream_rng(seed, Stream::Transforms);
    let mut transforms = Vec::with_capacity(m);
    transforms.push(group.identity(n)?);
    for _ in 1..m {
        transforms.push(group.draw(n, &mut rng)?);
    }
    let mut tie_rng = stream_rng(seed, Stream::TieOrder);
    let mut tie_order: Vec<usize> = (0..m).collect();
    tie_order.shuffle(&mut tie_rng);
    Ok(PerturbationSet {
        transforms,
        tie_order,
        seed: Some(seed),
    })
}
