//! Perturbed-gradient rank tests and confidence-region membership.
//!
//! For a coefficient vector `α` a problem evaluates `m` values
//! `Z_i(α) = ‖Ψ ḡ(α, G_i ε̂(α))‖²`, where `ε̂(α)` is the residual vector and
//! `G_0` is the identity. The normalized rank of `Z_0` under the strict total
//! order `≺_π` decides membership: `α ∈ A_p` iff `rank ≤ 1 - q/m`.

mod coverage;

pub use coverage::{
    coverage_experiment, rank_histogram, CoverageError, CoverageReport, CoverageScenario, GroupKind,
};

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perturbation::{
    draw_perturbations, PerturbationError, PerturbationSet, Transform, TransformGroup,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("invalid region configuration: need 0 < q < m, got m = {m}, q = {q}")]
    InvalidConfig { m: usize, q: usize },
    #[error("coefficient vector has dimension {found}, problem expects {expected}")]
    CoefficientDimension { expected: usize, found: usize },
    #[error("perturbation set acts on {found} coordinates, problem residuals have {expected}")]
    ResidualDimension { expected: usize, found: usize },
    #[error("rank inputs disagree: {zs} values, tie order of length {order}")]
    RankLength { zs: usize, order: usize },
    #[error(transparent)]
    Perturbation(#[from] PerturbationError),
}

/// Hyper-parameters of a region: `m` values, level `p = 1 - q/m`, and the
/// seed that fixes transforms and tie order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionConfig {
    pub m: usize,
    pub q: usize,
    pub seed: u64,
}

impl RegionConfig {
    pub fn new(m: usize, q: usize, seed: u64) -> Result<Self, RegionError> {
        let c = Self { m, q, seed };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), RegionError> {
        if self.q == 0 || self.q >= self.m {
            return Err(RegionError::InvalidConfig {
                m: self.m,
                q: self.q,
            });
        }
        Ok(())
    }

    /// Confidence level `1 - q/m`.
    pub fn confidence(&self) -> f64 {
        1.0 - self.q as f64 / self.m as f64
    }

    pub fn with_q(self, q: usize) -> Result<Self, RegionError> {
        Self::new(self.m, q, self.seed)
    }
}

/// Weighting matrix `Ψ` applied to the gradient before taking the norm.
#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    Identity,
    Matrix(DMatrix<f64>),
}

impl Weighting {
    /// `‖Ψ g‖²`
    pub fn weighted_sq_norm(&self, g: &DVector<f64>) -> f64 {
        match self {
            Self::Identity => g.norm_squared(),
            Self::Matrix(psi) => (psi * g).norm_squared(),
        }
    }
}

/// An estimator-specific evaluator of the reference and perturbed functions.
///
/// Implementations split the evaluation as the construction requires: the
/// residuals `ε̂(α)` depend on the data, and the weighted gradient norm
/// depends on the outputs only through (possibly transformed) residuals.
pub trait GradientPerturbationProblem: Sync {
    /// Dimension of the coefficient vector.
    fn dim(&self) -> usize;

    /// Length of the residual vector the transforms act on.
    fn residual_dim(&self) -> usize;

    /// The transformation group, including any fixed auxiliary tail.
    fn group(&self) -> TransformGroup;

    /// `ε̂(α)`.
    fn residuals(&self, alpha: &DVector<f64>) -> DVector<f64>;

    /// `‖Ψ ḡ(α, r)‖²` for a (transformed) residual vector `r`.
    fn z_from_residuals(&self, alpha: &DVector<f64>, residuals: &DVector<f64>) -> f64;

    /// `Z(α; t)`.
    fn z(&self, alpha: &DVector<f64>, t: &Transform) -> Result<f64, RegionError> {
        self.check_alpha(alpha)?;
        let r = self.residuals(alpha);
        let mut out = DVector::zeros(r.len());
        t.apply_into(r.as_slice(), out.as_mut_slice())?;
        Ok(self.z_from_residuals(alpha, &out))
    }

    fn check_alpha(&self, alpha: &DVector<f64>) -> Result<(), RegionError> {
        if alpha.len() != self.dim() {
            return Err(RegionError::CoefficientDimension {
                expected: self.dim(),
                found: alpha.len(),
            });
        }
        Ok(())
    }
}

/// Evaluates `Z_0(α), ..., Z_{m-1}(α)`; residuals are computed once.
pub fn z_values<P: GradientPerturbationProblem + ?Sized>(
    problem: &P,
    alpha: &DVector<f64>,
    pset: &PerturbationSet,
) -> Result<Vec<f64>, RegionError> {
    problem.check_alpha(alpha)?;
    if pset.dim() != problem.residual_dim() {
        return Err(RegionError::ResidualDimension {
            expected: problem.residual_dim(),
            found: pset.dim(),
        });
    }
    let r = problem.residuals(alpha);
    let mut buf = DVector::zeros(r.len());
    pset.transforms()
        .iter()
        .map(|t| {
            t.apply_into(r.as_slice(), buf.as_mut_slice())?;
            Ok(problem.z_from_residuals(alpha, &buf))
        })
        .collect()
}

/// A normalized rank `k/m` with `k ∈ {1, ..., m}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rank {
    pub k: usize,
    pub m: usize,
}

impl Rank {
    pub fn value(&self) -> f64 {
        self.k as f64 / self.m as f64
    }

    /// `k/m ≤ 1 - q/m`, compared in integers.
    pub fn within(&self, q: usize) -> bool {
        self.k + q <= self.m
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.k, self.m)
    }
}

/// `zs[a] ≺_π zs[b]`: strictly smaller, or equal with the smaller tie label.
pub fn precedes(zs: &[f64], tie_order: &[usize], a: usize, b: usize) -> bool {
    zs[a] < zs[b] || (zs[a] == zs[b] && tie_order[a] < tie_order[b])
}

/// Position of the reference value `zs[0]` in the `≺_π` ordering, one-based,
/// divided by `m`: `(1 + #{i ≥ 1 : zs[i] ≺_π zs[0]}) / m`.
pub fn normalized_rank(zs: &[f64], tie_order: &[usize]) -> Result<Rank, RegionError> {
    if zs.len() != tie_order.len() || zs.is_empty() {
        return Err(RegionError::RankLength {
            zs: zs.len(),
            order: tie_order.len(),
        });
    }
    let below = (1..zs.len())
        .filter(|&i| precedes(zs, tie_order, i, 0))
        .count();
    Ok(Rank {
        k: 1 + below,
        m: zs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipResult {
    pub member: bool,
    pub rank: Rank,
    pub z_values: Vec<f64>,
}

/// A confidence region: a problem with one shared perturbation set.
///
/// Every query against the same `Region` uses the same transforms and tie
/// order, so the region is a fixed set of coefficient vectors.
pub struct Region<'a, P: GradientPerturbationProblem + ?Sized> {
    problem: &'a P,
    pset: PerturbationSet,
    config: RegionConfig,
}

impl<'a, P: GradientPerturbationProblem + ?Sized> Region<'a, P> {
    pub fn new(problem: &'a P, config: RegionConfig) -> Result<Self, RegionError> {
        config.validate()?;
        let pset = draw_perturbations(
            &problem.group(),
            config.m,
            problem.residual_dim(),
            config.seed,
        )?;
        Ok(Self {
            problem,
            pset,
            config,
        })
    }

    /// Uses an explicit perturbation set (its size overrides `config.m`).
    pub fn with_pset(problem: &'a P, pset: PerturbationSet, q: usize) -> Result<Self, RegionError> {
        let config = RegionConfig::new(pset.m(), q, pset.seed().unwrap_or(0))?;
        if pset.dim() != problem.residual_dim() {
            return Err(RegionError::ResidualDimension {
                expected: problem.residual_dim(),
                found: pset.dim(),
            });
        }
        Ok(Self {
            problem,
            pset,
            config,
        })
    }

    pub fn problem(&self) -> &P {
        self.problem
    }

    pub fn pset(&self) -> &PerturbationSet {
        &self.pset
    }

    pub fn config(&self) -> RegionConfig {
        self.config
    }

    pub fn rank(&self, alpha: &DVector<f64>) -> Result<Rank, RegionError> {
        let zs = z_values(self.problem, alpha, &self.pset)?;
        normalized_rank(&zs, self.pset.tie_order())
    }

    pub fn membership(&self, alpha: &DVector<f64>) -> Result<MembershipResult, RegionError> {
        let zs = z_values(self.problem, alpha, &self.pset)?;
        let rank = normalized_rank(&zs, self.pset.tie_order())?;
        Ok(MembershipResult {
            member: rank.within(self.config.q),
            rank,
            z_values: zs,
        })
    }

    pub fn contains(&self, alpha: &DVector<f64>) -> Result<bool, RegionError> {
        Ok(self.rank(alpha)?.within(self.config.q))
    }
}

/// One-shot membership test; the perturbation set is derived from
/// `(problem.group(), config.m, problem.residual_dim(), config.seed)`.
pub fn is_member<P: GradientPerturbationProblem + ?Sized>(
    problem: &P,
    alpha: &DVector<f64>,
    config: RegionConfig,
) -> Result<MembershipResult, RegionError> {
    Region::new(problem, config)?.membership(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rank_examples() {
        let any = [3, 1, 0, 2];
        assert_eq!(
            normalized_rank(&[0.1, 0.5, 0.7, 0.9], &any).unwrap(),
            Rank { k: 1, m: 4 }
        );
        assert_eq!(
            normalized_rank(&[0.9, 0.1, 0.2], &[0, 1, 2]).unwrap(),
            Rank { k: 3, m: 3 }
        );
        assert_eq!(
            normalized_rank(&[0.9, 0.1, 0.2], &[2, 1, 0]).unwrap(),
            Rank { k: 3, m: 3 }
        );
    }

    #[test]
    fn all_ties_resolved_by_order() {
        // π = (2, 0, 1, 3): Z_1 (label 0) and Z_2 (label 1) precede Z_0 (label 2).
        let c = 0.25;
        assert_eq!(
            normalized_rank(&[c, c, c, c], &[2, 0, 1, 3]).unwrap(),
            Rank { k: 3, m: 4 }
        );
        assert_eq!(
            normalized_rank(&[c, c, c, c], &[0, 1, 2, 3]).unwrap(),
            Rank { k: 1, m: 4 }
        );
    }

    #[test]
    fn rank_length_mismatch() {
        assert!(normalized_rank(&[1.0, 2.0], &[0]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(RegionConfig::new(20, 0, 1).is_err());
        assert!(RegionConfig::new(20, 20, 1).is_err());
        assert!(RegionConfig::new(20, 19, 1).is_ok());
        assert!((RegionConfig::new(20, 2, 1).unwrap().confidence() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn within_matches_positions() {
        // m = 100, q = 5: members occupy positions 1..=95.
        for k in 1..=100 {
            assert_eq!(Rank { k, m: 100 }.within(5), k <= 95);
        }
    }

    /// `Z(α; t) = ‖t(y - α 1)‖² + α²` on a toy location problem.
    struct Toy {
        y: Vec<f64>,
    }

    impl GradientPerturbationProblem for Toy {
        fn dim(&self) -> usize {
            1
        }
        fn residual_dim(&self) -> usize {
            self.y.len()
        }
        fn group(&self) -> TransformGroup {
            TransformGroup::SignChange
        }
        fn residuals(&self, alpha: &DVector<f64>) -> DVector<f64> {
            DVector::from_iterator(self.y.len(), self.y.iter().map(|v| v - alpha[0]))
        }
        fn z_from_residuals(&self, _alpha: &DVector<f64>, r: &DVector<f64>) -> f64 {
            r.sum().powi(2)
        }
    }

    #[test]
    fn z_values_nonnegative_and_reference_first() {
        let p = Toy {
            y: vec![0.3, -1.2, 2.0, 0.7],
        };
        let pset = draw_perturbations(&p.group(), 8, 4, 3).unwrap();
        let a = DVector::from_element(1, 0.1);
        let zs = z_values(&p, &a, &pset).unwrap();
        assert_eq!(zs.len(), 8);
        assert!(zs.iter().all(|&z| z >= 0.0));
        let r0: f64 = p.y.iter().map(|v| v - 0.1).sum();
        assert_eq!(zs[0], r0 * r0);
        assert!(z_values(&p, &DVector::zeros(2), &pset).is_err());
        let wrong = draw_perturbations(&p.group(), 8, 5, 3).unwrap();
        assert!(matches!(
            z_values(&p, &a, &wrong),
            Err(RegionError::ResidualDimension { .. })
        ));
    }

    #[test]
    fn forced_identity_pair_gives_equal_values() {
        let p = Toy {
            y: vec![1.0, 2.0, -0.5],
        };
        let id = Transform::Signs(vec![1; 3]);
        let pset = PerturbationSet::from_parts(vec![id.clone(), id], vec![0, 1]).unwrap();
        let zs = z_values(&p, &DVector::from_element(1, 0.4), &pset).unwrap();
        assert_eq!(zs[0], zs[1]);
    }

    #[test]
    fn region_is_deterministic() {
        let p = Toy {
            y: vec![0.3, -1.2, 2.0, 0.7, 0.1],
        };
        let cfg = RegionConfig::new(20, 3, 11).unwrap();
        for a in [-1.0, 0.0, 0.37, 5.0] {
            let a = DVector::from_element(1, a);
            assert_eq!(
                is_member(&p, &a, cfg).unwrap(),
                is_member(&p, &a, cfg).unwrap()
            );
        }
    }

    fn strategy_zs() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
        (2usize..12).prop_flat_map(|m| {
            (
                prop::collection::vec(prop::sample::select(vec![0.0, 0.5, 1.0, 1.5, 2.0]), m),
                Just((0..m).collect::<Vec<_>>()).prop_shuffle(),
            )
        })
    }

    proptest! {
        #[test]
        fn tie_break_is_strict_total_order((zs, pi) in strategy_zs()) {
            let m = zs.len();
            for a in 0..m {
                prop_assert!(!precedes(&zs, &pi, a, a));
                for b in 0..m {
                    if a != b {
                        // totality and antisymmetry
                        prop_assert!(precedes(&zs, &pi, a, b) ^ precedes(&zs, &pi, b, a));
                    }
                    for c in 0..m {
                        if precedes(&zs, &pi, a, b) && precedes(&zs, &pi, b, c) {
                            prop_assert!(precedes(&zs, &pi, a, c));
                        }
                    }
                }
            }
        }

        #[test]
        fn rank_in_range((zs, pi) in strategy_zs()) {
            let r = normalized_rank(&zs, &pi).unwrap();
            prop_assert!(r.k >= 1 && r.k <= zs.len());
        }

        #[test]
        fn membership_nested_in_q(seed in any::<u64>(), a in -5.0f64..5.0) {
            let p = Toy { y: vec![0.3, -1.2, 2.0, 0.7, 0.1, -0.4] };
            let alpha = DVector::from_element(1, a);
            let mut prev = true;
            for q in 1..10 {
                let m = is_member(&p, &alpha, RegionConfig::new(10, q, seed).unwrap()).unwrap().member;
                // member at q' implies member at every q <= q'
                prop_assert!(prev || !m);
                prev = m;
            }
        }
    }
}
