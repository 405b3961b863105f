//! Exploring regions: ray scans, Monte Carlo samples of coefficient space,
//! and confidence bands in model space.
//!
//! Bands evaluate `f_α(x) = Σ α_i k(x, x_i)` at arbitrary grid points. Away
//! from the training inputs these carry no pointwise coverage statement.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::{equidistant, DataSample};
use crate::kernels::{cross_kernel, KernelError, KernelSpec};
use crate::rank::{GradientPerturbationProblem, Rank, Region, RegionError};
use crate::seeding::{stream_rng, Stream};
use crate::sps::{ellipsoid_boundary_map, Ellipsoid, SpsError};

#[derive(Debug, Error)]
pub enum ExplorerError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("ray scans need at least 2 steps, got {0}")]
    Steps(usize),
    #[error("r_max must be finite and non-negative, got {0}")]
    RMax(f64),
    #[error("level {level} is not of the form 1 - q/m with 0 < q < {m}")]
    InvalidLevel { level: f64, m: usize },
    #[error("no confidence levels requested")]
    NoLevels,
    #[error("sampler bounds must be finite")]
    Unbounded,
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Sps(#[from] SpsError),
    #[error("writing band: {0}")]
    Io(String),
}

/// `f_α` on each grid point.
pub fn evaluate_model<P: AsRef<[f64]>, Q: AsRef<[f64]>>(
    kernel: &KernelSpec,
    train_inputs: &[P],
    alpha: &DVector<f64>,
    grid: &[Q],
) -> Result<Vec<f64>, ExplorerError> {
    if alpha.len() != train_inputs.len() {
        return Err(ExplorerError::Dimension(format!(
            "{} coefficients for {} training inputs",
            alpha.len(),
            train_inputs.len()
        )));
    }
    let k = cross_kernel(kernel, grid, train_inputs)?;
    Ok((k * alpha).iter().copied().collect())
}

/// 201 equidistant points over the input range of a one-dimensional sample.
pub fn default_grid(sample: &DataSample) -> Vec<Vec<f64>> {
    let (lo, hi) = sample.input_range();
    equidistant(201, lo, hi)
        .into_iter()
        .map(|x| vec![x])
        .collect()
}

/// Boundary found along one ray for one `q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayBoundary {
    pub q: usize,
    /// Largest `t` found to be a member. `0` when only the center is.
    pub radius: f64,
    /// False when no non-member was found up to `r_max`; `radius` is then
    /// only a lower bound.
    pub bracketed: bool,
    /// The center itself is not a member at this level.
    pub center_outside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayScan {
    pub center_rank: Rank,
    pub boundaries: Vec<RayBoundary>,
}

impl RayScan {
    pub fn boundary(&self, q: usize) -> Option<&RayBoundary> {
        self.boundaries.iter().find(|b| b.q == q)
    }
}

/// Points `r_max · g^{j - steps}` for `j = 1..=steps`, from `r_max·1e-4` to
/// `r_max`.
pub fn geometric_grid(r_max: f64, steps: usize) -> Vec<f64> {
    let g = 1e4f64.powf(1.0 / (steps - 1) as f64);
    (1..=steps)
        .map(|j| r_max * g.powi(j as i32 - steps as i32))
        .collect()
}

/// Scans `center + t·direction` for `t ∈ [0, r_max]`: ranks on a geometric
/// grid, then bisection between the last member and the first non-member
/// for each requested `q` (all admissible ones if `levels` is empty).
///
/// The first exit is reported. For star-shaped regions around `center`
/// this is the boundary.
pub fn ray_scan<P: GradientPerturbationProblem + ?Sized>(
    region: &Region<'_, P>,
    center: &DVector<f64>,
    direction: &DVector<f64>,
    r_max: f64,
    steps: usize,
    levels: &[usize],
) -> Result<RayScan, ExplorerError> {
    if steps < 2 {
        return Err(ExplorerError::Steps(steps));
    }
    if !(r_max.is_finite() && r_max >= 0.0) {
        return Err(ExplorerError::RMax(r_max));
    }
    if direction.len() != center.len() {
        return Err(ExplorerError::Dimension(format!(
            "direction has {} entries, center {}",
            direction.len(),
            center.len()
        )));
    }
    let m = region.config().m;
    let qs: Vec<usize> = if levels.is_empty() {
        (1..m).collect()
    } else {
        for &q in levels {
            if q == 0 || q >= m {
                return Err(RegionError::InvalidConfig { m, q }.into());
            }
        }
        levels.to_vec()
    };
    let center_rank = region.rank(center)?;
    let at = |t: f64| center + direction * t;

    let grid = if r_max == 0.0 {
        Vec::new()
    } else {
        geometric_grid(r_max, steps)
    };
    let mut ranks = Vec::with_capacity(grid.len());
    for &t in &grid {
        ranks.push(region.rank(&at(t))?.k);
    }

    let mut boundaries = Vec::with_capacity(qs.len());
    for q in qs {
        let limit = m - q;
        if center_rank.k > limit {
            boundaries.push(RayBoundary {
                q,
                radius: 0.0,
                bracketed: true,
                center_outside: true,
            });
            continue;
        }
        let exit = ranks.iter().position(|&k| k > limit);
        let Some(j) = exit else {
            boundaries.push(RayBoundary {
                q,
                radius: grid.last().copied().unwrap_or(0.0),
                bracketed: false,
                center_outside: false,
            });
            continue;
        };
        let mut lo = if j == 0 { 0.0 } else { grid[j - 1] };
        let mut hi = grid[j];
        for _ in 0..100 {
            if hi - lo <= 1e-12 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if region.rank(&at(mid))?.k <= limit {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        boundaries.push(RayBoundary {
            q,
            radius: lo,
            bracketed: true,
            center_outside: false,
        });
    }
    Ok(RayScan {
        center_rank,
        boundaries,
    })
}

/// Where Monte Carlo samples come from.
#[derive(Debug, Clone)]
pub enum Sampler {
    /// Uniform in the axis-aligned box.
    Box {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    /// Uniform in the ellipsoid.
    Ellipsoid(Ellipsoid),
    /// Uniform direction, then uniform distance up to `r_max`, or up to the
    /// boundary of `bound` along that direction when given.
    Rays {
        center: DVector<f64>,
        r_max: f64,
        bound: Option<Ellipsoid>,
    },
}

impl Sampler {
    /// A box centred at `center` with the given half-widths.
    pub fn box_around(center: &DVector<f64>, half_widths: &DVector<f64>) -> Self {
        Self::Box {
            lower: center - half_widths,
            upper: center + half_widths,
        }
    }

    fn dim(&self) -> usize {
        match self {
            Self::Box { lower, .. } => lower.len(),
            Self::Ellipsoid(e) => e.center.len(),
            Self::Rays { center, .. } => center.len(),
        }
    }

    fn check(&self) -> Result<(), ExplorerError> {
        let finite = |v: &DVector<f64>| v.iter().all(|x| x.is_finite());
        let ok = match self {
            Self::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(ExplorerError::Dimension(
                        "box bounds differ in length".into(),
                    ));
                }
                finite(lower) && finite(upper)
            }
            Self::Ellipsoid(e) => e.radius.is_finite() && finite(&e.center),
            Self::Rays {
                center,
                r_max,
                bound,
            } => {
                finite(center)
                    && r_max.is_finite()
                    && bound.as_ref().is_none_or(|e| e.radius.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(ExplorerError::Unbounded)
        }
    }

    fn draw_all<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<DVector<f64>>, ExplorerError> {
        let d = self.dim();
        let unit = |rng: &mut R| -> DVector<f64> {
            loop {
                let v = DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(rng));
                let norm = v.norm();
                if norm > 0.0 {
                    return v / norm;
                }
            }
        };
        match self {
            Self::Box { lower, upper } => Ok((0..n)
                .map(|_| {
                    DVector::from_fn(d, |i, _| {
                        lower[i] + (upper[i] - lower[i]) * rng.random::<f64>()
                    })
                })
                .collect()),
            Self::Ellipsoid(e) => {
                let map = ellipsoid_boundary_map(e)?;
                Ok((0..n)
                    .map(|_| {
                        let u = unit(rng);
                        let r = rng.random::<f64>().powf(1.0 / d as f64);
                        &e.center + &map * (u * r)
                    })
                    .collect())
            }
            Self::Rays {
                center,
                r_max,
                bound,
            } => Ok((0..n)
                .map(|_| {
                    let u = unit(rng);
                    let reach = match bound {
                        Some(e) => {
                            let q = u.dot(&(&e.shape * &u));
                            let shift = &e.center - center;
                            // Largest t with center + t·u inside the ellipsoid.
                            let b = u.dot(&(&e.shape * &shift));
                            let c = shift.dot(&(&e.shape * &shift)) - e.radius;
                            let disc = (b * b - q * c).max(0.0);
                            ((b + disc.sqrt()) / q).max(0.0).min(*r_max)
                        }
                        None => *r_max,
                    };
                    center + u * (reach * rng.random::<f64>())
                })
                .collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedSample {
    pub alpha: Vec<f64>,
    pub rank: Rank,
}

/// `n_samples` coefficient vectors with their ranks under the region's
/// perturbation set. Draws are sequential from the sampler stream of
/// `seed`; ranks are evaluated in parallel.
pub fn mc_region<P: GradientPerturbationProblem + ?Sized>(
    region: &Region<'_, P>,
    sampler: &Sampler,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<RankedSample>, ExplorerError> {
    sampler.check()?;
    if sampler.dim() != region.problem().dim() {
        return Err(ExplorerError::Dimension(format!(
            "sampler dimension {} for problem dimension {}",
            sampler.dim(),
            region.problem().dim()
        )));
    }
    let mut rng = stream_rng(seed, Stream::Sampler);
    let alphas = sampler.draw_all(n_samples, &mut rng)?;
    alphas
        .into_par_iter()
        .map(|a| {
            let rank = region.rank(&a)?;
            Ok(RankedSample {
                alpha: a.iter().copied().collect(),
                rank,
            })
        })
        .collect()
}

/// Boundary points of the region for one `q`, from ray scans along
/// `n_rays` random directions out of `center`. Each point is the largest
/// member found on its ray.
pub fn boundary_samples<P: GradientPerturbationProblem + ?Sized>(
    region: &Region<'_, P>,
    center: &DVector<f64>,
    n_rays: usize,
    q: usize,
    r_max: f64,
    seed: u64,
) -> Result<Vec<RankedSample>, ExplorerError> {
    let mut rng = stream_rng(seed, Stream::Sampler);
    let d = center.len();
    let dirs: Vec<DVector<f64>> = (0..n_rays)
        .map(|_| DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(&mut rng)).normalize())
        .collect();
    dirs.into_par_iter()
        .map(|u| {
            let scan = ray_scan(region, center, &u, r_max, 24, &[q])?;
            let a = center + u * scan.boundaries[0].radius;
            let rank = region.rank(&a)?;
            Ok(RankedSample {
                alpha: a.iter().copied().collect(),
                rank,
            })
        })
        .collect()
}

/// Envelope of model curves at one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Band {
    pub level: f64,
    pub count: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Band {
    /// Mean of `upper - lower` over the grid.
    pub fn average_width(&self) -> f64 {
        self.upper
            .iter()
            .zip(&self.lower)
            .map(|(u, l)| u - l)
            .sum::<f64>()
            / self.lower.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandSet {
    pub grid: Vec<Vec<f64>>,
    pub bands: Vec<Band>,
    pub notes: Vec<String>,
}

impl BandSet {
    pub fn band(&self, level: f64) -> Option<&Band> {
        self.bands.iter().find(|b| (b.level - level).abs() < 1e-12)
    }

    /// Columns `grid_x`, then `lower_p` and `upper_p` per level. Inputs of
    /// higher dimension get `x1..xd`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ExplorerError> {
        let io = |e: csv::Error| ExplorerError::Io(e.to_string());
        let mut out = csv::Writer::from_writer(w);
        let d = self.grid.first().map_or(1, Vec::len);
        let mut header: Vec<String> = if d == 1 {
            vec!["grid_x".into()]
        } else {
            (1..=d).map(|i| format!("x{i}")).collect()
        };
        for b in &self.bands {
            header.push(format!("lower_{}", b.level));
            header.push(format!("upper_{}", b.level));
        }
        out.write_record(&header).map_err(io)?;
        for (i, x) in self.grid.iter().enumerate() {
            let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            for b in &self.bands {
                row.push(b.lower[i].to_string());
                row.push(b.upper[i].to_string());
            }
            out.write_record(&row).map_err(io)?;
        }
        out.flush().map_err(|e| ExplorerError::Io(e.to_string()))
    }
}

/// `k` with `p = k/m`, for `p = 1 - q/m`, `0 < q < m`.
pub fn level_to_max_rank(level: f64, m: usize) -> Result<usize, ExplorerError> {
    let k = level * m as f64;
    let kr = k.round();
    if (k - kr).abs() > 1e-9 || kr < 1.0 || kr > (m - 1) as f64 {
        return Err(ExplorerError::InvalidLevel { level, m });
    }
    Ok(kr as usize)
}

/// Pointwise min/max of `f_α` over the samples with rank at most `p`, for
/// each level `p`. Levels without samples are omitted and noted.
pub fn model_band<P: AsRef<[f64]> + Sync, Q: AsRef<[f64]>>(
    samples: &[RankedSample],
    kernel: &KernelSpec,
    train_inputs: &[P],
    grid: &[Q],
    levels: &[f64],
    m: usize,
) -> Result<BandSet, ExplorerError> {
    if levels.is_empty() {
        return Err(ExplorerError::NoLevels);
    }
    let limits = levels
        .iter()
        .map(|&p| level_to_max_rank(p, m))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(s) = samples
        .iter()
        .find(|s| s.alpha.len() != train_inputs.len() || s.rank.m != m)
    {
        return Err(ExplorerError::Dimension(format!(
            "sample with {} coefficients and rank over {} values; expected {} and {m}",
            s.alpha.len(),
            s.rank.m,
            train_inputs.len()
        )));
    }
    let kg: DMatrix<f64> = cross_kernel(kernel, grid, train_inputs)?;
    let loosest = limits.iter().copied().max().unwrap_or(0);
    let curves: Vec<(usize, DVector<f64>)> = samples
        .iter()
        .filter(|s| s.rank.k <= loosest)
        .map(|s| (s.rank.k, &kg * DVector::from_column_slice(&s.alpha)))
        .collect();

    let g = grid.len();
    let mut bands = Vec::new();
    let mut notes = Vec::new();
    for (&level, &limit) in levels.iter().zip(&limits) {
        let mut lower = vec![f64::INFINITY; g];
        let mut upper = vec![f64::NEG_INFINITY; g];
        let mut count = 0;
        for (k, f) in &curves {
            if *k > limit {
                continue;
            }
            count += 1;
            for i in 0..g {
                lower[i] = lower[i].min(f[i]);
                upper[i] = upper[i].max(f[i]);
            }
        }
        if count == 0 {
            notes.push(format!(
                "level {level}: no samples with rank at most {limit}/{m}; omitted"
            ));
            continue;
        }
        bands.push(Band {
            level,
            count,
            lower,
            upper,
        });
    }
    Ok(BandSet {
        grid: grid.iter().map(|x| x.as_ref().to_vec()).collect(),
        bands,
        notes,
    })
}

/// Settings for [`bands_by_rays`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayBandSettings {
    /// Confidence levels `p = 1 - q/m`.
    pub levels: Vec<f64>,
    pub m: usize,
    pub seed: u64,
    /// Rays per level.
    pub n_rays: usize,
    /// Half-width `h` of the exploration box `‖K(α − center)‖_∞ ≤ h`, in
    /// units of the outputs.
    pub half_width: f64,
}

/// Bands from ray-scan boundary points around `center`, one batch of rays
/// per level, plus the center itself.
///
/// Rays are uniform in coefficient space and stop where the fitted values
/// at the training inputs leave `center`'s fit by `half_width`. The same
/// box is used for every estimator and kernel, which keeps widths
/// comparable when a region is unbounded. Every point used is a verified
/// member, so for regions that are not star-shaped around `center` the
/// result is an inner approximation.
pub fn bands_by_rays<P, X, Q>(
    problem: &P,
    center: &DVector<f64>,
    kernel: &KernelSpec,
    train_inputs: &[X],
    grid: &[Q],
    settings: &RayBandSettings,
) -> Result<BandSet, ExplorerError>
where
    P: GradientPerturbationProblem + ?Sized,
    X: AsRef<[f64]> + Sync,
    Q: AsRef<[f64]>,
{
    if settings.levels.is_empty() {
        return Err(ExplorerError::NoLevels);
    }
    let h = settings.half_width;
    if !(h.is_finite() && h > 0.0) {
        return Err(ExplorerError::RMax(h));
    }
    let n = train_inputs.len();
    if center.len() != n || problem.dim() != n {
        return Err(ExplorerError::Dimension(format!(
            "center has {} entries, problem {}, training inputs {n}",
            center.len(),
            problem.dim()
        )));
    }
    let gram: DMatrix<f64> = cross_kernel(kernel, train_inputs, train_inputs)?;
    // Directions the fit barely sees would otherwise run off to overflow.
    let cap = 1e8 * center.amax().max(1.0);
    let m = settings.m;
    let region = Region::new(
        problem,
        crate::rank::RegionConfig::new(m, 1, settings.seed)?,
    )?;
    let mut samples = vec![RankedSample {
        alpha: center.iter().copied().collect(),
        rank: region.rank(center)?,
    }];
    for &level in &settings.levels {
        let q = m - level_to_max_rank(level, m)?;
        let mut rng = stream_rng(
            crate::seeding::derive_seed(settings.seed, q as u64),
            Stream::Sampler,
        );
        let rays: Vec<(DVector<f64>, f64)> = (0..settings.n_rays)
            .map(|_| {
                let u =
                    DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(&mut rng)).normalize();
                let reach = (h / (&gram * &u).amax()).min(cap);
                (u, reach)
            })
            .collect();
        let found = rays
            .into_par_iter()
            .map(|(u, reach)| {
                let scan = ray_scan(&region, center, &u, reach, 24, &[q])?;
                let a = center + u * scan.boundaries[0].radius;
                Ok(RankedSample {
                    alpha: a.iter().copied().collect(),
                    rank: region.rank(&a)?,
                })
            })
            .collect::<Result<Vec<_>, ExplorerError>>()?;
        samples.extend(found);
    }
    model_band(&samples, kernel, train_inputs, grid, &settings.levels, m)
}
