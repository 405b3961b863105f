//! Data samples, synthetic generators and CSV persistence.

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::{stream_rng, Stream};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("sample must contain at least one observation")]
    Empty,
    #[error("{inputs} inputs but {outputs} outputs")]
    LengthMismatch { inputs: usize, outputs: usize },
    #[error("input {index} has dimension {found}, expected {expected}")]
    InputDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid noise specification: {0}")]
    InvalidNoise(String),
    #[error("invalid generator parameters: {0}")]
    InvalidGenerator(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("malformed header: {0}")]
    Header(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Observed inputs and outputs, plus the noiseless outputs when known.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSample {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    true_outputs: Option<Vec<f64>>,
}

impl DataSample {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self, DataError> {
        Self::with_truth(inputs, outputs, None)
    }

    pub fn with_truth(
        inputs: Vec<Vec<f64>>,
        outputs: Vec<f64>,
        true_outputs: Option<Vec<f64>>,
    ) -> Result<Self, DataError> {
        if inputs.is_empty() {
            return Err(DataError::Empty);
        }
        if inputs.len() != outputs.len() {
            return Err(DataError::LengthMismatch {
                inputs: inputs.len(),
                outputs: outputs.len(),
            });
        }
        if let Some(t) = &true_outputs {
            if t.len() != outputs.len() {
                return Err(DataError::LengthMismatch {
                    inputs: inputs.len(),
                    outputs: t.len(),
                });
            }
        }
        let d = inputs[0].len();
        if let Some((index, p)) = inputs.iter().enumerate().find(|(_, p)| p.len() != d) {
            return Err(DataError::InputDimension {
                index,
                expected: d,
                found: p.len(),
            });
        }
        Ok(Self {
            inputs,
            outputs,
            true_outputs,
        })
    }

    pub fn n(&self) -> usize {
        self.outputs.len()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn true_outputs(&self) -> Option<&[f64]> {
        self.true_outputs.as_deref()
    }

    /// True if no two inputs coincide exactly.
    pub fn inputs_distinct(&self) -> bool {
        let mut sorted: Vec<&Vec<f64>> = self.inputs.iter().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        sorted.windows(2).all(|w| w[0] != w[1])
    }

    /// Range of the first input coordinate.
    pub fn input_range(&self) -> (f64, f64) {
        self.inputs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[0]), hi.max(p[0]))
            })
    }
}

/// Zero-centered noise families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Degenerate noise, always zero.
    Zero,
    Gaussian {
        std: f64,
    },
    Laplace {
        location: f64,
        scale: f64,
    },
    /// Uniform on `[-half_width, half_width]`.
    Uniform {
        half_width: f64,
    },
    /// `Binomial(trials, p) - trials * p`: mean zero but asymmetric.
    BinomialCentered {
        trials: u32,
        success_prob: f64,
    },
}

impl NoiseSpec {
    pub fn gaussian(std: f64) -> Result<Self, DataError> {
        Self::Gaussian { std }.validated()
    }

    pub fn laplace(location: f64, scale: f64) -> Result<Self, DataError> {
        Self::Laplace { location, scale }.validated()
    }

    pub fn uniform(half_width: f64) -> Result<Self, DataError> {
        Self::Uniform { half_width }.validated()
    }

    pub fn binomial_centered(trials: u32, success_prob: f64) -> Result<Self, DataError> {
        Self::BinomialCentered {
            trials,
            success_prob,
        }
        .validated()
    }

    /// Centered binomial with `trials * p * (1 - p) = 1`, taking the root `p < 1/2`.
    pub fn binomial_unit_variance(trials: u32) -> Result<Self, DataError> {
        if trials < 4 {
            return Err(DataError::InvalidNoise(format!(
                "unit variance needs at least 4 trials, got {trials}"
            )));
        }
        let p = 0.5 * (1.0 - (1.0 - 4.0 / trials as f64).sqrt());
        Self::binomial_centered(trials, p)
    }

    /// The four unit-variance families: Gaussian, Laplace, uniform and
    /// centered binomial with 20 trials.
    pub fn unit_variance_families() -> [Self; 4] {
        [
            Self::Gaussian { std: 1.0 },
            Self::Laplace {
                location: 0.0,
                scale: std::f64::consts::FRAC_1_SQRT_2,
            },
            Self::Uniform {
                half_width: 3f64.sqrt(),
            },
            Self::binomial_unit_variance(20).expect("20 trials"),
        ]
    }

    pub fn validated(self) -> Result<Self, DataError> {
        let bad = |m: String| Err(DataError::InvalidNoise(m));
        match self {
            Self::Zero => {}
            Self::Gaussian { std } if !(std.is_finite() && std > 0.0) => {
                return bad(format!("std must be positive, got {std}"))
            }
            Self::Laplace { location, scale }
                if !(location.is_finite() && scale.is_finite() && scale > 0.0) =>
            {
                return bad(format!(
                    "laplace needs finite location and positive scale, got {location}, {scale}"
                ))
            }
            Self::Uniform { half_width } if !(half_width.is_finite() && half_width > 0.0) => {
                return bad(format!("half width must be positive, got {half_width}"))
            }
            Self::BinomialCentered {
                trials,
                success_prob,
            } if trials == 0 || !(success_prob > 0.0 && success_prob < 1.0) => {
                return bad(format!(
                    "binomial needs trials >= 1 and p in (0,1), got {trials}, {success_prob}"
                ))
            }
            _ => {}
        }
        Ok(self)
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Gaussian { std } => std * std,
            Self::Laplace { scale, .. } => 2.0 * scale * scale,
            Self::Uniform { half_width } => half_width * half_width / 3.0,
            Self::BinomialCentered {
                trials,
                success_prob,
            } => trials as f64 * success_prob * (1.0 - success_prob),
        }
    }

    /// Symmetric about zero (the sign-change group applies).
    pub fn is_symmetric(&self) -> bool {
        match *self {
            Self::Laplace { location, .. } => location == 0.0,
            Self::BinomialCentered { .. } => false,
            _ => true,
        }
    }

    /// Parses `gaussian:STD`, `laplace:LOC:SCALE`, `uniform:HALF_WIDTH`,
    /// `binomial:TRIALS[:P]` (unit variance when `P` is omitted) or `zero`.
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        let num = |i: usize| -> Result<f64, DataError> {
            parts
                .get(i)
                .ok_or_else(|| DataError::InvalidNoise(format!("missing parameter in `{text}`")))?
                .parse::<f64>()
                .map_err(|_| DataError::InvalidNoise(format!("non-numeric parameter in `{text}`")))
        };
        let arity = |k: usize| -> Result<(), DataError> {
            if parts.len() == k + 1 {
                Ok(())
            } else {
                Err(DataError::InvalidNoise(format!(
                    "`{text}` expects {k} parameter(s)"
                )))
            }
        };
        match parts[0].to_ascii_lowercase().as_str() {
            "zero" | "none" => {
                arity(0)?;
                Ok(Self::Zero)
            }
            "gaussian" | "normal" => {
                arity(1)?;
                Self::gaussian(num(1)?)
            }
            "laplace" => {
                arity(2)?;
                Self::laplace(num(1)?, num(2)?)
            }
            "uniform" => {
                arity(1)?;
                Self::uniform(num(1)?)
            }
            "binomial" => {
                let trials = num(1)?;
                if trials.fract() != 0.0 || trials < 1.0 {
                    return Err(DataError::InvalidNoise(format!(
                        "trials must be a positive integer in `{text}`"
                    )));
                }
                match parts.len() {
                    2 => Self::binomial_unit_variance(trials as u32),
                    3 => Self::binomial_centered(trials as u32, num(2)?),
                    _ => Err(DataError::InvalidNoise(format!(
                        "`{text}` expects 1 or 2 parameters"
                    ))),
                }
            }
            other => Err(DataError::InvalidNoise(format!(
                "unknown noise family `{other}`"
            ))),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Gaussian { std } => std * rng.sample::<f64, _>(StandardNormal),
            Self::Laplace { location, scale } => {
                // Inverse CDF on u in (-1/2, 1/2).
                let u: f64 = rng.random::<f64>() - 0.5;
                let tail = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
                location - scale * u.signum() * tail.ln()
            }
            Self::Uniform { half_width } => half_width * (2.0 * rng.random::<f64>() - 1.0),
            Self::BinomialCentered {
                trials,
                success_prob,
            } => {
                let hits = (0..trials)
                    .filter(|_| rng.random::<f64>() < success_prob)
                    .count();
                hits as f64 - trials as f64 * success_prob
            }
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "zero"),
            Self::Gaussian { std } => write!(f, "gaussian:{std}"),
            Self::Laplace { location, scale } => write!(f, "laplace:{location}:{scale}"),
            Self::Uniform { half_width } => write!(f, "uniform:{half_width}"),
            Self::BinomialCentered {
                trials,
                success_prob,
            } => write!(f, "binomial:{trials}:{success_prob}"),
        }
    }
}

/// Draws `n` i.i.d. noise values from the noise stream of `seed`.
pub fn sample_noise(spec: &NoiseSpec, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, Stream::Noise);
    sample_noise_with(spec, n, &mut rng)
}

pub fn sample_noise_with<R: Rng + ?Sized>(spec: &NoiseSpec, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| spec.draw(rng)).collect()
}

/// The noiseless function behind synthetic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrueFunction {
    /// `f(x) = x sin(x)`
    XSinX,
    /// Piecewise-linear interpolation of `(x, f(x))` knots sorted by `x`;
    /// constant extrapolation outside the knots.
    Table(Vec<(f64, f64)>),
}

impl TrueFunction {
    pub fn table(mut knots: Vec<(f64, f64)>) -> Result<Self, DataError> {
        if knots.is_empty() || knots.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(DataError::InvalidGenerator(
                "table needs finite knots".into(),
            ));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self::Table(knots))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::XSinX => x * x.sin(),
            Self::Table(knots) => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if x <= first.0 {
                    return first.1;
                }
                if x >= last.0 {
                    return last.1;
                }
                let j = knots.partition_point(|k| k.0 <= x);
                let (x0, y0) = knots[j - 1];
                let (x1, y1) = knots[j];
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }
}

/// `n` equidistant points on `[lo, hi]` including both endpoints; `n = 1`
/// gives the single point `lo`.
pub fn equidistant(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// Synthetic one-dimensional regression data `y_i = f(x_i) + noise_i`.
pub fn generate_synthetic(
    true_fn: &TrueFunction,
    n: usize,
    input_range: (f64, f64),
    noise: &NoiseSpec,
    seed: u64,
) -> Result<DataSample, DataError> {
    let (lo, hi) = input_range;
    if n == 0 {
        return Err(DataError::Empty);
    }
    if !(lo < hi) {
        return Err(DataError::InvalidGenerator(format!(
            "need lo < hi, got [{lo}, {hi}]"
        )));
    }
    let xs = equidistant(n, lo, hi);
    let truth: Vec<f64> = xs.iter().map(|&x| true_fn.eval(x)).collect();
    let eps = sample_noise(noise, n, seed);
    let outputs = truth.iter().zip(&eps).map(|(t, e)| t + e).collect();
    DataSample::with_truth(
        xs.into_iter().map(|x| vec![x]).collect(),
        outputs,
        Some(truth),
    )
}

/// Two-class data: `per_class` points at `positive` labelled `+1`, then
/// `per_class` at `negative` labelled `-1`, each coordinate perturbed by an
/// independent draw from `noise`.
pub fn generate_two_class(
    positive: &[f64],
    negative: &[f64],
    per_class: usize,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<DataSample, DataError> {
    if per_class == 0 || positive.is_empty() {
        return Err(DataError::Empty);
    }
    if positive.len() != negative.len() {
        return Err(DataError::InvalidGenerator(format!(
            "class centers have dimensions {} and {}",
            positive.len(),
            negative.len()
        )));
    }
    let d = positive.len();
    let eps = sample_noise(noise, 2 * per_class * d, seed);
    let mut inputs = Vec::with_capacity(2 * per_class);
    let mut labels = Vec::with_capacity(2 * per_class);
    for (c, (center, label)) in [(positive, 1.0), (negative, -1.0)].into_iter().enumerate() {
        for i in 0..per_class {
            let off = (c * per_class + i) * d;
            inputs.push(
                center
                    .iter()
                    .zip(&eps[off..off + d])
                    .map(|(a, e)| a + e)
                    .collect(),
            );
            labels.push(label);
        }
    }
    DataSample::new(inputs, labels)
}

const TRUTH_COLUMN: &str = "y_true";

/// Writes `x1,...,xd,y[,y_true]` with shortest round-trip decimal formatting.
pub fn save_csv(sample: &DataSample, path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)?;
    write_csv(sample, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_csv<W: std::io::Write>(
    sample: &DataSample,
    w: &mut csv::Writer<W>,
) -> Result<(), DataError> {
    let d = sample.input_dim();
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    if sample.true_outputs.is_some() {
        header.push(TRUTH_COLUMN.into());
    }
    w.write_record(&header)?;
    for i in 0..sample.n() {
        let mut row: Vec<String> = sample.inputs[i].iter().map(|v| v.to_string()).collect();
        row.push(sample.outputs[i].to_string());
        if let Some(t) = &sample.true_outputs {
            row.push(t[i].to_string());
        }
        w.write_record(&row)?;
    }
    Ok(())
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<DataSample, DataError> {
    let file = std::fs::File::open(path)?;
    read_csv(file)
}

/// Parses a data CSV. Row numbers in errors are 1-based data rows (the
/// header is row 0).
pub fn read_csv<R: std::io::Read>(reader: R) -> Result<DataSample, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let has_truth = cols.last() == Some(&TRUTH_COLUMN);
    let width = cols.len();
    let n_out = if has_truth { 2 } else { 1 };
    if width < n_out + 1 {
        return Err(DataError::Header(format!(
            "expected x1,...,xd,y columns, got `{}`",
            cols.join(",")
        )));
    }
    let d = width - n_out;
    for (i, c) in cols[..d].iter().enumerate() {
        if *c != format!("x{}", i + 1) {
            return Err(DataError::Header(format!(
                "column {} should be `x{}`, got `{c}`",
                i + 1,
                i + 1
            )));
        }
    }
    if cols[d] != "y" {
        return Err(DataError::Header(format!(
            "column {} should be `y`, got `{}`",
            d + 1,
            cols[d]
        )));
    }

    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut truth = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec.map_err(|e| DataError::Row {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != width {
            return Err(DataError::Row {
                row,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let mut vals = Vec::with_capacity(width);
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| DataError::Row {
                row,
                message: format!("column {} is not numeric: `{field}`", col + 1),
            })?;
            vals.push(v);
        }
        inputs.push(vals[..d].to_vec());
        outputs.push(vals[d]);
        if has_truth {
            truth.push(vals[d + 1]);
        }
    }
    DataSample::with_truth(inputs, outputs, has_truth.then_some(truth))
}
