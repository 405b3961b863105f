//! Command-line front end.
//!
//! Every subcommand accepts `--config FILE`, a `key = value` file whose keys
//! are long flag names (`n = 20`, `range = 0 10`, `identity-weighting = true`).
//! Flags given on the command line override the file. JSON outputs carry a
//! `schema_version`.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde_json::{json, Value};
use thiserror::Error;

use crate::data::{
    generate_synthetic, load_csv, save_csv, DataError, DataSample, NoiseSpec, TrueFunction,
};
use crate::estimators::{
    build_problem_with, point_estimate, BuildOptions, EstimatorConfig, EstimatorError,
    SolverSettings,
};
use crate::explorer::{bands_by_rays, default_grid, ExplorerError, RayBandSettings};
use crate::kernels::{KernelError, KernelSpec};
use crate::rank::{
    coverage_experiment, CoverageError, CoverageScenario, GroupKind, Region, RegionConfig,
    RegionError,
};
use crate::sps::{outer_ellipsoid, SpsError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Data(_) => 3,
            Self::Numerical(_) => 4,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::InvalidNoise(_) | DataError::InvalidGenerator(_) => {
                Self::Usage(e.to_string())
            }
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<KernelError> for CliError {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::Parse(_) | KernelError::InvalidParameter(_) => Self::Usage(e.to_string()),
            KernelError::DimensionMismatch { .. } | KernelError::EmptyInputs => {
                Self::Data(e.to_string())
            }
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<RegionError> for CliError {
    fn from(e: RegionError) -> Self {
        match e {
            RegionError::InvalidConfig { .. } => Self::Usage(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Kernel(k) => k.into(),
            EstimatorError::Data(d) => d.into(),
            EstimatorError::Region(r) => r.into(),
            EstimatorError::NonPositive(..)
            | EstimatorError::Negative(..)
            | EstimatorError::Parse(_)
            | EstimatorError::NonPsdKernel(_) => Self::Usage(e.to_string()),
            EstimatorError::Dimension(_)
            | EstimatorError::Labels(_)
            | EstimatorError::MissingTruth => Self::Data(e.to_string()),
            EstimatorError::RankDeficient(_) | EstimatorError::NotConverged { .. } => {
                Self::Numerical(e.to_string())
            }
        }
    }
}

impl From<SpsError> for CliError {
    fn from(e: SpsError) -> Self {
        match e {
            SpsError::Estimator(x) => x.into(),
            SpsError::Region(x) => x.into(),
            SpsError::Kernel(x) => x.into(),
            SpsError::InvalidLevel { .. } | SpsError::IdentityWeighting => {
                Self::Usage(e.to_string())
            }
            SpsError::Bisection { .. } => Self::Numerical(e.to_string()),
        }
    }
}

impl From<ExplorerError> for CliError {
    fn from(e: ExplorerError) -> Self {
        match e {
            ExplorerError::Region(x) => x.into(),
            ExplorerError::Kernel(x) => x.into(),
            ExplorerError::Sps(x) => x.into(),
            ExplorerError::Dimension(_) => Self::Data(e.to_string()),
            ExplorerError::Io(_) => Self::Data(e.to_string()),
            _ => Self::Usage(e.to_string()),
        }
    }
}

impl From<CoverageError> for CliError {
    fn from(e: CoverageError) -> Self {
        match e {
            CoverageError::NoTrials | CoverageError::Unsupported(_) => Self::Usage(e.to_string()),
            CoverageError::Region(x) => x.into(),
            CoverageError::Data(x) => x.into(),
            CoverageError::Trial { trial, source } => match CliError::from(source) {
                Self::Usage(m) => Self::Usage(format!("trial {trial}: {m}")),
                Self::Data(m) => Self::Data(format!("trial {trial}: {m}")),
                Self::Numerical(m) => Self::Numerical(format!("trial {trial}: {m}")),
            },
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "kernel-regions",
    version,
    about = "Distribution-free confidence regions for kernel models"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic regression sample (CSV plus a JSON sidecar).
    Simulate(SimulateArgs),
    /// Rank and membership of one coefficient vector.
    Member(MemberArgs),
    /// Confidence bands in model space (CSV plus a JSON sidecar).
    Band(BandArgs),
    /// Ellipsoidal outer approximations for KRR and LS-SVC.
    Ellipsoid(EllipsoidArgs),
    /// Monte Carlo coverage of the ideal coefficient vector.
    Coverage(CoverageArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// `key = value` file with defaults for any long flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// True function; only `x-sin-x` is built in.
    #[arg(long = "fn", default_value = "x-sin-x")]
    pub true_fn: String,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true, default_values_t = [0.0, 10.0])]
    pub range: Vec<f64>,
    /// `gaussian:STD`, `laplace:LOC:SCALE`, `uniform:HALF`, `binomial:TRIALS[:P]`, `zero`.
    #[arg(long, default_value = "laplace:0:0.5")]
    pub noise: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; the sidecar goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Data CSV with columns `x1..xd,y[,y_true]`.
    #[arg(long)]
    pub data: PathBuf,
    /// `krr:lambda=L`, `lssvc:lambda=L`, `svr:c=C,eps=E` or `klasso:lambda=L`.
    #[arg(long)]
    pub estimator: String,
    /// `gaussian:sigma=S`, `laplacian:sigma=S`, `polynomial:c=C,p=P`,
    /// `truncated_parabolic:c=C`, `rectangular:c=C`, `sigmoidal:a=A,b=B`.
    #[arg(long, default_value = "gaussian:sigma=0.5")]
    pub kernel: String,
    /// `sign-change` for symmetric noise, `permutation` for exchangeable noise.
    #[arg(long, default_value = "sign-change")]
    pub group: String,
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Weight quadratic problems with the identity instead of the inverse
    /// square-root Hessian.
    #[arg(long)]
    pub identity_weighting: bool,
    /// Allow kernels that are not positive semidefinite in general.
    #[arg(long)]
    pub allow_non_psd: bool,
    /// Let ε-SVR and KLASSO run on a numerically singular Gram matrix.
    #[arg(long)]
    pub allow_singular_gram: bool,
}

#[derive(Debug, Args)]
pub struct MemberArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    /// File of coefficients (comma or whitespace separated), or `estimate`.
    #[arg(long, default_value = "estimate")]
    pub alpha: String,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct BandArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Confidence levels `1 - q/m`, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 0.9])]
    pub levels: Vec<f64>,
    /// Only `rays` (ray scans inside a fitted-value box) is implemented.
    #[arg(long, default_value = "rays")]
    pub sampler: String,
    /// Rays per level.
    #[arg(long, default_value_t = 500)]
    pub rays: usize,
    /// Box half-width on the fitted values; defaults to the output range.
    #[arg(long)]
    pub half_width: Option<f64>,
    /// `default` (201 points over the input range) or `inputs`.
    #[arg(long, default_value = "default")]
    pub grid: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct EllipsoidArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// One ellipsoid per value, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [2])]
    pub q: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value = "krr:lambda=0.1")]
    pub estimator: String,
    #[arg(long, default_value = "gaussian:sigma=0.5")]
    pub kernel: String,
    #[arg(long, default_value = "sign-change")]
    pub group: String,
    #[arg(long)]
    pub identity_weighting: bool,
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

/// Parses and runs; returns the process exit code. Results go to `out`,
/// diagnostics to `err`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Runs with the process arguments and standard streams.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

/// Splices the contents of `--config FILE` in front of the explicit flags so
/// that explicit flags win.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut iter = argv.into_iter();
    let mut head: Vec<OsString> = iter.by_ref().take(2).collect();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let p = iter
                .next()
                .ok_or_else(|| CliError::Usage("--config needs a file".into()))?;
            path = Some(PathBuf::from(p));
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    if let Some(p) = path {
        let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
        head.extend(
            config_tokens(&text).map_err(|m| CliError::Usage(format!("{}: {m}", p.display())))?,
        );
    }
    head.extend(rest);
    Ok(head)
}

fn config_tokens(text: &str) -> Result<Vec<OsString>, String> {
    let mut tokens = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            return Err(format!("line {}: invalid key", i + 1));
        }
        match value {
            "true" => tokens.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                tokens.push(format!("--{key}").into());
                tokens.extend(value.split_whitespace().map(OsString::from));
            }
        }
    }
    Ok(tokens)
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => simulate(a, out),
        Command::Member(a) => member(a, out),
        Command::Band(a) => band(a, out),
        Command::Ellipsoid(a) => ellipsoid(a, out),
        Command::Coverage(a) => coverage(a, out),
    }
}

fn parse_fn(name: &str) -> Result<TrueFunction, CliError> {
    match name {
        "x-sin-x" | "x_sin_x" | "xsinx" => Ok(TrueFunction::XSinX),
        other => Err(CliError::Usage(format!("unknown true function `{other}`"))),
    }
}

fn parse_group(name: &str) -> Result<GroupKind, CliError> {
    match name {
        "sign-change" | "sign_change" | "signs" => Ok(GroupKind::SignChange),
        "permutation" | "permutations" => Ok(GroupKind::Permutation),
        other => Err(CliError::Usage(format!("unknown group `{other}`"))),
    }
}

fn range_of(v: &[f64]) -> (f64, f64) {
    (v[0], v[1])
}

fn write_json(value: &Value, path: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    match path {
        Some(p) => fs::write(p, text + "\n").map_err(|e| io_err(p, e)),
        None => writeln!(out, "{text}").map_err(|e| CliError::Data(e.to_string())),
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let true_fn = parse_fn(&a.scenario.true_fn)?;
    let noise = NoiseSpec::parse(&a.scenario.noise)?;
    let range = range_of(&a.scenario.range);
    let sample = generate_synthetic(&true_fn, a.scenario.n, range, &noise, a.seed)?;
    save_csv(&sample, &a.out).map_err(|e| io_err(&a.out, e))?;
    let side = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "fn": a.scenario.true_fn,
        "n": a.scenario.n,
        "range": [range.0, range.1],
        "noise": noise.to_string(),
        "noise_spec": noise,
        "seed": a.seed,
        "config": a.config.config,
        "output": a.out,
    });
    write_json(&side, Some(&sidecar_path(&a.out)), out)?;
    writeln!(
        out,
        "wrote {} observations to {}",
        sample.n(),
        a.out.display()
    )
    .map_err(|e| CliError::Data(e.to_string()))
}

struct Model {
    sample: DataSample,
    estimator: EstimatorConfig,
    kernel: KernelSpec,
    group: GroupKind,
    problem: crate::estimators::KernelProblem,
}

fn load_model(a: &ModelArgs) -> Result<Model, CliError> {
    let estimator = EstimatorConfig::parse(&a.estimator)?;
    let kernel = KernelSpec::parse(&a.kernel)?;
    let group = parse_group(&a.group)?;
    let sample = load_csv(&a.data).map_err(|e| match e {
        DataError::Io(io) => io_err(&a.data, io),
        other => CliError::Data(format!("{}: {other}", a.data.display())),
    })?;
    let options = BuildOptions {
        allow_non_psd: a.allow_non_psd,
        allow_singular_gram: a.allow_singular_gram,
    };
    let problem = build_problem_with(&estimator, &kernel, &sample, &group.group(), options)?;
    let problem = match problem {
        crate::estimators::KernelProblem::Sps(s) if a.identity_weighting => {
            crate::estimators::KernelProblem::Sps(s.with_identity_weighting())
        }
        other => other,
    };
    Ok(Model {
        sample,
        estimator,
        kernel,
        group,
        problem,
    })
}

fn model_json(a: &ModelArgs, m: &Model) -> Value {
    json!({
        "data": a.data,
        "estimator": m.estimator.to_string(),
        "kernel": m.kernel.to_string(),
        "group": m.group,
        "m": a.m,
        "seed": a.seed,
        "identity_weighting": a.identity_weighting,
        "allow_non_psd": a.allow_non_psd,
        "allow_singular_gram": a.allow_singular_gram,
    })
}

fn read_alpha(spec: &str, expected: usize) -> Result<DVector<f64>, CliError> {
    let path = Path::new(spec);
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::Data(format!("{spec}: `{t}` is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(CliError::Data(format!(
            "coefficient file has {} values but the problem has dimension {expected}",
            values.len()
        )));
    }
    Ok(DVector::from_vec(values))
}

fn member(a: MemberArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = RegionConfig::new(a.model.m, a.q, a.model.seed)?;
    let m = load_model(&a.model)?;
    let dim = crate::rank::GradientPerturbationProblem::dim(&m.problem);
    let alpha = if a.alpha == "estimate" {
        point_estimate(&m.estimator, &m.problem, SolverSettings::default())?
    } else {
        read_alpha(&a.alpha, dim)?
    };
    let region = Region::new(&m.problem, config)?;
    let r = region.membership(&alpha)?;
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "member",
        "model": model_json(&a.model, &m),
        "q": a.q,
        "confidence": config.confidence(),
        "alpha": alpha.as_slice(),
        "member": r.member,
        "rank": r.rank.value(),
        "rank_k": r.rank.k,
        "z_values": r.z_values,
    });
    write_json(&value, a.out.as_deref(), out)
}

fn band(a: BandArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.levels.is_empty() {
        return Err(CliError::Usage("at least one level is required".into()));
    }
    if a.sampler != "rays" {
        return Err(CliError::Usage(format!(
            "unknown sampler `{}`; only `rays` is available",
            a.sampler
        )));
    }
    let m = load_model(&a.model)?;
    if matches!(m.estimator, EstimatorConfig::Lssvc { .. }) {
        return Err(CliError::Usage(
            "bands are defined for regression estimators".into(),
        ));
    }
    let center = point_estimate(&m.estimator, &m.problem, SolverSettings::default())?;
    let ys = m.sample.outputs();
    let spread = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - ys.iter().copied().fold(f64::INFINITY, f64::min);
    let half_width = a
        .half_width
        .unwrap_or(if spread > 0.0 { spread } else { 1.0 });
    let grid = match a.grid.as_str() {
        "default" => default_grid(&m.sample),
        "inputs" => m.sample.inputs().to_vec(),
        other => return Err(CliError::Usage(format!("unknown grid `{other}`"))),
    };
    let settings = RayBandSettings {
        levels: a.levels.clone(),
        m: a.model.m,
        seed: a.model.seed,
        n_rays: a.rays,
        half_width,
    };
    let bands = bands_by_rays(
        &m.problem,
        &center,
        &m.kernel,
        m.sample.inputs(),
        &grid,
        &settings,
    )?;
    let file = fs::File::create(&a.out).map_err(|e| io_err(&a.out, e))?;
    bands.write_csv(file)?;
    let side = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "band",
        "model": model_json(&a.model, &m),
        "levels": a.levels,
        "sampler": a.sampler,
        "rays": a.rays,
        "half_width": half_width,
        "grid": a.grid,
        "config": a.config.config,
        "bands": bands.bands.iter().map(|b| json!({
            "level": b.level,
            "samples": b.count,
            "average_width": b.average_width(),
        })).collect::<Vec<_>>(),
        "notes": bands.notes,
        "output": a.out,
    });
    write_json(&side, Some(&sidecar_path(&a.out)), out)?;
    for note in &bands.notes {
        writeln!(out, "note: {note}").map_err(|e| CliError::Data(e.to_string()))?;
    }
    Ok(())
}

fn ellipsoid(a: EllipsoidArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.q.is_empty() {
        return Err(CliError::Usage("at least one q is required".into()));
    }
    for &q in &a.q {
        RegionConfig::new(a.model.m, q, a.model.seed)?;
    }
    let m = load_model(&a.model)?;
    let Some(problem) = m.problem.as_sps() else {
        return Err(CliError::Usage(
            "ellipsoids are available for krr and lssvc".into(),
        ));
    };
    let region = Region::new(problem, RegionConfig::new(a.model.m, a.q[0], a.model.seed)?)?;
    let base = outer_ellipsoid(problem, region.pset(), a.q[0])?;
    let mut ellipsoids = Vec::new();
    for &q in &a.q {
        let e = base.with_q(q)?;
        ellipsoids.push(json!({
            "q": q,
            "confidence": 1.0 - q as f64 / a.model.m as f64,
            "radius": if e.radius.is_finite() { json!(e.radius) } else { Value::Null },
            "degenerate": e.degenerate,
        }));
    }
    let shape: Vec<Vec<f64>> = base
        .shape
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "ellipsoid",
        "model": model_json(&a.model, &m),
        "center": base.center.as_slice(),
        "shape": shape,
        "n": base.n,
        "gammas": base.gammas.iter().map(|g| if g.is_finite() { json!(g) } else { Value::Null }).collect::<Vec<_>>(),
        "ellipsoids": ellipsoids,
    });
    write_json(&value, a.out.as_deref(), out)
}

fn coverage(a: CoverageArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.trials == 0 {
        return Err(CliError::Usage("trials must be positive".into()));
    }
    let config = RegionConfig::new(a.m, a.q, a.seed)?;
    let scenario = CoverageScenario {
        true_fn: parse_fn(&a.scenario.true_fn)?,
        n: a.scenario.n,
        range: range_of(&a.scenario.range),
        noise: NoiseSpec::parse(&a.scenario.noise)?,
        kernel: KernelSpec::parse(&a.kernel)?,
        estimator: EstimatorConfig::parse(&a.estimator)?,
        group: parse_group(&a.group)?,
        identity_weighting: a.identity_weighting,
    };
    let r = coverage_experiment(&scenario, a.trials, config, a.seed)?;
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "coverage",
        "scenario": {
            "fn": a.scenario.true_fn,
            "n": scenario.n,
            "range": [scenario.range.0, scenario.range.1],
            "noise": scenario.noise.to_string(),
            "kernel": scenario.kernel.to_string(),
            "estimator": scenario.estimator.to_string(),
            "group": scenario.group,
            "identity_weighting": scenario.identity_weighting,
        },
        "m": a.m,
        "q": a.q,
        "seed": a.seed,
        "trials": r.trials,
        "members": r.members,
        "nominal": r.p_nominal,
        "empirical": r.empirical_coverage,
        "ci": [r.ci.0, r.ci.1],
        "rank_counts": r.rank_counts,
    });
    write_json(&value, a.out.as_deref(), out)
}
