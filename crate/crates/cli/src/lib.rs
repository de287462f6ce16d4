//! Command-line front end for the `spatial-hl` library.
//!
//! Everything the binary does goes through [`run`], so the commands can be
//! exercised in-process by tests.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use spatial_hl::highdim::{delta_replications, figure3_study, reports_to_csv, DeltaReport, GridCell, StudyConfig};
use spatial_hl::inference::{confidence_ellipsoid, hotelling_t2, sign_test, signed_rank_test};
use spatial_hl::location::{hl_estimator, spatial_median, DEFAULT_SUBSAMPLE_TRIPLES};
use spatial_hl::scatter::ScatterConfig;
use spatial_hl::sim::Family;
use spatial_hl::transret::{equivariance_witness, tr_hl, tr_spatial_median, TrChoice, WITNESS_STRETCH};
use spatial_hl::{BhatMode, DataMatrix, LocationFit, SolverConfig, SymMatrix};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "SPATIAL_HL_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Parse { line: Option<u64>, message: String },
    Numeric(String),
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::Numeric(_) => 3,
            CliError::Usage(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse",
            CliError::Numeric(_) => "numeric",
            CliError::Usage(_) => "usage",
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            line: Option<u64>,
            exit_code: i32,
        }
        let line = match self {
            CliError::Parse { line, .. } => *line,
            _ => None,
        };
        let body = Body {
            kind: self.kind(),
            message: self.to_string(),
            line,
            exit_code: self.exit_code(),
        };
        serde_json::json!({ "error": body }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse { line: Some(l), message } => write!(f, "line {l}: {message}"),
            CliError::Parse { line: None, message } => write!(f, "{message}"),
            CliError::Numeric(m) | CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<spatial_hl::Error> for CliError {
    fn from(e: spatial_hl::Error) -> Self {
        match e {
            spatial_hl::Error::InvalidInput(m) => CliError::Usage(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

// ---- CSV ------------------------------------------------------------------

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok()
}

/// Reads a numeric CSV. A first row containing any non-numeric cell is taken
/// as a header and skipped.
pub fn ingest_csv(path: &Path) -> CliResult<DataMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> CliResult<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut width = None;
    let mut values = Vec::new();
    let mut n = 0;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse {
            line: e.position().map(|p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: Vec<Option<f64>> = record.iter().map(parse_cell).collect();
        if k == 0 && parsed.iter().any(Option::is_none) {
            // header row
            width = Some(record.len());
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(CliError::Parse {
                line,
                message: format!("expected {w} columns, found {}", record.len()),
            });
        }
        for (c, (cell, v)) in record.iter().zip(&parsed).enumerate() {
            match v {
                Some(x) if x.is_finite() => values.push(*x),
                _ if cell.is_empty() => {
                    return Err(CliError::Parse {
                        line,
                        message: format!("missing value in column {}", c + 1),
                    })
                }
                _ => {
                    return Err(CliError::Parse {
                        line,
                        message: format!("column {}: {cell:?} is not a finite number", c + 1),
                    })
                }
            }
        }
        n += 1;
    }
    let p = width.unwrap_or(0);
    if n == 0 {
        return Err(CliError::Parse {
            line: None,
            message: "no numeric rows".into(),
        });
    }
    if p < 2 {
        return Err(CliError::Parse {
            line: None,
            message: format!("need at least 2 numeric columns, found {p}"),
        });
    }
    DataMatrix::new(n, p, values).map_err(|e| CliError::Parse {
        line: None,
        message: e.to_string(),
    })
}

/// Formats a number with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Inverse of [`parse_csv`] for header-less numeric data.
pub fn write_csv(data: &DataMatrix) -> String {
    let mut s = String::new();
    for row in data.rows() {
        let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

// ---- configuration ----------------------------------------------------------

/// `--bhat exact|rank|subsample=M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BhatArg(pub BhatMode);

impl FromStr for BhatArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact" => Ok(BhatArg(BhatMode::ExactTriples)),
            "rank" => Ok(BhatArg(BhatMode::RankBased)),
            "subsample" => Ok(BhatArg(BhatMode::Subsampled {
                triples: DEFAULT_SUBSAMPLE_TRIPLES,
                seed: 0,
            })),
            _ => {
                let m = s
                    .strip_prefix("subsample=")
                    .and_then(|m| m.parse::<usize>().ok())
                    .filter(|m| *m > 0)
                    .ok_or_else(|| format!("expected exact, rank or subsample=M, got {s:?}"))?;
                Ok(BhatArg(BhatMode::Subsampled { triples: m, seed: 0 }))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    SpatialMedian,
    Hl,
    TrSpatialMedian,
    TrHl,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestMethod {
    Sign,
    SignedRank,
    Hotelling,
}

/// Shape used by the TR estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScatterArg {
    /// Tyler shape at the Hettmansperger–Randles fixed point.
    Hr,
    /// Signed-rank simultaneous estimator.
    RankHr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "spatial-hl", version, about = "Spatial median and spatial Hodges–Lehmann estimation and testing")]
pub struct Cli {
    /// Worker threads for Monte Carlo loops (default: all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Numeric CSV, one observation per row; an optional header row is skipped.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Write here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// How B̂ is estimated for HL covariances and the signed-rank test.
    #[arg(long, default_value = "rank")]
    pub bhat: BhatArg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Location estimate with its estimated covariance.
    Estimate {
        #[command(flatten)]
        io: InputArgs,
        #[arg(long, value_enum, default_value = "hl")]
        method: EstimateMethod,
        /// Shape for TR methods (default: hr for tr-spatial-median, rank-hr for tr-hl).
        #[arg(long, value_enum)]
        scatter: Option<ScatterArg>,
    },
    /// One-sample test of zero location.
    Test {
        #[command(flatten)]
        io: InputArgs,
        #[arg(long, value_enum, default_value = "signed-rank")]
        method: TestMethod,
    },
    /// Confidence ellipsoid around a location estimate.
    Ellipsoid {
        #[command(flatten)]
        io: InputArgs,
        #[arg(long, value_enum, default_value = "hl")]
        method: EstimateMethod,
        #[arg(long, value_enum)]
        scatter: Option<ScatterArg>,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Δ diagnostic for one (n, p, family) cell.
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value = "normal")]
        family: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Δ study over a grid of (n, γ = p/n) cells.
    Figure3 {
        /// Comma-separated `n:gamma` cells (default 100,200,500 × 0.5,1).
        #[arg(long)]
        grid: Option<String>,
        /// Comma-separated families, e.g. `normal,t3`.
        #[arg(long, default_value = "normal,t3")]
        families: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Replications per cell (default 200, or 1000 with --full-scale).
        #[arg(long)]
        reps: Option<usize>,
        /// Use the full replication count of the original study.
        #[arg(long)]
        full_scale: bool,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Plot-ready points showing plain HL is not affine equivariant and TR-HL is.
    DemoEquivariance {
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

// ---- outputs ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateOutput {
    pub method: EstimateMethod,
    pub n: usize,
    pub p: usize,
    pub estimate: Vec<f64>,
    /// Estimated covariance of the estimate, as rows.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub iterations: usize,
    pub converged: bool,
}

impl EstimateOutput {
    pub fn from_fit(method: EstimateMethod, data: &DataMatrix, fit: &LocationFit) -> Self {
        EstimateOutput {
            method,
            n: data.n(),
            p: data.p(),
            estimate: fit.estimate.clone(),
            covariance: fit.cov_of_estimate.as_ref().map(SymMatrix::to_rows),
            iterations: fit.iterations,
            converged: fit.converged,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs are serializable");
    s.push('\n');
    s
}

fn solver_config(bhat: BhatArg) -> SolverConfig {
    SolverConfig {
        bhat_mode: bhat.0,
        ..SolverConfig::default()
    }
}

fn tr_choice(method: EstimateMethod, scatter: Option<ScatterArg>) -> TrChoice {
    let default = if method == EstimateMethod::TrHl {
        ScatterArg::RankHr
    } else {
        ScatterArg::Hr
    };
    match scatter.unwrap_or(default) {
        ScatterArg::Hr => TrChoice::TylerAtHr,
        ScatterArg::RankHr => TrChoice::RankHr,
    }
}

/// Sample mean with covariance `S/n`.
fn mean_fit(data: &DataMatrix) -> CliResult<LocationFit> {
    let (n, p) = (data.n(), data.p());
    if n < 2 {
        return Err(CliError::Usage("the mean's covariance needs n ≥ 2".into()));
    }
    let mean = data.column_means();
    let mut cov = vec![0.0; p * p];
    for y in data.rows() {
        for i in 0..p {
            for j in 0..p {
                cov[i * p + j] += (y[i] - mean[i]) * (y[j] - mean[j]);
            }
        }
    }
    let scale = 1.0 / ((n - 1) * n) as f64;
    Ok(LocationFit {
        estimate: mean,
        cov_of_estimate: Some(SymMatrix::symmetrized(p, &cov).scaled(scale)),
        iterations: 0,
        converged: true,
        objective: 0.0,
        objective_trace: Vec::new(),
    })
}

pub fn fit_location(
    data: &DataMatrix,
    method: EstimateMethod,
    scatter: Option<ScatterArg>,
    bhat: BhatArg,
) -> CliResult<LocationFit> {
    let cfg = solver_config(bhat);
    let scfg = ScatterConfig::default();
    if scatter.is_some() && !matches!(method, EstimateMethod::TrHl | EstimateMethod::TrSpatialMedian) {
        return Err(CliError::Usage("--scatter only applies to tr-* methods".into()));
    }
    Ok(match method {
        EstimateMethod::SpatialMedian => spatial_median(data, &cfg)?,
        EstimateMethod::Hl => hl_estimator(data, &cfg)?,
        EstimateMethod::TrSpatialMedian => tr_spatial_median(data, &tr_choice(method, scatter), &cfg, &scfg)?.fit,
        EstimateMethod::TrHl => tr_hl(data, &tr_choice(method, scatter), &cfg, &scfg)?.fit,
        EstimateMethod::Mean => mean_fit(data)?,
    })
}

fn parse_families(s: &str) -> CliResult<Vec<Family>> {
    s.split(',')
        .map(|f| f.parse::<Family>().map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

fn parse_grid(s: &str) -> CliResult<Vec<GridCell>> {
    s.split(',')
        .map(|cell| {
            let (n, g) = cell
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("grid cell {cell:?} is not n:gamma")))?;
            let n = n
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad n in grid cell {cell:?}")))?;
            let gamma = g
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad gamma in grid cell {cell:?}")))?;
            Ok(GridCell { n, gamma })
        })
        .collect()
}

fn study_output(reports: &[DeltaReport], format: Format) -> String {
    match format {
        Format::Csv => reports_to_csv(reports),
        Format::Json => to_json(&reports),
    }
}

/// Plot-ready witness: rows `series,index,x,y`.
pub fn equivariance_demo() -> CliResult<String> {
    let cfg = SolverConfig::default();
    let scfg = ScatterConfig::default();
    let data = equivariance_witness();
    let stretched = data.affine(&WITNESS_STRETCH, &[0.0, 0.0])?;
    let stretch = |v: &[f64]| vec![WITNESS_STRETCH[0] * v[0], WITNESS_STRETCH[3] * v[1]];

    let hl0 = hl_estimator(&data, &cfg)?.estimate;
    let hl1 = hl_estimator(&stretched, &cfg)?.estimate;
    let tr0 = tr_hl(&data, &TrChoice::RankHr, &cfg, &scfg)?.fit.estimate;
    let tr1 = tr_hl(&stretched, &TrChoice::RankHr, &cfg, &scfg)?.fit.estimate;

    let mut s = String::from("series,index,x,y\n");
    let mut push = |series: &str, i: usize, v: &[f64]| {
        s.push_str(&format!("{series},{i},{},{}\n", fmt_num(v[0]), fmt_num(v[1])));
    };
    for (i, r) in data.rows().enumerate() {
        push("original", i, r);
    }
    for (i, r) in stretched.rows().enumerate() {
        push("stretched", i, r);
    }
    push("hl_original", 0, &hl0);
    push("hl_stretched", 0, &hl1);
    push("hl_original_mapped", 0, &stretch(&hl0));
    push("tr_hl_original", 0, &tr0);
    push("tr_hl_stretched", 0, &tr1);
    push("tr_hl_original_mapped", 0, &stretch(&tr0));
    Ok(s)
}

/// Result of a command: the text to emit plus an optional trailing error
/// (e.g. output is still written when the solver did not converge).
pub struct Outcome {
    pub output: String,
    pub destination: Option<PathBuf>,
    pub warning: Option<CliError>,
}

fn emit(output: String, destination: Option<PathBuf>) -> Outcome {
    Outcome {
        output,
        destination,
        warning: None,
    }
}

/// Executes a parsed command without touching stdout.
pub fn execute(command: Command) -> CliResult<Outcome> {
    match command {
        Command::Estimate { io, method, scatter } => {
            let data = ingest_csv(&io.input)?;
            let fit = fit_location(&data, method, scatter, io.bhat)?;
            let mut out = emit(to_json(&EstimateOutput::from_fit(method, &data, &fit)), io.output);
            if !fit.converged {
                out.warning = Some(CliError::Numeric(format!(
                    "solver did not converge after {} iterations",
                    fit.iterations
                )));
            }
            Ok(out)
        }
        Command::Test { io, method } => {
            let data = ingest_csv(&io.input)?;
            let result = match method {
                TestMethod::Sign => sign_test(&data)?,
                TestMethod::SignedRank => signed_rank_test(&data, io.bhat.0)?,
                TestMethod::Hotelling => hotelling_t2(&data)?,
            };
            Ok(emit(to_json(&result), io.output))
        }
        Command::Ellipsoid {
            io,
            method,
            scatter,
            level,
        } => {
            if !(level > 0.0 && level < 1.0) {
                return Err(CliError::Usage(format!("--level must be in (0, 1), got {level}")));
            }
            let data = ingest_csv(&io.input)?;
            let fit = fit_location(&data, method, scatter, io.bhat)?;
            let ellipsoid = confidence_ellipsoid(&fit, level)?;
            Ok(emit(to_json(&ellipsoid), io.output))
        }
        Command::Simulate {
            n,
            p,
            family,
            seed,
            reps,
            format,
            output,
        } => {
            let family = family.parse::<Family>().map_err(|e| CliError::Usage(e.to_string()))?;
            let report = delta_replications(n, p, family, seed, reps, &SolverConfig::default())?;
            Ok(emit(study_output(&[report], format), output))
        }
        Command::Figure3 {
            grid,
            families,
            seed,
            reps,
            full_scale,
            format,
            output,
        } => {
            let base = if full_scale {
                StudyConfig::full_scale()
            } else {
                StudyConfig::default()
            };
            let grid = match grid {
                Some(g) => parse_grid(&g)?,
                None => base.grid,
            };
            let families = parse_families(&families)?;
            let reps = reps.unwrap_or(base.replications);
            let reports = figure3_study(&grid, &families, seed, reps, &SolverConfig::default())?;
            Ok(emit(study_output(&reports, format), output))
        }
        Command::DemoEquivariance { output } => Ok(emit(equivariance_demo()?, output)),
    }
}

fn write_outcome(out: &Outcome, stdout: &mut dyn Write) -> CliResult<()> {
    match &out.destination {
        Some(path) => std::fs::write(path, &out.output)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(out.output.as_bytes())
            .map_err(|e| CliError::Usage(format!("cannot write output: {e}"))),
    }
}

/// Parses `args`, runs the command and returns the process exit code. Errors
/// go to `stderr` as one JSON object.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = write!(stdout, "{e}");
            return 0;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string().trim_end().to_string());
            let _ = writeln!(stderr, "{}", err.to_json());
            return err.exit_code();
        }
    };
    let result = with_threads(cli.threads, || execute(cli.command)).and_then(|out| {
        write_outcome(&out, stdout)?;
        match out.warning {
            Some(w) => Err(w),
            None => Ok(()),
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            e.exit_code()
        }
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    match threads {
        None => f(),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?
            .install(f),
    }
}
