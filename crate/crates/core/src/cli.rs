//! Command-line front end.
//!
//! Exit codes: 0 success, 1 bad input or usage, 2 the run completed but the
//! checked property failed (no certificate, shift check violated).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::density::{discrepancy_profile, estimate_density};
use crate::error::{Error, Result};
use crate::flow_round::{read_flow_graph, round_flow, write_flow_graph};
use crate::generators::{generate, GeneratorKind, GeneratorSpec, GOLDEN_SLOPE};
use crate::io::{parse_point, parse_window, read_point_set, write_point_set};
use crate::model::PointSet;
use crate::oracle::{bottleneck_matching, check_shift_invariance, expand_units, Metric};
use crate::spread::{default_density, uniform_spread_certificate, SpreadConfig, Status};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "spreadcert", version, about = "Uniform-spread certification for discrete point sets")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic point set.
    Generate(GenerateArgs),
    /// Normalized cube counts per scale and center (CSV).
    Density(DensityArgs),
    /// Ball-count discrepancy table (CSV).
    Discrepancy(DiscrepancyArgs),
    /// Test one shift of the rough shift invariance property (JSON).
    Shiftcheck(ShiftArgs),
    /// Build a bounded-displacement lattice bijection (JSON).
    Spread(SpreadArgs),
    /// Round an antisymmetric rational edge flow to integers.
    Roundflow(RoundArgs),
    /// Optimal bottleneck matching between two point sets (JSON).
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Lattice,
    PerturbedLattice,
    CutProject1d,
    CutProject2d,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum MetricArg {
    #[default]
    Linf,
    L2,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Linf => Metric::Linf,
            MetricArg::L2 => Metric::L2,
        }
    }
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file (stdout when omitted).
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Lattice spacing / length unit.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0)]
    pub intensity: f64,
    #[arg(long, default_value_t = GOLDEN_SLOPE)]
    pub slope: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `x0,y0:x1,y1`
    #[arg(long)]
    pub window: String,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(short = 'i', long = "input")]
    pub input: PathBuf,
    /// Comma-separated cube sides; `a..b` expands to every integer in between.
    #[arg(long)]
    pub scales: String,
    /// Semicolon-separated cube corners; defaults to the window's lower corner.
    #[arg(long)]
    pub centers: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct DiscrepancyArgs {
    #[arg(short = 'i', long = "input")]
    pub input: PathBuf,
    /// Comma-separated radii; `a..b` expands to every integer in between.
    #[arg(long)]
    pub radii: String,
    /// Semicolon-separated ball centers; defaults to the window center.
    #[arg(long)]
    pub centers: Option<String>,
    /// Density; estimated from the largest window cube when omitted.
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct ShiftArgs {
    #[arg(short = 'i', long = "input")]
    pub input: PathBuf,
    /// Shift vector `x`, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub shift: String,
    /// Displacement bound.
    #[arg(short = 'L', long = "bound")]
    pub bound: f64,
    #[arg(long, value_enum, default_value_t = MetricArg::Linf)]
    pub metric: MetricArg,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct SpreadArgs {
    #[arg(short = 'i', long = "input")]
    pub input: PathBuf,
    /// First cube side, in unit-density coordinates.
    #[arg(short = 'N', long = "n", default_value_t = 4)]
    pub n: u32,
    /// Number of cube sides tried (N, 2N, 4N, ...).
    #[arg(long, default_value_t = 4)]
    pub cap: u32,
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long, value_enum, default_value_t = MetricArg::Linf)]
    pub metric: MetricArg,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct RoundArgs {
    #[arg(short = 'i', long = "input")]
    pub input: PathBuf,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Point set A.
    #[arg(short = 'a', long = "a")]
    pub a: PathBuf,
    /// Point set B.
    #[arg(short = 'b', long = "b")]
    pub b: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::Linf)]
    pub metric: MetricArg,
    #[command(flatten)]
    pub out: Output,
}

/// Parse `argv` (program name first) and execute; returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        other => Error::Input(format!("{}: {other}", path.display())),
    })
}

fn load_set(path: &Path) -> Result<PointSet> {
    with_path(path, read_point_set(&read_text(path)?))
}

fn emit(out: &Output, text: &str) -> Result<()> {
    match &out.output {
        Some(path) => {
            fs::write(path, text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::Input(format!("stdout: {e}")))
        }
    }
}

fn check_distinct(out: &Output, inputs: &[&Path]) -> Result<()> {
    if let Some(p) = &out.output {
        if inputs.iter().any(|i| *i == p.as_path()) {
            return Err(Error::Input(format!("output path {} is also an input", p.display())));
        }
    }
    Ok(())
}

/// `4,8,16` or `10..1000` (inclusive integer range) or a mix.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let bad = || Error::Input(format!("bad range `{part}`"));
            let a: i64 = a.trim().parse().map_err(|_| bad())?;
            let b: i64 = b.trim().parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            out.extend((a..=b).map(|v| v as f64));
        } else {
            out.push(
                part.parse::<f64>()
                    .map_err(|_| Error::Input(format!("bad number `{part}`")))?,
            );
        }
    }
    if out.is_empty() {
        return Err(Error::Input(format!("empty list `{s}`")));
    }
    Ok(out)
}

/// `x,y;x,y`
pub fn parse_points(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(parse_point)
        .collect()
}

fn positive(v: f64, name: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!("{name} must be positive, got {v}")))
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s
}

fn execute(config: &RunConfig) -> Result<i32> {
    match &config.command {
        Command::Generate(a) => {
            positive(a.alpha, "--alpha")?;
            let window = parse_window(&a.window)?;
            let kind = match a.kind {
                Kind::Lattice => GeneratorKind::Lattice,
                Kind::PerturbedLattice => GeneratorKind::PerturbedLattice,
                Kind::CutProject1d => GeneratorKind::CutProject1d,
                Kind::CutProject2d => GeneratorKind::CutProject2d,
                Kind::Poisson => GeneratorKind::Poisson,
            };
            let spec = GeneratorSpec {
                spacing: a.alpha,
                epsilon: a.eps,
                intensity: a.intensity,
                slope: a.slope,
                seed: a.seed,
                ..GeneratorSpec::new(kind, window)
            };
            let set = generate(&spec)?;
            emit(&a.out, &write_point_set(&set))?;
            Ok(EXIT_OK)
        }
        Command::Density(a) => {
            check_distinct(&a.out, &[&a.input])?;
            let set = load_set(&a.input)?;
            let scales = parse_list(&a.scales)?;
            let centers = match &a.centers {
                Some(c) => parse_points(c)?,
                None => vec![set.window().lo.clone()],
            };
            let est = estimate_density(&set, &scales, &centers)?;
            let text = match a.format {
                Format::Csv => est.to_csv(),
                Format::Json => json(&est),
            };
            emit(&a.out, &text)?;
            Ok(EXIT_OK)
        }
        Command::Discrepancy(a) => {
            check_distinct(&a.out, &[&a.input])?;
            let set = load_set(&a.input)?;
            let radii = parse_list(&a.radii)?;
            let centers = match &a.centers {
                Some(c) => parse_points(c)?,
                None => {
                    let w = set.window();
                    vec![w.lo.iter().zip(&w.hi).map(|(l, h)| 0.5 * (l + h)).collect()]
                }
            };
            let density = match a.density {
                Some(d) => d,
                None => default_density(&set)?,
            };
            let profile = discrepancy_profile(&set, density, &centers, &radii)?;
            let text = match a.format {
                Format::Csv => profile.to_csv(),
                Format::Json => json(&profile),
            };
            emit(&a.out, &text)?;
            Ok(EXIT_OK)
        }
        Command::Shiftcheck(a) => {
            check_distinct(&a.out, &[&a.input])?;
            let set = load_set(&a.input)?;
            let shift = parse_point(&a.shift)?;
            let check = check_shift_invariance(&set, &shift, a.bound, a.metric.into())?;
            emit(&a.out, &json(&check))?;
            Ok(if check.holds { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Spread(a) => {
            check_distinct(&a.out, &[&a.input])?;
            let set = load_set(&a.input)?;
            let config = SpreadConfig {
                initial_n: a.n,
                cap: a.cap,
                density: a.density,
                metric: a.metric.into(),
            };
            let cert = uniform_spread_certificate(&set, &config)?;
            let mut text = cert.to_json();
            text.push('\n');
            emit(&a.out, &text)?;
            Ok(if cert.status == Status::Certified { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Roundflow(a) => {
            check_distinct(&a.out, &[&a.input])?;
            let g = with_path(&a.input, read_flow_graph(&read_text(&a.input)?))?;
            let rounded = round_flow(&g)?;
            emit(&a.out, &write_flow_graph(&rounded.to_graph(&g)))?;
            Ok(EXIT_OK)
        }
        Command::Oracle(a) => {
            check_distinct(&a.out, &[&a.a, &a.b])?;
            let sa = load_set(&a.a)?;
            let sb = load_set(&a.b)?;
            if sa.dim() != sb.dim() {
                return Err(Error::Dimension {
                    expected: sa.dim(),
                    got: sb.dim(),
                });
            }
            let m = bottleneck_matching(&expand_units(&sa), &expand_units(&sb), a.metric.into())?;
            let mut text = serde_json::to_string_pretty(&m.to_json()).expect("json");
            text.push('\n');
            emit(&a.out, &text)?;
            Ok(if m.feasible { EXIT_OK } else { EXIT_NEGATIVE })
        }
    }
}
