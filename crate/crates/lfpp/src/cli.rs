//! The `lfpp` command line.
//!
//! Every command prints a one-line summary and then, as its last line,
//! `RESULT <json>`. Exit codes: 0 on success, 2 on a config, usage or IO
//! error, 3 when an exact-mode axiom check records a violation. Lengths are
//! physical units on a torus of side `L`; points are written `x,y`.
//!
//! With `--out DIR` the command writes its artifacts there. Each artifact
//! embeds the effective config (flags after defaults and config-file values
//! are applied, minus `--threads`, which never changes a result). Replica
//! campaigns keep `replicas.jsonl` and resume from it when rerun with the
//! same config.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use lfpp_core::estimators::stats::{median, QuantileSummary};
use lfpp_core::estimators::{
    central_charge, check_crossing_epsilon, check_resamples, check_transfer, check_xi_grid, circle_variance, confluence_replica,
    crossing_row, fit_tables, gamma_from_q, singular_census, transfer_row, AnnulusRatioConfig, AnnulusRatioPlan, ConfluenceConfig,
    ExponentFit, FieldSource, GffSource, RawGffSource, ReplicaTable, SingularCensus, TightnessPlan, XiCritResult,
};
use lfpp_core::field::{mollify, sample_gff_raw, sample_gff_replica};
use lfpp_core::metric::{across_path, around_cycle, ball, build_metric, geodesic};
use lfpp_core::properties::{
    check_scaling_relation, check_translation, compare_metrics, exact_suite, lattice_shift, sample_pairs, tightness_report, AxiomReport,
    CheckMode,
};
use lfpp_core::{AnnulusSpec, FieldGrid, GeodesicPath, GridSpec, LatticeField, LatticeMetric, Point};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::expand_argv;
use crate::exec::RayonExecutor;
use crate::formats::{
    envelope, write_field, write_pgm, write_table_csv, write_vertex_csv, DistanceRecord, Overlay, BALL_COLOR, PATH_COLORS,
};
use crate::store::{Campaign, ReplicaRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

const DEFAULT_EPS_GRID: &str = "0.125,0.0625,0.03125,0.015625";

#[derive(Parser, Debug)]
#[command(
    name = "lfpp",
    version,
    about = "Liouville first passage percolation simulation lab",
    after_help = "Flags may also come from a key=value file given with --config; flags on the command line win."
)]
pub struct Cli {
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// key=value file with flag values (keys: xi, eps_grid, n, L, replicas, seed, observable, ...).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Sample a GFF replica and write it as binary field and PGM heatmap.
    SampleField(SampleFieldArgs),
    /// Unit-square crossing distance across replicas at each epsilon.
    Crossing(CrossingArgs),
    /// Fit the distance exponent Q at one xi.
    FitQ(FitQArgs),
    /// Bracket the xi where the fitted Q crosses 2.
    XiCrit(XiCritArgs),
    /// Across and around distances of one annulus, with overlays.
    Annulus(AnnulusArgs),
    /// Violation fraction of around <= delta^-zeta across over replicas.
    AnnulusRatio(AnnulusRatioArgs),
    /// Normalized annulus distances over a range of radii.
    Tightness(TightnessArgs),
    /// Count stride-lattice vertices whose thickness exceeds a threshold, per seed.
    SingularCensus(SingularCensusArgs),
    /// Geodesics from one point to several targets.
    Geodesics(GeodesicsArgs),
    /// Metric ball around a point.
    Ball(BallArgs),
    /// Axiom checks: the exact suite or the statistical suite.
    Verify(VerifyArgs),
    /// Bi-Lipschitz constants between two metrics on the same field.
    Compare(CompareArgs),
    /// Matter central charge c_M = 25 - 6 Q^2 and the matching gamma.
    CentralCharge(CentralChargeArgs),
    /// Fraction of target pairs whose geodesics share their first k steps.
    Confluence(ConfluenceArgs),
    /// Regression of circle-average variance on log(1/r).
    Variance(VarianceArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GridArgs {
    /// Vertices per side; a power of two, at least 16.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Physical side length of the torus.
    #[arg(long = "L", visible_alias = "side-length", default_value_t = 16.0)]
    #[serde(rename = "L")]
    pub side_length: f64,
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl GridArgs {
    pub fn spec(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(self.n, self.side_length)?)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OutArgs {
    /// Directory for artifacts; nothing is written without it.
    #[arg(long, value_name = "DIR")]
    #[serde(rename = "output_path")]
    pub out: Option<PathBuf>,
}

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got {s:?}"))?;
    let x: f64 = x.trim().parse().map_err(|e| format!("bad x in {s:?}: {e}"))?;
    let y: f64 = y.trim().parse().map_err(|e| format!("bad y in {s:?}: {e}"))?;
    Ok(Point::new(x, y))
}

/// Defaults `epsilon` to four lattice spacings.
fn resolve_epsilon(epsilon: &mut Option<f64>, grid: &GridArgs) -> Result<f64> {
    let spacing = grid.spec()?.spacing();
    Ok(*epsilon.get_or_insert(4.0 * spacing))
}

#[derive(Args, Debug, Serialize)]
pub struct SampleFieldArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Replica index within the seed's stream.
    #[arg(long, default_value_t = 0)]
    pub replica: u64,
    /// Keep the raw torus field instead of zeroing the unit-circle average at the center.
    #[arg(long)]
    pub raw: bool,
    /// Write the field mollified at this scale instead of the bare field.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct CrossingArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Metric exponent: edge weights are exp(xi * h).
    #[arg(long, default_value_t = 0.4)]
    pub xi: f64,
    /// Mollification scales, comma separated; each at least 4 lattice spacings.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = ArgAction::Set, required = true)]
    pub eps: Vec<f64>,
    /// Independent field replicas.
    #[arg(long, default_value_t = 20)]
    pub replicas: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct FitQArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Metric exponent: edge weights are exp(xi * h).
    #[arg(long)]
    pub xi: f64,
    /// Decreasing epsilon grid; the first value must be at least 4 spacings
    /// and eps[0] / eps[last] at most L / 2.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = ArgAction::Set, default_value = DEFAULT_EPS_GRID)]
    pub eps: Vec<f64>,
    /// Independent field replicas.
    #[arg(long, default_value_t = 50)]
    pub replicas: usize,
    /// Bootstrap resamples for the standard error (at least 200).
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct XiCritArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Strictly increasing xi grid.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = ArgAction::Set, default_value = "0.25,0.35,0.45,0.55")]
    pub xi: Vec<f64>,
    /// Decreasing epsilon grid, as for fit-q.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = ArgAction::Set, default_value = DEFAULT_EPS_GRID)]
    pub eps: Vec<f64>,
    /// Independent field replicas.
    #[arg(long, default_value_t = 50)]
    pub replicas: usize,
    /// Bootstrap resamples for the standard error (at least 200).
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct AnnulusArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Metric exponent: edge weights are exp(xi * h).
    #[arg(long, default_value_t = 0.4)]
    pub xi: f64,
    /// Mollification scale; defaults to 4 lattice spacings.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Inner radius.
    #[arg(long)]
    pub r1: f64,
    /// Outer radius.
    #[arg(long)]
    pub r2: f64,
    /// Annulus center; defaults to the domain center.
    #[arg(long, value_parser = parse_point)]
    pub center: Option<Point>,
    /// Replica index of the field to use.
    #[arg(long, default_value_t = 0)]
    pub replica: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct AnnulusRatioArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Metric exponent: edge weights are exp(xi * h).
    #[arg(long, default_value_t = 0.4)]
    pub xi: f64,
    /// Exponent in the bound around <= delta^-zeta * across.
    #[arg(long, default_value_t = 0.5)]
    pub zeta: f64,
    /// Mollification scale; defaults to 4 lattice spacings.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Reference radius r: annuli A(d r, 2 d r) and A(3 d r, 4 d r) about the center.
    #[arg(long, default_value_t = 8.0)]
    pub scale: f64,
    /// Annulus ratios delta; each annulus is A(delta r, 2 delta r) against A(3 delta r, 4 delta r).
    #[arg(long, value_delimiter = ',', num_args = 1.., action = ArgAction::Set, default_value = "0.125,0.0625,0.03125")]
    pub deltas: Vec<f64>,
    /// Independent field replicas.
    #[arg(long, default_value_t = 100)]
    pub replicas: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct TightnessArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Metric exponent: edge weights are exp(xi * h).
    #[arg(long, default_value_t = 0.4)]
    pub xi: f64,
    /// Exponent used in the r^{-xi Q} normalization.
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    /// Scale factors applied to the template annulus.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = ArgAction::Set, default_value = "0.5,1,2")]
    pub radii: Vec<f64>,
    /// Template inner radius.
    #[arg(long, default_value_t = 1.0)]
    pub r1: f64,
    /// Template outer radius.
    #[arg(long, default_value_t = 1.5)]
    pub r2: f64,
    /// Mollification scale; defaults to 4 lattice spacings.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Independent field replicas.
    #[arg(long, default_value_t = 50)]
    pub replicas: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct SingularCensusArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Recorded with the census; thickness depends on the field alone.
    #[arg(long, default_value_t = 0.4)]
    pub xi: f64,
    /// Thickness threshold.
    #[arg(long, default_value_t = 2.0)]
    pub q_ref: f64,
    /// Smallest circle-average radius; defaults to 2 lattice spacings.
    #[arg(long)]
    pub r_min: Option<f64>,
    /// Census every stride-th vertex in each direction (at least 4).
    #[arg(long, default_value_t = 4)]
    pub stride: usize,
    /// Number of seeds, starting at --seed.
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct GeodesicsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Metric exponent: edge weights are exp(xi * h).
    #[arg(long, default_value_t = 0.4)]
    pub xi: f64,
    /// Mollification scale; defaults to 4 lattice spacings.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Source point; defaults to the domain center.
    #[arg(long, value_parser = parse_point)]
    pub from: Option<Point>,
    /// Targets separated by semicolons, e.g. "1,2;3.5,4".
    #[arg(long, value_parser = parse_point, value_delimiter = ';', num_args = 1.., action = ArgAction::Set, required = true)]
    pub to: Vec<Point>,
    /// Replica index of the field to use.
    #[arg(long, default_value_t = 0)]
    pub replica: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct BallArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Metric exponent: edge weights are exp(xi * h).
    #[arg(long, default_value_t = 0.4)]
    pub xi: f64,
    /// Mollification scale; defaults to 4 lattice spacings.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Ball center; defaults to the domain center.
    #[arg(long, value_parser = parse_point)]
    pub center: Option<Point>,
    /// Metric radius.
    #[arg(long)]
    pub radius: f64,
    /// Replica index of the field to use.
    #[arg(long, default_value_t = 0)]
    pub replica: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Metric axioms, length space, locality and Weyl scaling on one field.
    Exact,
    /// Translation in law and the epsilon scale-transfer relation.
    Statistical,
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::Exact)]
    pub suite: Suite,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Metric exponent: edge weights are exp(xi * h).
    #[arg(long, default_value_t = 0.4)]
    pub xi: f64,
    /// Mollification scale; defaults to 4 lattice spacings.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Sampled vertex pairs per check.
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    /// Replicas for the translation rank test.
    #[arg(long, default_value_t = 50)]
    pub replicas: usize,
    /// Translation shift, a lattice multiple; defaults to (L/4, L/4) rounded to the lattice.
    #[arg(long, value_parser = parse_point)]
    pub shift: Option<Point>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Metric exponent: edge weights are exp(xi * h).
    #[arg(long, default_value_t = 0.4)]
    pub xi: f64,
    /// Scale of the first metric; defaults to 4 lattice spacings.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// xi of the second metric; defaults to --xi.
    #[arg(long)]
    pub xi_b: Option<f64>,
    /// Scale of the second metric; defaults to twice --epsilon.
    #[arg(long)]
    pub epsilon_b: Option<f64>,
    /// Random point pairs.
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    /// Replica index of the field to use.
    #[arg(long, default_value_t = 0)]
    pub replica: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct CentralChargeArgs {
    /// Distance exponent Q.
    #[arg(long)]
    pub q: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct ConfluenceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Metric exponent: edge weights are exp(xi * h).
    #[arg(long, default_value_t = 0.4)]
    pub xi: f64,
    /// Mollification scale; defaults to 4 lattice spacings.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Targets sit on the circle of this radius about the center.
    #[arg(long, default_value_t = 2.0)]
    pub radius: f64,
    /// Targets spaced evenly on the circle.
    #[arg(long, default_value_t = 16)]
    pub targets: usize,
    /// Shared steps required after the source.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Independent field replicas.
    #[arg(long, default_value_t = 50)]
    pub replicas: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct VarianceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Circle radii.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = ArgAction::Set, default_value = "0.25,0.5,1,2")]
    pub radii: Vec<f64>,
    /// Independent field replicas.
    #[arg(long, default_value_t = 100)]
    pub replicas: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

/// What a command reports back: its summary line, the `RESULT` payload and
/// the exit code.
pub struct Outcome {
    pub summary: String,
    pub result: Value,
    pub code: i32,
}

impl Outcome {
    fn ok(summary: String, result: Value) -> Self {
        Self { summary, result, code: EXIT_OK }
    }
}

/// Parses `argv` (program name first), runs the command and writes its
/// output. Returns the process exit code.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let names: Vec<String> = Cli::command().get_subcommands().map(|c| c.get_name().to_string()).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let argv = match expand_argv(argv, &names) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            return EXIT_CONFIG;
        }
    };
    // The default epsilon grid of the exponent fits needs 512 vertices per side.
    let command = Cli::command()
        .args_override_self(true)
        .mut_subcommands(|s| s.args_override_self(true))
        .mut_subcommand("fit-q", |s| s.mut_arg("n", |a| a.default_value("512")))
        .mut_subcommand("xi-crit", |s| s.mut_arg("n", |a| a.default_value("512")));
    let cli = match command.try_get_matches_from(argv).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_CONFIG
                }
            };
        }
    };
    match execute(cli) {
        Ok(outcome) => {
            let _ = writeln!(stdout, "{}", outcome.summary);
            let _ = writeln!(stdout, "RESULT {}", outcome.result);
            outcome.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            let _ = writeln!(stdout, "RESULT {}", json!({ "error": format!("{e:#}") }));
            EXIT_CONFIG
        }
    }
}

/// Exit code of `verify`: any violation of an exact check is fatal, while
/// statistical checks only report.
pub fn verify_exit_code(reports: &[AxiomReport]) -> i32 {
    if reports.iter().any(|r| r.mode == CheckMode::Exact && r.violations > 0) {
        EXIT_VIOLATION
    } else {
        EXIT_OK
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

/// Shared state of one invocation.
struct Ctx {
    exec: RayonExecutor,
    out: Option<PathBuf>,
    config: Value,
    written: Vec<String>,
}

impl Ctx {
    fn new(threads: usize, out: Option<PathBuf>, config: Value) -> Result<Self> {
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        }
        Ok(Self { exec: RayonExecutor::new(threads)?, out, config, written: Vec::new() })
    }

    fn batch(&self) -> usize {
        4 * self.exec.threads()
    }

    fn path(&self, name: &str) -> Option<PathBuf> {
        self.out.as_ref().map(|d| d.join(name))
    }

    /// Writes an artifact produced by `fill`; a no-op without `--out`.
    fn emit(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>, &Value) -> Result<()>) -> Result<()> {
        let Some(path) = self.path(name) else { return Ok(()) };
        let mut buf = Vec::new();
        fill(&mut buf, &self.config)?;
        std::fs::write(&path, buf).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn emit_json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<()> {
        self.emit(name, |buf, config| {
            buf.extend(envelope(config, result)?);
            Ok(())
        })
    }

    fn campaign(&mut self, per_replica: usize) -> Result<Campaign> {
        match self.path("replicas.jsonl") {
            Some(p) => {
                let c = Campaign::open(&p, &self.config, per_replica)?;
                self.written.push("replicas.jsonl".to_string());
                Ok(c)
            }
            None => Ok(Campaign::ephemeral(per_replica)),
        }
    }

    fn finish(self, summary: String, mut result: Value) -> Outcome {
        if let Value::Object(m) = &mut result {
            m.insert("artifacts".to_string(), json!(self.written));
        }
        Outcome::ok(summary, result)
    }
}

fn check_xi(xi: f64) -> Result<()> {
    ensure!(xi > 0.0 && xi.is_finite(), "xi must be positive and finite, got {xi}");
    Ok(())
}

fn check_replicas(replicas: usize) -> Result<()> {
    ensure!(replicas > 0, "need at least one replica");
    Ok(())
}

fn record(seed: u64, replica: usize, xi: f64, epsilon: Option<f64>, observable: &str, param: Option<f64>, value: f64) -> ReplicaRecord {
    ReplicaRecord { seed, replica, xi, epsilon, observable: observable.to_string(), param, value }
}

fn execute(cli: Cli) -> Result<Outcome> {
    let mut command = cli.command;
    resolve_defaults(&mut command)?;
    let config = serde_json::to_value(&command)?;
    let out = output_dir(&command);
    let ctx = || Ctx::new(cli.threads, out.clone(), config.clone());
    match command {
        Command::SampleField(a) => sample_field(ctx()?, &a),
        Command::Crossing(a) => crossing(ctx()?, &a),
        Command::FitQ(a) => fit_q(ctx()?, &a),
        Command::XiCrit(a) => xi_crit(ctx()?, &a),
        Command::Annulus(a) => annulus(ctx()?, &a),
        Command::AnnulusRatio(a) => annulus_ratio(ctx()?, &a),
        Command::Tightness(a) => tightness(ctx()?, &a),
        Command::SingularCensus(a) => census(ctx()?, &a),
        Command::Geodesics(a) => geodesics(ctx()?, &a),
        Command::Ball(a) => ball_cmd(ctx()?, &a),
        Command::Verify(a) => verify(ctx()?, &a),
        Command::Compare(a) => compare(ctx()?, &a),
        Command::CentralCharge(a) => central_charge_cmd(&a),
        Command::Confluence(a) => confluence(ctx()?, &a),
        Command::Variance(a) => variance(ctx()?, &a),
    }
}

/// Fills in data-dependent defaults so the echoed config is complete.
fn resolve_defaults(command: &mut Command) -> Result<()> {
    match command {
        Command::SampleField(_) | Command::Crossing(_) | Command::FitQ(_) | Command::XiCrit(_) => {}
        Command::CentralCharge(_) | Command::Variance(_) => {}
        Command::Annulus(a) => _ = resolve_epsilon(&mut a.epsilon, &a.grid)?,
        Command::AnnulusRatio(a) => _ = resolve_epsilon(&mut a.epsilon, &a.grid)?,
        Command::Tightness(a) => _ = resolve_epsilon(&mut a.epsilon, &a.grid)?,
        Command::Geodesics(a) => _ = resolve_epsilon(&mut a.epsilon, &a.grid)?,
        Command::Ball(a) => _ = resolve_epsilon(&mut a.epsilon, &a.grid)?,
        Command::Confluence(a) => _ = resolve_epsilon(&mut a.epsilon, &a.grid)?,
        Command::SingularCensus(a) => {
            let s = a.grid.spec()?.spacing();
            a.r_min.get_or_insert(2.0 * s);
        }
        Command::Verify(a) => {
            resolve_epsilon(&mut a.epsilon, &a.grid)?;
            let grid = a.grid.spec()?;
            let step = (grid.n() / 4) as f64 * grid.spacing();
            a.shift.get_or_insert(Point::new(step, step));
        }
        Command::Compare(a) => {
            let e = resolve_epsilon(&mut a.epsilon, &a.grid)?;
            a.xi_b.get_or_insert(a.xi);
            a.epsilon_b.get_or_insert(2.0 * e);
        }
    }
    Ok(())
}

fn output_dir(command: &Command) -> Option<PathBuf> {
    match command {
        Command::SampleField(a) => a.out.out.clone(),
        Command::Crossing(a) => a.out.out.clone(),
        Command::FitQ(a) => a.out.out.clone(),
        Command::XiCrit(a) => a.out.out.clone(),
        Command::Annulus(a) => a.out.out.clone(),
        Command::AnnulusRatio(a) => a.out.out.clone(),
        Command::Tightness(a) => a.out.out.clone(),
        Command::SingularCensus(a) => a.out.out.clone(),
        Command::Geodesics(a) => a.out.out.clone(),
        Command::Ball(a) => a.out.out.clone(),
        Command::Verify(a) => a.out.out.clone(),
        Command::Compare(a) => a.out.out.clone(),
        Command::Confluence(a) => a.out.out.clone(),
        Command::Variance(a) => a.out.out.clone(),
        Command::CentralCharge(_) => None,
    }
}

/// Normalized field of one replica and its metric.
fn replica_metric(grid: &GridArgs, replica: usize, xi: f64, epsilon: f64) -> Result<(FieldGrid, LatticeMetric, Vec<f64>)> {
    check_xi(xi)?;
    let spec = grid.spec()?;
    let h = GffSource { grid: spec, seed: grid.seed }.field(replica)?;
    let phi = mollify(&h, epsilon)?;
    let metric = build_metric(&phi, xi, None)?;
    let smooth = phi.values().to_vec();
    Ok((h, metric, smooth))
}

fn sample_field(mut ctx: Ctx, a: &SampleFieldArgs) -> Result<Outcome> {
    let grid = a.grid.spec()?;
    let h = if a.raw { sample_gff_raw(grid, a.grid.seed, a.replica) } else { sample_gff_replica(grid, a.grid.seed, a.replica)? };
    let values = match a.epsilon {
        Some(e) => mollify(&h, e)?.values().to_vec(),
        None => h.values().to_vec(),
    };
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), &v| (l.min(v), u.max(v)));
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let unit = h.unit_circle_average()?;
    ctx.emit("field.bin", |buf, c| write_field(buf, &grid, &values, c))?;
    ctx.emit("field.pgm", |buf, c| write_pgm(buf, &grid, &values, c))?;
    let result = json!({
        "command": "sample-field", "n": grid.n(), "L": grid.side_length(), "spacing": grid.spacing(),
        "min": lo, "max": hi, "mean": mean, "unit_circle_average": unit,
    });
    ctx.emit_json("summary.json", &result)?;
    let summary = format!("sample-field: n={} L={} min={lo:.4} max={hi:.4} mean={mean:.4}", grid.n(), grid.side_length());
    Ok(ctx.finish(summary, result))
}

#[derive(Serialize)]
struct EpsSummary {
    epsilon: f64,
    median: f64,
    quantiles: QuantileSummary,
}

fn crossing(mut ctx: Ctx, a: &CrossingArgs) -> Result<Outcome> {
    let grid = a.grid.spec()?;
    check_xi(a.xi)?;
    check_replicas(a.replicas)?;
    for &e in &a.eps {
        check_crossing_epsilon(&grid, e)?;
    }
    let source = GffSource { grid, seed: a.grid.seed };
    let mut campaign = ctx.campaign(a.eps.len())?;
    let rows = campaign.run(a.replicas, &ctx.exec, ctx.batch(), |k| {
        let values = crossing_row(&source.field(k)?, a.xi, &a.eps)?;
        Ok(a.eps.iter().zip(values).map(|(&e, v)| record(a.grid.seed, k, a.xi, Some(e), "crossing", None, v)).collect())
    })?;
    let per_eps: Vec<EpsSummary> = a
        .eps
        .iter()
        .enumerate()
        .map(|(i, &epsilon)| {
            let xs: Vec<f64> = rows.iter().map(|r| r[i].value).collect();
            EpsSummary { epsilon, median: median(&xs), quantiles: QuantileSummary::of(&xs) }
        })
        .collect();
    ctx.emit_json("summary.json", &per_eps)?;
    let table: Vec<Vec<f64>> = per_eps
        .iter()
        .map(|s| vec![s.epsilon, s.quantiles.q05, s.quantiles.q25, s.quantiles.q50, s.quantiles.q75, s.quantiles.q95])
        .collect();
    ctx.emit("crossing.csv", |buf, c| write_table_csv(buf, &["epsilon", "q05", "q25", "q50", "q75", "q95"], &table, c))?;
    let medians: Vec<f64> = per_eps.iter().map(|s| s.median).collect();
    let summary = format!("crossing: xi={} replicas={} medians={medians:?}", a.xi, a.replicas);
    Ok(ctx.finish(summary, json!({ "command": "crossing", "eps": a.eps, "medians": medians })))
}

/// Transfer-crossing campaign shared by `fit-q` and `xi-crit`: one record per
/// (xi, eps), xi-major, and one exponent fit per xi.
fn fit_campaign(ctx: &mut Ctx, grid: &GridArgs, xis: &[f64], eps: &[f64], replicas: usize, resamples: usize) -> Result<Vec<ExponentFit>> {
    let spec = grid.spec()?;
    check_transfer(&spec, xis, eps)?;
    check_resamples(resamples)?;
    check_replicas(replicas)?;
    let source = GffSource { grid: spec, seed: grid.seed };
    let mut campaign = ctx.campaign(xis.len() * eps.len())?;
    let rows = campaign.run(replicas, &ctx.exec, ctx.batch(), |k| {
        let row = transfer_row(&source.field(k)?, xis, eps)?;
        let mut out = Vec::with_capacity(xis.len() * eps.len());
        for (&xi, values) in xis.iter().zip(row) {
            for (&e, v) in eps.iter().zip(values) {
                out.push(record(grid.seed, k, xi, Some(e), "transfer_crossing", None, v));
            }
        }
        Ok(out)
    })?;
    let e = eps.len();
    let tables: Vec<ReplicaTable> = (0..xis.len())
        .map(|x| ReplicaTable {
            eps_grid: eps.to_vec(),
            rows: rows.iter().map(|r| r[x * e..(x + 1) * e].iter().map(|rec| rec.value).collect()).collect(),
        })
        .collect();
    let fits = fit_tables(xis, &tables, resamples, grid.seed)?;
    let table: Vec<Vec<f64>> = fits.iter().flat_map(|f| f.eps_grid.iter().zip(&f.medians).map(move |(&e, &m)| vec![f.xi, e, m])).collect();
    ctx.emit("medians.csv", |buf, c| write_table_csv(buf, &["xi", "epsilon", "median"], &table, c))?;
    Ok(fits)
}

fn fit_q(mut ctx: Ctx, a: &FitQArgs) -> Result<Outcome> {
    let fit = fit_campaign(&mut ctx, &a.grid, &[a.xi], &a.eps, a.replicas, a.resamples)?.remove(0);
    ctx.emit_json("summary.json", &fit)?;
    let summary = format!("fit-q: xi={} Q_hat={:.4} stderr={:.4} c_M_hat={:.4}", fit.xi, fit.q_hat, fit.stderr, fit.c_m_hat);
    let result = json!({
        "command": "fit-q", "xi": fit.xi, "Q_hat": fit.q_hat, "c_M_hat": fit.c_m_hat,
        "gamma_hat": fit.gamma_hat, "stderr": fit.stderr, "replicas": fit.replicas,
    });
    Ok(ctx.finish(summary, result))
}

fn xi_crit(mut ctx: Ctx, a: &XiCritArgs) -> Result<Outcome> {
    check_xi_grid(&a.xi)?;
    let fits = fit_campaign(&mut ctx, &a.grid, &a.xi, &a.eps, a.replicas, a.resamples)?;
    let qs: Vec<f64> = fits.iter().map(|f| f.q_hat).collect();
    let bracket = lfpp_core::estimators::bracket_q_crossing(&a.xi, &qs)?;
    let res = XiCritResult { bracket, fits };
    ctx.emit_json("summary.json", &res)?;
    let summary = match &res.bracket {
        Some(b) => format!("xi-crit: Q crosses 2 in [{}, {}], root ~ {:.4}", b.lower, b.upper, b.root),
        None => "xi-crit: Q does not cross 2 on this grid".to_string(),
    };
    Ok(ctx.finish(summary, json!({ "command": "xi-crit", "xi": a.xi, "Q_hat": qs, "bracket": res.bracket })))
}

fn annulus(mut ctx: Ctx, a: &AnnulusArgs) -> Result<Outcome> {
    let eps = a.epsilon.context("epsilon unresolved")?;
    let grid = a.grid.spec()?;
    let spec = AnnulusSpec::new(a.center.unwrap_or(grid.center()), a.r1, a.r2);
    spec.validate(&grid)?;
    let (_, metric, smooth) = replica_metric(&a.grid, a.replica, a.xi, eps)?;
    let (d_across, path) = across_path(&metric, &spec)?;
    let cycle = around_cycle(&metric, &spec)?;
    let mut closed = cycle.vertices.clone();
    closed.push(closed[0]);
    let loop_path = GeodesicPath { vertices: closed, length: cycle.length };
    let records = [
        DistanceRecord { xi: a.xi, epsilon: eps, query: "across".into(), value: d_across, seed: a.grid.seed },
        DistanceRecord { xi: a.xi, epsilon: eps, query: "around".into(), value: cycle.length, seed: a.grid.seed },
    ];
    ctx.emit_json("distances.json", &records)?;
    ctx.emit("across_path.csv", |buf, c| write_vertex_csv(buf, &grid, &path.vertices, &path.cumulative(&metric), c))?;
    ctx.emit("around_cycle.csv", |buf, c| write_vertex_csv(buf, &grid, &loop_path.vertices, &loop_path.cumulative(&metric), c))?;
    let mut img = Overlay::new(&grid, &smooth);
    img.trace(&cycle.vertices, PATH_COLORS[0]);
    img.trace(&path.vertices, PATH_COLORS[1]);
    ctx.emit("annulus.ppm", |buf, c| img.write_ppm(buf, c))?;
    let ratio = cycle.length / d_across;
    let summary = format!("annulus: across={d_across:.6} around={:.6} ratio={ratio:.4}", cycle.length);
    Ok(ctx.finish(summary, json!({ "command": "annulus", "across": d_across, "around": cycle.length, "ratio": ratio })))
}

fn annulus_ratio(mut ctx: Ctx, a: &AnnulusRatioArgs) -> Result<Outcome> {
    let grid = a.grid.spec()?;
    check_replicas(a.replicas)?;
    let cfg = AnnulusRatioConfig {
        epsilon: a.epsilon.context("epsilon unresolved")?,
        scale: a.scale,
        deltas: a.deltas.clone(),
        centers: vec![grid.center()],
        replicas: a.replicas,
    };
    let plan = AnnulusRatioPlan::new(&grid, a.xi, a.zeta, &cfg)?;
    let source = GffSource { grid, seed: a.grid.seed };
    let mut campaign = ctx.campaign(plan.row_len())?;
    let rows = campaign.run(a.replicas, &ctx.exec, ctx.batch(), |k| {
        let row = plan.row(&source.field(k)?)?;
        Ok(a.deltas
            .iter()
            .zip(row)
            .map(|(&d, v)| record(a.grid.seed, k, a.xi, Some(cfg.epsilon), "around_over_across", Some(d), v))
            .collect())
    })?;
    let values: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|rec| rec.value).collect()).collect();
    let report = plan.report(&values)?;
    ctx.emit_json("summary.json", &report)?;
    let table: Vec<Vec<f64>> = report.deltas.iter().zip(&report.violation_fraction).map(|(&d, &f)| vec![d, f]).collect();
    ctx.emit("violations.csv", |buf, c| write_table_csv(buf, &["delta", "violation_fraction"], &table, c))?;
    let non_increasing = report.violation_fraction.windows(2).all(|w| w[1] <= w[0]);
    let summary = format!("annulus-ratio: zeta={} violation fractions {:?}", a.zeta, report.violation_fraction);
    let result = json!({
        "command": "annulus-ratio", "deltas": report.deltas, "violation_fraction": report.violation_fraction,
        "non_increasing": non_increasing,
    });
    Ok(ctx.finish(summary, result))
}

fn tightness(mut ctx: Ctx, a: &TightnessArgs) -> Result<Outcome> {
    let grid = a.grid.spec()?;
    check_replicas(a.replicas)?;
    let eps = a.epsilon.context("epsilon unresolved")?;
    let template = AnnulusSpec::new(grid.center(), a.r1, a.r2);
    let plan = TightnessPlan::new(&grid, a.xi, a.q, &a.radii, &template, eps)?;
    let source = GffSource { grid, seed: a.grid.seed };
    let mut campaign = ctx.campaign(2 * a.radii.len())?;
    let rows = campaign.run(a.replicas, &ctx.exec, ctx.batch(), |k| {
        let row = plan.row(&source.field(k)?)?;
        let mut out = Vec::with_capacity(2 * row.len());
        for (&r, (across, around)) in a.radii.iter().zip(row) {
            out.push(record(a.grid.seed, k, a.xi, Some(eps), "across_normalized", Some(r), across));
            out.push(record(a.grid.seed, k, a.xi, Some(eps), "around_normalized", Some(r), around));
        }
        Ok(out)
    })?;
    let pairs: Vec<Vec<(f64, f64)>> = rows.iter().map(|r| r.chunks(2).map(|c| (c[0].value, c[1].value)).collect()).collect();
    let stats = plan.summarize(&pairs)?;
    let report = tightness_report(&stats);
    ctx.emit_json("summary.json", &json!({ "stats": stats, "report": report }))?;
    let table: Vec<Vec<f64>> = (0..stats.radii.len())
        .map(|i| {
            let (x, y) = (&stats.normalized_across[i], &stats.normalized_around[i]);
            vec![stats.radii[i], x.q05, x.q50, x.q95, y.q05, y.q50, y.q95]
        })
        .collect();
    let header = ["radius", "across_q05", "across_q50", "across_q95", "around_q05", "around_q50", "around_q95"];
    ctx.emit("tightness.csv", |buf, c| write_table_csv(buf, &header, &table, c))?;
    let across: Vec<f64> = stats.normalized_across.iter().map(|q| q.q50).collect();
    let around: Vec<f64> = stats.normalized_around.iter().map(|q| q.q50).collect();
    let summary =
        format!("tightness: median ratio {:.4} ({})", report.worst_error, if report.passed() { "in band" } else { "out of band" });
    let result = json!({
        "command": "tightness", "radii": stats.radii, "across_medians": across, "around_medians": around,
        "in_band": report.passed(),
    });
    Ok(ctx.finish(summary, result))
}

fn census(mut ctx: Ctx, a: &SingularCensusArgs) -> Result<Outcome> {
    let grid = a.grid.spec()?;
    check_replicas(a.replicas)?;
    let r_min = a.r_min.context("r_min unresolved")?;
    let mut campaign = ctx.campaign(2)?;
    let rows = campaign.run(a.replicas, &ctx.exec, ctx.batch(), |k| {
        let seed = a.grid.seed.wrapping_add(k as u64);
        let c = singular_census(a.xi, a.q_ref, grid, r_min, seed, a.stride)?;
        Ok(vec![
            record(seed, k, a.xi, None, "census_vertices", Some(a.q_ref), c.total_vertices as f64),
            record(seed, k, a.xi, None, "thickness_exceed_count", Some(a.q_ref), c.exceed_count as f64),
        ])
    })?;
    let censuses: Vec<(u64, SingularCensus)> = rows
        .iter()
        .map(|r| {
            let (total, exceed) = (r[0].value as usize, r[1].value as usize);
            let c = SingularCensus {
                xi: a.xi,
                q_ref: a.q_ref,
                r_min,
                total_vertices: total,
                exceed_count: exceed,
                fraction: exceed as f64 / total as f64,
            };
            (r[0].seed, c)
        })
        .collect();
    let positive = censuses.iter().filter(|(_, c)| c.exceed_count > 0).count();
    let fractions: Vec<f64> = censuses.iter().map(|(_, c)| c.fraction).collect();
    let per_seed: Vec<Value> = censuses.iter().map(|(s, c)| json!({ "seed": s, "census": c })).collect();
    ctx.emit_json("summary.json", &per_seed)?;
    let table: Vec<Vec<f64>> = censuses.iter().map(|(s, c)| vec![*s as f64, c.exceed_count as f64, c.fraction]).collect();
    ctx.emit("census.csv", |buf, c| write_table_csv(buf, &["seed", "exceed_count", "fraction"], &table, c))?;
    let summary = format!("singular-census: thickness > {} somewhere in {positive} of {} seeds", a.q_ref, a.replicas);
    let result = json!({
        "command": "singular-census", "q_ref": a.q_ref, "seeds": a.replicas, "positive_seeds": positive, "fractions": fractions,
    });
    Ok(ctx.finish(summary, result))
}

fn geodesics(mut ctx: Ctx, a: &GeodesicsArgs) -> Result<Outcome> {
    let eps = a.epsilon.context("epsilon unresolved")?;
    let grid = a.grid.spec()?;
    let (_, metric, smooth) = replica_metric(&a.grid, a.replica, a.xi, eps)?;
    let z = grid.nearest_vertex(a.from.unwrap_or(grid.center()));
    let mut img = Overlay::new(&grid, &smooth);
    let mut records = Vec::new();
    for (i, &p) in a.to.iter().enumerate() {
        let w = grid.nearest_vertex(p);
        let path = geodesic(&metric, z, w)?;
        ctx.emit(&format!("geodesic_{i}.csv"), |buf, c| write_vertex_csv(buf, &grid, &path.vertices, &path.cumulative(&metric), c))?;
        img.trace(&path.vertices, PATH_COLORS[i % PATH_COLORS.len()]);
        records.push(DistanceRecord { xi: a.xi, epsilon: eps, query: format!("geodesic {i}"), value: path.length, seed: a.grid.seed });
    }
    img.trace(&[z], BALL_COLOR);
    ctx.emit_json("distances.json", &records)?;
    ctx.emit("geodesics.ppm", |buf, c| img.write_ppm(buf, c))?;
    let lengths: Vec<f64> = records.iter().map(|r| r.value).collect();
    let summary = format!("geodesics: {} paths, lengths {lengths:?}", lengths.len());
    Ok(ctx.finish(summary, json!({ "command": "geodesics", "lengths": lengths })))
}

fn ball_cmd(mut ctx: Ctx, a: &BallArgs) -> Result<Outcome> {
    let eps = a.epsilon.context("epsilon unresolved")?;
    let grid = a.grid.spec()?;
    let (_, metric, smooth) = replica_metric(&a.grid, a.replica, a.xi, eps)?;
    let z = grid.nearest_vertex(a.center.unwrap_or(grid.center()));
    let members = ball(&metric, z, a.radius)?;
    let table = metric.distance_field(&[z], None)?;
    let dist: Vec<f64> = members.iter().map(|&v| table.dist[v]).collect();
    ctx.emit("ball.csv", |buf, c| write_vertex_csv(buf, &grid, &members, &dist, c))?;
    let mut img = Overlay::new(&grid, &smooth);
    img.fill(&members, BALL_COLOR, 0.5);
    img.trace(&[z], PATH_COLORS[0]);
    ctx.emit("ball.ppm", |buf, c| img.write_ppm(buf, c))?;
    let area = members.len() as f64 * grid.spacing() * grid.spacing();
    let records = [DistanceRecord { xi: a.xi, epsilon: eps, query: "ball area".into(), value: area, seed: a.grid.seed }];
    ctx.emit_json("distances.json", &records)?;
    let summary = format!("ball: radius {} holds {} vertices (area {area:.4})", a.radius, members.len());
    Ok(ctx.finish(summary, json!({ "command": "ball", "radius": a.radius, "vertices": members.len(), "area": area })))
}

fn verify(mut ctx: Ctx, a: &VerifyArgs) -> Result<Outcome> {
    let grid = a.grid.spec()?;
    let eps = a.epsilon.context("epsilon unresolved")?;
    check_xi(a.xi)?;
    let reports: Vec<AxiomReport> = match a.suite {
        Suite::Exact => exact_suite(grid, a.grid.seed, a.xi, eps, a.pairs)?,
        Suite::Statistical => {
            let shift = a.shift.context("shift unresolved")?;
            lattice_shift(&grid, shift)?;
            let source = RawGffSource { grid, seed: a.grid.seed };
            let translation = check_translation(&source, a.xi, eps, shift, a.replicas, &ctx.exec)?;
            let h = GffSource { grid, seed: a.grid.seed }.field(0)?;
            let pairs = sample_pairs(&grid.half()?, a.pairs, a.grid.seed);
            let scaling = check_scaling_relation(&h, a.xi, eps, &pairs)?;
            vec![translation, scaling]
        }
    };
    ctx.emit_json("reports.json", &reports)?;
    let exact_violations: usize = reports.iter().filter(|r| r.mode == CheckMode::Exact).map(|r| r.violations).sum();
    let lines: Vec<String> = reports.iter().map(|r| format!("{:?}:{}", r.axiom, if r.passed() { "ok" } else { "FAIL" })).collect();
    let summary = format!("verify {:?}: {}", a.suite, lines.join(" "));
    let result = json!({
        "command": "verify", "suite": a.suite, "exact_violations": exact_violations,
        "passed": reports.iter().all(AxiomReport::passed),
        "reports": reports.iter().map(|r| json!({
            "axiom": r.axiom, "mode": r.mode, "checked": r.checked, "violations": r.violations,
            "worst_error": r.worst_error, "statistic": r.statistic,
        })).collect::<Vec<_>>(),
    });
    let mut outcome = ctx.finish(summary, result);
    outcome.code = verify_exit_code(&reports);
    Ok(outcome)
}

fn compare(mut ctx: Ctx, a: &CompareArgs) -> Result<Outcome> {
    let grid = a.grid.spec()?;
    let (eps_a, xi_b, eps_b) = (a.epsilon.context("unresolved")?, a.xi_b.context("unresolved")?, a.epsilon_b.context("unresolved")?);
    check_xi(a.xi)?;
    check_xi(xi_b)?;
    let h = GffSource { grid, seed: a.grid.seed }.field(a.replica)?;
    let ma = build_metric(&mollify(&h, eps_a)?, a.xi, None)?;
    let mb = build_metric(&mollify(&h, eps_b)?, xi_b, None)?;
    let est = compare_metrics(&ma, &mb, &sample_pairs(&grid, a.pairs, a.grid.seed))?;
    ctx.emit_json("summary.json", &est)?;
    let summary = format!("compare: c_hat={:.6} C_hat={:.6} over {} pairs", est.c_hat, est.big_c_hat, est.pairs_sampled);
    let result = json!({ "command": "compare", "c_hat": est.c_hat, "C_hat": est.big_c_hat, "pairs_sampled": est.pairs_sampled });
    Ok(ctx.finish(summary, result))
}

fn central_charge_cmd(a: &CentralChargeArgs) -> Result<Outcome> {
    ensure!(a.q.is_finite() && a.q > 0.0, "Q must be positive and finite, got {}", a.q);
    let c = central_charge(a.q);
    let gamma = gamma_from_q(a.q);
    Ok(Outcome::ok(format!("{c}"), json!({ "command": "central-charge", "Q": a.q, "c_M": c, "gamma": gamma })))
}

fn confluence(mut ctx: Ctx, a: &ConfluenceArgs) -> Result<Outcome> {
    let grid = a.grid.spec()?;
    check_xi(a.xi)?;
    check_replicas(a.replicas)?;
    let cfg = ConfluenceConfig {
        epsilon: a.epsilon.context("epsilon unresolved")?,
        target_radius: a.radius,
        targets: a.targets,
        k: a.k,
        replicas: a.replicas,
    };
    let source = GffSource { grid, seed: a.grid.seed };
    let mut campaign = ctx.campaign(1)?;
    let rows = campaign.run(a.replicas, &ctx.exec, ctx.batch(), |k| {
        let f = confluence_replica(&source, a.xi, a.grid.seed, &cfg, k)?;
        Ok(vec![record(a.grid.seed, k, a.xi, Some(cfg.epsilon), "confluence_fraction", Some(a.k as f64), f)])
    })?;
    let fractions: Vec<f64> = rows.iter().map(|r| r[0].value).collect();
    let positive = fractions.iter().filter(|&&f| f > 0.0).count();
    ctx.emit_json("summary.json", &json!({ "fractions": fractions, "positive": positive }))?;
    let summary = format!("confluence: positive in {positive} of {} replicas, median {:.4}", a.replicas, median(&fractions));
    Ok(ctx.finish(summary, json!({ "command": "confluence", "positive": positive, "replicas": a.replicas, "median": median(&fractions) })))
}

fn variance(mut ctx: Ctx, a: &VarianceArgs) -> Result<Outcome> {
    let grid = a.grid.spec()?;
    let fit = circle_variance(grid, &a.radii, a.grid.seed, a.replicas, &ctx.exec)?;
    ctx.emit_json("summary.json", &fit)?;
    let table: Vec<Vec<f64>> = fit.radii.iter().zip(&fit.variances).map(|(&r, &v)| vec![r, v]).collect();
    ctx.emit("variance.csv", |buf, c| write_table_csv(buf, &["radius", "variance"], &table, c))?;
    let summary = format!("variance: slope {:.4} against log(1/r)", fit.slope);
    Ok(ctx.finish(summary, json!({ "command": "variance", "slope": fit.slope, "variances": fit.variances })))
}
