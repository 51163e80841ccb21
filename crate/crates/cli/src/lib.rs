//! Command-line front end for `ordlens`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or I/O error, 3 numerical
//! failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
pub mod sweep;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] ordlens::Error),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(ordlens::Error::InvalidParameter(_)) => EXIT_USAGE,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_DATA,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ordlens", version, about = "Lens depth and k-RNG analysis from most-central-of-three statements")]
pub struct Cli {
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, env = "ORDLENS_PARALLEL", default_value_t = 0)]
    pub parallel: usize,
    /// key=value defaults for the subcommand's flags; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Write the primary output here instead of standard output.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset and/or sample statements from a distance oracle.
    Generate(GenerateArgs),
    /// Estimate the medoid.
    Medoid(MedoidArgs),
    /// Rank objects by increasing estimated lens depth.
    Outliers(OutliersArgs),
    /// Estimate the k-relative neighborhood graph.
    Rng(RngArgs),
    /// Classify the unlabeled objects.
    Classify(ClassifyArgs),
    /// Spectral clustering on the estimated k-RNG.
    Cluster(ClusterArgs),
    /// Score an estimate against ground truth.
    Eval(EvalArgs),
    /// Monte Carlo sweep over statement counts and error probabilities.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct StatementInput {
    /// Statement CSV, `kind,designated,other,other` per line.
    #[arg(long, value_name = "FILE")]
    pub statements: PathBuf,
    /// Number of objects; implied by --names when given.
    #[arg(long)]
    pub n: Option<usize>,
    /// `id,name` sidecar; statements then use names instead of ids.
    #[arg(long, value_name = "FILE")]
    pub names: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
#[group(id = "oracle", multiple = false)]
pub struct OracleSource {
    /// Point cloud CSV.
    #[arg(long, value_name = "FILE")]
    pub points: Option<PathBuf>,
    /// Dense distance matrix CSV.
    #[arg(long, value_name = "FILE")]
    pub matrix: Option<PathBuf>,
    /// Edge list CSV, distances by shortest path.
    #[arg(long, value_name = "FILE")]
    pub edges: Option<PathBuf>,
}

impl OracleSource {
    pub fn is_given(&self) -> bool {
        self.points.is_some() || self.matrix.is_some() || self.edges.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dataset {
    /// Standard normal in --dim dimensions.
    Gaussian,
    /// Two unit-covariance classes at the origin and (--separation, 0).
    TwoGaussians,
    /// Two interleaved half-annuli.
    Moons,
    /// 0.6 N((-3,0), I) + 0.4 N((3,0), [1 1; 1 2]).
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Central,
    Odd,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, conflicts_with = "oracle")]
    pub dataset: Option<Dataset>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 3.0)]
    pub separation: f64,
    #[command(flatten)]
    pub source: OracleSource,
    #[arg(long, value_name = "FILE")]
    pub points_out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub labels_out: Option<PathBuf>,
    /// Number of statements to sample.
    #[arg(long, conflicts_with = "all")]
    pub count: Option<usize>,
    /// One statement per triple, in lexicographic triple order.
    #[arg(long)]
    pub all: bool,
    #[arg(long, value_enum, default_value_t = KindArg::Central)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 0.0)]
    pub errorprob: f64,
    #[arg(long, conflicts_with = "all")]
    pub with_replacement: bool,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DepthMethod {
    /// Lens depth from most-central statements.
    Lens,
    /// Odd-one-out frequency baseline.
    Crowd,
}

#[derive(Debug, Clone, Args)]
pub struct MedoidArgs {
    #[command(flatten)]
    pub input: StatementInput,
    #[arg(long, value_enum, default_value_t = DepthMethod::Lens)]
    pub method: DepthMethod,
    /// Write the per-object depth table.
    #[arg(long, value_name = "FILE")]
    pub depth_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OutliersArgs {
    #[command(flatten)]
    pub input: StatementInput,
    #[arg(long, value_enum, default_value_t = DepthMethod::Lens)]
    pub method: DepthMethod,
    /// Number of objects to report; all by default.
    #[arg(long)]
    pub top: Option<usize>,
    /// Also report the position of the largest consecutive score gap on standard error.
    #[arg(long)]
    pub gap: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RngArgs {
    /// Statement input; not needed with --exact.
    #[arg(long, value_name = "FILE", required_unless_present = "exact")]
    pub statements: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub names: Option<PathBuf>,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub errorprob: Option<f64>,
    /// Apply the noise correction for --errorprob.
    #[arg(long, requires = "errorprob")]
    pub correct: bool,
    /// Emit Gaussian weights exp(-V²/σ²) as a third column.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Print graph diagnostics (key=value lines) instead of the edge list.
    #[arg(long)]
    pub diagnostics: bool,
    /// Build the exact k-RNG from a distance oracle instead.
    #[arg(long, requires = "oracle")]
    pub exact: bool,
    #[command(flatten)]
    pub source: OracleSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassifyMethod {
    /// Class-conditional depth features with k-NN.
    Feature,
    /// k-RNG neighbor vote.
    Vote,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub input: StatementInput,
    /// `id,class` for the labeled objects; class indices start at 0.
    #[arg(long, value_name = "FILE")]
    pub labels: PathBuf,
    /// Number of classes; defaults to 1 + the largest label.
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long, value_enum, default_value_t = ClassifyMethod::Feature)]
    pub method: ClassifyMethod,
    /// Fixed vote-rule k; selected by leave-one-out when absent.
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated candidate k values.
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    #[arg(long, default_value_t = ordlens::classify::DEFAULT_FOLDS)]
    pub folds: usize,
    #[arg(long, default_value_t = ordlens::classify::DEFAULT_LOOCV_REPEATS)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the depth feature matrix (feature method only).
    #[arg(long, value_name = "FILE")]
    pub features_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: StatementInput,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 2)]
    pub clusters: usize,
    /// Gaussian affinity width; unweighted when absent.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub errorprob: Option<f64>,
    #[arg(long, requires = "errorprob")]
    pub correct: bool,
    /// Attach isolated vertices to their closest neighbor's cluster instead of failing.
    #[arg(long)]
    pub allow_isolated: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "FILE")]
    pub affinity_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    /// --estimate (id or file) against --points/--matrix/--edges.
    RelativeError,
    /// --estimate edge list against --truth edge list, with --n.
    Hamming,
    /// --predicted `id,class` against --truth `id,class`.
    ZeroOne,
    /// --predicted `id,cluster` against --truth `id,class`.
    Purity,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub metric: MetricArg,
    #[arg(long)]
    pub estimate: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub truth: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub predicted: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub source: OracleSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Medoid,
    Outlier,
    Rng,
    Classify,
    Cluster,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub task: TaskArg,
    /// Comma-separated statement counts; `all` means every triple.
    #[arg(long, value_delimiter = ',', required = true)]
    pub counts: Vec<sweep::CountSpec>,
    /// Comma-separated error probabilities.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub errorprob: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset size; task default when absent.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub k: usize,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 2)]
    pub clusters: usize,
    #[arg(long)]
    pub labeled: Option<usize>,
}

/// Long options of the top-level command that take a value.
const GLOBAL_VALUED: [&str; 3] = ["--parallel", "--config", "--out"];

/// Splices `key=value` lines from the config file in right after the
/// subcommand, skipping keys the user passed explicitly.
fn apply_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let mut path = None;
    let mut sub_pos = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
        if sub_pos.is_none() && !a.starts_with('-') {
            sub_pos = Some(i);
        }
        i += if GLOBAL_VALUED.contains(&a.as_ref()) { 2 } else { 1 };
    }
    let (Some(path), Some(sub_pos)) = (path, sub_pos) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|source| CliError::File {
        path: path.clone(),
        source,
    })?;
    let given = |flag: &str| {
        args.iter().any(|a| {
            let a = a.to_string_lossy();
            a == flag || a.starts_with(&format!("{flag}="))
        })
    };
    let mut extra = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let Some((key, value)) = t.split_once('=') else {
            return Err(CliError::Usage(format!(
                "{}:{}: expected key=value",
                path.display(),
                lineno + 1
            )));
        };
        let flag = format!("--{}", key.trim().trim_start_matches('-'));
        if given(&flag) {
            continue;
        }
        match value.trim() {
            "true" => extra.push(OsString::from(flag)),
            "false" => {}
            v => {
                extra.push(OsString::from(flag));
                extra.push(OsString::from(v));
            }
        }
    }
    let mut out = args;
    out.splice(sub_pos + 1..sub_pos + 1, extra);
    Ok(out)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Primary output goes to `stdout` or `--out`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match apply_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(&cli, stderr) {
        Ok(buf) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &buf).map_err(|source| CliError::File {
                    path: path.clone(),
                    source,
                }),
                None => stdout.write_all(&buf).and_then(|_| stdout.flush()).map_err(CliError::from),
            };
            match written {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    e.exit_code()
                }
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, stderr: &mut dyn Write) -> CliResult<Vec<u8>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.parallel)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let mut out = Vec::new();
    let mut notes = Vec::new();
    pool.install(|| commands::dispatch(&cli.command, &mut out, &mut notes))?;
    stderr.write_all(&notes)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_lines_follow_the_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.conf");
        std::fs::write(&path, "# defaults\nk = 5\nn=30\ncorrect=true\nsigma=false\n").unwrap();
        let p = path.to_str().unwrap();
        let args = os(&["ordlens", "--parallel", "2", "--config", p, "rng", "--k", "9"]);
        let got = apply_config(args).unwrap();
        assert_eq!(
            got,
            os(&["ordlens", "--parallel", "2", "--config", p, "rng", "--n", "30", "--correct", "--k", "9"])
        );
    }

    #[test]
    fn missing_config_is_a_data_error() {
        let err = apply_config(os(&["ordlens", "--config", "/nonexistent/x", "medoid"])).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_DATA);
    }

    #[test]
    fn exit_code_mapping() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_USAGE);
        assert_eq!(CliError::Core(ordlens::Error::EmptyCollection).exit_code(), EXIT_DATA);
        assert_eq!(CliError::Core(ordlens::Error::NotSymmetric(1.0)).exit_code(), EXIT_NUMERICAL);
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
