//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 on invalid arguments or input, 3 when the
//! computation degenerates numerically, 1 on I/O failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::experiments::{
    self, effort_bench, ess_trace, mse_study, write_trace_csv, EffortConfig, ExperimentReport,
    FilterSpec, MseConfig, TraceConfig,
};
use crate::filter::{pf_run, PfOutput};
use crate::models::{simulate, GridConfig, Model, ModelKind};
use crate::resample::{resample, SchemeId};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

const DEFAULT_ETA: f64 = 5.828_427_124_746_19;

#[derive(Debug, Parser)]
#[command(
    name = "chopthin",
    version,
    about = "Chopthin and baseline resampling, particle filtering, and benchmark experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Resample a weight vector read from a file or standard input.
    #[command(after_help = "INPUT: one weight per line, or comma-separated weights per line; \
blank lines are ignored, scientific notation is accepted, and an optional first line \
`weight` is skipped.\n\nOUTPUT CSV: ancestor,weight  (ancestor is 1-based)")]
    Resample(ResampleArgs),
    /// Run one particle filter on simulated or supplied observations.
    #[command(
        name = "pf-run",
        after_help = "OUTPUT CSV: t,observation,posterior_mean,log_cond_lik,ess_before,ess_after,resampled,particles"
    )]
    PfRun(PfRunArgs),
    /// Posterior-mean and log-likelihood MSE of particle filters against the exact or grid oracle.
    #[command(
        name = "mse-study",
        after_help = "OUTPUT CSV: experiment,model,sigma_y,N,T,M,scheme,beta,eta,metric,value,stderr,ratio_to_systematic\n\
metric is posterior-mean or loglik; ratio_to_systematic divides by the systematic row with beta = 0.5N.\n\
With --format csv the seed metadata is written to standard error; --format json embeds master_seed, seed_mixer, version and workers."
    )]
    MseStudy(MseArgs),
    /// Time resampling schemes on Exp(1) weights, normalized by the time to generate the weights.
    #[command(
        name = "effort-bench",
        after_help = "OUTPUT CSV: experiment,model,sigma_y,N,T,M,scheme,beta,eta,metric,value,stderr,ratio_to_systematic\n\
metric is normalized-effort (median of resample time / weight generation time) or median-seconds; M is the repetition count."
    )]
    EffortBench(EffortArgs),
    /// ESS before and after resampling at each step of one simulated dataset.
    #[command(
        name = "ess-trace",
        after_help = "OUTPUT CSV: t,scheme,beta,eta,ess_before,ess_after,resampled"
    )]
    EssTrace(TraceArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Profile {
    /// M = 100, T = 200, N in {100, 1000}
    Desk,
    /// M = 1000, T = 1000, N in {100, 1000, 10000}
    Full,
}

#[derive(Debug, Args)]
struct SeedArg {
    /// Master random seed.
    #[arg(long, env = "CHOPTHIN_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ResampleArgs {
    /// Resampling scheme.
    #[arg(long, default_value = "chopthin", value_parser = parse_scheme)]
    scheme: SchemeId,
    /// Maximal weight ratio (chopthin only, >= 4). Defaults to 3+sqrt(8) for chopthin.
    #[arg(long)]
    eta: Option<f64>,
    /// Number of offspring; defaults to the number of input weights.
    #[arg(long = "n-out")]
    n_out: Option<usize>,
    #[command(flatten)]
    seed: SeedArg,
    /// Weight file; standard input when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// State-space model: linear-gaussian (lg) or stoch-vol (sv).
    #[arg(long, default_value = "linear-gaussian", value_parser = parse_model)]
    model: ModelKind,
    /// Observation noise sd of the linear-Gaussian model.
    #[arg(long = "sigma-y", default_value_t = 1.0)]
    sigma_y: f64,
}

impl ModelArgs {
    fn model(&self) -> Result<Model, Error> {
        match self.model {
            ModelKind::LinearGaussian => Model::linear_gaussian(self.sigma_y),
            ModelKind::StochVol => Ok(Model::StochVol),
        }
    }
}

#[derive(Debug, Args)]
struct FilterArgs {
    /// Resampling scheme.
    #[arg(long, default_value = "chopthin", value_parser = parse_scheme)]
    scheme: SchemeId,
    /// Resampling trigger as a fraction of N (resample when ESS <= fraction * N).
    /// Defaults to 1 for chopthin and 0.5 otherwise.
    #[arg(long = "beta-fraction")]
    beta_fraction: Option<f64>,
    /// Maximal weight ratio (chopthin only). Defaults to 3+sqrt(8).
    #[arg(long)]
    eta: Option<f64>,
}

impl FilterArgs {
    fn spec(&self) -> Result<FilterSpec, Error> {
        let chop = self.scheme == SchemeId::Chopthin;
        let beta = self.beta_fraction.unwrap_or(if chop { 1.0 } else { 0.5 });
        let eta = match (chop, self.eta) {
            (true, None) => Some(DEFAULT_ETA),
            (_, e) => e,
        };
        let spec = FilterSpec::new(self.scheme, beta, eta);
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
struct PfRunArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    filter: FilterArgs,
    /// Target number of particles.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Number of simulated observations (ignored with --observations).
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Observation file (one value per line); simulated from the model when omitted.
    #[arg(long)]
    observations: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Debug, Args)]
struct MseArgs {
    /// State-space model: linear-gaussian (lg) or stoch-vol (sv).
    #[arg(long, default_value = "linear-gaussian", value_parser = parse_model)]
    model: ModelKind,
    /// Preset grid; explicit flags override it.
    #[arg(long, value_enum, default_value = "desk")]
    profile: Profile,
    /// Comma-separated observation noise levels (linear-Gaussian only).
    #[arg(long = "sigma-y", value_delimiter = ',')]
    sigma_y: Vec<f64>,
    /// Comma-separated particle counts.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Time steps per dataset (T).
    #[arg(long)]
    steps: Option<usize>,
    /// Number of datasets (M).
    #[arg(long)]
    iterations: Option<usize>,
    /// Filter as scheme[:beta_fraction[:eta]]; repeatable. Defaults to the full scheme table.
    #[arg(long = "filter")]
    filters: Vec<String>,
    /// Grid points of the stochastic-volatility oracle.
    #[arg(long = "grid-points", default_value_t = 4001)]
    grid_points: usize,
    /// Half-width of the oracle grid in marginal standard deviations.
    #[arg(long = "grid-range", default_value_t = 8.0)]
    grid_range: f64,
    /// Worker threads for parallel iterations (0 = all cores).
    #[arg(long, env = "CHOPTHIN_WORKERS", default_value_t = 0)]
    workers: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Debug, Args)]
struct EffortArgs {
    /// Comma-separated particle counts.
    #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000,1000000")]
    n: Vec<usize>,
    /// Comma-separated schemes.
    #[arg(
        long = "scheme",
        value_delimiter = ',',
        value_parser = parse_scheme,
        default_value = "chopthin,systematic,multinomial,multinomial-condbinom"
    )]
    schemes: Vec<SchemeId>,
    /// Maximal weight ratio for chopthin.
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    /// Timed repetitions per cell.
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    filter: FilterArgs,
    /// Additional filters as scheme[:beta_fraction[:eta]]; repeatable.
    #[arg(long = "filter")]
    filters: Vec<String>,
    /// Target number of particles.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Number of steps to trace.
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[command(flatten)]
    seed: SeedArg,
}

fn parse_scheme(s: &str) -> Result<SchemeId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Degenerate(String),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_degeneracy() {
            Failure::Degenerate(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

/// Parses the command line in `args` (including the program name), runs the
/// subcommand and returns the process exit code.
pub fn run<I, T, R, W, E>(args: I, stdin: R, mut stdout: W, mut stderr: E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    R: BufRead,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Resample(a) => cmd_resample(a, stdin, &mut stdout),
        Command::PfRun(a) => cmd_pf_run(a, &mut stdout),
        Command::MseStudy(a) => cmd_mse(a, &mut stdout, &mut stderr),
        Command::EffortBench(a) => cmd_effort(a, &mut stdout),
        Command::EssTrace(a) => cmd_trace(a, &mut stdout),
    };
    let result = result.and_then(|()| stdout.flush().map_err(Failure::Io));
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Invalid(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_INVALID
        }
        Err(Failure::Degenerate(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_DEGENERATE
        }
        Err(Failure::Io(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_IO
        }
    }
}

/// Reads weights: one or more comma-separated numbers per line, blank lines
/// skipped, an optional `weight` header on the first line.
pub fn parse_weights<R: BufRead>(input: R) -> Result<Vec<f64>, String> {
    parse_numbers(input, "weight")
}

fn parse_numbers<R: BufRead>(input: R, header: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|e| format!("line {lineno}: {e}"))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || (lineno == 1 && trimmed.eq_ignore_ascii_case(header)) {
            continue;
        }
        for field in trimmed.split(',') {
            let field = field.trim();
            let v: f64 = field
                .parse()
                .map_err(|_| format!("line {lineno}: cannot parse '{field}' as a number"))?;
            if !v.is_finite() {
                return Err(format!("line {lineno}: value '{field}' is not finite"));
            }
            out.push(v);
        }
    }
    Ok(out)
}

fn open_or<R: BufRead + 'static>(
    path: Option<&PathBuf>,
    stdin: R,
) -> Result<Box<dyn BufRead>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufReader::new(File::open(p).map_err(|e| {
            Failure::Invalid(format!("cannot open {}: {e}", p.display()))
        })?)),
        None => Box::new(stdin),
    })
}

fn cmd_resample<R: BufRead, W: Write>(a: ResampleArgs, stdin: R, out: &mut W) -> Result<(), Failure> {
    let w = match &a.input {
        Some(p) => {
            let f = File::open(p)
                .map_err(|e| Failure::Invalid(format!("cannot open {}: {e}", p.display())))?;
            parse_weights(BufReader::new(f))
        }
        None => parse_weights(stdin),
    }
    .map_err(Failure::Invalid)?;
    let eta = match (a.scheme, a.eta) {
        (SchemeId::Chopthin, e) => Some(e.unwrap_or(DEFAULT_ETA)),
        (s, Some(_)) => return Err(Failure::Invalid(format!("--eta only applies to chopthin, not {s}"))),
        (_, None) => None,
    };
    let n_out = a.n_out.unwrap_or(w.len());
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed.seed);
    let r = resample(a.scheme, eta, &w, n_out, &mut rng)?;
    writeln!(out, "ancestor,weight")?;
    for (i, v) in r.ancestors.iter().zip(&r.weights) {
        writeln!(out, "{},{}", i + 1, v)?;
    }
    Ok(())
}

fn cmd_pf_run<W: Write>(a: PfRunArgs, out: &mut W) -> Result<(), Failure> {
    let model = a.model.model()?;
    let spec = a.filter.spec()?;
    let y = match &a.observations {
        Some(p) => {
            let f = open_or(Some(p), io::empty())?;
            let y = parse_numbers(f, "observation").map_err(Failure::Invalid)?;
            if y.is_empty() {
                return Err(Failure::Invalid("observation file is empty".into()));
            }
            y
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(experiments::stream_seed(a.seed.seed, 0, 0));
            simulate(&model, a.steps, &mut rng)?.observations
        }
    };
    let cfg = spec.pf_config(a.n, experiments::stream_seed(a.seed.seed, 0, 1))?;
    let res: PfOutput = pf_run(&model, &y, &cfg)?;
    writeln!(
        out,
        "t,observation,posterior_mean,log_cond_lik,ess_before,ess_after,resampled,particles"
    )?;
    for (t, obs) in y.iter().enumerate().take(res.len()) {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            t + 1,
            obs,
            res.means[t],
            res.log_cond_lik[t],
            res.ess_before[t],
            res.ess_after[t],
            res.resampled[t],
            res.particles[t]
        )?;
    }
    Ok(())
}

fn parse_filters(specs: &[String]) -> Result<Vec<FilterSpec>, Failure> {
    specs
        .iter()
        .map(|s| s.parse::<FilterSpec>().map_err(Failure::from))
        .collect()
}

fn write_report<W: Write>(report: &ExperimentReport, format: Format, out: &mut W) -> io::Result<()> {
    match format {
        Format::Csv => report.write_csv(out),
        Format::Json => report.write_json(out),
    }
}

fn cmd_mse<W: Write, E: Write>(a: MseArgs, out: &mut W, err: &mut E) -> Result<(), Failure> {
    let mut cfg = match a.profile {
        Profile::Desk => MseConfig::desk(a.model, a.seed.seed),
        Profile::Full => MseConfig::full(a.model, a.seed.seed),
    };
    if !a.sigma_y.is_empty() {
        cfg.sigma_ys = a.sigma_y;
    }
    if !a.n.is_empty() {
        cfg.ns = a.n;
    }
    if let Some(t) = a.steps {
        cfg.steps = t;
    }
    if let Some(m) = a.iterations {
        cfg.iterations = m;
    }
    if !a.filters.is_empty() {
        cfg.filters = parse_filters(&a.filters)?;
    }
    cfg.workers = a.workers;
    cfg.grid = GridConfig {
        range_sd_multiple: a.grid_range,
        points: a.grid_points,
    };
    let study = mse_study(&cfg)?;
    if let Format::Csv = a.format {
        writeln!(
            err,
            "# master_seed={} workers={} version={} seed_mixer={}",
            study.report.master_seed,
            study.report.workers,
            study.report.version,
            study.report.seed_mixer
        )?;
    }
    write_report(&study.report, a.format, out)?;
    Ok(())
}

fn cmd_effort<W: Write>(a: EffortArgs, out: &mut W) -> Result<(), Failure> {
    let cfg = EffortConfig {
        ns: a.n,
        schemes: a.schemes,
        eta: a.eta,
        repetitions: a.reps,
        master_seed: a.seed.seed,
    };
    let report = effort_bench(&cfg)?;
    write_report(&report, a.format, out)?;
    Ok(())
}

fn cmd_trace<W: Write>(a: TraceArgs, out: &mut W) -> Result<(), Failure> {
    let mut filters = vec![a.filter.spec()?];
    filters.extend(parse_filters(&a.filters)?);
    let cfg = TraceConfig {
        model: a.model.model()?,
        n: a.n,
        steps: a.steps,
        filters,
        master_seed: a.seed.seed,
    };
    let rows = ess_trace(&cfg)?;
    write_trace_csv(&rows, out)?;
    Ok(())
}
