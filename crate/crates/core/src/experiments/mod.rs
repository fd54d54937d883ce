//! Reproducible experiment drivers: MSE studies against exact or numerical
//! oracles, resampling effort timing, and ESS traces.
//!
//! Every random stream is derived from a master seed with [`stream_seed`],
//! so a report depends only on its configuration.

mod effort;
mod mse;
mod trace;

pub use effort::{effort_bench, EffortConfig, METRIC_NORMALIZED, METRIC_SECONDS};
pub use mse::{mse_study, CellSeries, MseConfig, MseStudy, METRIC_LOGLIK, METRIC_MEAN};
pub use trace::{ess_trace, write_trace_csv, TraceConfig, TraceRow, TRACE_HEADER};

use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::PfConfig;
use crate::resample::SchemeId;

/// Description of the seed derivation, written into every JSON report.
pub const SEED_MIXER: &str = "splitmix64 chain: seed = f(f(f(master) ^ iteration) ^ stream), \
stream 0 = data, stream k = filter row k (1-based)";

pub const CSV_HEADER: &str =
    "experiment,model,sigma_y,N,T,M,scheme,beta,eta,metric,value,stderr,ratio_to_systematic";

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of random stream `stream` in iteration `iteration`.
pub fn stream_seed(master: u64, iteration: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ iteration) ^ stream)
}

/// One particle filter configuration in a study: scheme, trigger as a
/// fraction of N, and the ratio bound for chopthin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub scheme: SchemeId,
    pub beta_fraction: f64,
    pub eta: Option<f64>,
}

impl FilterSpec {
    pub fn new(scheme: SchemeId, beta_fraction: f64, eta: Option<f64>) -> Self {
        FilterSpec {
            scheme,
            beta_fraction,
            eta,
        }
    }

    /// Chopthin at every step with ratio bound `eta`.
    pub fn chopthin(eta: f64) -> Self {
        FilterSpec::new(SchemeId::Chopthin, 1.0, Some(eta))
    }

    /// The reference row every ratio is taken against.
    pub fn systematic_baseline() -> Self {
        FilterSpec::new(SchemeId::Systematic, 0.5, None)
    }

    pub fn is_baseline(&self) -> bool {
        self.scheme == SchemeId::Systematic && self.beta_fraction == 0.5 && self.eta.is_none()
    }

    pub fn pf_config(&self, n: usize, seed: u64) -> Result<PfConfig> {
        PfConfig::new(n, self.beta_fraction * n as f64, self.scheme, self.eta, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta_fraction) {
            return Err(Error::InvalidParameter(format!(
                "beta fraction must lie in [0, 1] (got {})",
                self.beta_fraction
            )));
        }
        self.pf_config(1, 0).map(|_| ())
    }

    /// `beta` column text, e.g. `0.5N`.
    pub fn beta_label(&self) -> String {
        if self.beta_fraction == 1.0 {
            "N".to_string()
        } else {
            format!("{}N", self.beta_fraction)
        }
    }

    pub fn eta_label(&self) -> String {
        self.eta.map(|e| e.to_string()).unwrap_or_default()
    }
}

/// Parses `scheme[:beta_fraction[:eta]]`, e.g. `chopthin:1:5.828` or `systematic:0.5`.
impl FromStr for FilterSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let scheme: SchemeId = parts.next().unwrap_or_default().trim().parse()?;
        let num = |p: Option<&str>, what: &str| -> Result<Option<f64>> {
            p.map(|v| {
                v.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidParameter(format!("bad {what} '{v}' in filter spec '{s}'"))
                })
            })
            .transpose()
        };
        let beta = num(parts.next(), "beta fraction")?;
        let eta = num(parts.next(), "eta")?;
        if parts.next().is_some() {
            return Err(Error::InvalidParameter(format!("too many fields in '{s}'")));
        }
        let default_beta = if scheme == SchemeId::Chopthin { 1.0 } else { 0.5 };
        let eta = match (scheme, eta) {
            (SchemeId::Chopthin, None) => Some(3.0 + 8f64.sqrt()),
            (_, e) => e,
        };
        let spec = FilterSpec::new(scheme, beta.unwrap_or(default_beta), eta);
        spec.validate()?;
        Ok(spec)
    }
}

/// One cell of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub model: String,
    pub sigma_y: Option<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: Option<usize>,
    #[serde(rename = "M")]
    pub m: usize,
    pub scheme: SchemeId,
    pub beta: String,
    pub eta: Option<f64>,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub ratio_to_systematic: Option<f64>,
    /// iterations in which the filter degenerated and were excluded
    #[serde(default, skip_serializing_if = "is_zero")]
    pub degenerate: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub master_seed: u64,
    pub seed_mixer: String,
    pub version: String,
    pub workers: usize,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn new(master_seed: u64, workers: usize, rows: Vec<ReportRow>) -> Self {
        ExperimentReport {
            master_seed,
            seed_mixer: SEED_MIXER.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            workers,
            rows,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.experiment,
                r.model,
                opt(r.sigma_y),
                r.n,
                r.t.map(|t| t.to_string()).unwrap_or_default(),
                r.m,
                r.scheme,
                r.beta,
                opt(r.eta),
                r.metric,
                r.value,
                r.stderr,
                opt(r.ratio_to_systematic),
            )?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)
    }

    /// Rows matching a metric and filter description.
    pub fn find<'a>(
        &'a self,
        metric: &'a str,
        scheme: SchemeId,
        beta: &'a str,
    ) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.metric == metric && r.scheme == scheme && r.beta == beta)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Thread count a pool built with `workers` will use.
pub(crate) fn effective_workers(workers: usize) -> usize {
    if workers == 0 {
        rayon::current_num_threads()
    } else {
        workers
    }
}

/// Runs `f` on a dedicated pool of `workers` threads (0 = rayon default).
pub(crate) fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
