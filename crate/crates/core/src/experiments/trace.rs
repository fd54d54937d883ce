use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{stream_seed, FilterSpec};
use crate::error::{Error, Result};
use crate::filter::pf_run;
use crate::models::{simulate, Model};
use crate::resample::SchemeId;

pub const TRACE_HEADER: &str = "t,scheme,beta,eta,ess_before,ess_after,resampled";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub model: Model,
    pub n: usize,
    pub steps: usize,
    pub filters: Vec<FilterSpec>,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub scheme: SchemeId,
    pub beta: String,
    pub eta: Option<f64>,
    pub ess_before: f64,
    pub ess_after: f64,
    pub resampled: bool,
}

/// ESS before and after resampling over the first `steps` steps of one
/// simulated dataset, for each configured filter.
pub fn ess_trace(cfg: &TraceConfig) -> Result<Vec<TraceRow>> {
    if cfg.steps == 0 || cfg.n == 0 || cfg.filters.is_empty() {
        return Err(Error::InvalidParameter(
            "ESS trace needs N >= 1, at least one step and one filter".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.master_seed, 0, 0));
    let y = simulate(&cfg.model, cfg.steps, &mut rng)?.observations;
    let mut rows = Vec::with_capacity(cfg.steps * cfg.filters.len());
    for (k, f) in cfg.filters.iter().enumerate() {
        let pf = f.pf_config(cfg.n, stream_seed(cfg.master_seed, 0, k as u64 + 1))?;
        let out = pf_run(&cfg.model, &y, &pf)?;
        for t in 0..cfg.steps {
            rows.push(TraceRow {
                t: t + 1,
                scheme: f.scheme,
                beta: f.beta_label(),
                eta: f.eta,
                ess_before: out.ess_before[t],
                ess_after: out.ess_after[t],
                resampled: out.resampled[t],
            });
        }
    }
    Ok(rows)
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t,
            r.scheme,
            r.beta,
            r.eta.map(|e| e.to_string()).unwrap_or_default(),
            r.ess_before,
            r.ess_after,
            r.resampled
        )?;
    }
    Ok(())
}
