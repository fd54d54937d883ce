use std::hint::black_box;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::{stream_seed, with_workers, ExperimentReport, ReportRow};
use crate::error::{Error, Result};
use crate::resample::{resample, SchemeId};

pub const METRIC_NORMALIZED: &str = "normalized-effort";
pub const METRIC_SECONDS: &str = "median-seconds";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortConfig {
    pub ns: Vec<usize>,
    pub schemes: Vec<SchemeId>,
    /// ratio bound used for chopthin
    pub eta: f64,
    /// timed repetitions per (N, scheme)
    pub repetitions: usize,
    pub master_seed: u64,
}

impl EffortConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.ns.contains(&0) {
            return Err(Error::InvalidParameter("N list must be nonempty and positive".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidParameter("no schemes configured".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be at least 1".into()));
        }
        if self.schemes.contains(&SchemeId::Chopthin) {
            crate::chopthin::HParams::new(1.0, self.eta)?;
        }
        Ok(())
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Times each scheme on `N` iid Exp(1) weights, normalized by the time
/// taken to generate those `N` weights immediately beforehand. Reports the
/// median normalized effort and the median raw resampling time.
///
/// Runs on a single worker thread.
pub fn effort_bench(cfg: &EffortConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let rows = with_workers(1, || -> Result<Vec<ReportRow>> {
        let mut rows = Vec::new();
        for &n in &cfg.ns {
            for (s, &scheme) in cfg.schemes.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.master_seed, n as u64, s as u64 + 1));
                let eta = (scheme == SchemeId::Chopthin).then_some(cfg.eta);
                let mut w = vec![0.0; n];
                let mut ratios = Vec::with_capacity(cfg.repetitions);
                let mut seconds = Vec::with_capacity(cfg.repetitions);
                for _ in 0..cfg.repetitions {
                    let t0 = Instant::now();
                    for v in w.iter_mut() {
                        *v = Exp1.sample(&mut rng);
                    }
                    black_box(&w);
                    let gen = t0.elapsed().as_secs_f64();
                    let t1 = Instant::now();
                    let out = resample(scheme, eta, black_box(&w), n, &mut rng)?;
                    black_box(&out);
                    let took = t1.elapsed().as_secs_f64();
                    drop(out);
                    ratios.push(took / gen.max(1e-12));
                    seconds.push(took);
                }
                let reps = cfg.repetitions;
                for (metric, values) in [(METRIC_NORMALIZED, &mut ratios), (METRIC_SECONDS, &mut seconds)] {
                    let (_, se) = super::mean_stderr(values);
                    rows.push(ReportRow {
                        experiment: "effort".into(),
                        model: String::new(),
                        sigma_y: None,
                        n,
                        t: None,
                        m: reps,
                        scheme,
                        beta: String::new(),
                        eta,
                        metric: metric.into(),
                        value: median(values),
                        stderr: se,
                        ratio_to_systematic: None,
                        degenerate: 0,
                    });
                }
            }
        }
        // ratio of normalized efforts against systematic at the same N
        let base: Vec<(usize, f64)> = rows
            .iter()
            .filter(|r| r.scheme == SchemeId::Systematic && r.metric == METRIC_NORMALIZED)
            .map(|r| (r.n, r.value))
            .collect();
        for r in rows.iter_mut().filter(|r| r.metric == METRIC_NORMALIZED) {
            r.ratio_to_systematic = base.iter().find(|(n, _)| *n == r.n).map(|(_, b)| r.value / b);
        }
        Ok(rows)
    })??;
    Ok(ExperimentReport::new(cfg.master_seed, 1, rows))
}
