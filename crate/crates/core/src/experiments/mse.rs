use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{effective_workers, mean_stderr, stream_seed, with_workers, ExperimentReport, FilterSpec, ReportRow};
use crate::error::{Error, Result};
use crate::filter::{pf_run, PfOutput};
use crate::models::{kalman_filter, simulate, GridConfig, GridFilter, Model, ModelKind};

pub const METRIC_MEAN: &str = "posterior-mean";
pub const METRIC_LOGLIK: &str = "loglik";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseConfig {
    pub model: ModelKind,
    /// observation noise levels (linear-Gaussian only)
    pub sigma_ys: Vec<f64>,
    pub ns: Vec<usize>,
    /// time steps per dataset
    pub steps: usize,
    /// independent datasets
    pub iterations: usize,
    pub filters: Vec<FilterSpec>,
    pub master_seed: u64,
    /// worker threads; 0 lets the pool decide
    pub workers: usize,
    pub grid: GridConfig,
}

impl MseConfig {
    /// Desk-scale grid: M = 100, T = 200, N in {100, 1000}.
    pub fn desk(model: ModelKind, master_seed: u64) -> Self {
        let eta = 3.0 + 8f64.sqrt();
        MseConfig {
            model,
            sigma_ys: vec![1.0 / 3.0, 1.0, 3.0, 9.0],
            ns: vec![100, 1000],
            steps: 200,
            iterations: 100,
            filters: vec![
                FilterSpec::chopthin(4.0),
                FilterSpec::chopthin(eta),
                FilterSpec::chopthin(10.0),
                FilterSpec::new(crate::SchemeId::Chopthin, 0.5, Some(eta)),
                FilterSpec::new(crate::SchemeId::Multinomial, 0.5, None),
                FilterSpec::new(crate::SchemeId::Branching, 0.5, None),
                FilterSpec::new(crate::SchemeId::Residual, 0.5, None),
                FilterSpec::new(crate::SchemeId::Stratified, 0.5, None),
                FilterSpec::new(crate::SchemeId::ResidualStratified, 0.5, None),
                FilterSpec::new(crate::SchemeId::Systematic, 1.0, None),
                FilterSpec::systematic_baseline(),
            ],
            master_seed,
            workers: 0,
            grid: GridConfig::default(),
        }
    }

    /// Long-running grid: M = 1000, T = 1000, N up to 10^4.
    pub fn full(model: ModelKind, master_seed: u64) -> Self {
        MseConfig {
            ns: vec![100, 1000, 10_000],
            steps: 1000,
            iterations: 1000,
            ..MseConfig::desk(model, master_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.steps == 0 {
            return Err(Error::InvalidParameter("M and T must be at least 1".into()));
        }
        if self.ns.is_empty() || self.ns.contains(&0) {
            return Err(Error::InvalidParameter("N list must be nonempty and positive".into()));
        }
        if self.filters.is_empty() {
            return Err(Error::InvalidParameter("no filters configured".into()));
        }
        if self.model == ModelKind::LinearGaussian {
            if self.sigma_ys.is_empty() {
                return Err(Error::InvalidParameter("sigma_y list is empty".into()));
            }
            for &s in &self.sigma_ys {
                Model::linear_gaussian(s)?;
            }
        }
        for f in &self.filters {
            f.validate()?;
        }
        Ok(())
    }

    fn models(&self) -> Vec<Model> {
        match self.model {
            ModelKind::LinearGaussian => self
                .sigma_ys
                .iter()
                .map(|&s| Model::LinearGaussian { sigma_y: s })
                .collect(),
            ModelKind::StochVol => vec![Model::StochVol],
        }
    }
}

/// Per-iteration values of one report cell, for paired comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSeries {
    pub model: Model,
    pub n: usize,
    pub filter: FilterSpec,
    pub metric: String,
    /// one entry per iteration; NaN where the filter degenerated
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseStudy {
    pub report: ExperimentReport,
    pub series: Vec<CellSeries>,
}

impl MseStudy {
    pub fn series_for(&self, model: &Model, n: usize, filter: &FilterSpec, metric: &str) -> Option<&CellSeries> {
        self.series
            .iter()
            .find(|s| &s.model == model && s.n == n && &s.filter == filter && s.metric == metric)
    }
}

/// Squared-error summaries of one filter on one dataset.
#[derive(Debug, Clone, Copy)]
struct Errors {
    mean: f64,
    loglik: f64,
}

fn score(out: &PfOutput, means: &[f64], log_lik: &[f64]) -> Errors {
    let t = means.len() as f64;
    let mean = out
        .means
        .iter()
        .zip(means)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / t;
    let loglik = out
        .log_cond_lik
        .iter()
        .zip(log_lik)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / t;
    Errors { mean, loglik }
}

/// For every model cell and N: simulate `M` datasets, compute the oracle
/// posterior once per dataset, run every configured filter on the same data,
/// and summarize the time-averaged squared errors of the posterior mean and
/// of the log conditional likelihoods.
pub fn mse_study(cfg: &MseConfig) -> Result<MseStudy> {
    cfg.validate()?;
    let grid = match cfg.model {
        ModelKind::StochVol => Some(GridFilter::new(&Model::StochVol, cfg.steps, cfg.grid)?),
        ModelKind::LinearGaussian => None,
    };

    let mut rows = Vec::new();
    let mut series = Vec::new();
    for model in cfg.models() {
        for &n in &cfg.ns {
            let per_iter: Vec<Result<Vec<Option<Errors>>>> = with_workers(cfg.workers, || {
                (0..cfg.iterations)
                    .into_par_iter()
                    .map(|i| run_iteration(cfg, &model, grid.as_ref(), n, i as u64))
                    .collect()
            })?;
            let per_iter = per_iter.into_iter().collect::<Result<Vec<_>>>()?;
            collect_cell(cfg, &model, n, &per_iter, &mut rows, &mut series);
        }
    }
    Ok(MseStudy {
        report: ExperimentReport::new(cfg.master_seed, effective_workers(cfg.workers), rows),
        series,
    })
}

fn run_iteration(
    cfg: &MseConfig,
    model: &Model,
    grid: Option<&GridFilter>,
    n: usize,
    iteration: u64,
) -> Result<Vec<Option<Errors>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.master_seed, iteration, 0));
    let data = simulate(model, cfg.steps, &mut rng)?;
    let y = &data.observations;
    let (means, log_lik) = match (model, grid) {
        (Model::LinearGaussian { sigma_y }, _) => {
            let k = kalman_filter(y, *sigma_y)?;
            (k.means, k.log_cond_lik)
        }
        (Model::StochVol, Some(g)) => {
            let p = g.run(model, y)?;
            (p.means, p.log_cond_lik)
        }
        (Model::StochVol, None) => unreachable!("grid is built for stoch-vol studies"),
    };
    cfg.filters
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let pf = f.pf_config(n, stream_seed(cfg.master_seed, iteration, k as u64 + 1))?;
            match pf_run(model, y, &pf) {
                Ok(out) => Ok(Some(score(&out, &means, &log_lik))),
                Err(e) if e.is_degeneracy() => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

fn collect_cell(
    cfg: &MseConfig,
    model: &Model,
    n: usize,
    per_iter: &[Vec<Option<Errors>>],
    rows: &mut Vec<ReportRow>,
    series: &mut Vec<CellSeries>,
) {
    let baseline = cfg.filters.iter().position(|f| f.is_baseline());
    for (metric, pick) in [
        (METRIC_MEAN, (|e: &Errors| e.mean) as fn(&Errors) -> f64),
        (METRIC_LOGLIK, |e: &Errors| e.loglik),
    ] {
        let summaries: Vec<(Vec<f64>, f64, f64, usize)> = (0..cfg.filters.len())
            .map(|k| {
                let values: Vec<f64> = per_iter
                    .iter()
                    .map(|it| it[k].as_ref().map(pick).unwrap_or(f64::NAN))
                    .collect();
                let ok: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
                let (mean, se) = mean_stderr(&ok);
                let degenerate = values.len() - ok.len();
                (values, mean, se, degenerate)
            })
            .collect();
        let base_value = baseline.map(|b| summaries[b].1);
        for (f, (values, mean, se, degenerate)) in cfg.filters.iter().zip(summaries) {
            rows.push(ReportRow {
                experiment: "mse".into(),
                model: model.name().into(),
                sigma_y: model.sigma_y(),
                n,
                t: Some(cfg.steps),
                m: cfg.iterations,
                scheme: f.scheme,
                beta: f.beta_label(),
                eta: f.eta,
                metric: metric.into(),
                value: mean,
                stderr: se,
                ratio_to_systematic: base_value.map(|b| mean / b),
                degenerate,
            });
            series.push(CellSeries {
                model: *model,
                n,
                filter: *f,
                metric: metric.into(),
                values,
            });
        }
    }
}
