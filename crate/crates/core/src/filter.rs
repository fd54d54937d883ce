//! Bootstrap particle filter with an ESS-triggered resampling step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::StateSpaceModel;
use crate::resample::{resample, SchemeId};
use crate::weights::{self, ess};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfConfig {
    /// target number of particles
    pub n: usize,
    /// resample whenever `ESS <= beta`
    pub beta: f64,
    pub scheme: SchemeId,
    /// ratio bound; required for chopthin, absent otherwise
    pub eta: Option<f64>,
    pub seed: u64,
}

impl PfConfig {
    pub fn new(n: usize, beta: f64, scheme: SchemeId, eta: Option<f64>, seed: u64) -> Result<Self> {
        let cfg = PfConfig {
            n,
            beta,
            scheme,
            eta,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        if !(self.beta >= 0.0 && self.beta <= self.n as f64) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in [0, N] (got {} for N = {})",
                self.beta, self.n
            )));
        }
        match (self.scheme, self.eta) {
            (SchemeId::Chopthin, None) => Err(Error::InvalidParameter(
                "chopthin requires eta".into(),
            )),
            (SchemeId::Chopthin, Some(eta)) if !(eta >= crate::chopthin::MIN_ETA) => {
                Err(Error::InvalidEta {
                    eta,
                    min: crate::chopthin::MIN_ETA,
                })
            }
            (SchemeId::Chopthin, Some(_)) => Ok(()),
            (_, Some(_)) => Err(Error::InvalidParameter(format!(
                "eta only applies to chopthin, not {}",
                self.scheme
            ))),
            (_, None) => Ok(()),
        }
    }
}

/// Per-step filter products.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PfOutput {
    /// estimates of `E[X_t | y_{1:t}]`
    pub means: Vec<f64>,
    /// `log p̂(y_t | y_{1:t-1})`
    pub log_cond_lik: Vec<f64>,
    pub ess_before: Vec<f64>,
    pub ess_after: Vec<f64>,
    pub resampled: Vec<bool>,
    /// particle count after step t
    pub particles: Vec<usize>,
}

impl PfOutput {
    /// `p̂(y_t | y_{1:t-1})`.
    pub fn cond_lik(&self) -> Vec<f64> {
        self.log_cond_lik.iter().map(|l| l.exp()).collect()
    }

    /// `log p̂(y_{1:T})`, the sum of the per-step log estimates.
    pub fn log_marginal_lik(&self) -> f64 {
        self.log_cond_lik.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// Runs the filter with a generator seeded from `cfg.seed`.
pub fn pf_run<M: StateSpaceModel + ?Sized>(
    model: &M,
    observations: &[f64],
    cfg: &PfConfig,
) -> Result<PfOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    pf_run_with_rng(model, observations, cfg, &mut rng)
}

pub fn pf_run_with_rng<M: StateSpaceModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    observations: &[f64],
    cfg: &PfConfig,
    rng: &mut R,
) -> Result<PfOutput> {
    cfg.validate()?;
    if observations.is_empty() {
        return Err(Error::InvalidParameter("no observations".into()));
    }
    let steps = observations.len();
    let (m0, s0) = model.initial();
    let (phi, sigma) = model.transition();

    let mut x: Vec<f64> = (0..cfg.n)
        .map(|_| m0 + s0 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut w = vec![1.0; cfg.n];
    let mut logl = vec![0.0; cfg.n];
    let mut out = PfOutput {
        means: Vec::with_capacity(steps),
        log_cond_lik: Vec::with_capacity(steps),
        ess_before: Vec::with_capacity(steps),
        ess_after: Vec::with_capacity(steps),
        resampled: Vec::with_capacity(steps),
        particles: Vec::with_capacity(steps),
    };

    for (t, &y) in observations.iter().enumerate() {
        let step = t + 1;
        for xi in x.iter_mut() {
            *xi = phi * *xi + sigma * rng.sample::<f64, _>(StandardNormal);
        }

        // reweight in log space, factoring out the largest increment
        let prev_total: f64 = w.iter().sum();
        let mut max = f64::NEG_INFINITY;
        for (l, (&xi, &wi)) in logl.iter_mut().zip(x.iter().zip(&w)) {
            *l = if wi > 0.0 {
                model.obs_log_density(xi, y)
            } else {
                f64::NEG_INFINITY
            };
            max = max.max(*l);
        }
        if !max.is_finite() {
            return Err(Error::Degenerate { t: step });
        }
        let mut total = 0.0;
        for (wi, &l) in w.iter_mut().zip(&logl) {
            *wi *= (l - max).exp();
            total += *wi;
        }
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Degenerate { t: step });
        }
        out.log_cond_lik.push(max + (total / prev_total).ln());

        let ess_before = ess(&w)?;
        out.ess_before.push(ess_before);
        let fire = ess_before <= cfg.beta;
        if fire {
            let r = resample(cfg.scheme, cfg.eta, &w, cfg.n, rng)?;
            if r.is_empty() {
                return Err(Error::Degenerate { t: step });
            }
            x = r.ancestors.iter().map(|&i| x[i]).collect();
            w = r.weights;
            logl.resize(x.len(), 0.0);
        }
        // Keeping the weights at sum N changes no estimate (all are scale-free)
        // and prevents underflow across long runs without resampling.
        w = weights::normalize_to(&w, cfg.n as f64)?;
        out.ess_after.push(if fire { ess(&w)? } else { ess_before });
        out.resampled.push(fire);
        out.particles.push(x.len());

        let (s, sw) = x
            .iter()
            .zip(&w)
            .fold((0.0, 0.0), |(s, sw), (&xi, &wi)| (s + wi * xi, sw + wi));
        out.means.push(s / sw);
    }
    Ok(out)
}
