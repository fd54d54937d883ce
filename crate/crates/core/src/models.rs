//! Benchmark state-space models with Gaussian AR(1) latent dynamics, and
//! their reference posteriors: an exact Kalman filter for the local-level
//! model and a grid-based forward filter for any model.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
fn normal_log_density(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// Latent dynamics `X_t = phi X_{t-1} + sigma eps_t` with `X_0 ~ N(m0, s0^2)`,
/// and an arbitrary observation density.
pub trait StateSpaceModel: Sync {
    /// Mean and standard deviation of `X_0`.
    fn initial(&self) -> (f64, f64);
    /// Autoregressive coefficient `phi` and innovation standard deviation `sigma`.
    fn transition(&self) -> (f64, f64);
    /// Observation generated from state `x` and a standard normal draw.
    fn observe(&self, x: f64, noise: f64) -> f64;
    /// `log p(y | x)`.
    fn obs_log_density(&self, x: f64, y: f64) -> f64;
}

/// The two benchmark models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Model {
    /// Random walk observed with additive `N(0, sigma_y^2)` noise.
    LinearGaussian { sigma_y: f64 },
    /// `X_t = 0.9 X_{t-1} + 0.25 eps_t`, `Y_t = 0.1 xi_t exp(X_t / 2)`.
    StochVol,
}

impl Model {
    pub fn linear_gaussian(sigma_y: f64) -> Result<Self> {
        if !(sigma_y > 0.0) || !sigma_y.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma_y must be positive (got {sigma_y})"
            )));
        }
        Ok(Model::LinearGaussian { sigma_y })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::LinearGaussian { .. } => "linear-gaussian",
            Model::StochVol => "stoch-vol",
        }
    }

    pub fn sigma_y(&self) -> Option<f64> {
        match *self {
            Model::LinearGaussian { sigma_y } => Some(sigma_y),
            Model::StochVol => None,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Model family without parameters, as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LinearGaussian,
    StochVol,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear-gaussian" | "lg" => Ok(ModelKind::LinearGaussian),
            "stoch-vol" | "sv" => Ok(ModelKind::StochVol),
            _ => Err(Error::InvalidParameter(format!("unknown model '{s}'"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::LinearGaussian => "linear-gaussian",
            ModelKind::StochVol => "stoch-vol",
        })
    }
}

impl StateSpaceModel for Model {
    fn initial(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn transition(&self) -> (f64, f64) {
        match self {
            Model::LinearGaussian { .. } => (1.0, 1.0),
            Model::StochVol => (0.9, 0.25),
        }
    }

    fn observe(&self, x: f64, noise: f64) -> f64 {
        match *self {
            Model::LinearGaussian { sigma_y } => x + sigma_y * noise,
            Model::StochVol => 0.1 * noise * (x / 2.0).exp(),
        }
    }

    fn obs_log_density(&self, x: f64, y: f64) -> f64 {
        match *self {
            Model::LinearGaussian { sigma_y } => normal_log_density(y, x, sigma_y * sigma_y),
            // y ~ N(0, 0.01 e^x); written in y*y so that y and -y agree bit for bit
            Model::StochVol => -0.5 * (LN_2PI + (0.01f64).ln() + x + y * y / (0.01 * x.exp())),
        }
    }
}

/// Simulated latent path and observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub states: Vec<f64>,
    pub observations: Vec<f64>,
}

/// Simulates `steps` observations; `noise` supplies the standard normal
/// draws in the order `X_0, then per step (eps_t, xi_t)`.
pub fn simulate_with_noise<M: StateSpaceModel + ?Sized>(
    model: &M,
    steps: usize,
    mut noise: impl FnMut() -> f64,
) -> Result<Simulation> {
    if steps == 0 {
        return Err(Error::InvalidParameter("T must be at least 1".into()));
    }
    let (m0, s0) = model.initial();
    let (phi, sigma) = model.transition();
    let mut x = m0 + s0 * noise();
    let mut states = Vec::with_capacity(steps);
    let mut observations = Vec::with_capacity(steps);
    for _ in 0..steps {
        x = phi * x + sigma * noise();
        states.push(x);
        observations.push(model.observe(x, noise()));
    }
    Ok(Simulation {
        states,
        observations,
    })
}

pub fn simulate<M: StateSpaceModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    steps: usize,
    rng: &mut R,
) -> Result<Simulation> {
    simulate_with_noise(model, steps, || rng.sample(StandardNormal))
}

/// Exact filtering output for the local-level model.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanOutput {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// `log p(y_t | y_{1:t-1})`
    pub log_cond_lik: Vec<f64>,
}

impl KalmanOutput {
    pub fn log_marginal_lik(&self) -> f64 {
        self.log_cond_lik.iter().sum()
    }
}

/// Kalman filter for `X_t = X_{t-1} + N(0,1)`, `Y_t = X_t + N(0, sigma_y^2)`,
/// `X_0 ~ N(0, 1)`.
pub fn kalman_filter(observations: &[f64], sigma_y: f64) -> Result<KalmanOutput> {
    if !(sigma_y > 0.0) || !sigma_y.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma_y must be positive (got {sigma_y})"
        )));
    }
    let r = sigma_y * sigma_y;
    let (mut m, mut p) = (0.0, 1.0);
    let t = observations.len();
    let mut out = KalmanOutput {
        means: Vec::with_capacity(t),
        variances: Vec::with_capacity(t),
        log_cond_lik: Vec::with_capacity(t),
    };
    for &y in observations {
        let p_pred = p + 1.0;
        let s = p_pred + r;
        out.log_cond_lik.push(normal_log_density(y, m, s));
        let gain = p_pred / s;
        m += gain * (y - m);
        p = p_pred * (1.0 - gain);
        out.means.push(m);
        out.variances.push(p);
    }
    Ok(out)
}

/// Grid layout for the numerical filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Half-width of the grid in units of the largest marginal state sd over the horizon.
    pub range_sd_multiple: f64,
    /// Number of grid points.
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            range_sd_multiple: 8.0,
            points: 4001,
        }
    }
}

/// Grid approximation of the filtering distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPosterior {
    pub grid: Vec<f64>,
    /// filtered probabilities, one row of `grid.len()` entries per step
    pub rows: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub log_cond_lik: Vec<f64>,
}

/// Prebuilt grid and banded transition kernel, reusable across datasets of
/// the same model and horizon.
#[derive(Debug, Clone)]
pub struct GridFilter {
    grid: Vec<f64>,
    prior: Vec<f64>,
    /// per source point: first destination index and normalized kernel weights
    kernel: Vec<(usize, Vec<f64>)>,
}

const PREDICT_SKIP: f64 = 1e-20;

/// Kernel entries further than this many innovation sds are dropped.
const KERNEL_CUTOFF_SD: f64 = 10.0;

impl GridFilter {
    /// Lays out a uniform grid centred on zero whose half-width is
    /// `range_sd_multiple` times the largest marginal sd of `X_t`, `t <= steps`.
    pub fn new<M: StateSpaceModel + ?Sized>(
        model: &M,
        steps: usize,
        config: GridConfig,
    ) -> Result<Self> {
        let (m0, s0) = model.initial();
        let (phi, sigma) = model.transition();
        let mut var = s0 * s0;
        let mut max_var = var;
        let mut mean = m0;
        let mut max_abs_mean = mean.abs();
        for _ in 0..steps {
            var = phi * phi * var + sigma * sigma;
            mean *= phi;
            max_var = max_var.max(var);
            max_abs_mean = max_abs_mean.max(mean.abs());
        }
        let half = max_abs_mean + config.range_sd_multiple * max_var.sqrt();
        Self::with_range(model, -half, half, config.points)
    }

    pub fn with_range<M: StateSpaceModel + ?Sized>(
        model: &M,
        lo: f64,
        hi: f64,
        points: usize,
    ) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 points".into()));
        }
        if !(hi > lo) || !(hi - lo).is_finite() {
            return Err(Error::InvalidParameter(format!(
                "degenerate grid range [{lo}, {hi}]"
            )));
        }
        let step = (hi - lo) / (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();

        let (m0, s0) = model.initial();
        let mut prior: Vec<f64> = grid
            .iter()
            .map(|&x| normal_log_density(x, m0, s0 * s0).exp())
            .collect();
        normalize_in_place(&mut prior)?;

        let (phi, sigma) = model.transition();
        let reach = KERNEL_CUTOFF_SD * sigma;
        let kernel = grid
            .iter()
            .map(|&x| {
                let centre = phi * x;
                let first = (((centre - reach - lo) / step).floor().max(0.0) as usize).min(points - 1);
                let last = (((centre + reach - lo) / step).ceil().max(0.0) as usize).min(points - 1);
                let mut row: Vec<f64> = grid[first..=last]
                    .iter()
                    .map(|&z| {
                        let d = (z - centre) / sigma;
                        (-0.5 * d * d).exp()
                    })
                    .collect();
                let s: f64 = row.iter().sum();
                if s > 0.0 {
                    row.iter_mut().for_each(|v| *v /= s);
                    (first, row)
                } else {
                    // mass pushed entirely off the grid: clamp to the nearest edge
                    let edge = if centre < lo { 0 } else { points - 1 };
                    (edge, vec![1.0])
                }
            })
            .collect();
        Ok(GridFilter {
            grid,
            prior,
            kernel,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Forward recursion over `observations`.
    pub fn run<M: StateSpaceModel + ?Sized>(
        &self,
        model: &M,
        observations: &[f64],
    ) -> Result<GridPosterior> {
        let g = self.grid.len();
        let mut current = self.prior.clone();
        let mut predicted = vec![0.0; g];
        let mut log_lik = vec![0.0; g];
        let mut out = GridPosterior {
            grid: self.grid.clone(),
            rows: Vec::with_capacity(observations.len()),
            means: Vec::with_capacity(observations.len()),
            log_cond_lik: Vec::with_capacity(observations.len()),
        };
        for (t, &y) in observations.iter().enumerate() {
            self.predict(&current, &mut predicted);
            let mut max = f64::NEG_INFINITY;
            for (l, &x) in log_lik.iter_mut().zip(&self.grid) {
                *l = model.obs_log_density(x, y);
                max = max.max(*l);
            }
            if !max.is_finite() {
                return Err(Error::Degenerate { t: t + 1 });
            }
            let mut mass = 0.0;
            for j in 0..g {
                let v = predicted[j] * (log_lik[j] - max).exp();
                current[j] = v;
                mass += v;
            }
            if !(mass > 0.0) {
                return Err(Error::Degenerate { t: t + 1 });
            }
            let mut mean = 0.0;
            for (c, &x) in current.iter_mut().zip(&self.grid) {
                *c /= mass;
                mean += *c * x;
            }
            out.log_cond_lik.push(mass.ln() + max);
            out.means.push(mean);
            out.rows.push(current.clone());
        }
        Ok(out)
    }

    /// One prediction step: pushes `from` through the transition kernel.
    ///
    /// Source points carrying less than `1e-20` of the largest mass are
    /// skipped.
    pub fn predict(&self, from: &[f64], to: &mut [f64]) {
        to.iter_mut().for_each(|v| *v = 0.0);
        let cut = from.iter().copied().fold(0.0, f64::max) * PREDICT_SKIP;
        for (&p, (first, row)) in from.iter().zip(&self.kernel) {
            if p <= cut {
                continue;
            }
            for (dst, &k) in to[*first..*first + row.len()].iter_mut().zip(row) {
                *dst += p * k;
            }
        }
    }

    /// Prior over the grid points.
    pub fn prior(&self) -> &[f64] {
        &self.prior
    }
}

fn normalize_in_place(v: &mut [f64]) -> Result<()> {
    let s: f64 = v.iter().sum();
    if !(s > 0.0) {
        return Err(Error::Numerical("grid row has no mass".into()));
    }
    v.iter_mut().for_each(|x| *x /= s);
    Ok(())
}

/// Builds a grid for `observations.len()` steps and runs the forward filter.
pub fn grid_filter<M: StateSpaceModel + ?Sized>(
    observations: &[f64],
    model: &M,
    config: GridConfig,
) -> Result<GridPosterior> {
    GridFilter::new(model, observations.len(), config)?.run(model, observations)
}

/// `N(x; mean, var)` density.
pub fn normal_density(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noise_free_paths_are_zero() {
        for model in [Model::LinearGaussian { sigma_y: 2.0 }, Model::StochVol] {
            let sim = simulate_with_noise(&model, 12, || 0.0).unwrap();
            assert!(sim.states.iter().all(|&x| x == 0.0));
            assert!(sim.observations.iter().all(|&y| y == 0.0));
        }
    }

    #[test]
    fn simulate_rejects_empty_horizon() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(simulate(&Model::StochVol, 0, &mut rng).is_err());
    }

    #[test]
    fn simulate_is_seeded() {
        let m = Model::LinearGaussian { sigma_y: 1.0 };
        let a = simulate(&m, 30, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = simulate(&m, 30, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.states.len(), 30);
    }

    #[test]
    fn kalman_single_step() {
        let k = kalman_filter(&[1.0], 1.0).unwrap();
        assert!((k.means[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((k.variances[0] - 2.0 / 3.0).abs() < 1e-15);
        let expected = normal_density(1.0, 0.0, 3.0).ln();
        assert!((k.log_cond_lik[0] - expected).abs() < 1e-14);
        assert!((k.log_cond_lik[0] + 1.6351).abs() < 1e-3);
        for s in [0.1, 1.0, 7.0] {
            assert_eq!(kalman_filter(&[0.0], s).unwrap().means[0], 0.0);
        }
        assert!(kalman_filter(&[1.0], 0.0).is_err());
    }

    #[test]
    fn kalman_variance_settles() {
        let y: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let k = kalman_filter(&y, 3.0).unwrap();
        let diffs: Vec<f64> = k.variances.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        for w in diffs[4..].windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn grid_matches_kalman_single_step() {
        let m = Model::LinearGaussian { sigma_y: 1.0 };
        let g = grid_filter(&[1.0], &m, GridConfig::default()).unwrap();
        assert!((g.means[0] - 2.0 / 3.0).abs() < 1e-3);
        let lp = normal_density(1.0, 0.0, 3.0).ln();
        assert!((g.log_cond_lik[0] - lp).abs() < 1e-3);
    }

    #[test]
    fn stoch_vol_sign_symmetry() {
        let y = [0.05, -0.12, 0.3, 0.0, -0.02];
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let cfg = GridConfig { range_sd_multiple: 8.0, points: 801 };
        let a = grid_filter(&y, &Model::StochVol, cfg).unwrap();
        let b = grid_filter(&neg, &Model::StochVol, cfg).unwrap();
        assert_eq!(a.means, b.means);
        assert_eq!(a.log_cond_lik, b.log_cond_lik);
    }

    struct Flat;

    impl StateSpaceModel for Flat {
        fn initial(&self) -> (f64, f64) {
            (0.0, 1.0)
        }
        fn transition(&self) -> (f64, f64) {
            (0.9, 0.25)
        }
        fn observe(&self, x: f64, _noise: f64) -> f64 {
            x
        }
        fn obs_log_density(&self, _x: f64, _y: f64) -> f64 {
            0.0
        }
    }

    #[test]
    fn flat_likelihood_gives_pushed_forward_prior() {
        let f = GridFilter::new(&Flat, 3, GridConfig { range_sd_multiple: 8.0, points: 501 }).unwrap();
        let post = f.run(&Flat, &[0.0, 0.0, 0.0]).unwrap();
        let mut row = f.prior().to_vec();
        let mut next = vec![0.0; row.len()];
        for t in 0..3 {
            f.predict(&row, &mut next);
            std::mem::swap(&mut row, &mut next);
            for (a, b) in post.rows[t].iter().zip(&row) {
                assert!((a - b).abs() < 1e-14);
            }
            assert!((post.rows[t].iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(post.log_cond_lik[t].abs() < 1e-12);
        }
    }

    #[test]
    fn grid_rejects_degenerate_layout() {
        let m = Model::StochVol;
        assert!(GridFilter::with_range(&m, 1.0, 1.0, 10).is_err());
        assert!(GridFilter::with_range(&m, 0.0, 1.0, 1).is_err());
    }
}
