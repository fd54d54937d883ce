#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Pareto};

pub const ETA_HALF: f64 = 5.828_427_124_746_19;
pub const ETAS: [f64; 3] = [4.0, ETA_HALF, 10.0];

/// Weights 0.1, 0.2, ..., 1.0.
pub fn fixture10() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub w: Vec<f64>,
    pub eta: f64,
    pub n_out: usize,
    pub seed: u64,
}

/// Random solver/resampler instances: n in 1..=200, weights iid Exp(1),
/// Pareto(1.5) or Exp(1) with a fraction of exact zeros, N in
/// {1, n/2, n, 2n}, eta cycling through `ETAS`.
pub fn instances(count: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pareto = Pareto::new(1.0, 1.5).unwrap();
    (0..count)
        .map(|k| {
            let n = rng.random_range(1..=200usize);
            let mut w: Vec<f64> = match k % 3 {
                0 => (0..n).map(|_| Exp1.sample(&mut rng)).collect(),
                1 => (0..n).map(|_| pareto.sample(&mut rng)).collect(),
                _ => (0..n)
                    .map(|_| {
                        if rng.random::<f64>() < 0.3 {
                            0.0
                        } else {
                            Exp1.sample(&mut rng)
                        }
                    })
                    .collect(),
            };
            if w.iter().all(|&v| v == 0.0) {
                w[0] = 1.0;
            }
            let n_out = match (k / 3) % 4 {
                0 => 1,
                1 => (n / 2).max(1),
                2 => n,
                _ => 2 * n,
            };
            Instance {
                w,
                eta: ETAS[(k / 12) % ETAS.len()],
                n_out,
                seed: rng.random(),
            }
        })
        .collect()
}

pub fn sum_h(w: &[f64], a: f64, eta: f64) -> f64 {
    let b = eta * a / 2.0;
    w.iter()
        .map(|&v| {
            if v < a {
                v / a
            } else if v < b {
                1.0
            } else {
                v / b
            }
        })
        .sum()
}

pub fn ess(w: &[f64]) -> f64 {
    let s: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|v| v * v).sum();
    s * s / s2
}

pub fn lower_bound(eta: f64, n: usize) -> f64 {
    let n = n as f64;
    4.0 * (eta * n + 1.0 - eta * eta) / ((eta + 1.0) * (eta + 1.0))
}

/// Sample mean and standard error.
pub fn mean_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut s, mut s2) = (0.0, 0.0, 0.0);
    for x in xs {
        n += 1.0;
        s += x;
        s2 += x * x;
    }
    let m = s / n;
    let var = (s2 - n * m * m) / (n - 1.0);
    (m, (var.max(0.0) / n).sqrt())
}

/// log N(x; mean, var).
pub fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean) * (x - mean) / var)
}

/// Local-level Kalman filter written out independently: returns
/// (filtered means, filtered variances, log p(y_t | y_{1:t-1})).
pub fn kalman(y: &[f64], sigma_y: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let r = sigma_y * sigma_y;
    let (mut m, mut p) = (0.0, 1.0);
    let (mut ms, mut ps, mut ls) = (vec![], vec![], vec![]);
    for &obs in y {
        let pp = p + 1.0;
        let s = pp + r;
        ls.push(log_normal_pdf(obs, m, s));
        let k = pp / s;
        m += k * (obs - m);
        p = pp * (1.0 - k);
        ms.push(m);
        ps.push(p);
    }
    (ms, ps, ls)
}
