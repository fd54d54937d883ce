//! Baseline resampling schemes returning equally weighted offspring, and a
//! single dispatch point covering chopthin as well.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::chopthin::{self, systematic_counts, ResampleResult};
use crate::error::{Error, Result};
use crate::weights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeId {
    Multinomial,
    MultinomialCondbinom,
    Systematic,
    Stratified,
    Residual,
    ResidualStratified,
    Branching,
    Chopthin,
}

impl SchemeId {
    pub const ALL: [SchemeId; 8] = [
        SchemeId::Multinomial,
        SchemeId::MultinomialCondbinom,
        SchemeId::Systematic,
        SchemeId::Stratified,
        SchemeId::Residual,
        SchemeId::ResidualStratified,
        SchemeId::Branching,
        SchemeId::Chopthin,
    ];

    pub const BASELINES: [SchemeId; 7] = [
        SchemeId::Multinomial,
        SchemeId::MultinomialCondbinom,
        SchemeId::Systematic,
        SchemeId::Stratified,
        SchemeId::Residual,
        SchemeId::ResidualStratified,
        SchemeId::Branching,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::Multinomial => "multinomial",
            SchemeId::MultinomialCondbinom => "multinomial-condbinom",
            SchemeId::Systematic => "systematic",
            SchemeId::Stratified => "stratified",
            SchemeId::Residual => "residual",
            SchemeId::ResidualStratified => "residual-stratified",
            SchemeId::Branching => "branching",
            SchemeId::Chopthin => "chopthin",
        }
    }

    /// Whether the scheme always returns exactly the requested count.
    pub fn is_fixed_size(self) -> bool {
        self != SchemeId::Branching
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown resampling scheme '{s}'")))
    }
}

/// Resamples `w` into `n_out` equally weighted offspring (in expectation for
/// branching). Each offspring carries weight `sum(w) / len`.
pub fn baseline_resample<R: Rng + ?Sized>(
    scheme: SchemeId,
    w: &[f64],
    n_out: usize,
    rng: &mut R,
) -> Result<ResampleResult> {
    let total = weights::validate(w)?;
    if n_out == 0 {
        return Err(Error::InvalidParameter(
            "target particle count must be at least 1".into(),
        ));
    }
    let ancestors = match scheme {
        SchemeId::Multinomial => multinomial(w, total, n_out, rng),
        SchemeId::MultinomialCondbinom => multinomial_condbinom(w, total, n_out, rng)?,
        SchemeId::Systematic => {
            let u: f64 = rng.random();
            expand(&systematic_counts(w, n_out, u)?, n_out)
        }
        SchemeId::Stratified => expand(&stratified_counts(w, total, n_out, rng), n_out),
        SchemeId::Residual => residual(w, total, n_out, rng, Residuals::Multinomial),
        SchemeId::ResidualStratified => residual(w, total, n_out, rng, Residuals::Stratified),
        SchemeId::Branching => branching(w, total, n_out, rng),
        SchemeId::Chopthin => {
            return Err(Error::InvalidParameter(
                "chopthin is not a baseline scheme; use resample() or chopthin::chopthin()".into(),
            ))
        }
    };
    let each = if ancestors.is_empty() {
        0.0
    } else {
        total / ancestors.len() as f64
    };
    Ok(ResampleResult {
        weights: vec![each; ancestors.len()],
        ancestors,
    })
}

/// Runs any scheme; `eta` is required for chopthin and ignored otherwise.
pub fn resample<R: Rng + ?Sized>(
    scheme: SchemeId,
    eta: Option<f64>,
    w: &[f64],
    n_out: usize,
    rng: &mut R,
) -> Result<ResampleResult> {
    match scheme {
        SchemeId::Chopthin => {
            let eta = eta.ok_or_else(|| {
                Error::InvalidParameter("chopthin requires a ratio bound eta".into())
            })?;
            chopthin::chopthin(w, eta, n_out, rng)
        }
        other => baseline_resample(other, w, n_out, rng),
    }
}

fn expand(counts: &[usize], capacity: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(capacity);
    for (i, &c) in counts.iter().enumerate() {
        out.extend(std::iter::repeat_n(i, c));
    }
    out
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    w.iter()
        .map(|&v| {
            acc += v;
            acc
        })
        .collect()
}

/// Index of the cell containing `x` in the cumulative sums, skipping
/// zero-width cells.
fn locate(cum: &[f64], x: f64) -> usize {
    cum.partition_point(|&c| c <= x).min(cum.len() - 1)
}

fn multinomial<R: Rng + ?Sized>(w: &[f64], total: f64, n_out: usize, rng: &mut R) -> Vec<usize> {
    let cum = cumulative(w);
    let mut out = Vec::with_capacity(n_out);
    for _ in 0..n_out {
        let u: f64 = rng.random();
        let mut i = locate(&cum, u * total);
        // guard against landing on a zero-weight tail through rounding
        while w[i] == 0.0 && i > 0 {
            i -= 1;
        }
        out.push(i);
    }
    out
}

/// Multinomial counts from a chain of conditional Binomial draws.
fn multinomial_condbinom<R: Rng + ?Sized>(
    w: &[f64],
    total: f64,
    n_out: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; w.len()];
    let mut left = n_out as u64;
    let mut mass = total;
    for (i, &v) in w.iter().enumerate() {
        if left == 0 {
            break;
        }
        if v == 0.0 {
            continue;
        }
        let p = (v / mass).min(1.0);
        let c = if p >= 1.0 {
            left
        } else {
            Binomial::new(left, p)
                .map_err(|e| Error::Numerical(format!("binomial draw: {e}")))?
                .sample(rng)
        };
        counts[i] = c as usize;
        left -= c;
        mass -= v;
    }
    if left > 0 {
        // rounding in the remaining mass; hand the rest to the last positive weight
        let last = w.iter().rposition(|&v| v > 0.0).unwrap_or(0);
        counts[last] += left as usize;
    }
    Ok(expand(&counts, n_out))
}

/// One uniform per stratum `[k/n, (k+1)/n)`, walked against the cumulative weights.
fn stratified_counts<R: Rng + ?Sized>(
    w: &[f64],
    total: f64,
    n_out: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut counts = vec![0usize; w.len()];
    let scale = n_out as f64 / total;
    let last = w.len() - 1;
    let mut j = 0usize;
    let mut edge = w[0] * scale;
    for k in 0..n_out {
        let u: f64 = rng.random();
        let x = k as f64 + u;
        while j < last && (edge <= x || w[j] == 0.0) {
            j += 1;
            edge += w[j] * scale;
        }
        counts[j] += 1;
    }
    counts
}

enum Residuals {
    Multinomial,
    Stratified,
}

fn residual<R: Rng + ?Sized>(
    w: &[f64],
    total: f64,
    n_out: usize,
    rng: &mut R,
    kind: Residuals,
) -> Vec<usize> {
    let scale = n_out as f64 / total;
    let mut whole = Vec::with_capacity(w.len());
    let mut frac = Vec::with_capacity(w.len());
    let mut fixed = 0usize;
    for &v in w {
        let e = v * scale;
        let f = e.floor();
        whole.push(f as usize);
        frac.push(e - f);
        fixed += f as usize;
    }
    let rest = n_out.saturating_sub(fixed);
    let mut out = expand(&whole, n_out);
    out.truncate(n_out);
    if rest > 0 {
        let frac_total: f64 = frac.iter().sum();
        let extra = if frac_total > 0.0 {
            match kind {
                Residuals::Multinomial => multinomial(&frac, frac_total, rest, rng),
                Residuals::Stratified => {
                    expand(&stratified_counts(&frac, frac_total, rest, rng), rest)
                }
            }
        } else {
            // all expectations were integral up to rounding
            let mut order: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
            order.sort_by(|&x, &y| w[y].total_cmp(&w[x]));
            order.into_iter().cycle().take(rest).collect()
        };
        out.extend(extra);
    }
    out
}

/// Deterministic integer parts plus an independent Bernoulli draw for each
/// fractional part; the output size is random with mean `n_out`.
fn branching<R: Rng + ?Sized>(w: &[f64], total: f64, n_out: usize, rng: &mut R) -> Vec<usize> {
    let scale = n_out as f64 / total;
    let mut out = Vec::with_capacity(n_out + n_out / 8 + 1);
    for (i, &v) in w.iter().enumerate() {
        let e = v * scale;
        let f = e.floor();
        let mut c = f as usize;
        let r = e - f;
        if r > 0.0 {
            let u: f64 = rng.random();
            if u < r {
                c += 1;
            }
        }
        out.extend(std::iter::repeat_n(i, c));
    }
    out
}
