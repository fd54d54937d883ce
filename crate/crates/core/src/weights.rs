//! Weight-vector arithmetic: effective sample size, normalization, the
//! max/min weight ratio and the ESS lower bound implied by a ratio bound.

use crate::error::{Error, Result};

/// A validated vector of non-negative particle weights with positive finite total.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate(&values)?;
        Ok(WeightVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        WeightVector::new(values)
    }
}

/// Checks the weight-vector invariants and returns the total.
pub fn validate(w: &[f64]) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::EmptyWeights);
    }
    let mut total = 0.0;
    let mut ok = true;
    for &value in w {
        ok &= (0.0..=f64::MAX).contains(&value);
        total += value;
    }
    if !ok {
        let (index, &value) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=f64::MAX).contains(*v))
            .expect("a weight failed validation");
        return Err(Error::InvalidWeight { index, value });
    }
    if !total.is_finite() {
        return Err(Error::InvalidParameter("weight total overflows".into()));
    }
    if total <= 0.0 {
        return Err(Error::ZeroTotal);
    }
    Ok(total)
}

/// Effective sample size `(sum w)^2 / sum w^2`.
pub fn ess(w: &[f64]) -> Result<f64> {
    validate(w)?;
    // Scale by the maximum first so that squares neither overflow nor underflow.
    let max = w.iter().fold(0.0_f64, |m, &v| m.max(v));
    let (s, s2) = w.iter().fold((0.0, 0.0), |(s, s2), &v| {
        let x = v / max;
        (s + x, s2 + x * x)
    });
    Ok(s * s / s2)
}

/// Rescales `w` so that it sums to `total`.
pub fn normalize_to(w: &[f64], total: f64) -> Result<Vec<f64>> {
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "normalization total must be positive and finite (got {total})"
        )));
    }
    let sum = validate(w)?;
    let scale = total / sum;
    Ok(w.iter().map(|&v| v * scale).collect())
}

/// `max_i w_i / min_i w_i`; every weight must be strictly positive.
pub fn weight_ratio(w: &[f64]) -> Result<f64> {
    validate(w)?;
    let mut min = f64::INFINITY;
    let mut max = 0.0_f64;
    for (index, &v) in w.iter().enumerate() {
        if v == 0.0 {
            return Err(Error::ZeroWeight { index });
        }
        min = min.min(v);
        max = max.max(v);
    }
    Ok(max / min)
}

/// Lower bound on the ESS of any `n`-vector whose max/min ratio is at most `eta`:
/// `4 (eta n + 1 - eta^2) / (eta + 1)^2`.
///
/// The bound is decreasing in `eta` and equals `n` at `eta = 1`. For large
/// `eta` relative to `n` it becomes negative (and hence vacuous).
pub fn ess_lower_bound(eta: f64, n: usize) -> Result<f64> {
    if !(eta >= 1.0) || !eta.is_finite() {
        return Err(Error::InvalidEta { eta, min: 1.0 });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let n = n as f64;
    Ok(4.0 * (eta * n + 1.0 - eta * eta) / ((eta + 1.0) * (eta + 1.0)))
}

/// Ratio bound whose leading-order ESS guarantee is `gamma * n`, i.e. the
/// solution `eta >= 1` of `4 eta / (eta + 1)^2 = gamma`.
pub fn eta_for_gamma(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in (0, 1] (got {gamma})"
        )));
    }
    Ok((2.0 - gamma + 2.0 * (1.0 - gamma).sqrt()) / gamma)
}
