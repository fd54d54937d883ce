//! The chopthin resampler.
//!
//! Particles lighter than a threshold `a` are thinned (kept with probability
//! `w / a`, at weight `a`), particles heavier than `b = eta * a / 2` are chopped
//! into several lighter copies, and particles in `[a, b)` pass through. The
//! threshold is chosen so the expected number of offspring is exactly `N`;
//! the resulting weights all lie in `[a, eta * a]`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::weights;

/// Smallest ratio bound for which the piecewise-linear offspring function
/// keeps every chopped weight inside `[a, eta * a]`.
pub const MIN_ETA: f64 = 4.0;

/// Threshold parameters of the expected-offspring function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HParams {
    a: f64,
    eta: f64,
}

impl HParams {
    pub fn new(a: f64, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "threshold a must be positive and finite (got {a})"
            )));
        }
        Ok(HParams { a, eta })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Upper threshold `eta * a / 2` above which particles are chopped.
    pub fn b(&self) -> f64 {
        self.eta * self.a / 2.0
    }

    /// Expected offspring count of a particle of weight `w`. Assumes `w >= 0`.
    #[inline]
    pub fn h(&self, w: f64) -> f64 {
        offspring(w, self.a, self.b())
    }
}

#[inline]
fn offspring(w: f64, a: f64, b: f64) -> f64 {
    if w < a {
        w / a
    } else if w < b {
        1.0
    } else {
        w / b
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta >= MIN_ETA && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidEta { eta, min: MIN_ETA })
    }
}

fn check_target(n_out: usize) -> Result<()> {
    if n_out == 0 {
        return Err(Error::InvalidParameter(
            "target particle count must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Expected number of offspring: `w/a` below `a`, 1 on `[a, eta a / 2)`,
/// `2 w / (eta a)` above.
pub fn h_eval(w: f64, p: &HParams) -> Result<f64> {
    if !(w >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "weight must be non-negative (got {w})"
        )));
    }
    Ok(p.h(w))
}

/// `ceil(x)` for `x >= 0`, and 0 for negative `x`.
#[inline]
fn ceil_nonneg(x: f64) -> usize {
    if !(x > 0.0) {
        return 0;
    }
    let t = x as usize;
    if (t as f64) < x {
        t + 1
    } else {
        t
    }
}

/// Systematic allocation of `m` grid points `k + u`, `k = 0..m`, over the
/// cells of the cumulative sum of `values` rescaled to total `m`.
///
/// The counts always sum to exactly `m`.
pub fn systematic_counts(values: &[f64], m: usize, u: f64) -> Result<Vec<usize>> {
    check_offset(u)?;
    let mut counts = vec![0usize; values.len()];
    if m == 0 {
        return Ok(counts);
    }
    let total = weights::validate(values)?;
    let mut grid = SystematicGrid::new(total, m, u);
    let (head, last) = counts.split_at_mut(values.len() - 1);
    for (c, &v) in head.iter_mut().zip(values) {
        *c = grid.take(v);
    }
    last[0] = grid.rest();
    Ok(counts)
}

fn check_offset(u: f64) -> Result<()> {
    if (0.0..1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "systematic offset must lie in [0, 1) (got {u})"
        )))
    }
}

/// Cell-by-cell systematic allocation, for callers that produce the values
/// as a stream.
struct SystematicGrid {
    scale: f64,
    u: f64,
    m: usize,
    cum: f64,
    /// grid points strictly below the running cumulative edge
    below: usize,
}

impl SystematicGrid {
    fn new(total: f64, m: usize, u: f64) -> Self {
        SystematicGrid {
            scale: m as f64 / total,
            u,
            m,
            cum: 0.0,
            below: 0,
        }
    }

    #[inline]
    fn take(&mut self, v: f64) -> usize {
        self.cum += v * self.scale;
        let n_below = ceil_nonneg(self.cum - self.u).clamp(self.below, self.m);
        let c = n_below - self.below;
        self.below = n_below;
        c
    }

    /// Count of the final cell, whose edge is exactly `m` whatever the
    /// rounding in the running sum.
    fn rest(&mut self) -> usize {
        let c = self.m - self.below;
        self.below = self.m;
        c
    }
}

/// Output of a resampling step: ancestor indices (0-based) and the weights
/// attached to each offspring.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleResult {
    pub ancestors: Vec<usize>,
    pub weights: Vec<f64>,
}

impl ResampleResult {
    pub fn len(&self) -> usize {
        self.ancestors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ancestors.is_empty()
    }

    /// Number of offspring of each of the `n` input particles.
    pub fn counts(&self, n: usize) -> Vec<usize> {
        let mut c = vec![0; n];
        for &i in &self.ancestors {
            c[i] += 1;
        }
        c
    }

    /// Total offspring weight of each of the `n` input particles.
    pub fn offspring_weight(&self, n: usize) -> Vec<f64> {
        let mut s = vec![0.0; n];
        for (&i, &w) in self.ancestors.iter().zip(&self.weights) {
            s[i] += w;
        }
        s
    }
}

/// Bookkeeping of the expected-linear-time threshold search.
///
/// `lower` holds weights not yet classified against the threshold `a`,
/// `upper` those not yet classified against `b = eta a / 2`. Decided weights
/// only contribute through the running sums and counts.
#[derive(Debug, Clone, Default)]
pub struct SolverState {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// sum of weights known to be below the root threshold
    pub sum_low: f64,
    /// count of weights known to be at or above the root threshold
    pub count_mid: usize,
    /// sum of weights known to be at or above the root upper threshold
    pub sum_up: f64,
    /// count of weights known to be at or above the root upper threshold
    pub count_up: usize,
}

impl SolverState {
    /// Total expected offspring at threshold `a` (with `b = eta a / 2`),
    /// computed from the partial sums and the undecided lists.
    pub fn expected_offspring(&self, a: f64, b: f64) -> f64 {
        self.offspring_with(&self.lower, &self.upper, a, b)
    }

    /// As [`Self::expected_offspring`] with the undecided lists supplied by
    /// the caller. Zero weights contribute nothing.
    fn offspring_with(&self, lower: &[f64], upper: &[f64], a: f64, b: f64) -> f64 {
        let (inv_a, inv_b) = (1.0 / a, 1.0 / b);
        let mut h = self.sum_low * inv_a + self.count_mid as f64 + self.sum_up * inv_b
            - self.count_up as f64;
        h += lower.iter().map(|&v| (v * inv_a).min(1.0)).sum::<f64>();
        h += upper.iter().map(|&v| (v * inv_b - 1.0).max(0.0)).sum::<f64>();
        h
    }

    /// Folds the weights that the comparison at `(a, b)` decides into the
    /// running sums and returns the still undecided ones. `root_above` tells
    /// whether the root lies above `a`.
    fn narrow(&mut self, lower: &[f64], upper: &[f64], a: f64, b: f64, root_above: bool) -> (Vec<f64>, Vec<f64>) {
        let mut keep_l = Vec::with_capacity(lower.len());
        let mut keep_u = Vec::with_capacity(upper.len());
        if root_above {
            for &v in lower {
                if v <= a {
                    self.sum_low += v;
                } else {
                    keep_l.push(v);
                }
            }
            keep_u.extend(upper.iter().copied().filter(|&v| v > b));
        } else {
            for &v in lower {
                if v >= a {
                    self.count_mid += 1;
                } else if v > 0.0 {
                    keep_l.push(v);
                }
            }
            for &v in upper {
                if v >= b {
                    self.sum_up += v;
                    self.count_up += 1;
                } else if v > 0.0 {
                    keep_u.push(v);
                }
            }
        }
        (keep_l, keep_u)
    }
}

#[cfg(debug_assertions)]
const DEBUG_CHECK_MAX_LEN: usize = 10_000;

fn sum_h(w: &[f64], a: f64, b: f64) -> f64 {
    w.iter().map(|&v| offspring(v, a, b)).sum()
}

/// Finds `a > 0` with `sum_i h_a(w_i) = n_out` in expected `O(n)` time.
///
/// Each round picks a random pivot from the longer undecided list, evaluates
/// the total expected offspring there, and discards the half of each list that
/// the sign of the residual decides. Zero weights never enter the lists.
pub fn solve_a<R: Rng + ?Sized>(w: &[f64], eta: f64, n_out: usize, rng: &mut R) -> Result<f64> {
    check_eta(eta)?;
    check_target(n_out)?;
    weights::validate(w)?;
    let target = n_out as f64;
    let mut st = SolverState::default();
    // bracket of the root, used only when the closing formula degenerates
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    // the first round reads the input in place instead of copying it twice
    let mut first = true;

    while first || !(st.lower.is_empty() && st.upper.is_empty()) {
        let (lower, upper): (&[f64], &[f64]) = if first {
            (w, w)
        } else {
            (&st.lower, &st.upper)
        };
        let (a, b) = if first {
            let a = pick_positive(w, rng);
            (a, eta * a / 2.0)
        } else if lower.len() >= upper.len() {
            let a = pick(lower, rng);
            (a, eta * a / 2.0)
        } else {
            let b = pick(upper, rng);
            (2.0 * b / eta, b)
        };
        let h = st.offspring_with(lower, upper, a, b);
        // the O(n) cross-check would dominate debug-build timings on large inputs
        #[cfg(debug_assertions)]
        if w.len() <= DEBUG_CHECK_MAX_LEN {
            let direct = sum_h(w, a, b);
            debug_assert!(
                (h - direct).abs() <= 1e-9 * direct.abs().max(1.0),
                "partial-sum identity broken: {h} vs {direct}"
            );
        }
        if h == target {
            return Ok(a);
        }
        let root_above = h > target;
        if root_above {
            lo = lo.max(a);
        } else {
            hi = hi.min(a);
        }
        let (l, u) = if first {
            st.narrow(w, w, a, b, root_above)
        } else {
            let (l, u) = (std::mem::take(&mut st.lower), std::mem::take(&mut st.upper));
            st.narrow(&l, &u, a, b, root_above)
        };
        st.lower = l;
        st.upper = u;
        first = false;
    }

    let numer = st.sum_low + 2.0 * st.sum_up / eta;
    let denom = target - st.count_mid as f64 + st.count_up as f64;
    let a = numer / denom;
    if a > 0.0 && a.is_finite() {
        return Ok(a);
    }
    // Flat stretch of the offspring curve: every point between the bracketing
    // pivots is a root.
    let a = match (lo > 0.0, hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => {
            return Err(Error::Numerical(
                "threshold search finished without a bracket".into(),
            ))
        }
    };
    Ok(a)
}

#[inline]
fn pick<R: Rng + ?Sized>(list: &[f64], rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let i = ((u * list.len() as f64) as usize).min(list.len() - 1);
    list[i]
}

/// Uniform pick among the positive entries of `w` with a single draw.
fn pick_positive<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> f64 {
    let n_pos = w.iter().filter(|&&v| v > 0.0).count();
    if n_pos == w.len() {
        return pick(w, rng);
    }
    let u: f64 = rng.random();
    let k = ((u * n_pos as f64) as usize).min(n_pos - 1);
    w.iter().copied().filter(|&v| v > 0.0).nth(k).expect("k < number of positive weights")
}

/// Reference root finder for `sum_i h_a(w_i) = n_out`: plain bisection on the
/// continuous, non-increasing map `a -> sum_i h_a(w_i)`.
pub fn solve_a_bisection(w: &[f64], eta: f64, n_out: usize) -> Result<f64> {
    check_eta(eta)?;
    check_target(n_out)?;
    weights::validate(w)?;
    let target = n_out as f64;
    let min_pos = w
        .iter()
        .copied()
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    let max = w.iter().copied().fold(0.0, f64::max);
    let mut lo = min_pos * 2.0 / eta * 1e-6;
    let mut hi = max * 1e6;
    let eval = |a: f64| sum_h(w, a, eta * a / 2.0);
    let tol = 1e-12 * target;
    let mut best = (f64::INFINITY, lo);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        let h = eval(mid);
        let r = (h - target).abs();
        if r < best.0 {
            best = (r, mid);
        }
        if r <= tol || mid <= lo || mid >= hi {
            break;
        }
        if h > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.1)
}

/// Resamples `w` to exactly `n_out` weighted offspring whose max/min weight
/// ratio is at most `eta`, preserving the total weight and, in expectation,
/// each particle's offspring weight.
pub fn chopthin<R: Rng + ?Sized>(
    w: &[f64],
    eta: f64,
    n_out: usize,
    rng: &mut R,
) -> Result<ResampleResult> {
    let a = solve_a(w, eta, n_out, rng)?;
    let params = HParams::new(a, eta)?;
    Ok(chop_thin_impl(w, &params, n_out, rng, false)?.result)
}

/// Detailed output of the chop/thin stage, exposing the intermediate
/// quantities for inspection.
#[derive(Debug, Clone)]
pub struct ChopThinTrace {
    pub result: ResampleResult,
    /// survivors of the thinning stage
    pub n_thinned: usize,
    /// extra offspring assigned by the fractional-part allocation
    pub n_extra: usize,
    /// weight correction per unit of fractional offspring
    pub zeta: f64,
    /// `(index, adjusted weight, offspring count)` of each chopped particle
    pub chopped: Vec<(usize, f64, usize)>,
}

/// Thinning and chopping for a given threshold. `params.a()` must solve the
/// offspring equation for `n_out`, otherwise the count bookkeeping fails.
pub fn chop_and_thin<R: Rng + ?Sized>(
    w: &[f64],
    params: &HParams,
    n_out: usize,
    rng: &mut R,
) -> Result<ChopThinTrace> {
    weights::validate(w)?;
    chop_thin_impl(w, params, n_out, rng, true)
}

fn chop_thin_impl<R: Rng + ?Sized>(
    w: &[f64],
    params: &HParams,
    n_out: usize,
    rng: &mut R,
    record: bool,
) -> Result<ChopThinTrace> {
    check_target(n_out)?;
    let a = params.a();
    let b = params.b();
    let inv_a = 1.0 / a;
    // whole and fractional parts of the expected offspring of a heavy particle
    let split = |v: f64| {
        if v < b {
            (1, 0.0)
        } else {
            let h = v / b;
            let whole = h as usize;
            (whole, h - whole as f64)
        }
    };

    let mut ancestors = Vec::with_capacity(n_out);
    let mut out_w = Vec::with_capacity(n_out);

    // Thin the light particles by a systematic pass in index order and
    // tally the heavy ones.
    let mut u: f64 = rng.random();
    let mut light_sum = 0.0;
    let mut whole_total = 0usize;
    let mut frac_total = 0.0;
    let mut last_heavy = None;
    for (i, &v) in w.iter().enumerate() {
        if v < a {
            light_sum += v;
            u += v * inv_a;
            if u >= 1.0 {
                ancestors.push(i);
                out_w.push(a);
                u -= 1.0;
            }
        } else {
            let (whole, f) = split(v);
            whole_total += whole;
            frac_total += f;
            last_heavy = Some(i);
        }
    }
    let n_thinned = ancestors.len();

    // Whole parts are deterministic, fractional parts share the remaining slots.
    let n_extra = n_out as i64 - n_thinned as i64 - whole_total as i64;
    if n_extra < 0 {
        return Err(Error::Numerical(format!(
            "offspring bookkeeping went negative ({n_extra}); threshold {a} does not solve the count equation"
        )));
    }
    let n_extra = n_extra as usize;
    let zeta = if frac_total > 0.0 {
        (light_sum - a * n_thinned as f64) / frac_total
    } else {
        if n_extra != 0 {
            return Err(Error::Numerical(format!(
                "{n_extra} offspring left over with no fractional mass to place them"
            )));
        }
        0.0
    };
    let mut grid = if n_extra > 0 {
        let u2: f64 = rng.random();
        Some(SystematicGrid::new(frac_total, n_extra, u2))
    } else {
        None
    };

    // Chop.
    let mut chopped = Vec::new();
    if let Some(last) = last_heavy {
        for (i, &v) in w.iter().enumerate().take(last + 1) {
            if v < a {
                continue;
            }
            let (whole, f) = split(v);
            let extra = match grid.as_mut() {
                Some(g) if i == last => g.rest(),
                Some(g) => g.take(f),
                None => 0,
            };
            let c = whole + extra;
            let adjusted = v + zeta * f;
            let piece = adjusted / c as f64;
            if c == 1 {
                ancestors.push(i);
                out_w.push(piece);
            } else {
                ancestors.extend(std::iter::repeat_n(i, c));
                out_w.extend(std::iter::repeat_n(piece, c));
            }
            if record {
                chopped.push((i, adjusted, c));
            }
        }
    }
    debug_assert_eq!(ancestors.len(), n_out);

    Ok(ChopThinTrace {
        result: ResampleResult {
            ancestors,
            weights: out_w,
        },
        n_thinned,
        n_extra,
        zeta,
        chopped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(a: f64, eta: f64) -> HParams {
        HParams::new(a, eta).unwrap()
    }

    /// Fixed-sequence source for driving the thinning and allocation uniforms.
    struct Fixed(Vec<u64>, usize);

    impl rand::RngCore for Fixed {
        fn next_u32(&mut self) -> u32 {
            (self.next_u64() >> 32) as u32
        }
        fn next_u64(&mut self) -> u64 {
            let v = self.0[self.1 % self.0.len()];
            self.1 += 1;
            v
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            rand::rand_core::impls::fill_bytes_via_next(self, dst)
        }
    }

    /// Bits that `rng.random::<f64>()` maps to approximately `u`.
    fn bits_for(u: f64) -> u64 {
        ((u * (1u64 << 53) as f64) as u64) << 11
    }

    #[test]
    fn h_examples() {
        let q = p(1.0, 4.0);
        assert_eq!(h_eval(0.5, &q).unwrap(), 0.5);
        assert_eq!(h_eval(1.5, &q).unwrap(), 1.0);
        assert_eq!(h_eval(4.0, &q).unwrap(), 2.0);
        assert_eq!(h_eval(2.0, &q).unwrap(), 1.0);
        assert_eq!(h_eval(0.0, &q).unwrap(), 0.0);
        assert!(h_eval(-1.0, &q).is_err());
    }

    #[test]
    fn h_is_continuous_at_breakpoints() {
        for eta in [4.0, 3.0 + 8f64.sqrt(), 10.0] {
            let q = p(0.7, eta);
            for edge in [q.a(), q.b()] {
                let left = q.h(edge * (1.0 - 1e-12));
                let right = q.h(edge);
                assert!((left - right).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn h_is_nonincreasing_in_a() {
        for &w in &[0.01, 0.5, 1.0, 1.99, 2.0, 3.7, 50.0] {
            let mut prev = f64::INFINITY;
            for k in 1..500 {
                let a = k as f64 * 0.01;
                let h = p(a, 4.5).h(w);
                assert!(h <= prev + 1e-15, "w={w} a={a}");
                prev = h;
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(HParams::new(1.0, 3.9).is_err());
        assert!(HParams::new(0.0, 4.0).is_err());
        assert!(HParams::new(-1.0, 4.0).is_err());
        assert_eq!(p(2.0, 4.0).b(), 4.0);
    }

    #[test]
    fn systematic_examples() {
        assert_eq!(systematic_counts(&[0.5, 0.5], 1, 0.3).unwrap(), vec![1, 0]);
        assert_eq!(systematic_counts(&[0.5, 0.5], 1, 0.7).unwrap(), vec![0, 1]);
        for u in [0.0, 0.2, 0.5, 0.999] {
            assert_eq!(systematic_counts(&[1.0, 1.0, 1.0], 3, u).unwrap(), vec![1, 1, 1]);
        }
        assert_eq!(
            systematic_counts(&[0.111, 0.333, 0.556, 1.0, 1.0], 4, 0.2).unwrap(),
            vec![0, 1, 1, 1, 1]
        );
    }

    #[test]
    fn systematic_edge_cases() {
        assert_eq!(systematic_counts(&[0.0, 0.0], 0, 0.5).unwrap(), vec![0, 0]);
        assert!(systematic_counts(&[0.0, 0.0], 2, 0.5).is_err());
        assert!(systematic_counts(&[1.0], 2, 1.0).is_err());
        assert_eq!(systematic_counts(&[0.0, 3.0, 0.0], 5, 0.9).unwrap(), vec![0, 5, 0]);
        // cells may capture several grid points
        assert_eq!(systematic_counts(&[0.9, 0.1], 3, 0.5).unwrap(), vec![3, 0]);
    }

    #[test]
    fn solve_hand_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let a = solve_a(&[1.0, 100.0], 4.0, 2, &mut rng).unwrap();
            assert!((a - 25.5).abs() < 1e-12, "{a}");
            let a = solve_a(&[0.1, 0.3, 0.5, 0.9, 1.0], 4.0, 5, &mut rng).unwrap();
            assert!((a - 0.3375).abs() < 1e-12, "{a}");
        }
        assert!((solve_a_bisection(&[1.0, 100.0], 4.0, 2).unwrap() - 25.5).abs() < 1e-9);
        assert!(
            (solve_a_bisection(&[0.1, 0.3, 0.5, 0.9, 1.0], 4.0, 5).unwrap() - 0.3375).abs() < 1e-9
        );
    }

    #[test]
    fn solve_equal_weights_lands_on_plateau() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (c, n) in [(0.2, 7usize), (3.0, 1), (1.0, 64)] {
            let w = vec![c; n];
            for eta in [4.0, 6.0, 10.0] {
                let a = solve_a(&w, eta, n, &mut rng).unwrap();
                assert!(a > 2.0 * c / eta && a <= c, "a={a}");
                assert_eq!(sum_h(&w, a, eta * a / 2.0), n as f64);
                let a = solve_a_bisection(&w, eta, n).unwrap();
                assert!((sum_h(&w, a, eta * a / 2.0) - n as f64).abs() <= 1e-12 * n as f64);
            }
        }
    }

    #[test]
    fn solve_rejects_invalid() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(solve_a(&[0.0, 0.0], 4.0, 1, &mut rng).is_err());
        assert!(solve_a(&[1.0], 4.0, 0, &mut rng).is_err());
        assert!(matches!(solve_a(&[1.0], 3.0, 1, &mut rng), Err(Error::InvalidEta { .. })));
        assert!(solve_a_bisection(&[1.0], 2.0, 1).is_err());
    }

    #[test]
    fn solve_ignores_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = [0.0, 1.0, 0.0, 100.0, 0.0];
        let a = solve_a(&w, 4.0, 2, &mut rng).unwrap();
        assert!((a - 25.5).abs() < 1e-12);
    }

    #[test]
    fn identity_for_equal_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = vec![1.5; 9];
        let r = chopthin(&w, 4.0, 9, &mut rng).unwrap();
        assert_eq!(r.ancestors, (0..9).collect::<Vec<_>>());
        assert_eq!(r.weights, w);
    }

    #[test]
    fn two_particle_branches_enumerated() {
        let params = p(25.5, 4.0);
        // u + 1/25.5 >= 1 iff u >= 1 - 1/25.5: the light particle survives
        let mut survive = Fixed(vec![bits_for(0.99), bits_for(0.5)], 0);
        let t = chop_and_thin(&[1.0, 100.0], &params, 2, &mut survive).unwrap();
        assert_eq!(t.result.ancestors, vec![0, 1]);
        assert!((t.result.weights[0] - 25.5).abs() < 1e-12);
        assert!((t.result.weights[1] - 75.5).abs() < 1e-12);
        assert!((t.zeta + 25.5).abs() < 1e-12);

        let mut die = Fixed(vec![bits_for(0.5), bits_for(0.5)], 0);
        let t = chop_and_thin(&[1.0, 100.0], &params, 2, &mut die).unwrap();
        assert_eq!(t.result.ancestors, vec![1, 1]);
        assert!((t.result.weights[0] - 50.5).abs() < 1e-12);
        assert!((t.result.weights[1] - 50.5).abs() < 1e-12);
        assert!((t.zeta - 51.0 / 49.0).abs() < 1e-12);

        // exact expectation over the thinning uniform
        let ps: f64 = 1.0 / 25.5;
        assert!((ps * 25.5 - 1.0).abs() < 1e-12);
        assert!((ps * 75.5 + (1.0 - ps) * 101.0 - 100.0).abs() < 1e-12);
    }

    #[test]
    fn single_offspring_carries_total_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let r = chopthin(&[1.0, 2.0, 3.0], 4.0, 1, &mut rng).unwrap();
            assert_eq!(r.len(), 1);
            assert!((r.weights[0] - 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_never_survive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = [0.0, 1.0, 0.0, 2.0, 0.0, 3.0];
        for _ in 0..200 {
            let r = chopthin(&w, 4.0, 6, &mut rng).unwrap();
            assert!(r.ancestors.iter().all(|&i| w[i] > 0.0));
        }
    }

    #[test]
    fn middle_band_passes_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // a ≈ 1 here: 1.5 sits in [a, 2a) and must be copied unchanged
        let w = [0.2, 0.8, 1.0, 1.5, 1.0, 0.5, 1.0];
        let n = w.len();
        let a = solve_a(&w, 4.0, n, &mut rng).unwrap();
        let params = p(a, 4.0);
        let t = chop_and_thin(&w, &params, n, &mut rng).unwrap();
        for &(i, adj, c) in &t.chopped {
            let h = params.h(w[i]);
            if h.fract() == 0.0 && h == 1.0 {
                assert_eq!(c, 1);
                assert_eq!(adj, w[i]);
            }
        }
    }
}
