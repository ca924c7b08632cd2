//! Exact one-dimensional Mallows (Wasserstein) and Kolmogorov distances.
//!
//! On the line the optimal coupling of two laws is the comonotone one, so
//! `d_r^r(F, G) = ∫_0^1 |F^{-1}(u) − G^{-1}(u)|^r du` with the left-continuous
//! generalized inverses. For empirical laws that integrand is piecewise
//! constant; against a normal law each constant piece integrates in closed
//! form (r = 1, 2) or by adaptive quadrature.

use crate::error::{LabError, Result};
use crate::normal::{partial_moments, standard_cdf, standard_pdf, standard_quantile_closed, NormalLaw};
use crate::quadrature::integrate_with_breaks;

/// Finite reals sorted ascending; never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    values: Vec<f64>,
}

impl SortedSample {
    /// Sorts `values` and validates them.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(LabError::EmptySample);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(LabError::NonFinite { index, value });
        }
        values.sort_by(f64::total_cmp);
        Ok(SortedSample { values })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The image under `x ↦ a·x + b` with `a > 0` (order preserved).
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(LabError::InvalidParameter(format!("affine scale must be > 0, got {a}")));
        }
        Self::new(self.values.iter().map(|x| a * x + b).collect())
    }

    /// Mean of `|x|^r` over the sample.
    pub fn abs_moment(&self, r: f64) -> f64 {
        self.values.iter().map(|x| x.abs().powf(r)).sum::<f64>() / self.len() as f64
    }
}

/// Empirical distribution function of a [`SortedSample`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDF {
    sample: SortedSample,
}

impl From<SortedSample> for EmpiricalDF {
    fn from(sample: SortedSample) -> Self {
        EmpiricalDF { sample }
    }
}

impl EmpiricalDF {
    pub fn new(sample: SortedSample) -> Self {
        EmpiricalDF { sample }
    }

    pub fn sample(&self) -> &SortedSample {
        &self.sample
    }

    pub fn cdf(&self, x: f64) -> f64 {
        empirical_cdf(&self.sample, x)
    }

    pub fn inverse(&self, u: f64) -> Result<f64> {
        generalized_inverse(self, u)
    }
}

/// Order `r > 0` of a Mallows distance.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DistanceOrder(f64);

impl DistanceOrder {
    pub fn new(r: f64) -> Result<Self> {
        if r > 0.0 && r.is_finite() {
            Ok(DistanceOrder(r))
        } else {
            Err(LabError::Domain(format!("distance order must be > 0, got {r}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Metric axioms only hold from r = 1 up.
    pub fn is_metric(self) -> bool {
        self.0 >= 1.0
    }
}

/// `#{i : x_i ≤ x} / m`.
pub fn empirical_cdf(sample: &SortedSample, x: f64) -> f64 {
    let count = sample.values.partition_point(|&v| v <= x);
    count as f64 / sample.len() as f64
}

/// `inf{x : F(x) ≥ u} = x_(⌈u·m⌉)` for `u ∈ (0, 1)`.
pub fn generalized_inverse(df: &EmpiricalDF, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(LabError::Domain(format!("generalized inverse needs 0 < u < 1, got {u}")));
    }
    let m = df.sample.len();
    let idx = ((u * m as f64).ceil() as usize).clamp(1, m);
    Ok(df.sample.values[idx - 1])
}

/// `d_r` between two empirical laws via the comonotone coupling.
pub fn mallows_between_samples(a: &SortedSample, b: &SortedSample, r: DistanceOrder) -> f64 {
    if a.len() == b.len() {
        let r = r.value();
        let sum: f64 = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs().powf(r))
            .sum();
        (sum / a.len() as f64).powf(1.0 / r)
    } else {
        mallows_merged_grid(a, b, r)
    }
}

/// `d_r` as the exact piecewise-constant quantile integral over the merged
/// grid `{i/m} ∪ {j/n}`; valid for any sizes.
pub fn mallows_merged_grid(a: &SortedSample, b: &SortedSample, r: DistanceOrder) -> f64 {
    let r = r.value();
    let (m, n) = (a.len() as u128, b.len() as u128);
    // Breakpoints measured in units of 1/(m·n) so all bookkeeping is integral.
    let total = (m * n) as f64;
    let (mut i, mut j) = (0u128, 0u128);
    let mut prev = 0u128;
    let mut acc = 0.0;
    while i < m && j < n {
        let next_a = (i + 1) * n;
        let next_b = (j + 1) * m;
        let next = next_a.min(next_b);
        let diff = (a.values[i as usize] - b.values[j as usize]).abs();
        acc += (next - prev) as f64 * diff.powf(r);
        prev = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    (acc / total).powf(1.0 / r)
}

/// Closed-form `d_2` between two normal laws.
pub fn mallows_closed_form_normal(law1: &NormalLaw, law2: &NormalLaw) -> f64 {
    let dm = law1.mean() - law2.mean();
    let ds = law1.stddev() - law2.stddev();
    (dm * dm + ds * ds).sqrt()
}

/// Cut-off for the infinite tail intervals; φ(40) underflows to ~1e-348.
const TAIL_CLIP: f64 = 40.0;

/// Total absolute tolerance on `d_r^r` for the quadrature route.
pub const QUADRATURE_TOL: f64 = 1e-8;

/// `∫_a^b |x − z|^r φ(z) dz` for one quantile cell.
fn cell_cost(x: f64, a: f64, b: f64, r: f64, tol: f64) -> f64 {
    if r == 2.0 {
        let pm = partial_moments(a, b);
        return (x * x * pm.m0 - 2.0 * x * pm.m1 + pm.m2).max(0.0);
    }
    if r == 1.0 {
        let below = |lo: f64, hi: f64| {
            // ∫_lo^hi (x − z) φ, with z ≤ x
            let pm = partial_moments(lo, hi);
            x * pm.m0 - pm.m1
        };
        let above = |lo: f64, hi: f64| {
            let pm = partial_moments(lo, hi);
            pm.m1 - x * pm.m0
        };
        let v = if x <= a {
            above(a, b)
        } else if x >= b {
            below(a, b)
        } else {
            below(a, x) + above(x, b)
        };
        return v.max(0.0);
    }
    let lo = a.max(-TAIL_CLIP);
    let hi = b.min(TAIL_CLIP);
    if !(hi > lo) {
        return 0.0;
    }
    // Geometric splits toward the clipped tails keep the bisection shallow.
    let mut breaks = vec![x];
    for k in 0..6 {
        let d = 2f64.powi(k);
        if a.is_infinite() {
            breaks.push(hi - d);
        }
        if b.is_infinite() {
            breaks.push(lo + d);
        }
    }
    integrate_with_breaks(|z| (x - z).abs().powf(r) * standard_pdf(z), lo, hi, &breaks, tol)
}

/// `d_r(F_m, law)` for an empirical law against a normal law.
pub fn mallows_vs_normal(df: &EmpiricalDF, law: &NormalLaw, r: DistanceOrder) -> f64 {
    let s = law.stddev();
    let mu = law.mean();
    let m = df.sample.len();
    let rv = r.value();
    let tol = QUADRATURE_TOL / m as f64;
    let mut lower = f64::NEG_INFINITY;
    let mut acc = 0.0;
    for (i, &x) in df.sample.values.iter().enumerate() {
        let upper = if i + 1 == m {
            f64::INFINITY
        } else {
            standard_quantile_closed((i + 1) as f64 / m as f64)
        };
        acc += cell_cost((x - mu) / s, lower, upper, rv, tol);
        lower = upper;
    }
    s * acc.powf(1.0 / rv)
}

/// `sup_x |F_m(x) − Φ(x)|`, attained at the order statistics.
pub fn kolmogorov_vs_normal(df: &EmpiricalDF, law: &NormalLaw) -> f64 {
    let m = df.sample.len() as f64;
    df.sample
        .values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let p = law.cdf(x);
            let hi = (i + 1) as f64 / m;
            let lo = i as f64 / m;
            (hi - p).abs().max((p - lo).abs())
        })
        .fold(0.0, f64::max)
}

/// Upper bound on `d_K` implied by `d_1` when the target density is bounded
/// by `1/√(2π)`: `d_K ≤ 2·√(d_1/√(2π))`.
pub fn kolmogorov_bound_from_d1(d1: f64) -> f64 {
    2.0 * (d1 / (2.0 * std::f64::consts::PI).sqrt()).sqrt()
}

/// `sup |F_m − Φ|` computed naively on a dense grid; slow, used as a
/// cross-check only.
#[doc(hidden)]
pub fn kolmogorov_grid_scan(df: &EmpiricalDF, points_per_unit: usize) -> f64 {
    let v = df.sample.values();
    let lo = v[0].min(-8.0) - 1.0;
    let hi = v[v.len() - 1].max(8.0) + 1.0;
    let steps = ((hi - lo) * points_per_unit as f64) as usize;
    let mut best: f64 = 0.0;
    for k in 0..=steps {
        let x = lo + (hi - lo) * k as f64 / steps as f64;
        best = best.max((df.cdf(x) - standard_cdf(x)).abs());
    }
    // Left limits at the atoms.
    for &x in v {
        let left = v.partition_point(|&y| y < x) as f64 / v.len() as f64;
        best = best.max((left - standard_cdf(x)).abs());
        best = best.max((df.cdf(x) - standard_cdf(x)).abs());
    }
    best
}
