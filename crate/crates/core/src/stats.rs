//! Replica statistics: sample moments and jackknife error bars.
//!
//! Every Monte-Carlo error bar in the crate is a jackknife over independent
//! replicas, either delete-one (closed form for moments) or delete-a-group
//! for statistics that must be recomputed from scratch.

use std::ops::Range;

/// Standard error from leave-out replicates `theta_{-g}`.
pub fn jackknife_se(replicates: &[f64]) -> f64 {
    let g = replicates.len();
    if g < 2 {
        return f64::NAN;
    }
    let mean = replicates.iter().sum::<f64>() / g as f64;
    let ss: f64 = replicates.iter().map(|t| (t - mean) * (t - mean)).sum();
    ((g as f64 - 1.0) / g as f64 * ss).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    covariance(xs, xs)
}

/// Unbiased sample covariance.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = mean(xs);
    let my = mean(ys);
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (n - 1.0)
}

/// Sample mean with its standard error.
pub fn mean_with_se(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let se = if xs.len() > 1 {
        (variance(xs) / xs.len() as f64).sqrt()
    } else {
        f64::NAN
    };
    (m, se)
}

/// Running sums for closed-form delete-one covariances.
#[derive(Debug, Clone, Copy, Default)]
pub struct CrossSums {
    pub n: usize,
    pub sx: f64,
    pub sy: f64,
    pub sxy: f64,
}

impl CrossSums {
    pub fn from_pairs(xs: &[f64], ys: &[f64]) -> Self {
        let mut s = CrossSums {
            n: xs.len(),
            ..Default::default()
        };
        for (x, y) in xs.iter().zip(ys) {
            s.sx += x;
            s.sy += y;
            s.sxy += x * y;
        }
        s
    }

    pub fn covariance(&self) -> f64 {
        let n = self.n as f64;
        (self.sxy - self.sx * self.sy / n) / (n - 1.0)
    }

    /// Covariance with one pair `(x, y)` removed.
    pub fn covariance_without(&self, x: f64, y: f64) -> f64 {
        let n = self.n as f64 - 1.0;
        let sx = self.sx - x;
        let sy = self.sy - y;
        (self.sxy - x * y - sx * sy / n) / (n - 1.0)
    }
}

/// Delete-one replicates of the unbiased covariance of `(xs, ys)`.
pub fn covariance_leave_one_out(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let sums = CrossSums::from_pairs(xs, ys);
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| sums.covariance_without(x, y))
        .collect()
}

/// Unbiased covariance and its delete-one jackknife standard error.
pub fn covariance_with_se(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let sums = CrossSums::from_pairs(xs, ys);
    let reps = covariance_leave_one_out(xs, ys);
    (sums.covariance(), jackknife_se(&reps))
}

/// Splits `0..n` into `groups` contiguous, nearly equal ranges.
pub fn group_ranges(n: usize, groups: usize) -> Vec<Range<usize>> {
    let g = groups.clamp(1, n.max(1));
    (0..g).map(|k| (k * n / g)..((k + 1) * n / g)).collect()
}

/// Delete-a-group jackknife: `stat` is evaluated on the complement of each
/// group of indices. Returns `(replicates, se)`.
pub fn grouped_jackknife<F>(n: usize, groups: usize, stat: F) -> (Vec<f64>, f64)
where
    F: Fn(&[usize]) -> f64,
{
    let ranges = group_ranges(n, groups);
    let reps: Vec<f64> = ranges
        .iter()
        .map(|rg| {
            let keep: Vec<usize> = (0..n).filter(|i| !rg.contains(i)).collect();
            stat(&keep)
        })
        .collect();
    let se = jackknife_se(&reps);
    (reps, se)
}

/// Weighted least-squares fit of `y = a + b x`; returns `(a, b, se_b)`.
pub fn weighted_linear_fit(xs: &[f64], ys: &[f64], weights: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = weights.iter().sum();
    let mx = xs.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(weights).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((x, y), w) in xs.iter().zip(ys).zip(weights) {
        sxx += w * (x - mx) * (x - mx);
        sxy += w * (x - mx) * (y - my);
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    // Standard error of the slope when weights are inverse variances.
    let se_b = (1.0 / sxx).sqrt();
    (a, b, se_b)
}
