use super::scheme::BlockScheme;
use crate::ensemble::ReplicaEnsemble;
use crate::error::{LabError, Result};
use crate::stats::{covariance_leave_one_out, jackknife_se, CrossSums};

/// An estimate with the delete-one replicates it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    replicates: Vec<f64>,
}

impl Estimate {
    fn new(value: f64, replicates: Vec<f64>) -> Self {
        Estimate {
            value,
            se: jackknife_se(&replicates),
            replicates,
        }
    }

    fn combine(a: &Estimate, b: &Estimate, f: impl Fn(f64, f64) -> f64) -> Estimate {
        let reps = a.replicates.iter().zip(&b.replicates).map(|(x, y)| f(*x, *y)).collect();
        Estimate::new(f(a.value, b.value), reps)
    }

    /// Holds `self ≤ other` up to `k` standard errors of the difference.
    pub fn le_within(&self, other: &Estimate, k: f64) -> bool {
        let diff = Estimate::combine(self, other, |x, y| x - y);
        diff.value <= k * diff.se
    }
}

fn variance_estimate(xs: &[f64]) -> Estimate {
    Estimate::new(CrossSums::from_pairs(xs, xs).covariance(), covariance_leave_one_out(xs, xs))
}

/// Variance decomposition of `S_{[k,k+n)}` into blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagnostics {
    pub scheme: BlockScheme,
    pub k: usize,
    /// `σ²_{[k,k+n)}`
    pub sigma2_window: Estimate,
    /// `σ²_{[k,k+ml)}`
    pub sigma2_mblocks: Estimate,
    /// `s²_m = Σ_j var(block_j)`
    pub s2_sum: Estimate,
    /// `Σ_{j≠j'} cov(block_j, block_j')`
    pub cross_cov_total: Estimate,
    /// `σ²_window / σ²_mblocks`
    pub ratio_window_mblocks: Estimate,
    /// `σ²_mblocks / s²_m`
    pub ratio_mblocks_s2: Estimate,
    /// `ĉ = min_j var(X_j)` over the window.
    pub c_hat: f64,
    /// `v̂(0) = max_j cov(X_j, S_{[k,k+n)})`.
    pub v0_hat: f64,
    /// `C* = max_j E|X_j − E X_j|³`.
    pub c_star_hat: f64,
}

impl BlockDiagnostics {
    /// `s² ≤ σ²_mblocks ≤ σ²_window` within `k_se` standard errors.
    pub fn sandwich_holds(&self, k_se: f64) -> bool {
        self.s2_sum.le_within(&self.sigma2_mblocks, k_se) && self.sigma2_mblocks.le_within(&self.sigma2_window, k_se)
    }

    /// `σ²_mblocks ≤ s² + cross` within `k_se`: an identity for these
    /// estimators, so it only fails on numerical breakage.
    pub fn cross_bound_holds(&self, k_se: f64) -> bool {
        let total = Estimate::combine(&self.s2_sum, &self.cross_cov_total, |a, b| a + b);
        self.sigma2_mblocks.le_within(&total, k_se)
    }

    /// `n ĉ ≤ σ²_window ≤ n v̂(0)`.
    pub fn window_bounds(&self) -> (f64, f64) {
        let n = self.scheme.n as f64;
        (n * self.c_hat, n * self.v0_hat)
    }

    /// `m l ĉ ≤ s² ≤ m l v̂(0)`.
    pub fn block_bounds(&self) -> (f64, f64) {
        let ml = self.scheme.covered() as f64;
        (ml * self.c_hat, ml * self.v0_hat)
    }
}

pub fn block_diagnostics(ens: &ReplicaEnsemble, scheme: &BlockScheme, k: usize) -> Result<BlockDiagnostics> {
    if k + scheme.n > ens.len() {
        return Err(LabError::InvalidParameter(format!(
            "window [{k}, {}) exceeds the ensemble length {}",
            k + scheme.n,
            ens.len()
        )));
    }
    if ens.replicas() < 3 {
        return Err(LabError::InvalidParameter("block diagnostics need at least 3 replicas".into()));
    }
    let window = ens.window_sums(k, scheme.n);
    let sigma2_window = variance_estimate(&window);
    let mut mblocks = vec![0.0; ens.replicas()];
    let mut s2_value = 0.0;
    let mut s2_reps = vec![0.0; ens.replicas()];
    for b in 0..scheme.blocks {
        let sums = ens.window_sums(k + b * scheme.block_len, scheme.block_len);
        let v = variance_estimate(&sums);
        s2_value += v.value;
        s2_reps.iter_mut().zip(&v.replicates).for_each(|(a, r)| *a += r);
        mblocks.iter_mut().zip(&sums).for_each(|(a, s)| *a += s);
    }
    let sigma2_mblocks = variance_estimate(&mblocks);
    let s2_sum = Estimate::new(s2_value, s2_reps);
    let cross_cov_total = Estimate::combine(&sigma2_mblocks, &s2_sum, |a, b| a - b);
    let ratio_window_mblocks = Estimate::combine(&sigma2_window, &sigma2_mblocks, |a, b| a / b);
    let ratio_mblocks_s2 = Estimate::combine(&sigma2_mblocks, &s2_sum, |a, b| a / b);
    let mut c_hat = f64::INFINITY;
    let mut v0_hat: f64 = 0.0;
    let mut c_star_hat: f64 = 0.0;
    for site in k..k + scheme.n {
        let col = ens.column(site);
        let sums = CrossSums::from_pairs(&col, &window);
        let var = CrossSums::from_pairs(&col, &col).covariance();
        let mean = sums.sx / col.len() as f64;
        c_hat = c_hat.min(var);
        v0_hat = v0_hat.max(sums.covariance());
        c_star_hat = c_star_hat.max(col.iter().map(|x| (x - mean).abs().powi(3)).sum::<f64>() / col.len() as f64);
    }
    Ok(BlockDiagnostics {
        scheme: *scheme,
        k,
        sigma2_window,
        sigma2_mblocks,
        s2_sum,
        cross_cov_total,
        ratio_window_mblocks,
        ratio_mblocks_s2,
        c_hat,
        v0_hat,
        c_star_hat,
    })
}
