//! Covariance structure of replica ensembles: lag covariances and
//! susceptibility, Cox–Grimmett tail sums with an empirical envelope, a
//! randomized positive-association test, and the characteristic-function gap
//! bound for associated vectors.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensemble::ReplicaEnsemble;
use crate::error::{LabError, Result};
use crate::stats::{covariance_with_se, grouped_jackknife, jackknife_se, weighted_linear_fit};

/// Statistical tolerance, in standard errors, used throughout.
pub const SE_TOLERANCE: f64 = 3.0;

/// Consecutive sub-SE lags required before the susceptibility sum is cut.
pub const TRUNCATION_RUN: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum Stationarity {
    /// Average each lag over every position of the window.
    Stationary,
    /// Keep `c(k, k+j)` per tested site `k` (window-relative; empty = all).
    NonStationary { sites: Vec<usize> },
}

/// Lag covariances `c(0..=max_lag)` of a stationary process.
#[derive(Debug, Clone, PartialEq)]
pub struct LagCovariances {
    pub values: Vec<f64>,
    pub se: Vec<f64>,
    /// Jackknife leave-out replicates, one lag vector per replicate.
    pub replicates: Vec<Vec<f64>>,
}

impl LagCovariances {
    /// `c(j)` for any signed lag; symmetric by construction.
    pub fn at(&self, j: i64) -> Option<f64> {
        self.values.get(j.unsigned_abs() as usize).copied()
    }

    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }

    /// Jackknife SE of the linear functional `Σ_j w_j c(j)`.
    pub fn functional_se(&self, weights: &[f64]) -> f64 {
        let reps: Vec<f64> = self
            .replicates
            .iter()
            .map(|rep| rep.iter().zip(weights).map(|(c, w)| c * w).sum())
            .collect();
        jackknife_se(&reps)
    }
}

/// Per-site covariances `c(k, k+j)` for `|j| ≤ max_lag`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteCovariances {
    pub sites: Vec<usize>,
    pub max_lag: usize,
    /// `values[s][j + max_lag]`; `None` where `k + j` leaves the window.
    pub values: Vec<Vec<Option<f64>>>,
    pub se: Vec<Vec<Option<f64>>>,
}

impl SiteCovariances {
    pub fn at(&self, site_index: usize, lag: i64) -> Option<f64> {
        let idx = lag + self.max_lag as i64;
        if idx < 0 {
            return None;
        }
        self.values[site_index].get(idx as usize).copied().flatten()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceTable {
    Stationary(LagCovariances),
    NonStationary(SiteCovariances),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSummary {
    pub table: CovarianceTable,
    /// `χ̂ = c(0) + 2 Σ_{1 ≤ j ≤ J} c(j)` (stationary) or `max_k Σ_j c(k, j)`.
    pub susceptibility: f64,
    pub susceptibility_se: f64,
    /// Lag `J` at which the susceptibility sum was cut.
    pub truncation_lag: usize,
    /// No run of sub-SE lags was found inside the available depth.
    pub truncation_bias: bool,
    /// Window-relative sites whose column had zero variance.
    pub zero_variance_sites: Vec<usize>,
    pub replicas: usize,
}

impl CovarianceSummary {
    pub fn zero_variance_warning(&self) -> bool {
        !self.zero_variance_sites.is_empty()
    }

    pub fn lags(&self) -> Option<&LagCovariances> {
        match &self.table {
            CovarianceTable::Stationary(l) => Some(l),
            CovarianceTable::NonStationary(_) => None,
        }
    }

    /// Builds a stationary summary from lag estimates and their jackknife
    /// replicates (delete-one or delete-group).
    pub fn from_lag_replicates(values: Vec<f64>, replicates: Vec<Vec<f64>>, replicas: usize) -> Self {
        let max_lag = values.len() - 1;
        let se: Vec<f64> = (0..=max_lag)
            .map(|j| jackknife_se(&replicates.iter().map(|r| r[j]).collect::<Vec<_>>()))
            .collect();
        let (truncation_lag, truncation_bias) = truncation_lag(&values, &se);
        let weights: Vec<f64> = (0..=max_lag)
            .map(|j| match j {
                0 => 1.0,
                j if j <= truncation_lag => 2.0,
                _ => 0.0,
            })
            .collect();
        let lags = LagCovariances { values, se, replicates };
        let susceptibility = lags.values.iter().zip(&weights).map(|(c, w)| c * w).sum();
        let susceptibility_se = lags.functional_se(&weights);
        CovarianceSummary {
            table: CovarianceTable::Stationary(lags),
            susceptibility,
            susceptibility_se,
            truncation_lag,
            truncation_bias,
            zero_variance_sites: Vec::new(),
            replicas,
        }
    }
}

/// First lag closing a run of [`TRUNCATION_RUN`] lags with `|ĉ| < SE`.
fn truncation_lag(values: &[f64], se: &[f64]) -> (usize, bool) {
    let mut run = 0;
    for j in 1..values.len() {
        if values[j].abs() < se[j] {
            run += 1;
            if run == TRUNCATION_RUN {
                return (j, false);
            }
        } else {
            run = 0;
        }
    }
    (values.len() - 1, true)
}

fn centered_rows(ens: &ReplicaEnsemble) -> (Vec<f64>, Vec<usize>) {
    let (r, n) = (ens.replicas(), ens.len());
    let mut means = vec![0.0; n];
    for row in ens.rows() {
        for (m, x) in means.iter_mut().zip(row) {
            *m += x;
        }
    }
    means.iter_mut().for_each(|m| *m /= r as f64);
    let mut centered = Vec::with_capacity(r * n);
    for row in ens.rows() {
        centered.extend(row.iter().zip(&means).map(|(x, m)| x - m));
    }
    let zero: Vec<usize> = (0..n)
        .filter(|&i| (0..r).all(|k| centered[k * n + i] == 0.0))
        .collect();
    (centered, zero)
}

/// Sample covariances with delete-one jackknife errors over replicas.
pub fn estimate_covariances(
    ens: &ReplicaEnsemble,
    stationarity: &Stationarity,
    max_lag: usize,
) -> Result<CovarianceSummary> {
    let (r, n) = (ens.replicas(), ens.len());
    if r < 3 {
        return Err(LabError::InvalidParameter(format!(
            "covariance estimation needs at least 3 replicas, got {r}"
        )));
    }
    let max_lag = max_lag.min(n - 1);
    let (x, zero) = centered_rows(ens);
    let rf = r as f64;
    match stationarity {
        Stationarity::Stationary => {
            // Centered columns: cov_{-k}(i, i+j) = (S_ij − x_ki x_k,i+j · R/(R−1)) / (R−2).
            let mut per_rep = vec![vec![0.0; max_lag + 1]; r];
            for (k, d) in per_rep.iter_mut().enumerate() {
                let row = &x[k * n..(k + 1) * n];
                for (j, dj) in d.iter_mut().enumerate() {
                    *dj = row[..n - j].iter().zip(&row[j..]).map(|(a, b)| a * b).sum();
                }
            }
            let totals: Vec<f64> = (0..=max_lag).map(|j| per_rep.iter().map(|d| d[j]).sum()).collect();
            let positions = |j: usize| (n - j) as f64;
            let values: Vec<f64> = (0..=max_lag).map(|j| totals[j] / ((rf - 1.0) * positions(j))).collect();
            let replicates: Vec<Vec<f64>> = per_rep
                .iter()
                .map(|d| {
                    (0..=max_lag)
                        .map(|j| (totals[j] - d[j] * rf / (rf - 1.0)) / ((rf - 2.0) * positions(j)))
                        .collect()
                })
                .collect();
            let mut summary = CovarianceSummary::from_lag_replicates(values, replicates, r);
            summary.zero_variance_sites = zero;
            Ok(summary)
        }
        Stationarity::NonStationary { sites } => {
            let sites: Vec<usize> = if sites.is_empty() {
                (0..n).collect()
            } else {
                sites.clone()
            };
            if let Some(&bad) = sites.iter().find(|&&s| s >= n) {
                return Err(LabError::InvalidParameter(format!("site {bad} outside window of {n}")));
            }
            let width = 2 * max_lag + 1;
            let mut values = vec![vec![None; width]; sites.len()];
            let mut ses = vec![vec![None; width]; sites.len()];
            let mut best = (f64::NEG_INFINITY, 0.0);
            for (s, &site) in sites.iter().enumerate() {
                let mut row_sum = 0.0;
                let mut row_var = 0.0;
                for lag in -(max_lag as i64)..=(max_lag as i64) {
                    let other = site as i64 + lag;
                    if other < 0 || other >= n as i64 {
                        continue;
                    }
                    let other = other as usize;
                    let mut total = 0.0;
                    let prods: Vec<f64> = (0..r)
                        .map(|k| {
                            let p = x[k * n + site] * x[k * n + other];
                            total += p;
                            p
                        })
                        .collect();
                    let c = total / (rf - 1.0);
                    let reps: Vec<f64> = prods
                        .iter()
                        .map(|p| (total - p * rf / (rf - 1.0)) / (rf - 2.0))
                        .collect();
                    let se = jackknife_se(&reps);
                    let idx = (lag + max_lag as i64) as usize;
                    values[s][idx] = Some(c);
                    ses[s][idx] = Some(se);
                    row_sum += c;
                    row_var += se * se;
                }
                if row_sum > best.0 {
                    best = (row_sum, row_var.sqrt());
                }
            }
            Ok(CovarianceSummary {
                table: CovarianceTable::NonStationary(SiteCovariances {
                    sites,
                    max_lag,
                    values,
                    se: ses,
                }),
                susceptibility: best.0,
                susceptibility_se: best.1,
                truncation_lag: max_lag,
                truncation_bias: false,
                zero_variance_sites: zero,
                replicas: r,
            })
        }
    }
}

/// Weighted decay fit `y ≈ A·exp(b·g(x))` of an estimated profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    /// Decay exponent `b`: a log-log slope or minus an exponential rate.
    pub slope: f64,
    pub slope_se: f64,
    pub amplitude: f64,
    pub points: usize,
    /// Points whose estimate was not positive (kept in the fit, but not in
    /// the log-space starting guess).
    pub nonpositive: usize,
}

/// Fits `y = A·exp(b·g)` by Gauss–Newton on the raw values with weights
/// `1/se²`, started from a weighted log-space line through the positive
/// points. Nonpositive estimates stay in the fit, so noise around zero
/// does not bias the tail.
fn decay_fit(g: &[f64], y: &[f64], se: &[f64]) -> Option<SlopeFit> {
    let floor = se.iter().copied().filter(|s| *s > 0.0).fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 1e-12 };
    let w: Vec<f64> = se.iter().map(|s| 1.0 / s.max(floor).powi(2)).collect();
    let (mut lg, mut ly, mut lw) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..y.len() {
        if y[i] > 0.0 {
            lg.push(g[i]);
            ly.push(y[i].ln());
            lw.push(w[i] * y[i] * y[i]);
        }
    }
    if lg.len() < 2 {
        return None;
    }
    let (mut a, mut b, _) = weighted_linear_fit(&lg, &ly, &lw);
    let cost = |a: f64, b: f64| -> f64 {
        (0..y.len()).map(|i| w[i] * (y[i] - (a + b * g[i]).exp()).powi(2)).sum()
    };
    let mut current = cost(a, b);
    let mut info = [[0.0; 2]; 2];
    for _ in 0..100 {
        let mut grad = [0.0; 2];
        info = [[0.0; 2]; 2];
        for i in 0..y.len() {
            let f = (a + b * g[i]).exp();
            let d = [f, f * g[i]];
            let r = y[i] - f;
            for p in 0..2 {
                grad[p] += w[i] * d[p] * r;
                for q in 0..2 {
                    info[p][q] += w[i] * d[p] * d[q];
                }
            }
        }
        let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
        if !(det > 0.0) {
            break;
        }
        let da = (info[1][1] * grad[0] - info[0][1] * grad[1]) / det;
        let db = (info[0][0] * grad[1] - info[1][0] * grad[0]) / det;
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-6 {
            let next = cost(a + step * da, b + step * db);
            if next <= current {
                a += step * da;
                b += step * db;
                improved = current - next > 1e-14 * current.max(1e-300);
                current = next;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
    Some(SlopeFit {
        slope: b,
        slope_se: (info[0][0] / det).sqrt(),
        amplitude: a.exp(),
        points: y.len(),
        nonpositive: y.len() - lg.len(),
    })
}

/// Exponential decay `ĉ(j) ≈ C·e^{−m j}` of lag covariances over
/// `j_lo..=j_hi`; the returned `slope` is `−m`.
pub fn exponential_decay_fit(lags: &LagCovariances, j_lo: usize, j_hi: usize) -> Option<SlopeFit> {
    let js: Vec<usize> = (j_lo..=j_hi.min(lags.max_lag())).collect();
    let g: Vec<f64> = js.iter().map(|&j| j as f64).collect();
    let y: Vec<f64> = js.iter().map(|&j| lags.values[j]).collect();
    let se: Vec<f64> = js.iter().map(|&j| lags.se[j]).collect();
    decay_fit(&g, &y, &se)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoxGrimmettProfile {
    /// `û(n)` for `n = 0..=n_max` (stationary) or `max_k û_k(n)`.
    pub u_hat: Vec<f64>,
    pub u_se: Vec<f64>,
    /// Per tested site profiles (non-stationary mode only).
    pub per_site: Vec<(usize, Vec<f64>)>,
    /// Empirical certificate `v(n) ≥ û_k(n)`: estimate plus 3·SE.
    pub envelope: Vec<f64>,
    /// Largest lag entering the tail sums.
    pub truncation_radius: usize,
    /// Lag depth was insufficient for `n_max` plus the susceptibility cut.
    pub truncation_bias: bool,
}

impl CoxGrimmettProfile {
    pub fn n_max(&self) -> usize {
        self.u_hat.len() - 1
    }

    /// `û` nonincreasing in `n` up to `k_se` combined standard errors.
    pub fn is_nonincreasing_within(&self, k_se: f64) -> bool {
        self.u_hat.windows(2).zip(self.u_se.windows(2)).all(|(u, s)| {
            let tol = k_se * (s[0] * s[0] + s[1] * s[1]).sqrt();
            u[1] <= u[0] + tol
        })
    }

    /// Partial sums of the envelope over `0..=n_max`.
    pub fn envelope_partial_sums(&self) -> Vec<f64> {
        self.envelope
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v.max(0.0);
                Some(*acc)
            })
            .collect()
    }

    /// Power-law slope of `û(n)` against `n` over `n_lo..=n_hi`.
    pub fn decay_slope(&self, n_lo: usize, n_hi: usize) -> Option<SlopeFit> {
        let ns: Vec<usize> = (n_lo.max(1)..=n_hi.min(self.n_max())).collect();
        let g: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let y: Vec<f64> = ns.iter().map(|&n| self.u_hat[n]).collect();
        let se: Vec<f64> = ns.iter().map(|&n| self.u_se[n]).collect();
        decay_fit(&g, &y, &se)
    }
}

/// Tail sums `û(n) = Σ_{|j| ≥ n} ĉ(j)` for `n = 0..=n_max`.
pub fn cox_grimmett_profile(cov: &CovarianceSummary, n_max: usize) -> CoxGrimmettProfile {
    match &cov.table {
        CovarianceTable::Stationary(lags) => {
            let radius = lags.max_lag();
            let truncation_bias = cov.truncation_bias || radius < n_max + cov.truncation_lag.min(radius);
            let mut u_hat = Vec::with_capacity(n_max + 1);
            let mut u_se = Vec::with_capacity(n_max + 1);
            for n in 0..=n_max {
                let weights: Vec<f64> = (0..=radius)
                    .map(|j| match j {
                        0 if n == 0 => 1.0,
                        0 => 0.0,
                        j if j >= n => 2.0,
                        _ => 0.0,
                    })
                    .collect();
                u_hat.push(lags.values.iter().zip(&weights).map(|(c, w)| c * w).sum());
                u_se.push(lags.functional_se(&weights));
            }
            let envelope = u_hat.iter().zip(&u_se).map(|(u, s)| u + SE_TOLERANCE * s).collect();
            CoxGrimmettProfile {
                u_hat,
                u_se,
                per_site: Vec::new(),
                envelope,
                truncation_radius: radius,
                truncation_bias,
            }
        }
        CovarianceTable::NonStationary(table) => {
            let radius = table.max_lag;
            let lag_range = -(radius as i64)..=(radius as i64);
            let mut per_site = Vec::with_capacity(table.sites.len());
            let mut best = vec![f64::NEG_INFINITY; n_max + 1];
            let mut best_se = vec![0.0; n_max + 1];
            let mut envelope = vec![f64::NEG_INFINITY; n_max + 1];
            for (s, &site) in table.sites.iter().enumerate() {
                let mut profile = Vec::with_capacity(n_max + 1);
                for n in 0..=n_max {
                    let mut u = 0.0;
                    let mut var = 0.0;
                    for lag in lag_range.clone() {
                        if lag.unsigned_abs() as usize >= n {
                            let idx = (lag + radius as i64) as usize;
                            if let (Some(c), Some(se)) = (table.values[s][idx], table.se[s][idx]) {
                                u += c;
                                var += se * se;
                            }
                        }
                    }
                    // Lag estimates treated as uncorrelated for the error bar.
                    let se = var.sqrt();
                    if u > best[n] {
                        best[n] = u;
                        best_se[n] = se;
                    }
                    envelope[n] = envelope[n].max(u + SE_TOLERANCE * se);
                    profile.push(u);
                }
                per_site.push((site, profile));
            }
            CoxGrimmettProfile {
                u_hat: best,
                u_se: best_se,
                per_site,
                envelope,
                truncation_radius: radius,
                truncation_bias: radius < n_max,
            }
        }
    }
}

/// Family of a randomly drawn coordinatewise nondecreasing function.
#[derive(Debug, Clone, PartialEq)]
pub enum MonotoneFn {
    Coordinate(usize),
    /// `Σ_c w_c Σ_t 1{x_c > t}`
    Staircase(Vec<(usize, f64, Vec<f64>)>),
    /// `Π_c 1{x_c > t_c}`
    IndicatorProduct(Vec<(usize, f64)>),
    /// `clamp(Σ_c w_c x_c, lo, hi)`
    ClippedLinear { weights: Vec<(usize, f64)>, lo: f64, hi: f64 },
}

impl MonotoneFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            MonotoneFn::Coordinate(c) => x[*c],
            MonotoneFn::Staircase(terms) => terms
                .iter()
                .map(|(c, w, ts)| w * ts.iter().filter(|&&t| x[*c] > t).count() as f64)
                .sum(),
            MonotoneFn::IndicatorProduct(terms) => {
                if terms.iter().all(|(c, t)| x[*c] > *t) {
                    1.0
                } else {
                    0.0
                }
            }
            MonotoneFn::ClippedLinear { weights, lo, hi } => {
                let s: f64 = weights.iter().map(|(c, w)| w * x[*c]).sum();
                s.clamp(*lo, *hi)
            }
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            MonotoneFn::Coordinate(_) => "coordinate",
            MonotoneFn::Staircase(_) => "staircase",
            MonotoneFn::IndicatorProduct(_) => "indicator-product",
            MonotoneFn::ClippedLinear { .. } => "clipped-linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationTrial {
    pub f: MonotoneFn,
    pub g: MonotoneFn,
    pub covariance: f64,
    pub se: f64,
    /// `cov / SE`; zero when both vanish (a constant function).
    pub studentized: f64,
}

impl AssociationTrial {
    pub fn label(&self) -> String {
        format!("{} x {}", self.f.kind(), self.g.kind())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationReport {
    pub trials: Vec<AssociationTrial>,
    pub min_studentized: f64,
    pub pass: bool,
}

fn empirical_quantile(sorted: &[f64], u: f64) -> f64 {
    let idx = ((u * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[idx - 1]
}

struct FnFactory<'a> {
    ens: &'a ReplicaEnsemble,
    sorted_cols: Vec<Vec<f64>>,
}

impl FnFactory<'_> {
    fn threshold<R: Rng>(&self, c: usize, rng: &mut R) -> f64 {
        empirical_quantile(&self.sorted_cols[c], rng.random_range(0.05..0.95))
    }

    fn draw<R: Rng>(&self, coords: &[usize], rng: &mut R) -> MonotoneFn {
        match rng.random_range(0..3) {
            0 => MonotoneFn::Staircase(
                coords
                    .iter()
                    .map(|&c| {
                        let steps = rng.random_range(1..=4);
                        let mut ts: Vec<f64> = (0..steps).map(|_| self.threshold(c, rng)).collect();
                        ts.sort_by(f64::total_cmp);
                        (c, rng.random_range(0.1..1.0), ts)
                    })
                    .collect(),
            ),
            1 => {
                // Joint upper-tail mass near p under independence; rare-event
                // indicators would make the studentized covariance skewed.
                let p: f64 = rng.random_range(0.2..0.8);
                let level = 1.0 - p.powf(1.0 / coords.len() as f64);
                MonotoneFn::IndicatorProduct(
                    coords
                        .iter()
                        .map(|&c| (c, empirical_quantile(&self.sorted_cols[c], level)))
                        .collect(),
                )
            }
            _ => {
                let weights: Vec<(usize, f64)> =
                    coords.iter().map(|&c| (c, rng.random_range(0.1..1.0))).collect();
                let mut lin: Vec<f64> = self
                    .ens
                    .rows()
                    .map(|row| weights.iter().map(|(c, w)| w * row[*c]).sum())
                    .collect();
                lin.sort_by(f64::total_cmp);
                let a = empirical_quantile(&lin, rng.random_range(0.0..0.3));
                let b = empirical_quantile(&lin, rng.random_range(0.7..1.0));
                MonotoneFn::ClippedLinear {
                    weights,
                    lo: a.min(b),
                    hi: a.max(b),
                }
            }
        }
    }
}

/// Share of trials that probe a raw coordinate pair `(X_a, X_b)`.
const PAIR_PROBE_SHARE: f64 = 0.1;
/// Largest `|a − b|` of a coordinate-pair probe.
const PAIR_PROBE_REACH: usize = 2;

/// Randomized positive-association test: `trials` pairs of coordinatewise
/// nondecreasing functions on shared coordinates; PASS iff every
/// studentized covariance is at least −3.
pub fn association_test(ens: &ReplicaEnsemble, trials: usize, seed: u64) -> Result<AssociationReport> {
    if trials == 0 {
        return Err(LabError::InvalidParameter("association test needs at least one trial".into()));
    }
    if ens.replicas() < 3 {
        return Err(LabError::InvalidParameter("association test needs at least 3 replicas".into()));
    }
    let n = ens.len();
    let sorted_cols = (0..n)
        .map(|c| {
            let mut col = ens.column(c);
            col.sort_by(f64::total_cmp);
            col
        })
        .collect();
    let factory = FnFactory { ens, sorted_cols };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let (f, g) = if n > 1 && rng.random_bool(PAIR_PROBE_SHARE) {
            let a = rng.random_range(0..n);
            let near: Vec<usize> = (a.saturating_sub(PAIR_PROBE_REACH)..=(a + PAIR_PROBE_REACH).min(n - 1))
                .filter(|&b| b != a)
                .collect();
            let b = *near.choose(&mut rng).expect("n > 1");
            (MonotoneFn::Coordinate(a), MonotoneFn::Coordinate(b))
        } else {
            let k = rng.random_range(1..=n.min(4));
            let coords: Vec<usize> = all.choose_multiple(&mut rng, k).copied().collect();
            (factory.draw(&coords, &mut rng), factory.draw(&coords, &mut rng))
        };
        let fv: Vec<f64> = ens.rows().map(|row| f.eval(row)).collect();
        let gv: Vec<f64> = ens.rows().map(|row| g.eval(row)).collect();
        let (cov, se) = covariance_with_se(&fv, &gv);
        let studentized = if se > 0.0 {
            cov / se
        } else if cov == 0.0 {
            0.0
        } else {
            cov.signum() * f64::INFINITY
        };
        out.push(AssociationTrial {
            f,
            g,
            covariance: cov,
            se,
            studentized,
        });
    }
    let min_studentized = out.iter().map(|t| t.studentized).fold(f64::INFINITY, f64::min);
    Ok(AssociationReport {
        trials: out,
        min_studentized,
        pass: min_studentized >= -SE_TOLERANCE,
    })
}

/// Characteristic-function factorization gap for an associated vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfGap {
    /// `|φ(r) − Π φ_j(r_j)|`
    pub lhs: f64,
    /// `½ Σ_{j≠k} |r_j r_k| cov(X_j, X_k)`
    pub rhs: f64,
    /// Error bar on `lhs − rhs` (zero for exact laws).
    pub se: f64,
    pub holds: bool,
}

/// Evaluates both sides under the discrete law putting mass `weights[i]` on
/// `points[i]`; coordinates `0..freqs.len()` are used.
pub fn cf_gap_weighted<'a, I>(points: I, weights: &[f64], freqs: &[f64]) -> (f64, f64)
where
    I: IntoIterator<Item = &'a [f64]> + Clone,
{
    let d = freqs.len();
    let total: f64 = weights.iter().sum();
    let mut joint = (0.0, 0.0);
    let mut marg = vec![(0.0, 0.0); d];
    let mut m1 = vec![0.0; d];
    let mut m2 = vec![vec![0.0; d]; d];
    for (x, &w) in points.into_iter().zip(weights) {
        let w = w / total;
        let phase: f64 = freqs.iter().zip(x).map(|(r, v)| r * v).sum();
        joint.0 += w * phase.cos();
        joint.1 += w * phase.sin();
        for j in 0..d {
            let p = freqs[j] * x[j];
            marg[j].0 += w * p.cos();
            marg[j].1 += w * p.sin();
            m1[j] += w * x[j];
            for k in 0..d {
                m2[j][k] += w * x[j] * x[k];
            }
        }
    }
    let prod = marg
        .iter()
        .fold((1.0, 0.0), |(a, b), &(c, s)| (a * c - b * s, a * s + b * c));
    let lhs = ((joint.0 - prod.0).powi(2) + (joint.1 - prod.1).powi(2)).sqrt();
    let mut rhs = 0.0;
    for j in 0..d {
        for k in 0..d {
            if j != k {
                rhs += 0.5 * (freqs[j] * freqs[k]).abs() * (m2[j][k] - m1[j] * m1[k]);
            }
        }
    }
    (lhs, rhs)
}

/// Empirical version on an ensemble; holds iff `lhs ≤ rhs + 3·SE`.
pub fn cf_gap_check(ens: &ReplicaEnsemble, freqs: &[f64]) -> Result<CfGap> {
    if freqs.is_empty() || freqs.len() > ens.len() {
        return Err(LabError::InvalidParameter(format!(
            "need 1..={} frequencies, got {}",
            ens.len(),
            freqs.len()
        )));
    }
    let rows: Vec<&[f64]> = ens.rows().collect();
    let ones = vec![1.0; rows.len()];
    let (lhs, rhs) = cf_gap_weighted(rows.iter().copied(), &ones, freqs);
    let (_, se) = grouped_jackknife(rows.len(), 50, |keep| {
        let sub: Vec<&[f64]> = keep.iter().map(|&i| rows[i]).collect();
        let (l, r) = cf_gap_weighted(sub.iter().copied(), &ones[..sub.len()], freqs);
        l - r
    });
    Ok(CfGap {
        lhs,
        rhs,
        se,
        holds: lhs <= rhs + SE_TOLERANCE * se,
    })
}
