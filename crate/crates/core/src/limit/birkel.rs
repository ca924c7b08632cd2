use super::sums::{Centering, PartialSumSpec};
use crate::ensemble::ReplicaEnsemble;
use crate::error::{LabError, Result};
use crate::stats::mean_with_se;

/// Most offsets probed per window length.
pub const MAX_OFFSETS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirkelRow {
    pub n: usize,
    /// `M(n) = max_k Ê|S_{[k,k+n)} − E S|^r / n^{r/2}`
    pub ratio: f64,
    pub se: f64,
    pub argmax_k: usize,
    pub offsets: usize,
}

/// Advisory comparison of a measured Cox–Grimmett decay exponent with the
/// threshold `θ ≥ r*(r−2)/(2(r*−r))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaAdvisory {
    pub theta_hat: f64,
    pub theta_se: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

/// Claimed integrability order `r*` with a fitted decay `u(n) ~ n^{slope}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaClaim {
    pub r_star: f64,
    pub slope: f64,
    pub slope_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirkelReport {
    pub r: f64,
    pub rows: Vec<BirkelRow>,
    /// No run of increases exceeding 3·SE at every step.
    pub bounded: bool,
    pub theta: Option<ThetaAdvisory>,
}

/// `θ* = r*(r−2) / (2(r*−r))`.
pub fn theta_threshold(r: f64, r_star: f64) -> Result<f64> {
    if !(r > 2.0 && r_star > r) {
        return Err(LabError::Domain(format!("need 2 < r < r*, got r = {r}, r* = {r_star}")));
    }
    Ok(r_star * (r - 2.0) / (2.0 * (r_star - r)))
}

/// Normalized `r`-th absolute moments of partial sums over up to
/// [`MAX_OFFSETS`] disjoint windows per length.
pub fn birkel_moment_check(
    ens: &ReplicaEnsemble,
    spec: &PartialSumSpec,
    r: f64,
    theta_claim: Option<ThetaClaim>,
) -> Result<BirkelReport> {
    spec.validate()?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(LabError::Domain(format!("moment order must be positive, got {r}")));
    }
    let available = ens.len().saturating_sub(spec.offset);
    let mut rows = Vec::with_capacity(spec.lengths.len());
    for &n in &spec.lengths {
        let offsets = (available / n).min(MAX_OFFSETS);
        if offsets == 0 {
            return Err(LabError::InvalidParameter(format!("window length {n} exceeds the ensemble")));
        }
        let mut best: Option<BirkelRow> = None;
        for w in 0..offsets {
            let k = spec.offset + w * n;
            let sums = ens.window_sums(k, n);
            let center = match spec.centering {
                Centering::KnownMean(mu) => n as f64 * mu,
                Centering::EmpiricalMean => sums.iter().sum::<f64>() / sums.len() as f64,
            };
            let norm = (n as f64).powf(0.5 * r);
            let vals: Vec<f64> = sums.iter().map(|s| (s - center).abs().powf(r) / norm).collect();
            let (ratio, se) = mean_with_se(&vals);
            if best.is_none_or(|b| ratio > b.ratio) {
                best = Some(BirkelRow {
                    n,
                    ratio,
                    se,
                    argmax_k: k,
                    offsets,
                });
            }
        }
        rows.push(best.expect("at least one offset"));
    }
    let growing = rows.len() >= 2
        && rows.windows(2).all(|w| {
            let margin = 3.0 * (w[0].se * w[0].se + w[1].se * w[1].se).sqrt();
            w[1].ratio > w[0].ratio + margin
        });
    let theta = match theta_claim {
        Some(claim) if r > 2.0 => {
            let threshold = theta_threshold(r, claim.r_star)?;
            let theta_hat = -claim.slope;
            Some(ThetaAdvisory {
                theta_hat,
                theta_se: claim.slope_se,
                threshold,
                satisfied: theta_hat >= threshold,
            })
        }
        _ => None,
    };
    Ok(BirkelReport {
        r,
        rows,
        bounded: !growing,
        theta,
    })
}
