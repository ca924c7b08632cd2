use crate::assoc::{estimate_covariances, Stationarity};
use crate::ensemble::ReplicaEnsemble;
use crate::error::{LabError, Result};
use crate::stats::variance;
use crate::transport::SortedSample;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Centering {
    /// Known per-site mean `μ`; subtract `nμ`.
    KnownMean(f64),
    /// Estimated on the fitting half of the replicas.
    EmpiricalMean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaling {
    /// Known `σ` with `σ² = var(S_n)/n` asymptotically.
    TheoreticalSigma(f64),
    /// Estimated on the fitting half of the replicas.
    EmpiricalSigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumMode {
    /// `V = (S − nμ)/(√n σ)`, `σ² = χ̂` when estimated.
    Stationary,
    /// `V = (S − E S)/σ_{[k,k+n)}`, both from replicas when estimated.
    NonStationary,
}

/// Windows, orders and normalization of the stabilized partial sums.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSumSpec {
    pub offset: usize,
    pub lengths: Vec<usize>,
    pub r_values: Vec<f64>,
    pub centering: Centering,
    pub scaling: Scaling,
    pub mode: SumMode,
    /// Block exponent for the Berry–Esseen column.
    pub delta: f64,
    /// Lag depth available to the susceptibility estimate.
    pub chi_max_lag: usize,
}

impl PartialSumSpec {
    pub fn new(offset: usize, lengths: Vec<usize>, r_values: Vec<f64>) -> Self {
        PartialSumSpec {
            offset,
            lengths,
            r_values,
            centering: Centering::EmpiricalMean,
            scaling: Scaling::EmpiricalSigma,
            mode: SumMode::Stationary,
            delta: 0.2,
            chi_max_lag: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() || self.lengths.contains(&0) {
            return Err(LabError::InvalidParameter("window lengths must be nonempty and positive".into()));
        }
        if !self.lengths.windows(2).all(|w| w[0] < w[1]) {
            return Err(LabError::InvalidParameter("window lengths must be strictly ascending".into()));
        }
        if self.r_values.is_empty() || self.r_values.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(LabError::InvalidParameter("orders r must be nonempty and positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 0.25) {
            return Err(LabError::InvalidParameter(format!("δ must lie in (0, 1/4), got {}", self.delta)));
        }
        if let Scaling::TheoreticalSigma(s) = self.scaling {
            if !(s > 0.0 && s.is_finite()) {
                return Err(LabError::InvalidParameter(format!("σ must be positive, got {s}")));
            }
        }
        if let Centering::KnownMean(m) = self.centering {
            if !m.is_finite() {
                return Err(LabError::InvalidParameter(format!("mean must be finite, got {m}")));
            }
        }
        Ok(())
    }

    pub fn max_len(&self) -> usize {
        *self.lengths.last().expect("validated")
    }

    fn needs_fit(&self) -> bool {
        self.centering == Centering::EmpiricalMean || self.scaling == Scaling::EmpiricalSigma
    }
}

/// Fitting and evaluation replicas: disjoint halves when anything is
/// estimated, otherwise the whole ensemble for both.
pub fn fit_eval_split(ens: &ReplicaEnsemble, spec: &PartialSumSpec) -> (ReplicaEnsemble, ReplicaEnsemble) {
    if spec.needs_fit() {
        ens.split_halves()
    } else {
        (ens.clone(), ens.clone())
    }
}

/// Standardized sums `V` of one window length.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizedSums {
    pub n: usize,
    /// One value per evaluation replica, in replica order.
    pub values: Vec<f64>,
    pub sorted: SortedSample,
    /// Subtracted from `S`.
    pub center: f64,
    /// `S` is divided by this.
    pub scale: f64,
    /// Variance of `S` on the evaluation replicas over `scale²`.
    pub var_ratio: f64,
}

/// Susceptibility fitted on `fit` over `[offset, offset + len)`.
pub fn fitted_susceptibility(fit: &ReplicaEnsemble, spec: &PartialSumSpec) -> Result<f64> {
    let window = spec.max_len().min(fit.len() - spec.offset);
    let sub = fit.window(spec.offset, window)?;
    let cov = estimate_covariances(&sub, &Stationarity::Stationary, spec.chi_max_lag)?;
    Ok(cov.susceptibility)
}

pub fn stabilized_sums(ens: &ReplicaEnsemble, spec: &PartialSumSpec) -> Result<Vec<StabilizedSums>> {
    spec.validate()?;
    if spec.offset + spec.max_len() > ens.len() {
        return Err(LabError::InvalidParameter(format!(
            "window [{}, {}) exceeds the ensemble length {}",
            spec.offset,
            spec.offset + spec.max_len(),
            ens.len()
        )));
    }
    let (fit, eval) = fit_eval_split(ens, spec);
    if spec.needs_fit() && fit.replicas() < 2 {
        return Err(LabError::InvalidParameter("estimated normalization needs at least 4 replicas".into()));
    }
    let chi = match (spec.mode, spec.scaling) {
        (SumMode::Stationary, Scaling::EmpiricalSigma) => Some(fitted_susceptibility(&fit, spec)?),
        _ => None,
    };
    let mut out = Vec::with_capacity(spec.lengths.len());
    for &n in &spec.lengths {
        let nf = n as f64;
        let fit_sums = fit.window_sums(spec.offset, n);
        let center = match spec.centering {
            Centering::KnownMean(mu) => nf * mu,
            Centering::EmpiricalMean => fit_sums.iter().sum::<f64>() / fit_sums.len() as f64,
        };
        let scale2 = match (spec.mode, spec.scaling) {
            (_, Scaling::TheoreticalSigma(s)) => nf * s * s,
            (SumMode::Stationary, Scaling::EmpiricalSigma) => nf * chi.expect("fitted above"),
            (SumMode::NonStationary, Scaling::EmpiricalSigma) => variance(&fit_sums),
        };
        if !(scale2 > 0.0 && scale2.is_finite()) {
            return Err(LabError::ZeroVariance(format!(
                "normalizing variance {scale2:.3e} for window [{}, {})",
                spec.offset,
                spec.offset + n
            )));
        }
        let scale = scale2.sqrt();
        let sums = eval.window_sums(spec.offset, n);
        let values: Vec<f64> = sums.iter().map(|s| (s - center) / scale).collect();
        let var_ratio = if sums.len() > 1 { variance(&sums) / scale2 } else { f64::NAN };
        out.push(StabilizedSums {
            n,
            sorted: SortedSample::from_slice(&values)?,
            values,
            center,
            scale,
            var_ratio,
        });
    }
    Ok(out)
}
