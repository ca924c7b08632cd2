use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::chain::{heat_bath_sweep, Boundary, ChainModel, SpinChainState};
use super::spin::SpinSpace;
use crate::assoc::CovarianceSummary;
use crate::ensemble::ReplicaEnsemble;
use crate::error::{LabError, Result};
use crate::exec::{try_map_indices, Execution};
use crate::stats::jackknife_se;

/// Generator of replica `index`: the master seed fixes the key and the
/// replica index selects an independent ChaCha stream.
pub fn replica_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Burn-in, spacing and replica count of a sampling run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingPlan {
    pub burn_in: usize,
    pub thin: usize,
    pub replicas: usize,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in == 0 || self.thin == 0 || self.replicas == 0 {
            return Err(LabError::InvalidParameter(format!(
                "burn_in, thin and replicas must be at least 1 (got {}, {}, {})",
                self.burn_in, self.thin, self.replicas
            )));
        }
        Ok(())
    }
}

fn burned_in(model: &ChainModel, plan: &SamplingPlan, index: usize) -> Result<(SpinChainState, ChaCha8Rng)> {
    let mut rng = replica_rng(plan.seed, index);
    let mut state = model.random_state(&mut rng);
    for _ in 0..plan.burn_in {
        heat_bath_sweep(&mut state, model, &mut rng)?;
    }
    Ok((state, rng))
}

/// `R` independent chains; each contributes the whole volume after
/// `burn_in` sweeps plus `thin` further sweeps.
pub fn sample_ensemble(model: &ChainModel, plan: &SamplingPlan, exec: Execution) -> Result<ReplicaEnsemble> {
    plan.validate()?;
    let rows = try_map_indices(plan.replicas, exec, |r| {
        let (mut state, mut rng) = burned_in(model, plan, r)?;
        for _ in 0..plan.thin {
            heat_bath_sweep(&mut state, model, &mut rng)?;
        }
        Ok::<_, LabError>(state.spins().to_vec())
    })?;
    ReplicaEnsemble::from_rows(rows, 0)
}

/// Heat-bath estimates of `E[σ_i]` and `E[σ_i σ_j]` with errors from the
/// spread of per-replica time averages.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointEstimate {
    pub means: Vec<f64>,
    pub means_se: Vec<f64>,
    pub two_point: Vec<Vec<f64>>,
    pub two_point_se: Vec<Vec<f64>>,
    /// Post-burn-in sweeps over all replicas.
    pub sweeps: usize,
}

/// Each replica records `measurements` snapshots spaced `thin` sweeps apart.
pub fn two_point_estimates(
    model: &ChainModel,
    plan: &SamplingPlan,
    measurements: usize,
    exec: Execution,
) -> Result<TwoPointEstimate> {
    plan.validate()?;
    if measurements == 0 {
        return Err(LabError::InvalidParameter("need at least one measurement".into()));
    }
    let n = model.volume();
    let per_replica = try_map_indices(plan.replicas, exec, |r| {
        let (mut state, mut rng) = burned_in(model, plan, r)?;
        let mut m1 = vec![0.0; n];
        let mut m2 = vec![0.0; n * n];
        for _ in 0..measurements {
            for _ in 0..plan.thin {
                heat_bath_sweep(&mut state, model, &mut rng)?;
            }
            let s = state.spins();
            for i in 0..n {
                m1[i] += s[i];
                for j in 0..n {
                    m2[i * n + j] += s[i] * s[j];
                }
            }
        }
        let scale = 1.0 / measurements as f64;
        m1.iter_mut().chain(m2.iter_mut()).for_each(|v| *v *= scale);
        Ok::<_, LabError>((m1, m2))
    })?;
    let r = plan.replicas as f64;
    let summarize = |get: &dyn Fn(&(Vec<f64>, Vec<f64>)) -> f64| {
        let xs: Vec<f64> = per_replica.iter().map(get).collect();
        let m = xs.iter().sum::<f64>() / r;
        let se = if xs.len() > 1 {
            (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r - 1.0) / r).sqrt()
        } else {
            f64::NAN
        };
        (m, se)
    };
    let mut means = vec![0.0; n];
    let mut means_se = vec![0.0; n];
    let mut two_point = vec![vec![0.0; n]; n];
    let mut two_point_se = vec![vec![0.0; n]; n];
    for i in 0..n {
        (means[i], means_se[i]) = summarize(&|p| p.0[i]);
        for j in 0..n {
            (two_point[i][j], two_point_se[i][j]) = summarize(&|p| p.1[i * n + j]);
        }
    }
    Ok(TwoPointEstimate {
        means,
        means_se,
        two_point,
        two_point_se,
        sweeps: plan.replicas * measurements * plan.thin,
    })
}

/// `ln cosh x` without overflow.
fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `E[σ_i σ_j | all other spins]` for a ±1 pair with bond `K = 2J_ij` and
/// fields `a`, `b` on `i`, `j` from the rest of the chain.
pub fn conditional_pair_expectation(k: f64, a: f64, b: f64) -> f64 {
    // (e^K cosh(a+b) − e^{−K} cosh(a−b)) / (e^K cosh(a+b) + e^{−K} cosh(a−b))
    let log_q = -2.0 * k + ln_cosh(a - b) - ln_cosh(a + b);
    -(0.5 * log_q).tanh()
}

/// [`conditional_pair_expectation`] from `τ = tanh K` and the cached
/// `t_i = tanh h_i`, `t_j = tanh h_j` of the full fields.
#[inline]
pub fn pair_expectation_from_tanh(tau: f64, ti: f64, tj: f64, si: f64, sj: f64) -> f64 {
    // tanh(h_i − K σ_j) by the subtraction formula, and likewise for j;
    // then E = (tanh K + p)/(1 + p tanh K) with p = tanh a · tanh b.
    let ta = (ti - tau * sj) / (1.0 - tau * sj * ti);
    let tb = (tj - tau * si) / (1.0 - tau * si * tj);
    let p = ta * tb;
    (tau + p) / (1.0 + tau * p)
}

/// Lag covariances of a translation-invariant periodic ±1 chain, from the
/// conditional pair expectation averaged over positions and measurements.
/// The spin-flip symmetry fixes the mean at zero. Errors are delete-one
/// jackknife over replicas.
pub fn pair_correlation_profile(
    model: &ChainModel,
    plan: &SamplingPlan,
    measurements: usize,
    max_lag: usize,
    exec: Execution,
) -> Result<CovarianceSummary> {
    plan.validate()?;
    if model.spin_space() != SpinSpace::PlusMinus
        || *model.boundary() != Boundary::Periodic
        || !model.coupling().is_translation_invariant()
    {
        return Err(LabError::Unsupported(
            "pair profiles need a translation-invariant periodic ±1 chain".into(),
        ));
    }
    if plan.replicas < 3 || measurements == 0 {
        return Err(LabError::InvalidParameter("need at least 3 replicas and one measurement".into()));
    }
    let n = model.volume();
    let max_lag = max_lag.min(n / 2);
    // tanh of the bond K = 2J at each lag.
    let tau: Vec<f64> = (0..=max_lag)
        .map(|d| {
            if d == 0 || d > model.radius() {
                0.0
            } else {
                (2.0 * model.coupling().at_distance(0, d as i64, d as u64)).tanh()
            }
        })
        .collect();
    let per_replica = try_map_indices(plan.replicas, exec, |r| {
        let (mut state, mut rng) = burned_in(model, plan, r)?;
        let mut acc = vec![0.0; max_lag + 1];
        let mut t = vec![0.0; n];
        for _ in 0..measurements {
            for _ in 0..plan.thin {
                heat_bath_sweep(&mut state, model, &mut rng)?;
            }
            let s = state.spins();
            for (ti, h) in t.iter_mut().zip(state.fields()) {
                *ti = h.tanh();
            }
            for (lag, slot) in acc.iter_mut().enumerate().skip(1) {
                let tk = tau[lag];
                // Pairs (i, i + lag) split into the unwrapped run and the wrap.
                let runs = [(0..n - lag, lag..n), (n - lag..n, 0..lag)];
                let mut sum = 0.0;
                for (ri, rj) in runs {
                    let (ti, tj) = (&t[ri.clone()], &t[rj.clone()]);
                    if tk == 0.0 {
                        sum += ti.iter().zip(tj).map(|(a, b)| a * b).sum::<f64>();
                    } else {
                        let (si, sj) = (&s[ri], &s[rj]);
                        for k in 0..ti.len() {
                            sum += pair_expectation_from_tanh(tk, ti[k], tj[k], si[k], sj[k]);
                        }
                    }
                }
                *slot += sum;
            }
        }
        let scale = 1.0 / (measurements * n) as f64;
        acc.iter_mut().for_each(|v| *v *= scale);
        acc[0] = 1.0;
        Ok::<_, LabError>(acc)
    })?;
    let r = plan.replicas as f64;
    let totals: Vec<f64> = (0..=max_lag).map(|l| per_replica.iter().map(|v| v[l]).sum()).collect();
    let values: Vec<f64> = totals.iter().map(|t| t / r).collect();
    let replicates: Vec<Vec<f64>> = per_replica
        .iter()
        .map(|v| (0..=max_lag).map(|l| (totals[l] - v[l]) / (r - 1.0)).collect())
        .collect();
    Ok(CovarianceSummary::from_lag_replicates(values, replicates, plan.replicas))
}

/// Integrated autocorrelation time of the magnetization on a pilot chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingReport {
    pub tau_int: f64,
    pub window: usize,
    pub pilot_sweeps: usize,
    /// Burn-in shorter than 20 autocorrelation times.
    pub slow_mixing: bool,
}

/// Self-consistent window: smallest `W` with `W ≥ 5 τ(W)`.
pub fn integrated_autocorrelation(series: &[f64]) -> (f64, usize) {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return (0.5, 0);
    }
    let mut tau = 0.5;
    for w in 1..n / 2 {
        let rho = series[..n - w]
            .iter()
            .zip(&series[w..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / (n as f64 * var);
        tau += rho;
        if w as f64 >= 5.0 * tau {
            return (tau, w);
        }
    }
    (tau, n / 2)
}

pub fn mixing_diagnostic(model: &ChainModel, burn_in: usize, pilot_sweeps: usize, seed: u64) -> Result<MixingReport> {
    if pilot_sweeps < 10 {
        return Err(LabError::InvalidParameter("pilot run needs at least 10 sweeps".into()));
    }
    let mut rng = replica_rng(seed, usize::MAX);
    let mut state = model.random_state(&mut rng);
    for _ in 0..burn_in {
        heat_bath_sweep(&mut state, model, &mut rng)?;
    }
    let mut series = Vec::with_capacity(pilot_sweeps);
    for _ in 0..pilot_sweeps {
        heat_bath_sweep(&mut state, model, &mut rng)?;
        series.push(state.spins().iter().sum::<f64>() / model.volume() as f64);
    }
    let (tau_int, window) = integrated_autocorrelation(&series);
    Ok(MixingReport {
        tau_int,
        window,
        pilot_sweeps,
        slow_mixing: 20.0 * tau_int > burn_in as f64,
    })
}

/// Jackknife SE of a per-replica statistic; exposed for callers that fold
/// replica summaries themselves.
pub fn replica_se(per_replica: &[f64]) -> f64 {
    let r = per_replica.len() as f64;
    let total: f64 = per_replica.iter().sum();
    let reps: Vec<f64> = per_replica.iter().map(|x| (total - x) / (r - 1.0)).collect();
    jackknife_se(&reps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::coupling::CouplingFamily;
    use crate::gibbs::oracle::{exact_enumeration, infinite_chain_two_point, transfer_matrix_oracle};
    use approx::assert_abs_diff_eq;

    fn nn(j: f64, n: usize, boundary: Boundary) -> ChainModel {
        ChainModel::new(CouplingFamily::finite_range(j, 1).unwrap(), SpinSpace::PlusMinus, n, boundary, None).unwrap()
    }

    #[test]
    fn conditional_pair_expectation_limits() {
        assert_abs_diff_eq!(conditional_pair_expectation(0.0, 0.3, -0.7), 0.3f64.tanh() * (-0.7f64).tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(conditional_pair_expectation(0.5, 0.0, 0.0), 0.5f64.tanh(), epsilon = 1e-15);
        assert!(conditional_pair_expectation(5.0, 900.0, -900.0).is_finite());
        // Brute force over the four pair states.
        let (k, a, b) = (0.4f64, 0.3, -1.1);
        let mut num = 0.0;
        let mut den = 0.0;
        for si in [-1.0, 1.0] {
            for sj in [-1.0, 1.0] {
                let w = (k * si * sj + a * si + b * sj).exp();
                num += si * sj * w;
                den += w;
            }
        }
        assert_abs_diff_eq!(conditional_pair_expectation(k, a, b), num / den, epsilon = 1e-14);
    }

    #[test]
    fn tanh_form_matches_log_cosh_form() {
        for &(k, hi, hj, si, sj) in &[
            (0.3, 0.7, -0.2, 1.0, -1.0),
            (0.01, 2.5, 1.9, -1.0, -1.0),
            (1.2, -3.0, 0.4, 1.0, 1.0),
            (0.0, 0.5, 0.5, 1.0, -1.0),
        ] {
            let fast = pair_expectation_from_tanh(f64::tanh(k), f64::tanh(hi), f64::tanh(hj), si, sj);
            let slow = conditional_pair_expectation(k, hi - k * sj, hj - k * si);
            assert_abs_diff_eq!(fast, slow, epsilon = 1e-13);
        }
    }

    #[test]
    fn ensemble_is_deterministic_and_policy_independent() {
        let model = nn(0.2, 12, Boundary::Free);
        let plan = SamplingPlan { burn_in: 20, thin: 2, replicas: 16, seed: 77 };
        let a = sample_ensemble(&model, &plan, Execution::Sequential).unwrap();
        let b = sample_ensemble(&model, &plan, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.replicas(), a.len()), (16, 12));
        let other = sample_ensemble(&model, &SamplingPlan { seed: 78, ..plan }, Execution::Sequential).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn heat_bath_matches_exact_two_point() {
        let model = nn(0.25, 8, Boundary::Free);
        let exact = exact_enumeration(&model).unwrap();
        let plan = SamplingPlan { burn_in: 100, thin: 1, replicas: 20, seed: 5 };
        let est = two_point_estimates(&model, &plan, 2000, Execution::default()).unwrap();
        for i in 0..8 {
            assert!((est.means[i] - exact.mean(i)).abs() < 3.0 * est.means_se[i] + 1e-12);
            for j in 0..8 {
                let diff = (est.two_point[i][j] - exact.two_point(i, j)).abs();
                assert!(diff <= 3.0 * est.two_point_se[i][j] + 1e-12, "({i},{j}) diff {diff}");
            }
        }
    }

    #[test]
    fn pair_profile_matches_transfer_matrix() {
        let model = nn(0.2, 64, Boundary::Periodic);
        let c = CouplingFamily::finite_range(0.2, 1).unwrap();
        let exact = transfer_matrix_oracle(&c, 64, &Boundary::Periodic).unwrap();
        let plan = SamplingPlan { burn_in: 50, thin: 1, replicas: 8, seed: 9 };
        let prof = pair_correlation_profile(&model, &plan, 300, 6, Execution::default()).unwrap();
        let lags = prof.lags().unwrap();
        for l in 1..=6 {
            assert!((lags.values[l] - exact[0][l]).abs() < 3.0 * lags.se[l] + 1e-12, "lag {l}");
        }
        assert_abs_diff_eq!(exact[0][1], infinite_chain_two_point(0.2, 1), epsilon = 1e-12);
    }

    #[test]
    fn mixing_flags_short_burn_in() {
        let model = nn(0.1, 64, Boundary::Periodic);
        let quick = mixing_diagnostic(&model, 200, 2000, 1).unwrap();
        assert!(!quick.slow_mixing, "tau {}", quick.tau_int);
        let slow = mixing_diagnostic(&nn(1.5, 64, Boundary::Periodic), 10, 2000, 1).unwrap();
        assert!(slow.slow_mixing, "tau {}", slow.tau_int);
    }

    #[test]
    fn autocorrelation_of_ar1() {
        // AR(1) with φ = 0.8 has τ = (1+φ)/(2(1−φ)) = 4.5.
        let mut rng = replica_rng(3, 0);
        let mut x = 0.0;
        let series: Vec<f64> = (0..200_000)
            .map(|_| {
                let z: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                x = 0.8 * x + z;
                x
            })
            .collect();
        let (tau, _) = integrated_autocorrelation(&series);
        assert!((tau - 4.5).abs() < 0.4, "tau {tau}");
    }

    #[test]
    fn replica_streams_differ() {
        use rand::Rng;
        let a: u64 = replica_rng(1, 0).random();
        let b: u64 = replica_rng(1, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, replica_rng(1, 0).random::<u64>());
    }
}
