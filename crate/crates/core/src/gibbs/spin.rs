use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{LabError, Result};

/// Single-site law `λ` for real-valued spins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RealLaw {
    Normal { mean: f64, stddev: f64 },
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
}

impl RealLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RealLaw::Normal { mean, stddev } => mean.is_finite() && stddev > 0.0 && stddev.is_finite(),
            RealLaw::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            RealLaw::Exponential { rate } => rate > 0.0 && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(LabError::InvalidParameter(format!("invalid single-site law {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            RealLaw::Normal { mean, .. } => mean,
            RealLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            RealLaw::Exponential { rate } => 1.0 / rate,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            RealLaw::Normal { stddev, .. } => stddev * stddev,
            RealLaw::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            RealLaw::Exponential { rate } => 1.0 / (rate * rate),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RealLaw::Normal { mean, stddev } => Normal::new(mean, stddev).expect("validated").sample(rng),
            RealLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            RealLaw::Exponential { rate } => Exp::new(rate).expect("validated").sample(rng),
        }
    }
}

/// Single-spin space `E` with its a-priori measure `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpinSpace {
    /// `{−1, +1}` with counting measure.
    PlusMinus,
    /// `[−1, 1]` with normalized Lebesgue measure.
    Interval,
    /// `R` with a user law; only interaction-free chains are supported.
    RealLaw(RealLaw),
}

impl SpinSpace {
    pub fn name(&self) -> &'static str {
        match self {
            SpinSpace::PlusMinus => "plus_minus",
            SpinSpace::Interval => "interval",
            SpinSpace::RealLaw(_) => "real_law",
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            SpinSpace::PlusMinus => x == 1.0 || x == -1.0,
            SpinSpace::Interval => (-1.0..=1.0).contains(&x),
            SpinSpace::RealLaw(RealLaw::Uniform { lo, hi }) => (lo..=hi).contains(&x),
            SpinSpace::RealLaw(RealLaw::Exponential { .. }) => x >= 0.0 && x.is_finite(),
            SpinSpace::RealLaw(RealLaw::Normal { .. }) => x.is_finite(),
        }
    }

    /// Mean of a single spin under `λ` alone.
    pub fn free_mean(&self) -> f64 {
        match self {
            SpinSpace::PlusMinus | SpinSpace::Interval => 0.0,
            SpinSpace::RealLaw(law) => law.mean(),
        }
    }

    /// Whether the a-priori law is symmetric under `σ ↦ −σ`.
    pub fn is_flip_symmetric(&self) -> bool {
        match *self {
            SpinSpace::PlusMinus | SpinSpace::Interval => true,
            SpinSpace::RealLaw(RealLaw::Normal { mean, .. }) => mean == 0.0,
            SpinSpace::RealLaw(RealLaw::Uniform { lo, hi }) => lo == -hi,
            SpinSpace::RealLaw(RealLaw::Exponential { .. }) => false,
        }
    }

    /// Draw from `λ`.
    pub fn sample_free<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SpinSpace::PlusMinus => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            SpinSpace::Interval => 2.0 * rng.random::<f64>() - 1.0,
            SpinSpace::RealLaw(law) => law.sample(rng),
        }
    }

    /// Draw from the conditional law `∝ e^{hσ} dλ(σ)`.
    pub fn sample_conditional<R: Rng + ?Sized>(&self, h: f64, rng: &mut R) -> f64 {
        match self {
            SpinSpace::PlusMinus => {
                if rng.random::<f64>() < plus_probability(h) {
                    1.0
                } else {
                    -1.0
                }
            }
            SpinSpace::Interval => interval_inverse_cdf(h, rng.random::<f64>()),
            SpinSpace::RealLaw(RealLaw::Normal { mean, stddev }) => {
                let shifted = mean + h * stddev * stddev;
                Normal::new(shifted, *stddev).expect("validated").sample(rng)
            }
            SpinSpace::RealLaw(law) => {
                debug_assert!(h == 0.0, "real-law spins only support zero fields");
                law.sample(rng)
            }
        }
    }
}

/// `P(σ = +1) = e^h / (e^h + e^{−h})`.
pub fn plus_probability(h: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * h).exp())
}

/// Fields this small are treated as zero in the interval sampler.
pub const FLAT_FIELD: f64 = 1e-8;

/// Conditional CDF on `[−1, 1]` of the density `∝ e^{hs}`.
pub fn interval_conditional_cdf(h: f64, s: f64) -> f64 {
    let s = s.clamp(-1.0, 1.0);
    if h.abs() < FLAT_FIELD {
        0.5 * (s + 1.0)
    } else if h > 0.0 {
        ((h * (s - 1.0)).exp() * (-h * (s + 1.0)).exp_m1() / (-2.0 * h).exp_m1()).clamp(0.0, 1.0)
    } else {
        ((h * (s + 1.0)).exp_m1() / (2.0 * h).exp_m1()).clamp(0.0, 1.0)
    }
}

/// Closed-form inverse of [`interval_conditional_cdf`], written so that
/// neither branch overflows for large `|h|`.
pub fn interval_inverse_cdf(h: f64, u: f64) -> f64 {
    let s = if h.abs() < FLAT_FIELD {
        2.0 * u - 1.0
    } else if h > 0.0 {
        1.0 + ((1.0 - u) * (-2.0 * h).exp_m1()).ln_1p() / h
    } else {
        -1.0 + (u * (2.0 * h).exp_m1()).ln_1p() / h
    };
    s.clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_with_se;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn plus_probability_values() {
        assert_eq!(plus_probability(0.0), 0.5);
        assert!((plus_probability(0.3) - 0.3f64.exp() / (0.3f64.exp() + (-0.3f64).exp())).abs() < 1e-15);
        assert_eq!(plus_probability(1000.0), 1.0);
        assert_eq!(plus_probability(-1000.0), 0.0);
    }

    #[test]
    fn interval_extremes_stay_inside() {
        for h in [-800.0, -50.0, -1e-9, 0.0, 1e-9, 50.0, 800.0] {
            for u in [0.0, 1e-300, 0.3, 0.999_999, 1.0 - f64::EPSILON] {
                let s = interval_inverse_cdf(h, u);
                assert!((-1.0..=1.0).contains(&s), "h={h} u={u} s={s}");
            }
        }
    }

    #[test]
    fn interval_conditional_mean() {
        // E[s] = coth(h) − 1/h
        let h = 1.3f64;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| SpinSpace::Interval.sample_conditional(h, &mut rng))
            .collect();
        let (m, se) = mean_with_se(&draws);
        let want = 1.0 / h.tanh() - 1.0 / h;
        assert!((m - want).abs() < 3.0 * se, "{m} vs {want}");
    }

    #[test]
    fn normal_law_tilt() {
        let space = SpinSpace::RealLaw(RealLaw::Normal { mean: 0.5, stddev: 2.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let draws: Vec<f64> = (0..50_000).map(|_| space.sample_conditional(0.25, &mut rng)).collect();
        let (m, se) = mean_with_se(&draws);
        assert!((m - 1.5).abs() < 3.0 * se);
    }

    #[test]
    fn samples_land_in_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spaces = [
            SpinSpace::PlusMinus,
            SpinSpace::Interval,
            SpinSpace::RealLaw(RealLaw::Uniform { lo: -2.0, hi: 3.0 }),
            SpinSpace::RealLaw(RealLaw::Exponential { rate: 2.0 }),
        ];
        for space in spaces {
            for _ in 0..1000 {
                assert!(space.contains(space.sample_free(&mut rng)));
                let h = if matches!(space, SpinSpace::RealLaw(_)) { 0.0 } else { 0.7 };
                assert!(space.contains(space.sample_conditional(h, &mut rng)));
            }
        }
    }

    proptest! {
        #[test]
        fn interval_round_trip(mag in -6.0f64..1.698, neg in any::<bool>(), u in 0.0f64..1.0) {
            let h = if neg { -(10f64.powf(mag)) } else { 10f64.powf(mag) };
            let s = interval_inverse_cdf(h, u);
            prop_assert!((interval_conditional_cdf(h, s) - u).abs() <= 1e-12);
        }
    }
}
