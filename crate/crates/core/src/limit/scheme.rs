use crate::error::{LabError, Result};

/// Block decomposition of a window of length `n` into `m` blocks of length
/// `l` plus a remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockScheme {
    pub n: usize,
    pub block_len: usize,
    pub blocks: usize,
    pub remainder: usize,
    pub delta: Option<f64>,
}

impl BlockScheme {
    /// `l = max(1, ⌊n^δ⌋)` for `δ ∈ (0, 1/4)`.
    pub fn new(n: usize, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.25) {
            return Err(LabError::InvalidParameter(format!("block exponent δ must lie in (0, 1/4), got {delta}")));
        }
        // The relative guard keeps exact powers (e.g. 1024^0.2 = 4) from
        // rounding down.
        let l = ((n as f64).powf(delta) * (1.0 + 1e-12)).floor() as usize;
        let mut scheme = Self::with_block_len(n, l.max(1))?;
        scheme.delta = Some(delta);
        Ok(scheme)
    }

    pub fn with_block_len(n: usize, block_len: usize) -> Result<Self> {
        if n == 0 || block_len == 0 || block_len > n {
            return Err(LabError::InvalidParameter(format!(
                "block length {block_len} does not fit a window of {n}"
            )));
        }
        let blocks = n / block_len;
        Ok(BlockScheme {
            n,
            block_len,
            blocks,
            remainder: n - blocks * block_len,
            delta: None,
        })
    }

    /// Length covered by the full blocks, `m·l`.
    pub fn covered(&self) -> usize {
        self.blocks * self.block_len
    }

    /// `l³/m`, which must vanish along a valid schedule.
    pub fn cube_ratio(&self) -> f64 {
        (self.block_len as f64).powi(3) / self.blocks as f64
    }
}

/// Monotone-trend summary of the three block-size limits along a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleTrends {
    pub block_len_nondecreasing: bool,
    pub blocks_increasing: bool,
    pub cube_ratio_decreasing: bool,
}

pub fn schedule_trends(schemes: &[BlockScheme]) -> ScheduleTrends {
    let pairs = || schemes.windows(2);
    ScheduleTrends {
        block_len_nondecreasing: pairs().all(|w| w[1].block_len >= w[0].block_len),
        blocks_increasing: pairs().all(|w| w[1].blocks > w[0].blocks),
        cube_ratio_decreasing: pairs().all(|w| w[1].cube_ratio() < w[0].cube_ratio()),
    }
}

/// `6 Σ E|ξ_j|³ / (Σ var ξ_j)^{3/2}` for independent zero-mean summands.
pub fn berry_esseen_bound(third_moments: &[f64], s2_sum: f64) -> Result<f64> {
    if !(s2_sum > 0.0 && s2_sum.is_finite()) {
        return Err(LabError::ZeroVariance(format!("block variance sum {s2_sum}")));
    }
    if let Some(bad) = third_moments.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
        return Err(LabError::Domain(format!("third absolute moment {bad}")));
    }
    Ok(6.0 * third_moments.iter().sum::<f64>() / s2_sum.powf(1.5))
}

/// Coarse form `6 m l³ C* / (m l c)^{3/2}` from a uniform third-moment bound
/// `C*` and variance floor `c`.
pub fn coarse_berry_esseen_bound(scheme: &BlockScheme, c_star: f64, c: f64) -> f64 {
    let (m, l) = (scheme.blocks as f64, scheme.block_len as f64);
    6.0 * m * l.powi(3) * c_star / (m * l * c).powf(1.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn scheme_arithmetic() {
        let s = BlockScheme::with_block_len(10, 3).unwrap();
        assert_eq!((s.blocks, s.remainder), (3, 1));
        let s = BlockScheme::new(1024, 0.2).unwrap();
        assert_eq!(s.block_len, 4);
        let s = BlockScheme::new(4096, 0.2).unwrap();
        assert_eq!((s.block_len, s.blocks, s.remainder), (5, 819, 1));
        assert_eq!(BlockScheme::new(256, 0.2).unwrap().block_len, 3);
        assert_eq!(BlockScheme::new(1, 0.2).unwrap().block_len, 1);
        assert!(BlockScheme::new(100, 0.25).is_err());
        assert!(BlockScheme::new(100, 0.0).is_err());
        assert!(BlockScheme::with_block_len(3, 4).is_err());
    }

    #[test]
    fn berry_esseen_plug_in() {
        for m in [1usize, 9, 100, 900] {
            let bound = berry_esseen_bound(&vec![1.0; m], m as f64).unwrap();
            assert_relative_eq!(bound, 6.0 / (m as f64).sqrt(), max_relative = 1e-14);
        }
        assert_relative_eq!(berry_esseen_bound(&vec![1.0; 900], 900.0).unwrap(), 0.2, max_relative = 1e-14);
        assert!(berry_esseen_bound(&[1.0], 0.0).is_err());
        assert!(berry_esseen_bound(&[-1.0], 1.0).is_err());
    }

    #[test]
    fn coarse_bound_decreases_along_schedule() {
        // Flooring l makes the bound jump where l does (16384 → 65536 takes
        // l from 6 to 9), so only the desk-scale schedule is monotone.
        let schemes: Vec<BlockScheme> = [256usize, 1024, 4096, 16384]
            .iter()
            .map(|&n| BlockScheme::new(n, 0.2).unwrap())
            .collect();
        let bounds: Vec<f64> = schemes.iter().map(|s| coarse_berry_esseen_bound(s, 1.0, 0.5)).collect();
        assert!(bounds.windows(2).all(|w| w[1] < w[0]), "{bounds:?}");
        let t = schedule_trends(&schemes);
        assert!(t.block_len_nondecreasing && t.blocks_increasing && t.cube_ratio_decreasing);
        // m = n / l, l = 1: coarse bound reduces to 6 C* / √(n c³).
        let one = BlockScheme::with_block_len(400, 1).unwrap();
        assert_relative_eq!(coarse_berry_esseen_bound(&one, 1.0, 1.0), 0.3, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn scheme_invariants(n in 1usize..1_000_000, delta in 0.01f64..0.2499) {
            let s = BlockScheme::new(n, delta).unwrap();
            prop_assert_eq!(s.blocks * s.block_len + s.remainder, n);
            prop_assert!(s.remainder < s.block_len);
            prop_assert!(s.block_len >= 1);
            prop_assert!(s.block_len as f64 <= (n as f64).powf(delta) * (1.0 + 1e-9) || s.block_len == 1);
        }
    }
}
