use crate::error::{LabError, Result};

/// Ferromagnetic pair couplings `J(i, j) ≥ 0` on the integer lattice.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingFamily {
    /// Product measure.
    Zero,
    /// `J·1{0 < |i−j| ≤ range}`.
    FiniteRange { j: f64, range: usize },
    /// `β|i−j|^{−α}`.
    LongRange { beta: f64, alpha: f64 },
    /// `β(|i−j|^{−α} + r_ij)` with `C1|i−j|^{−α} ≤ r_ij ≤ C2|i−j|^{−α}` drawn
    /// deterministically from `seed`.
    Perturbed { beta: f64, alpha: f64, c1: f64, c2: f64, seed: u64 },
}

impl CouplingFamily {
    pub fn finite_range(j: f64, range: usize) -> Result<Self> {
        let c = CouplingFamily::FiniteRange { j, range };
        c.validate()?;
        Ok(c)
    }

    pub fn long_range(beta: f64, alpha: f64) -> Result<Self> {
        let c = CouplingFamily::LongRange { beta, alpha };
        c.validate()?;
        Ok(c)
    }

    /// Perturbed family at unit strength.
    pub fn perturbed(alpha: f64, c1: f64, c2: f64, seed: u64) -> Result<Self> {
        Self::perturbed_scaled(1.0, alpha, c1, c2, seed)
    }

    pub fn perturbed_scaled(beta: f64, alpha: f64, c1: f64, c2: f64, seed: u64) -> Result<Self> {
        let c = CouplingFamily::Perturbed { beta, alpha, c1, c2, seed };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LabError::InvalidParameter(msg));
        match *self {
            CouplingFamily::Zero => Ok(()),
            CouplingFamily::FiniteRange { j, range } => {
                if !(j > 0.0 && j.is_finite()) {
                    return bad(format!("finite-range coupling needs J > 0, got {j}"));
                }
                if range == 0 {
                    return bad("finite-range coupling needs L ≥ 1".into());
                }
                Ok(())
            }
            CouplingFamily::LongRange { beta, alpha } => {
                if !(beta > 0.0 && beta.is_finite()) {
                    return bad(format!("long-range coupling needs β > 0, got {beta}"));
                }
                if !(alpha > 1.0 && alpha.is_finite()) {
                    return bad(format!("long-range coupling needs α > 1, got {alpha}"));
                }
                Ok(())
            }
            CouplingFamily::Perturbed { beta, alpha, c1, c2, .. } => {
                if !(beta > 0.0 && beta.is_finite()) {
                    return bad(format!("perturbed coupling needs β > 0, got {beta}"));
                }
                if !(alpha > 2.0 && alpha.is_finite()) {
                    return bad(format!("perturbed coupling needs α > 2, got {alpha}"));
                }
                if !(c1 > 0.0 && c1 < 1.0) {
                    return bad(format!("perturbed coupling needs C1 in (0, 1), got {c1}"));
                }
                if !(c2 > 1.0 && c2.is_finite()) {
                    return bad(format!("perturbed coupling needs C2 > 1, got {c2}"));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CouplingFamily::Zero => "zero",
            CouplingFamily::FiniteRange { .. } => "finite_range",
            CouplingFamily::LongRange { .. } => "long_range",
            CouplingFamily::Perturbed { .. } => "perturbed",
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, CouplingFamily::Zero)
    }

    pub fn is_translation_invariant(&self) -> bool {
        !matches!(self, CouplingFamily::Perturbed { .. })
    }

    /// Largest distance with a nonzero coupling, if finite.
    pub fn support_radius(&self) -> Option<usize> {
        match self {
            CouplingFamily::Zero => Some(0),
            CouplingFamily::FiniteRange { range, .. } => Some(*range),
            _ => None,
        }
    }

    /// `J(i, j)` on the infinite lattice.
    pub fn j(&self, i: i64, k: i64) -> f64 {
        self.at_distance(i, k, i.abs_diff(k))
    }

    /// Coupling between sites `i` and `k` placed at distance `d` (which may
    /// differ from `|i−k|` on a ring).
    pub(crate) fn at_distance(&self, i: i64, k: i64, d: u64) -> f64 {
        if d == 0 {
            return 0.0;
        }
        match *self {
            CouplingFamily::Zero => 0.0,
            CouplingFamily::FiniteRange { j, range } => {
                if d <= range as u64 {
                    j
                } else {
                    0.0
                }
            }
            CouplingFamily::LongRange { beta, alpha } => beta * (d as f64).powf(-alpha),
            CouplingFamily::Perturbed { beta, alpha, c1, c2, seed } => {
                let base = (d as f64).powf(-alpha);
                let u = pair_uniform(seed, i.min(k), i.max(k));
                beta * base * (1.0 + c1 + (c2 - c1) * u)
            }
        }
    }

    /// The perturbation `r_ij` (zero for the other families).
    pub fn perturbation(&self, i: i64, k: i64) -> f64 {
        match *self {
            CouplingFamily::Perturbed { alpha, c1, c2, seed, .. } if i != k => {
                let u = pair_uniform(seed, i.min(k), i.max(k));
                (c1 + (c2 - c1) * u) * (i.abs_diff(k) as f64).powf(-alpha)
            }
            _ => 0.0,
        }
    }

    /// Per-site coupling mass beyond `radius` on the infinite lattice
    /// (upper bound over sites for the perturbed family).
    pub fn tail_mass(&self, radius: usize) -> f64 {
        match *self {
            CouplingFamily::Zero => 0.0,
            CouplingFamily::FiniteRange { j, range } => 2.0 * j * range.saturating_sub(radius) as f64,
            CouplingFamily::LongRange { beta, alpha } => 2.0 * beta * power_tail(alpha, radius),
            CouplingFamily::Perturbed { beta, alpha, c2, .. } => 2.0 * beta * (1.0 + c2) * power_tail(alpha, radius),
        }
    }

    /// Per-site coupling mass within `radius` (lower bound over sites for the
    /// perturbed family).
    pub fn retained_mass(&self, radius: usize) -> f64 {
        match *self {
            CouplingFamily::Zero => 0.0,
            CouplingFamily::FiniteRange { j, range } => 2.0 * j * range.min(radius) as f64,
            CouplingFamily::LongRange { beta, alpha } => 2.0 * beta * power_head(alpha, radius),
            CouplingFamily::Perturbed { beta, alpha, c1, .. } => 2.0 * beta * (1.0 + c1) * power_head(alpha, radius),
        }
    }
}

fn power_head(alpha: f64, radius: usize) -> f64 {
    (1..=radius).map(|d| (d as f64).powf(-alpha)).sum()
}

/// `Σ_{d > radius} d^{−α}`: explicit terms, then Euler–Maclaurin.
fn power_tail(alpha: f64, radius: usize) -> f64 {
    let start = radius + 1;
    let stop = start + 2000;
    let head: f64 = (start..stop).map(|d| (d as f64).powf(-alpha)).sum();
    let x = stop as f64;
    let f = x.powf(-alpha);
    let integral = x.powf(1.0 - alpha) / (alpha - 1.0);
    let d1 = -alpha * x.powf(-alpha - 1.0);
    let d3 = -alpha * (alpha + 1.0) * (alpha + 2.0) * x.powf(-alpha - 3.0);
    head + integral + 0.5 * f - d1 / 12.0 + d3 / 720.0
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic uniform in [0, 1) for the unordered pair `(a, b)`, `a ≤ b`.
fn pair_uniform(seed: u64, a: i64, b: i64) -> f64 {
    let h = splitmix64(splitmix64(seed ^ splitmix64(a as u64)) ^ (b as u64).rotate_left(17));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
