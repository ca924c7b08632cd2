use super::chain::{Boundary, ChainModel};
use super::coupling::CouplingFamily;
use super::spin::SpinSpace;
use crate::error::{LabError, Result};

/// Largest volume accepted by [`exact_enumeration`].
pub const MAX_EXACT_VOLUME: usize = 16;

/// Sign of the Hamiltonian in the Gibbs weight `exp(±H)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HamiltonianSign {
    #[default]
    Ferromagnetic,
    /// `exp(−H)`: antiferromagnetic; only used to test the checks' power.
    Flipped,
}

/// Exact finite-volume Gibbs law of a ±1 chain: one weight per configuration,
/// bit `i` of the index set meaning `σ_i = +1`.
#[derive(Debug, Clone)]
pub struct ExactGibbs {
    volume: usize,
    weights: Vec<f64>,
}

fn spin(config: usize, i: usize) -> f64 {
    if config >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

impl ExactGibbs {
    pub fn volume(&self) -> usize {
        self.volume
    }

    /// Normalized probabilities, indexed by configuration.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn configuration(&self, config: usize) -> Vec<f64> {
        (0..self.volume).map(|i| spin(config, i)).collect()
    }

    pub fn configurations(&self) -> Vec<Vec<f64>> {
        (0..self.weights.len()).map(|c| self.configuration(c)).collect()
    }

    pub fn expectation<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        let mut buf = vec![0.0; self.volume];
        let mut total = 0.0;
        for (c, w) in self.weights.iter().enumerate() {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = spin(c, i);
            }
            total += w * f(&buf);
        }
        total
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.weights.iter().enumerate().map(|(c, w)| w * spin(c, i)).sum()
    }

    pub fn two_point(&self, i: usize, j: usize) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(c, w)| w * spin(c, i) * spin(c, j))
            .sum()
    }

    /// `E[σ_i σ_j]` for every pair.
    pub fn two_point_table(&self) -> Vec<Vec<f64>> {
        let n = self.volume;
        let mut table = vec![vec![0.0; n]; n];
        for (c, w) in self.weights.iter().enumerate() {
            for i in 0..n {
                let si = spin(c, i) * w;
                for j in i..n {
                    table[i][j] += si * spin(c, j);
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                table[i][j] = table[j][i];
            }
        }
        table
    }

    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        self.two_point(i, j) - self.mean(i) * self.mean(j)
    }

    /// Raw moments `E[S^p]`, `p = 1..=4`, of `S = σ_start + … + σ_{start+len−1}`.
    pub fn block_sum_moments(&self, start: usize, len: usize) -> [f64; 4] {
        let mut m = [0.0; 4];
        for (c, w) in self.weights.iter().enumerate() {
            let s: f64 = (start..start + len).map(|i| spin(c, i)).sum();
            let mut p = 1.0;
            for slot in &mut m {
                p *= s;
                *slot += w * p;
            }
        }
        m
    }
}

/// Exact Gibbs expectations by summing over all `2^N` configurations.
pub fn exact_enumeration(model: &ChainModel) -> Result<ExactGibbs> {
    exact_enumeration_signed(model, HamiltonianSign::Ferromagnetic)
}

pub fn exact_enumeration_signed(model: &ChainModel, sign: HamiltonianSign) -> Result<ExactGibbs> {
    if model.spin_space() != SpinSpace::PlusMinus {
        return Err(LabError::Unsupported("exact enumeration needs ±1 spins".into()));
    }
    let n = model.volume();
    if n > MAX_EXACT_VOLUME {
        return Err(LabError::VolumeTooLarge {
            volume: n,
            limit: MAX_EXACT_VOLUME,
        });
    }
    let s = match sign {
        HamiltonianSign::Ferromagnetic => 1.0,
        HamiltonianSign::Flipped => -1.0,
    };
    let mut buf = vec![0.0; n];
    let log_w: Vec<f64> = (0..1usize << n)
        .map(|c| {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = spin(c, i);
            }
            s * model.hamiltonian(&buf)
        })
        .collect();
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= z);
    Ok(ExactGibbs { volume: n, weights })
}

type Mat = [[f64; 2]; 2];

fn mul(a: &Mat, b: &Mat) -> Mat {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn power(t: &Mat, k: usize) -> Mat {
    let mut acc = [[1.0, 0.0], [0.0, 1.0]];
    let mut base = *t;
    let mut k = k;
    while k > 0 {
        if k & 1 == 1 {
            acc = mul(&acc, &base);
        }
        base = mul(&base, &base);
        k >>= 1;
    }
    acc
}

const SIGN: Mat = [[1.0, 0.0], [0.0, -1.0]];

fn trace(a: &Mat) -> f64 {
    a[0][0] + a[1][1]
}

fn bilinear(v: &[f64; 2], a: &Mat, w: &[f64; 2]) -> f64 {
    (0..2).map(|i| (0..2).map(|j| v[i] * a[i][j] * w[j]).sum::<f64>()).sum()
}

/// `E[σ_i σ_j]` of a nearest-neighbor ±1 chain from 2×2 transfer matrices
/// with bond coupling `K = 2J`.
pub fn transfer_matrix_oracle(coupling: &CouplingFamily, n: usize, boundary: &Boundary) -> Result<Vec<Vec<f64>>> {
    let j = match *coupling {
        CouplingFamily::Zero => 0.0,
        CouplingFamily::FiniteRange { j, range: 1 } => j,
        _ => {
            return Err(LabError::Unsupported(
                "transfer matrices need a nearest-neighbor coupling".into(),
            ))
        }
    };
    if n == 0 {
        return Err(LabError::InvalidParameter("volume must be at least 1".into()));
    }
    if matches!(boundary, Boundary::Periodic) && n < 3 && j > 0.0 {
        return Err(LabError::Unsupported("periodic transfer matrices need N ≥ 3".into()));
    }
    // T_{ss'} = e^{K s s'}, rescaled so its leading eigenvalue is 1.
    let x = (-4.0 * j).exp();
    let t: Mat = [[1.0 / (1.0 + x), x / (1.0 + x)], [x / (1.0 + x), 1.0 / (1.0 + x)]];
    let mut table = vec![vec![0.0; n]; n];
    match boundary {
        Boundary::Periodic => {
            let z = trace(&power(&t, n));
            for a in 0..n {
                for b in a..n {
                    let d = b - a;
                    let num = trace(&mul(&mul(&SIGN, &power(&t, d)), &mul(&SIGN, &power(&t, n - d))));
                    table[a][b] = num / z;
                    table[b][a] = num / z;
                }
            }
        }
        Boundary::Free | Boundary::Frozen(_) => {
            let w = match boundary {
                Boundary::Frozen(w) => *w,
                _ => 0.0,
            };
            let end = [(j * w).exp(), (-j * w).exp()];
            let z = bilinear(&end, &power(&t, n - 1), &end);
            for a in 0..n {
                for b in a..n {
                    let m = mul(
                        &mul(&power(&t, a), &SIGN),
                        &mul(&mul(&power(&t, b - a), &SIGN), &power(&t, n - 1 - b)),
                    );
                    let v = bilinear(&end, &m, &end) / z;
                    table[a][b] = v;
                    table[b][a] = v;
                }
            }
        }
    }
    Ok(table)
}

/// Infinite-chain limit `E[σ_0 σ_k] = tanh(2J)^{|k|}`.
pub fn infinite_chain_two_point(j: f64, k: i64) -> f64 {
    (2.0 * j).tanh().powi(k.unsigned_abs() as i32)
}

/// Checks on exact oracles that every `E[σ_iσ_j]` is nondecreasing along an
/// increasing grid of nearest-neighbor couplings.
pub fn gks_monotonicity(j_grid: &[f64], n: usize, boundary: &Boundary, sign: HamiltonianSign) -> Result<bool> {
    let mut previous: Option<Vec<Vec<f64>>> = None;
    for &j in j_grid {
        let model = ChainModel::new(
            CouplingFamily::finite_range(j, 1)?,
            SpinSpace::PlusMinus,
            n,
            boundary.clone(),
            None,
        )?;
        let table = exact_enumeration_signed(&model, sign)?.two_point_table();
        if let Some(prev) = &previous {
            for (row_a, row_b) in prev.iter().zip(&table) {
                if row_a.iter().zip(row_b).any(|(a, b)| *b < *a - 1e-12) {
                    return Ok(false);
                }
            }
        }
        previous = Some(table);
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn nn(j: f64, n: usize, boundary: Boundary) -> ChainModel {
        let c = if j == 0.0 {
            CouplingFamily::Zero
        } else {
            CouplingFamily::finite_range(j, 1).unwrap()
        };
        ChainModel::new(c, SpinSpace::PlusMinus, n, boundary, None).unwrap()
    }

    #[test]
    fn zero_coupling_is_independent() {
        let exact = exact_enumeration(&nn(0.0, 5, Boundary::Free)).unwrap();
        for i in 0..5 {
            assert_abs_diff_eq!(exact.mean(i), 0.0, epsilon = 1e-15);
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(exact.two_point(i, j), want, epsilon = 1e-15);
            }
        }
        let tm = transfer_matrix_oracle(&CouplingFamily::Zero, 5, &Boundary::Periodic).unwrap();
        assert_abs_diff_eq!(tm[0][3], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(tm[2][2], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn single_bond_is_tanh_2j() {
        for j in [0.1, 0.25, 0.7] {
            let exact = exact_enumeration(&nn(j, 2, Boundary::Free)).unwrap();
            assert_abs_diff_eq!(exact.two_point(0, 1), (2.0 * j).tanh(), epsilon = 1e-14);
        }
    }

    #[test]
    fn enumeration_matches_transfer_matrices() {
        let c = CouplingFamily::finite_range(0.25, 1).unwrap();
        for boundary in [Boundary::Periodic, Boundary::Free, Boundary::Frozen(1.0), Boundary::Frozen(-1.0)] {
            let exact = exact_enumeration(&nn(0.25, 8, boundary.clone())).unwrap().two_point_table();
            let tm = transfer_matrix_oracle(&c, 8, &boundary).unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    assert_abs_diff_eq!(exact[i][j], tm[i][j], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn free_chain_is_tanh_power() {
        let c = CouplingFamily::finite_range(0.3, 1).unwrap();
        let tm = transfer_matrix_oracle(&c, 12, &Boundary::Free).unwrap();
        for k in 0..12 {
            assert_abs_diff_eq!(tm[0][k], infinite_chain_two_point(0.3, k as i64), epsilon = 1e-13);
        }
    }

    #[test]
    fn long_periodic_chain_approaches_infinite_limit() {
        let c = CouplingFamily::finite_range(0.25, 1).unwrap();
        let tm = transfer_matrix_oracle(&c, 400, &Boundary::Periodic).unwrap();
        assert_abs_diff_eq!(tm[10][11], 0.5f64.tanh(), epsilon = 1e-12);
        assert_abs_diff_eq!(infinite_chain_two_point(0.25, 1), 0.462_117_157_260_009_8, epsilon = 1e-15);
    }

    #[test]
    fn refusals() {
        let lr = CouplingFamily::finite_range(0.2, 2).unwrap();
        assert!(matches!(transfer_matrix_oracle(&lr, 8, &Boundary::Free), Err(LabError::Unsupported(_))));
        let big = nn(0.1, 17, Boundary::Free);
        assert!(matches!(exact_enumeration(&big), Err(LabError::VolumeTooLarge { volume: 17, .. })));
        let interval =
            ChainModel::new(CouplingFamily::Zero, SpinSpace::Interval, 4, Boundary::Free, None).unwrap();
        assert!(exact_enumeration(&interval).is_err());
    }

    #[test]
    fn block_moments_and_expectation_agree() {
        let exact = exact_enumeration(&nn(0.2, 6, Boundary::Free)).unwrap();
        let m = exact.block_sum_moments(1, 3);
        let direct = exact.expectation(|s| (s[1] + s[2] + s[3]).powi(2));
        assert_abs_diff_eq!(m[1], direct, epsilon = 1e-14);
        assert_abs_diff_eq!(m[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m[2], 0.0, epsilon = 1e-14);
        let weights_sum: f64 = exact.weights().iter().sum();
        assert_abs_diff_eq!(weights_sum, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn ferromagnetic_monotonicity() {
        let grid = [0.0, 0.05, 0.1, 0.2, 0.4, 0.8];
        assert!(gks_monotonicity(&grid[1..], 6, &Boundary::Free, HamiltonianSign::Ferromagnetic).unwrap());
        assert!(gks_monotonicity(&grid[1..], 6, &Boundary::Periodic, HamiltonianSign::Ferromagnetic).unwrap());
        assert!(!gks_monotonicity(&grid[1..], 6, &Boundary::Free, HamiltonianSign::Flipped).unwrap());
    }

    #[test]
    fn exact_long_range_is_associated() {
        let model = ChainModel::new(
            CouplingFamily::long_range(0.3, 3.0).unwrap(),
            SpinSpace::PlusMinus,
            10,
            Boundary::Free,
            None,
        )
        .unwrap();
        let exact = exact_enumeration(&model).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                assert!(exact.covariance(i, j) >= -1e-15);
            }
        }
    }
}
