use std::fmt::Write as _;

use super::scheme::{berry_esseen_bound, BlockScheme};
use super::sums::{fit_eval_split, stabilized_sums, PartialSumSpec, StabilizedSums};
use crate::ensemble::ReplicaEnsemble;
use crate::error::Result;
use crate::exec::{try_map_indices, Execution};
use crate::normal::{normal_abs_moment, standard_pdf, NormalLaw};
use crate::quadrature::integrate_with_breaks;
use crate::stats::{grouped_jackknife, mean_with_se, variance};
use crate::transport::{
    kolmogorov_bound_from_d1, kolmogorov_vs_normal, mallows_vs_normal, DistanceOrder, EmpiricalDF, SortedSample,
};

/// Groups used by the delete-a-group jackknife of distances.
pub const JACKKNIFE_GROUPS: usize = 40;

pub const CSV_HEADER: &str = "model,k,n,r,d_r,d_r_se,d_K,mom_emp,mom_target,var_ratio,be_bound,replicas,seed";

/// One `(k, n, r)` cell of a convergence report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub k: i64,
    pub n: usize,
    pub r: f64,
    pub d_r: f64,
    pub d_r_se: f64,
    pub d_k: f64,
    /// `d_1` on the same sample, kept for the Kolmogorov bound.
    pub d_1: f64,
    pub mom_emp: f64,
    pub mom_se: f64,
    pub mom_target: f64,
    pub var_ratio: f64,
    pub be_bound: f64,
    pub replicas: usize,
}

impl ReportRow {
    pub fn moment_gap(&self) -> f64 {
        (self.mom_emp - self.mom_target).abs()
    }

    /// `d_K ≤ 2√(d_1/√(2π))` as computed.
    pub fn kolmogorov_bound_holds(&self) -> bool {
        self.d_k <= kolmogorov_bound_from_d1(self.d_1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ReportRow>,
}

impl ConvergenceReport {
    /// Rows of order `r`, ascending in `n`.
    pub fn series(&self, r: f64) -> Vec<&ReportRow> {
        let mut rows: Vec<&ReportRow> = self.rows.iter().filter(|row| row.r == r).collect();
        rows.sort_by_key(|row| row.n);
        rows
    }

    pub fn kolmogorov_bound_holds(&self) -> bool {
        self.rows.iter().all(ReportRow::kolmogorov_bound_holds)
    }

    /// CSV body with 17 significant digits per float.
    pub fn to_csv(&self, model: &str, seed: u64) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{model},{},{},{},{},{},{},{},{},{},{},{},{seed}",
                row.k,
                row.n,
                fmt_f64(row.r),
                fmt_f64(row.d_r),
                fmt_f64(row.d_r_se),
                fmt_f64(row.d_k),
                fmt_f64(row.mom_emp),
                fmt_f64(row.mom_target),
                fmt_f64(row.var_ratio),
                fmt_f64(row.be_bound),
                row.replicas
            );
        }
        out
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `E|X|^r` for `X` distributed as `law`.
pub fn law_abs_moment(law: &NormalLaw, r: f64) -> Result<f64> {
    if law.is_standard() {
        return normal_abs_moment(r);
    }
    normal_abs_moment(r)?;
    let (mu, s) = (law.mean(), law.stddev());
    let f = |z: f64| (mu + s * z).abs().powf(r) * standard_pdf(z);
    Ok(integrate_with_breaks(f, -40.0, 40.0, &[-mu / s], 1e-12))
}

/// Berry–Esseen bound from the empirical blocks of `[k, k + m l)`.
pub fn block_berry_esseen(eval: &ReplicaEnsemble, k: usize, scheme: &BlockScheme) -> Result<f64> {
    let mut third = Vec::with_capacity(scheme.blocks);
    let mut s2 = 0.0;
    for b in 0..scheme.blocks {
        let sums = eval.window_sums(k + b * scheme.block_len, scheme.block_len);
        let (m, _) = mean_with_se(&sums);
        third.push(sums.iter().map(|x| (x - m).abs().powi(3)).sum::<f64>() / sums.len() as f64);
        s2 += variance(&sums);
    }
    berry_esseen_bound(&third, s2)
}

fn distance_with_se(sums: &StabilizedSums, law: &NormalLaw, r: DistanceOrder) -> Result<(f64, f64)> {
    let df = EmpiricalDF::new(sums.sorted.clone());
    let d = mallows_vs_normal(&df, law, r);
    let (_, se) = grouped_jackknife(sums.values.len(), JACKKNIFE_GROUPS, |keep| {
        let sub: Vec<f64> = keep.iter().map(|&i| sums.values[i]).collect();
        let sample = SortedSample::new(sub).expect("finite subset");
        mallows_vs_normal(&EmpiricalDF::new(sample), law, r)
    });
    Ok((d, se))
}

pub fn convergence_curve(ens: &ReplicaEnsemble, spec: &PartialSumSpec, law: &NormalLaw) -> Result<ConvergenceReport> {
    convergence_curve_with(ens, spec, law, Execution::default())
}

/// [`convergence_curve`] with an explicit policy for the independent
/// `(n, r)` cells.
pub fn convergence_curve_with(
    ens: &ReplicaEnsemble,
    spec: &PartialSumSpec,
    law: &NormalLaw,
    exec: Execution,
) -> Result<ConvergenceReport> {
    let per_n = stabilized_sums(ens, spec)?;
    let (_, eval) = fit_eval_split(ens, spec);
    let k = ens.offset() + spec.offset as i64;
    let cells: Vec<(usize, f64)> = (0..per_n.len())
        .flat_map(|i| spec.r_values.iter().map(move |&r| (i, r)))
        .collect();
    let heads = try_map_indices(per_n.len(), exec, |i| {
        let sums = &per_n[i];
        let df = EmpiricalDF::new(sums.sorted.clone());
        let d_k = kolmogorov_vs_normal(&df, law);
        let d_1 = mallows_vs_normal(&df, law, DistanceOrder::new(1.0)?);
        let scheme = BlockScheme::new(sums.n, spec.delta)?;
        let be = block_berry_esseen(&eval, spec.offset, &scheme).unwrap_or(f64::NAN);
        Ok::<_, crate::LabError>((d_k, d_1, be))
    })?;
    let rows = try_map_indices(cells.len(), exec, |c| {
        let (i, r) = cells[c];
        let sums = &per_n[i];
        let (d_k, d_1, be_bound) = heads[i];
        let (d_r, d_r_se) = distance_with_se(sums, law, DistanceOrder::new(r)?)?;
        let powers: Vec<f64> = sums.values.iter().map(|v| v.abs().powf(r)).collect();
        let (mom_emp, mom_se) = mean_with_se(&powers);
        Ok::<_, crate::LabError>(ReportRow {
            k,
            n: sums.n,
            r,
            d_r,
            d_r_se,
            d_k,
            d_1,
            mom_emp,
            mom_se,
            mom_target: law_abs_moment(law, r)?,
            var_ratio: sums.var_ratio,
            be_bound,
            replicas: sums.values.len(),
        })
    })?;
    Ok(ConvergenceReport { rows })
}

/// Trend of a statistic along a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrendCheck {
    /// Every step satisfies `x_{i+1} < x_i + k·√(se_i² + se_{i+1}²)`.
    pub decreasing_within_margin: bool,
    /// Every step satisfies `x_{i+1} < x_i` outright.
    pub strictly_decreasing: bool,
}

pub fn decreasing_trend(values: &[f64], ses: &[f64], k_se: f64) -> TrendCheck {
    let steps = values.windows(2).zip(ses.windows(2));
    let mut within = true;
    let mut strict = true;
    for (v, s) in steps {
        let margin = k_se * (s[0] * s[0] + s[1] * s[1]).sqrt();
        within &= v[1] < v[0] + margin;
        strict &= v[1] < v[0];
    }
    TrendCheck {
        decreasing_within_margin: within,
        strictly_decreasing: strict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::sums::{Centering, Scaling};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Exp1, StandardNormal};

    fn ensemble<F: FnMut(&mut ChaCha8Rng) -> f64>(r: usize, n: usize, seed: u64, mut f: F) -> ReplicaEnsemble {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ReplicaEnsemble::new((0..r * n).map(|_| f(&mut rng)).collect(), r, n, 0).unwrap()
    }

    fn known(spec: &mut PartialSumSpec, mu: f64, sigma: f64) {
        spec.centering = Centering::KnownMean(mu);
        spec.scaling = Scaling::TheoreticalSigma(sigma);
    }

    #[test]
    fn normal_input_sits_at_the_sampling_floor() {
        let law = NormalLaw::standard();
        let floor = |r: usize, seed: u64| {
            let ens = ensemble(r, 64, seed, |g| g.sample(StandardNormal));
            let mut spec = PartialSumSpec::new(0, vec![4, 16, 64], vec![2.0]);
            known(&mut spec, 0.0, 1.0);
            let rep = convergence_curve(&ens, &spec, &law).unwrap();
            rep.rows.iter().map(|row| row.d_r).sum::<f64>() / 3.0
        };
        let small = floor(250, 1);
        let large = floor(4000, 2);
        assert!(large < small, "{large} !< {small}");
    }

    #[test]
    fn centered_exponential_d2_decreases() {
        let law = NormalLaw::standard();
        let ens = ensemble(4000, 256, 3, |g| g.sample::<f64, _>(Exp1) - 1.0);
        let mut spec = PartialSumSpec::new(0, vec![4, 16, 64, 256], vec![2.0]);
        known(&mut spec, 0.0, 1.0);
        let rep = convergence_curve(&ens, &spec, &law).unwrap();
        let series = rep.series(2.0);
        let d: Vec<f64> = series.iter().map(|r| r.d_r).collect();
        let se: Vec<f64> = series.iter().map(|r| r.d_r_se).collect();
        let t = decreasing_trend(&d, &se, 3.0);
        assert!(t.decreasing_within_margin && t.strictly_decreasing, "{d:?} ± {se:?}");
        assert!(rep.kolmogorov_bound_holds());
    }

    #[test]
    fn rows_hold_liapounov_and_moment_targets() {
        let law = NormalLaw::standard();
        let ens = ensemble(600, 32, 4, |g| if g.random::<bool>() { 1.0 } else { -1.0 });
        let mut spec = PartialSumSpec::new(0, vec![2, 8, 32], vec![1.0, 2.0, 3.0]);
        known(&mut spec, 0.0, 1.0);
        let rep = convergence_curve_with(&ens, &spec, &law, Execution::Sequential).unwrap();
        assert_eq!(rep.rows.len(), 9);
        for n in [2, 8, 32] {
            let d: Vec<f64> = rep.rows.iter().filter(|r| r.n == n).map(|r| r.d_r).collect();
            assert!(d[0] <= d[1] + 1e-12 && d[1] <= d[2] + 1e-12, "n={n}: {d:?}");
        }
        let r3 = rep.series(3.0);
        assert_relative_eq!(r3[0].mom_target, 2.0 * (2.0 / std::f64::consts::PI).sqrt(), max_relative = 1e-12);
        // E|V|³ for n = 2 coin flips: V ∈ {−√2, 0, √2} → 2^{3/2}/2.
        assert!((r3[0].mom_emp - 2f64.powf(1.5) / 2.0).abs() < 3.0 * r3[0].mom_se);
        assert_eq!(rep, convergence_curve_with(&ens, &spec, &law, Execution::Parallel).unwrap());
    }

    #[test]
    fn csv_shape() {
        let law = NormalLaw::standard();
        let ens = ensemble(50, 8, 5, |g| g.sample(StandardNormal));
        let mut spec = PartialSumSpec::new(0, vec![4, 8], vec![2.0]);
        known(&mut spec, 0.0, 1.0);
        let csv = convergence_curve(&ens, &spec, &law).unwrap().to_csv("iid", 9);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 13);
        assert_eq!((fields[0], fields[1], fields[2], fields[12]), ("iid", "0", "4", "9"));
        assert_eq!(fields[11], "50");
        let d: f64 = fields[4].parse().unwrap();
        assert!(d > 0.0);
    }

    #[test]
    fn shifted_law_moment_by_quadrature() {
        let law = NormalLaw::new(1.0, 2.0).unwrap();
        // E X² = μ² + σ² = 5; E|X|⁴ = μ⁴ + 6μ²σ² + 3σ⁴ = 73
        assert_relative_eq!(law_abs_moment(&law, 2.0).unwrap(), 5.0, max_relative = 1e-10);
        assert_relative_eq!(law_abs_moment(&law, 4.0).unwrap(), 73.0, max_relative = 1e-10);
    }

    #[test]
    fn trend_check() {
        let t = decreasing_trend(&[1.0, 0.5, 0.51], &[0.01, 0.01, 0.01], 3.0);
        assert!(t.decreasing_within_margin && !t.strictly_decreasing);
        let t = decreasing_trend(&[1.0, 1.2], &[0.01, 0.01], 3.0);
        assert!(!t.decreasing_within_margin);
    }
}
