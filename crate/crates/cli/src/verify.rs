//! `verify`: a quick end-to-end self-check bundling the exact oracles,
//! transport closed forms, association tests and the block and moment
//! invariants. Everything runs at a few seconds' scale with fixed seeds.

use std::f64::consts::PI;
use std::fmt;

use mallows_lab::assoc::{association_test, cf_gap_weighted};
use mallows_lab::gibbs::{
    exact_enumeration, oracle::gks_monotonicity, sample_ensemble, transfer_matrix_oracle, Boundary, ChainModel,
    CouplingFamily, HamiltonianSign, RealLaw, SamplingPlan, SpinSpace,
};
use mallows_lab::limit::{block_diagnostics, convergence_curve_with, BlockScheme, Centering, PartialSumSpec};
use mallows_lab::transport::{mallows_closed_form_normal, mallows_vs_normal};
use mallows_lab::{DistanceOrder, EmpiricalDF, Execution, NormalLaw, ReplicaEnsemble, SortedSample};

/// Deliberate breakage used to show the suite has teeth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fixture {
    #[default]
    None,
    /// The GKS oracle runs with the Hamiltonian sign flipped.
    FlippedSign,
    /// The d_K ≤ 2√(d_1/√(2π)) check is skipped; the rest still runs.
    SkipKolmogorov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn status_of(&self, name: &str) -> Option<Status> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.status)
    }
}

fn check(name: &'static str, result: Result<(bool, String), String>) -> Check {
    match result {
        Ok((ok, detail)) => Check {
            name,
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        },
        Err(e) => Check {
            name,
            status: Status::Fail,
            detail: format!("error: {e}"),
        },
    }
}

type Outcome = Result<(bool, String), String>;

fn s<E: fmt::Display>(e: E) -> String {
    e.to_string()
}

fn transport_closed_forms() -> Outcome {
    let std = NormalLaw::standard();
    let law = NormalLaw::new(1.0, 2.0).map_err(s)?;
    let closed = mallows_closed_form_normal(&law, &std);
    let m = 10_000;
    let grid: Vec<f64> = (0..m)
        .map(|i| law.quantile((i as f64 + 0.5) / m as f64))
        .collect::<Result<_, _>>()
        .map_err(s)?;
    let df = EmpiricalDF::new(SortedSample::new(grid).map_err(s)?);
    let two = DistanceOrder::new(2.0).map_err(s)?;
    let grid_gap = (mallows_vs_normal(&df, &std, two) - 2f64.sqrt()).abs();
    // A fair ±1 coin: d_2² = 2 − 2 E|Z|.
    let coin = EmpiricalDF::new(SortedSample::new(vec![-1.0, 1.0]).map_err(s)?);
    let coin_gap = (mallows_vs_normal(&coin, &std, two) - (2.0 - 2.0 * (2.0 / PI).sqrt()).sqrt()).abs();
    let ok = (closed - 2f64.sqrt()).abs() < 1e-15 && grid_gap < 5e-3 && coin_gap < 1e-7;
    Ok((ok, format!("closed form {closed:.15}, grid gap {grid_gap:.2e}, coin gap {coin_gap:.2e}")))
}

fn exact_oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for boundary in [Boundary::Periodic, Boundary::Free] {
        let coupling = CouplingFamily::finite_range(0.25, 1).map_err(s)?;
        let model = ChainModel::new(coupling.clone(), SpinSpace::PlusMinus, 8, boundary.clone(), None).map_err(s)?;
        let exact = exact_enumeration(&model).map_err(s)?.two_point_table();
        let tm = transfer_matrix_oracle(&coupling, 8, &boundary).map_err(s)?;
        for (a, b) in exact.iter().flatten().zip(tm.iter().flatten()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok((worst < 1e-12, format!("max |enumeration − transfer matrix| = {worst:.2e}")))
}

fn gks(fixture: Fixture) -> Outcome {
    let sign = if fixture == Fixture::FlippedSign {
        HamiltonianSign::Flipped
    } else {
        HamiltonianSign::Ferromagnetic
    };
    let grid = [0.05, 0.1, 0.2, 0.4];
    let ok = gks_monotonicity(&grid, 8, &Boundary::Periodic, sign).map_err(s)?;
    Ok((ok, format!("E[σ_iσ_j] nondecreasing in J over {grid:?} ({sign:?} sign)")))
}

fn heat_bath_vs_enumeration() -> Outcome {
    let n = 6;
    let coupling = CouplingFamily::finite_range(0.3, 1).map_err(s)?;
    let model = ChainModel::new(coupling, SpinSpace::PlusMinus, n, Boundary::Free, None).map_err(s)?;
    let exact = exact_enumeration(&model).map_err(s)?;
    let plan = SamplingPlan {
        burn_in: 50,
        thin: 1,
        replicas: 4000,
        seed: 11,
    };
    let ens = sample_ensemble(&model, &plan, Execution::default()).map_err(s)?;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let prods: Vec<f64> = ens.rows().map(|r| r[i] * r[j]).collect();
            let m = prods.iter().sum::<f64>() / prods.len() as f64;
            let var = prods.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (prods.len() - 1) as f64;
            let se = (var / prods.len() as f64).sqrt();
            worst = worst.max((m - exact.two_point(i, j)).abs() / se);
        }
    }
    Ok((worst <= 3.0, format!("worst |z| = {worst:.2} over {} pairs", n * (n - 1) / 2)))
}

fn association() -> Outcome {
    let coupling = CouplingFamily::finite_range(0.2, 1).map_err(s)?;
    let model = ChainModel::new(coupling, SpinSpace::PlusMinus, 12, Boundary::Free, None).map_err(s)?;
    let plan = SamplingPlan {
        burn_in: 50,
        thin: 1,
        replicas: 2000,
        seed: 12,
    };
    let ens = sample_ensemble(&model, &plan, Execution::default()).map_err(s)?;
    let ferro = association_test(&ens, 200, 5).map_err(s)?;
    // Fixture (Z, −Z, Z′) built from a product N(0,1) chain.
    let normals = ChainModel::new(
        CouplingFamily::Zero,
        SpinSpace::RealLaw(RealLaw::Normal { mean: 0.0, stddev: 1.0 }),
        2,
        Boundary::Free,
        None,
    )
    .map_err(s)?;
    let z = sample_ensemble(&normals, &SamplingPlan { seed: 14, ..plan }, Execution::default()).map_err(s)?;
    let rows: Vec<Vec<f64>> = z.rows().map(|r| vec![r[0], -r[0], r[1]]).collect();
    let anti = ReplicaEnsemble::from_rows(rows, 0).map_err(s)?;
    let fixture = association_test(&anti, 200, 5).map_err(s)?;
    Ok((
        ferro.pass && !fixture.pass,
        format!(
            "ferromagnetic min z {:.2} ({}), anti-correlated fixture min z {:.1} ({})",
            ferro.min_studentized,
            if ferro.pass { "pass" } else { "fail" },
            fixture.min_studentized,
            if fixture.pass { "pass" } else { "fail" }
        ),
    ))
}

fn cf_gap_exact() -> Outcome {
    let coupling = CouplingFamily::finite_range(0.4, 1).map_err(s)?;
    let model = ChainModel::new(coupling, SpinSpace::PlusMinus, 3, Boundary::Free, None).map_err(s)?;
    let exact = exact_enumeration(&model).map_err(s)?;
    let configs = exact.configurations();
    let mut worst = f64::NEG_INFINITY;
    for freqs in [[1.0, 1.0, 1.0], [0.3, -0.8, 1.2], [2.0, 2.0, 2.0], [0.0, 0.0, 0.0]] {
        let (lhs, rhs) = cf_gap_weighted(configs.iter().map(|c| c.as_slice()), exact.weights(), &freqs);
        worst = worst.max(lhs - rhs);
    }
    Ok((worst <= 0.0, format!("max lhs − rhs = {worst:.3e} (zero tolerance)")))
}

/// Report-level invariants on one small interval-spin run.
fn report_invariants(fixture: Fixture) -> Result<Vec<Check>, String> {
    let coupling = CouplingFamily::finite_range(0.2, 1).map_err(s)?;
    let model = ChainModel::new(coupling, SpinSpace::Interval, 300, Boundary::Free, None).map_err(s)?;
    let plan = SamplingPlan {
        burn_in: 30,
        thin: 1,
        replicas: 800,
        seed: 13,
    };
    let ens = sample_ensemble(&model, &plan, Execution::default()).map_err(s)?;
    let mut spec = PartialSumSpec::new(16, vec![16, 64, 256], vec![1.0, 2.0, 3.0]);
    spec.centering = Centering::KnownMean(0.0);
    let report = convergence_curve_with(&ens, &spec, &NormalLaw::standard(), Execution::default()).map_err(s)?;

    let mut sandwich = Vec::new();
    for &n in &spec.lengths {
        let d = block_diagnostics(&ens, &BlockScheme::new(n, spec.delta).map_err(s)?, spec.offset).map_err(s)?;
        sandwich.push(d.sandwich_holds(3.0));
    }
    let sandwich_ok = sandwich.iter().all(|&b| b);

    // Liapounov: (E|V|^r)^{1/r} is nondecreasing in r for every n.
    let mut liap_ok = true;
    for &n in &spec.lengths {
        let norms: Vec<f64> = report
            .rows
            .iter()
            .filter(|row| row.n == n)
            .map(|row| row.mom_emp.powf(1.0 / row.r))
            .collect();
        liap_ok &= norms.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    }

    let mut out = vec![
        check("block-sandwich", Ok((sandwich_ok, format!("s² ≤ σ²_mblocks ≤ σ²_window within 3 SE at n = {:?}", spec.lengths)))),
        check("liapounov-ordering", Ok((liap_ok, format!("{} rows", report.rows.len())))),
    ];
    out.push(if fixture == Fixture::SkipKolmogorov {
        Check {
            name: "kolmogorov-bound",
            status: Status::Skipped,
            detail: "disabled by fixture".into(),
        }
    } else {
        let worst = report
            .rows
            .iter()
            .map(|r| r.d_k / (2.0 * (r.d_1 / (2.0 * PI).sqrt()).sqrt()))
            .fold(0.0, f64::max);
        check(
            "kolmogorov-bound",
            Ok((report.kolmogorov_bound_holds(), format!("max d_K / bound = {worst:.3}"))),
        )
    });
    Ok(out)
}

pub fn verify_suite(fixture: Fixture) -> VerifyReport {
    let mut checks = vec![
        check("transport-closed-forms", transport_closed_forms()),
        check("exact-oracle-equivalence", exact_oracle_equivalence()),
        check("gks-monotonicity", gks(fixture)),
        check("heat-bath-vs-enumeration", heat_bath_vs_enumeration()),
        check("association", association()),
        check("cf-gap-exact", cf_gap_exact()),
    ];
    match report_invariants(fixture) {
        Ok(more) => checks.extend(more),
        Err(e) => checks.push(check("report-invariants", Err(e))),
    }
    VerifyReport { checks }
}
