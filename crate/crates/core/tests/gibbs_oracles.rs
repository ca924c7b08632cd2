//! Monte-Carlo ensembles from the heat-bath sampler checked against exact
//! enumeration, plus the association structure of the example chains.

use mallows_lab::assoc::{association_test, cf_gap_weighted, estimate_covariances, CovarianceTable, Stationarity};
use mallows_lab::gibbs::oracle::{gks_monotonicity, infinite_chain_two_point};
use mallows_lab::gibbs::{
    exact_enumeration, sample_ensemble, Boundary, ChainModel, CouplingFamily, HamiltonianSign, RealLaw,
    SamplingPlan, SpinSpace,
};
use mallows_lab::Execution;

fn plan(replicas: usize, seed: u64) -> SamplingPlan {
    SamplingPlan {
        burn_in: 50,
        thin: 1,
        replicas,
        seed,
    }
}

#[test]
fn site_covariances_match_enumeration_on_a_free_chain() {
    let model = ChainModel::new(
        CouplingFamily::finite_range(0.2, 1).unwrap(),
        SpinSpace::PlusMinus,
        10,
        Boundary::Free,
        None,
    )
    .unwrap();
    let exact = exact_enumeration(&model).unwrap();
    let ens = sample_ensemble(&model, &plan(20_000, 1), Execution::default()).unwrap();
    let cov = estimate_covariances(&ens, &Stationarity::NonStationary { sites: vec![0, 5] }, 2).unwrap();
    let CovarianceTable::NonStationary(table) = &cov.table else {
        panic!("expected a per-site table");
    };
    for (s, &site) in table.sites.iter().enumerate() {
        // Lag 0 is 1 − m̂² for ±1 spins, a degenerate statistic.
        for lag in [-2i64, -1, 1, 2] {
            let idx = (lag + 2) as usize;
            let (Some(c), Some(se)) = (table.values[s][idx], table.se[s][idx]) else {
                assert!(site as i64 + lag < 0, "missing entry inside the window");
                continue;
            };
            let want = exact.covariance(site, (site as i64 + lag) as usize);
            assert!((c - want).abs() < 3.0 * se, "site {site} lag {lag}: {c} vs {want} (se {se})");
        }
    }
}

#[test]
fn long_periodic_ring_approaches_the_infinite_chain() {
    let model = ChainModel::new(
        CouplingFamily::finite_range(0.25, 1).unwrap(),
        SpinSpace::PlusMinus,
        64,
        Boundary::Periodic,
        None,
    )
    .unwrap();
    let ens = sample_ensemble(&model, &plan(4000, 2), Execution::default()).unwrap();
    let cov = estimate_covariances(&ens, &Stationarity::Stationary, 6).unwrap();
    let lags = cov.lags().unwrap();
    for j in 0..=6 {
        let want = infinite_chain_two_point(0.25, j);
        assert!((lags.values[j as usize] - want).abs() < 3.0 * lags.se[j as usize] + 1e-9, "lag {j}");
    }
}

#[test]
fn product_normal_chain_has_the_iid_signature() {
    let model = ChainModel::new(
        CouplingFamily::Zero,
        SpinSpace::RealLaw(RealLaw::Normal { mean: 0.0, stddev: 1.0 }),
        32,
        Boundary::Free,
        None,
    )
    .unwrap();
    let ens = sample_ensemble(&model, &plan(3000, 3), Execution::default()).unwrap();
    assert!(association_test(&ens, 100, 3).unwrap().pass);
    let cov = estimate_covariances(&ens, &Stationarity::Stationary, 8).unwrap();
    let lags = cov.lags().unwrap();
    assert!((lags.values[0] - 1.0).abs() < 3.0 * lags.se[0]);
    for j in 1..=8 {
        assert!(lags.values[j].abs() < 3.0 * lags.se[j], "lag {j}: {}", lags.values[j]);
    }
}

#[test]
fn perturbed_chain_is_associated_but_not_stationary() {
    let coupling = CouplingFamily::perturbed_scaled(0.03, 3.0, 0.5, 2.0, 41).unwrap();
    let n = 12;
    // Interior bonds with the strongest and weakest coupling, chosen from
    // the couplings alone before any sampling.
    let bonds: Vec<(usize, f64)> = (2..n - 3).map(|k| (k, coupling.j(k as i64, k as i64 + 1))).collect();
    let strong = bonds.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    let weak = bonds.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    let model = ChainModel::new(coupling, SpinSpace::PlusMinus, n, Boundary::Free, None).unwrap();
    let ens = sample_ensemble(&model, &plan(40_000, 4), Execution::default()).unwrap();
    let cov = estimate_covariances(&ens, &Stationarity::NonStationary { sites: vec![strong, weak] }, 1).unwrap();
    let CovarianceTable::NonStationary(table) = &cov.table else {
        panic!("expected a per-site table");
    };
    let (c_strong, se_strong) = (table.values[0][2].unwrap(), table.se[0][2].unwrap());
    let (c_weak, se_weak) = (table.values[1][2].unwrap(), table.se[1][2].unwrap());
    let z = (c_strong - c_weak) / (se_strong * se_strong + se_weak * se_weak).sqrt();
    assert!(z > 5.0, "c(k,k+1) {c_strong} vs {c_weak}, z {z}");
    assert!(association_test(&ens, 100, 4).unwrap().pass);
}

#[test]
fn characteristic_function_gap_holds_exactly_on_three_sites() {
    for coupling in [
        CouplingFamily::finite_range(0.4, 1).unwrap(),
        CouplingFamily::long_range(0.3, 1.5).unwrap(),
    ] {
        let model = ChainModel::new(coupling, SpinSpace::PlusMinus, 3, Boundary::Free, None).unwrap();
        let exact = exact_enumeration(&model).unwrap();
        let configs = exact.configurations();
        for freqs in [[0.3, -0.8, 1.2], [2.0, 2.0, 2.0], [-1.5, 0.1, 0.7], [0.0, 1.0, -1.0]] {
            let (lhs, rhs) = cf_gap_weighted(configs.iter().map(|c| c.as_slice()), exact.weights(), &freqs);
            assert!(lhs <= rhs, "{freqs:?}: {lhs} > {rhs}");
        }
    }
}

#[test]
fn flipped_sign_breaks_monotonicity() {
    let grid = [0.05, 0.1, 0.2, 0.4];
    assert!(gks_monotonicity(&grid, 8, &Boundary::Free, HamiltonianSign::Ferromagnetic).unwrap());
    assert!(!gks_monotonicity(&grid, 8, &Boundary::Periodic, HamiltonianSign::Flipped).unwrap());
}
