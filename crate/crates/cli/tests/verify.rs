use std::process::Command;

use mallows_lab_cli::verify::Status;
use mallows_lab_cli::{verify_suite, Fixture};

#[test]
fn clean_suite_passes() {
    let report = verify_suite(Fixture::None);
    for c in &report.checks {
        assert_eq!(c.status, Status::Pass, "{c}");
    }
    assert!(report.checks.len() >= 9);
}

#[test]
fn flipped_sign_fails_on_gks_only() {
    let report = verify_suite(Fixture::FlippedSign);
    assert!(!report.passed());
    for c in &report.checks {
        let want = if c.name == "gks-monotonicity" { Status::Fail } else { Status::Pass };
        assert_eq!(c.status, want, "{c}");
    }
}

#[test]
fn skipping_the_kolmogorov_check_keeps_the_rest() {
    let clean = verify_suite(Fixture::None);
    let report = verify_suite(Fixture::SkipKolmogorov);
    assert_eq!(report.status_of("kolmogorov-bound"), Some(Status::Skipped));
    assert!(report.passed());
    let ran: Vec<_> = report.checks.iter().filter(|c| c.status == Status::Pass).map(|c| c.name).collect();
    let all: Vec<_> = clean.checks.iter().map(|c| c.name).filter(|n| *n != "kolmogorov-bound").collect();
    assert_eq!(ran, all);
}

#[test]
fn binary_exit_status_follows_the_suite() {
    let bin = env!("CARGO_BIN_EXE_mallows-lab");
    let ok = Command::new(bin).arg("verify").output().unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).ends_with("verify: PASS\n"));
    let bad = Command::new(bin).args(["verify", "--fixture", "flipped-sign"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("[FAIL] gks-monotonicity"));
}
