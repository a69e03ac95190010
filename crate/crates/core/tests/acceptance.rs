//! Acceptance suite: runs every criterion at its pinned tolerance and prints
//! one pass/fail line per criterion (also exposed through `torus-olp verify`).

use torus_olp::verify;

fn run(report: torus_olp::Result<verify::CriterionReport>) {
    let report = report.expect("criterion execution failed");
    println!(
        "criterion {:>2} [{}] {} (max residual {:.3e}, tol {:.1e})",
        report.id,
        if report.passed { "PASS" } else { "FAIL" },
        report.name,
        report.max_residual,
        report.tolerance
    );
    if !report.passed {
        for d in &report.details {
            if d.contains("FAIL") {
                println!("  {d}");
            }
        }
    }
    assert!(report.passed, "criterion {} failed: {}", report.id, report.name);
}

#[test]
fn criterion_01_shell_combinatorics() {
    run(verify::criterion_shells());
}

#[test]
fn criterion_02_haar_baseline() {
    run(verify::criterion_haar_baseline());
}

#[test]
fn criterion_03_worked_example() {
    run(verify::criterion_worked_example());
}

#[test]
fn criterion_04_darboux_vs_direct() {
    run(verify::criterion_darboux_vs_direct());
}

#[test]
fn criterion_05_factorization_identities() {
    run(verify::criterion_factorization_identities());
}

#[test]
fn criterion_06_quasi_determinants() {
    run(verify::criterion_quasi_determinants());
}

#[test]
fn criterion_07_nicety() {
    run(verify::criterion_nicety());
}

#[test]
fn criterion_08_jacobi_resolvent() {
    run(verify::criterion_jacobi_resolvent());
}

#[test]
fn criterion_09_toda_flows() {
    run(verify::criterion_toda_flows());
}

#[test]
fn criterion_10_discrete_flows() {
    run(verify::criterion_discrete_flows());
}

#[test]
fn criterion_11_d1_reduction() {
    run(verify::criterion_d1_reduction());
}

#[test]
fn criterion_12_cauchy_mohammed() {
    run(verify::criterion_cauchy_mohammed());
}
