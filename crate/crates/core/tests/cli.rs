//! End-to-end checks of the command-line interface: determinism of seeded
//! outputs and the documented JSON surfaces.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_torus-olp"))
}

#[test]
fn basis_lists_printed_shells() {
    let out = bin().args(["basis", "-D", "2", "-K", "2"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["D"], 2);
    assert_eq!(v["shells"][1], serde_json::json!([[-1, 0], [0, -1], [0, 1], [1, 0]]));
    assert_eq!(
        v["shells"][2],
        serde_json::json!([
            [-2, 0],
            [-1, -1],
            [-1, 1],
            [0, -2],
            [0, 2],
            [1, -1],
            [1, 1],
            [2, 0]
        ])
    );
}

#[test]
fn darboux_preset_is_deterministic_and_correct() {
    let args = ["darboux", "--preset", "haar", "-D", "2", "-K", "4", "-k", "1", "--seed", "7"];
    let out1 = bin().args(args).output().unwrap();
    let out2 = bin().args(args).output().unwrap();
    assert!(out1.status.success());
    assert_eq!(out1.stdout, out2.stdout, "seeded run must be byte-identical");
    let v: serde_json::Value = serde_json::from_slice(&out1.stdout).unwrap();
    // T phi_[1] rows are z^alpha - 1/5: constant term -0.2, unit leading term
    for row in v["t_phi"].as_array().unwrap() {
        assert!(row["division_remainder"].as_f64().unwrap() < 1e-9);
        let terms = row["coefficients"]["terms"].as_array().unwrap();
        assert_eq!(terms.len(), 2);
        for t in terms {
            let re = t["re"].as_f64().unwrap();
            let alpha: Vec<i64> =
                serde_json::from_value(t["alpha"].clone()).unwrap();
            if alpha.iter().all(|&x| x == 0) {
                assert!((re + 0.2).abs() < 1e-8);
            } else {
                assert!((re - 1.0).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn nice_flags_the_non_nice_example() {
    let poly = r#"{"D":2,"terms":[{"alpha":[-2,0],"re":1.0},{"alpha":[0,-2],"re":1.0},{"alpha":[0,0],"re":1.0}]}"#;
    let out = bin().args(["nice", "--poly", poly]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["nice"], false);
    assert_eq!(v["oracle_agrees"], true);
    assert!(v["deficient_orthant"].as_str().is_some());
}

#[test]
fn verify_preset_haar_passes() {
    let out = bin()
        .args(["verify", "--preset", "haar", "-D", "2", "-K", "4"])
        .output()
        .unwrap();
    assert!(out.status.success(), "verify --preset haar should exit 0");
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS"));
}

#[test]
fn factorize_paper_preset_reports_quasitau() {
    let out = bin()
        .args(["factorize", "--preset", "paper35", "-D", "2", "-K", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let h0 = v["h_blocks"][0][0][0][0].as_f64().unwrap();
    assert!((h0 - 5.0).abs() < 1e-12);
    assert!(v["reconstruction_residual"].as_f64().unwrap() < 1e-12);
    // floats carry 17 significant digits
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("e0") || text.contains("e-") || text.contains("e1"));
}

#[test]
fn eval_rejects_zero_coordinates() {
    let out = bin()
        .args(["eval", "--preset", "haar", "-k", "1", "-z", "0,0,1,0"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("zero"));
}

#[test]
fn toda_first_derivative_check_runs() {
    let out = bin()
        .args(["toda", "--preset", "haar", "-D", "2", "-K", "3", "--check", "first", "--h", "1e-4"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let r = v["residuals"]["dh_k1"].as_f64().unwrap();
    assert!(r < 1e-7, "dh_k1 residual {r}");
}
