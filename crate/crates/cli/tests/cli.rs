//! End-to-end checks of the command-line surface: deterministic output
//! bytes, documented exit codes, and the headline examples.

use std::process::Command;

fn qsym(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qsym"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn symmetrize_single_list_reports_fidelity_one() {
    let out = qsym(&["symmetrize", "122", "--mode", "single"]);
    assert!(out.status.success());
    let manifest = String::from_utf8_lossy(&out.stderr);
    assert!(manifest.contains("\"oracle_fidelity\": 1.0"), "{manifest}");
    let state: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("state JSON on stdout");
    assert_eq!(state["terms"].as_array().unwrap().len(), 3);
}

#[test]
fn symmetrize_trivial_list_is_identity() {
    let out = qsym(&["symmetrize", "1", "--mode", "single", "--quiet"]);
    assert!(out.status.success());
    let state: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(state["terms"].as_array().unwrap().len(), 1);
}

#[test]
fn identical_invocations_give_identical_state_bytes() {
    let a = qsym(&["symmetrize", "1223", "--mode", "superposed", "--quiet"]);
    let b = qsym(&["symmetrize", "1223", "--mode", "superposed", "--quiet"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn convert_matches_worked_example() {
    let out = qsym(&["convert", "1,2,1", "--quiet"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0,1,1,2");

    let back = qsym(&["convert", "0,1,1,2", "--inverse", "--modes", "3", "--quiet"]);
    assert!(back.status.success());
    assert_eq!(String::from_utf8_lossy(&back.stdout).trim(), "1,2,1");
}

#[test]
fn les_decodes_named_pair() {
    let out = qsym(&["les", "121153", "--quiet"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "436125");

    let out = qsym(&["les", "436125", "--inverse", "--quiet"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "121153");
}

#[test]
fn telescope_grid_recovers_bin() {
    let out = qsym(&["telescope", "--grid", "2", "--detectors", "4", "--quiet"]);
    assert!(out.status.success());
    let result: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(result["recovered_multiset"], serde_json::json!([2]));
    let dist = result["multiset_distribution"].as_array().unwrap();
    assert_eq!(dist.len(), 1);
    assert!((dist[0]["probability"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn dicke_counts_terms() {
    let out = qsym(&["dicke", "4", "2", "--quiet"]);
    assert!(out.status.success());
    let state: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(state["terms"].as_array().unwrap().len(), 6);
}

#[test]
fn invalid_input_exits_with_two_and_one_line() {
    let out = qsym(&["symmetrize", "not-a-list"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim().lines().count(), 1, "{err}");

    // non-increasing list rejected by the strictly-increasing route
    let out = qsym(&["symmetrize", "221", "--mode", "sil-exact"]);
    assert_eq!(out.status.code(), Some(2));

    let out = qsym(&["convert", "0,0"]);
    assert_eq!(out.status.code(), Some(2));

    let out = qsym(&["les", "131"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn telescope_csv_written() {
    let dir = std::env::temp_dir().join("qsym-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("dist.csv");
    let out = qsym(&[
        "telescope",
        "--grid",
        "1,3",
        "--detectors",
        "4",
        "--csv",
        csv.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("bins,probability\n"));
    assert!(text.lines().count() >= 3, "{text}");
}

#[test]
fn state_file_round_trip_through_symmetrize() {
    let dir = std::env::temp_dir().join("qsym-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let state_path = dir.join("in.json");
    let out_path = dir.join("out.json");
    // superposition (1/sqrt3)|1223> + sqrt(2/3)|1333>
    let a = 1.0 / 3.0_f64.sqrt();
    let b = (2.0 / 3.0_f64).sqrt();
    let input = serde_json::json!({
        "layout": [{"name": "data", "arity": 4, "bound": 3}],
        "terms": [
            {"basis": [[1, 2, 2, 3]], "re": a, "im": 0.0},
            {"basis": [[1, 3, 3, 3]], "re": b, "im": 0.0}
        ]
    });
    std::fs::write(&state_path, serde_json::to_string(&input).unwrap()).unwrap();
    let out = qsym(&[
        "symmetrize",
        state_path.to_str().unwrap(),
        "--mode",
        "superposed",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let manifest = String::from_utf8_lossy(&out.stderr);
    assert!(manifest.contains("\"oracle_fidelity\": 1.0"), "{manifest}");
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    // 12 + 4 distinct rearrangements
    assert_eq!(written["terms"].as_array().unwrap().len(), 16);
}
