use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cartan-witt")).args(args).output().expect("binary runs")
}

#[test]
fn verify_single_family() {
    let out = bin(&["verify", "--family", "W", "--n", "2", "--p", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["verdict"], "pass");
    let reports = v["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0]["claim"], "W-decomposition");
    assert!(reports[0].get("millis").is_none());
}

#[test]
fn verify_all_covers_every_verifier() {
    let out = bin(&["verify", "--family", "all", "--p", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let claims: std::collections::BTreeSet<&str> =
        v["reports"].as_array().unwrap().iter().map(|r| r["claim"].as_str().unwrap()).collect();
    let want = ["H-decomposition", "K-decomposition", "S-basis", "S-decomposition", "W-decomposition", "identities"];
    assert_eq!(claims.into_iter().collect::<Vec<_>>(), want);
}

#[test]
fn decompose_k3_p3() {
    let out = bin(&["decompose", "--family", "K", "--n", "3", "--p", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["dim"], 26);
    assert_eq!(v["multiplicities"], serde_json::json!({"V(0)": 2, "V(2)": 3, "L(1)": 3, "L(2)": 1}));
    assert_eq!(v["composition"], serde_json::json!({"0": 5, "1": 3, "2": 6}));
    assert_eq!(v["blocks"].as_array().unwrap().len(), 9);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["construct", "--family", "H", "--n", "3", "--p", "5"][..],
        &["construct", "--family", "W", "--n", "2", "--p", "9"],
        &["verify", "--p", "2"],
        &["verify", "--family", "X"],
        &["decompose", "--family", "K", "--n", "4", "--p", "5"],
        &["identities", "--p-max", "37"],
        &["bogus"],
        &[],
    ] {
        let out = bin(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn output_files_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["decompose", "--family", "S", "--n", "3", "--p", "3"][..],
        &["verify", "--family", "all", "--p", "3", "--n", "2,3"],
        &["construct", "--family", "K", "--n", "3", "--p", "5"],
    ] {
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        for path in [&a, &b] {
            let mut full: Vec<&str> = args.to_vec();
            full.extend(["--out", path.to_str().unwrap()]);
            assert_eq!(bin(&full).status.code(), Some(0), "{full:?}");
        }
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{args:?}");
    }
}

#[test]
fn text_format() {
    let out = bin(&["--format", "text", "verify", "--family", "S", "--n", "3", "--p", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let s = String::from_utf8(out.stdout).unwrap();
    assert!(s.contains("V(0)^9 (+) V(4)^9 (+) L(1)^10 (+) L(2)^10 (+) L(3)^10 (+) L(4)^2"), "{s}");
    assert!(s.ends_with("2/2 passed\n"), "{s}");
}
