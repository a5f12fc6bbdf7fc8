//! Drives the binary: exit codes, file formats, byte-identical reruns.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pathology-forge"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("pathology-forge-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str]) -> i32 {
    let out = bin().args(args).output().unwrap();
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn build_certify_export_transport() {
    let d = scratch("flow");
    let w = d.join("w.json");
    assert_eq!(run(&["build", "--space", "unit-interval", "--p", "1", "--kind", "sp-basic", "--count", "4", "--horizon", "10", "--out", s(&w)]), 0);
    let file: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&w).unwrap()).unwrap();
    assert_eq!(file["witnesses"].as_array().unwrap().len(), 4);
    assert_eq!(file["disjoint"], true);

    let c = d.join("c.json");
    assert_eq!(run(&["certify", s(&w), "--claim", "nowhere-lq", "--q", "2", "--depth", "10", "--out", s(&c)]), 0);
    let cert: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&c).unwrap()).unwrap();
    assert_eq!(cert["granted"], true);
    let first = &cert["reports"][0];
    assert_eq!(first["uniform"], true);
    assert_eq!(first["verdicts"].as_array().unwrap().len(), 11);
    for key in ["n", "type", "params"] {
        assert!(first["verdicts"][0].get(key).is_some(), "verdict lacks {key}");
    }

    let e = d.join("e.csv");
    assert_eq!(run(&["export", s(&w), "--depth", "6", "--format", "csv", "--out", s(&e)]), 0);
    let csv = std::fs::read_to_string(&e).unwrap();
    assert!(csv.starts_with("interval_start,interval_end,value_exact,value_approx\n"));
    assert!(csv.lines().count() > 10);

    let t = d.join("t.json");
    assert_eq!(run(&["transport", s(&w), "--map", "F", "--out", s(&t)]), 0);
    assert_eq!(run(&["certify", s(&t), "--claim", "nowhere-lq", "--q", "3", "--depth", "8"]), 0);
    std::fs::remove_dir_all(&d).unwrap();
}

#[test]
fn exit_codes() {
    let d = scratch("codes");
    let simple = d.join("s.json");
    let terms = r#"[{"c":"3","set":{"type":"dyadic","params":{"k":1,"j":0}}}]"#;
    assert_eq!(run(&["build", "--space", "unit-interval", "--p", "1", "--kind", "simple", "--terms", terms, "--out", s(&simple)]), 0);
    assert_eq!(run(&["certify", s(&simple), "--claim", "in-lp"]), 0);
    // a simple function is bounded on some base element
    assert_eq!(run(&["certify", s(&simple), "--claim", "nowhere-lq", "--q", "2"]), 2);

    assert_eq!(run(&["build", "--space", "unit-interval", "--p", "1", "--kind", "nonsense"]), 1);
    assert_eq!(run(&["certify", "--claim", "nowhere-lq"]), 1);

    let w = d.join("w.json");
    assert_eq!(run(&["build", "--space", "unit-interval", "--p", "1", "--kind", "ha", "--horizon", "6", "--out", s(&w)]), 0);
    let text = std::fs::read_to_string(&w).unwrap();
    let tampered = d.join("tampered.json");
    std::fs::write(&tampered, text.replace("\"horizon\": 6", "\"horizon\": 7")).unwrap();
    assert_eq!(run(&["certify", s(&tampered), "--claim", "in-lp"]), 4);
    let future = d.join("future.json");
    std::fs::write(&future, text.replace("\"version\": 1", "\"version\": 2")).unwrap();
    assert_eq!(run(&["certify", s(&future), "--claim", "in-lp"]), 4);
    std::fs::write(&future, "not json").unwrap();
    assert_eq!(run(&["certify", s(&future), "--claim", "in-lp"]), 4);
    std::fs::remove_dir_all(&d).unwrap();
}

#[test]
fn reruns_are_byte_identical() {
    let d = scratch("det");
    let mut outputs = vec![];
    for round in 0..2 {
        let w = d.join(format!("w{round}.json"));
        let c = d.join(format!("c{round}.json"));
        assert_eq!(run(&["build", "--space", "half-line", "--p", "2", "--kind", "gb", "--out", s(&w)]), 0);
        assert_eq!(run(&["certify", s(&w), "--claim", "not-lq", "--q", "1", "--out", s(&c)]), 0);
        outputs.push((std::fs::read(&w).unwrap(), std::fs::read(&c).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    std::fs::remove_dir_all(&d).unwrap();
}
