mod support;

use std::path::Path;
use std::process::{Command, Output};

use support::golden;

fn qdcover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdcover"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sweep_writes_sorted_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let input = golden("pants.obj");
    let o = qdcover(&[
        "sweep",
        "--input",
        s(&input),
        "--epsilon",
        "8,4",
        "--delta",
        "0.01,0.005",
        "--out",
        s(tmp.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epsilon,delta,coverage_rate,overlap_rate,path_length");
    let keys: Vec<(f64, f64)> = lines[1..]
        .iter()
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            assert_eq!(v.len(), 5);
            (v[0], v[1])
        })
        .collect();
    assert_eq!(keys, vec![(4.0, 0.005), (4.0, 0.01), (8.0, 0.005), (8.0, 0.01)]);
}

#[test]
fn sweep_failure_ends_with_marker_row() {
    let tmp = tempfile::tempdir().unwrap();
    let input = golden("pants.obj");
    let o = qdcover(&[
        "sweep",
        "--input",
        s(&input),
        "--epsilon",
        "4,500",
        "--delta",
        "0.01",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(24));
    let csv = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let fields: Vec<&str> = last.split(',').collect();
    assert_eq!(fields[0], "FAILED");
    assert_eq!(fields[1].parse::<f64>().unwrap(), 500.0);
    assert_eq!(fields[3], "StepTooLargeError");
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn plan_report_uses_seventeen_digits() {
    let tmp = tempfile::tempdir().unwrap();
    let input = golden("pants.obj");
    let o = qdcover(&[
        "plan",
        "--input",
        s(&input),
        "--epsilon",
        "8",
        "--delta",
        "0.01",
        "--no-svg",
        "--out",
        s(tmp.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!tmp.path().join("path.svg").exists());
    let text = std::fs::read_to_string(tmp.path().join("report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["parameters", "surface", "analysis", "path", "coverage", "spot_check"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let line = text.lines().find(|l| l.contains("\"coverage_rate\"")).unwrap();
    let num = line.split(':').nth(1).unwrap().trim().trim_end_matches(',');
    let mantissa = num.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{num}");
    assert_eq!(v["parameters"]["epsilon"].as_f64(), Some(8.0));
    assert_eq!(v["path"]["closed"].as_bool(), Some(true));
}

#[test]
fn closed_surface_gets_no_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qdcover(&[
        "plan",
        "--input",
        s(&golden("genus2.obj")),
        "--phi-coeffs",
        s(&golden("genus2.coeffs")),
        "--epsilon",
        "8",
        "--delta",
        "0.02",
        "--out",
        s(tmp.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!tmp.path().join("path.svg").exists());
    for f in ["report.json", "path.obj", "critical_arcs.obj", "cells.obj"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let cells = std::fs::read_to_string(tmp.path().join("cells.obj")).unwrap();
    assert_eq!(cells.lines().filter(|l| l.starts_with("g ")).count(), 3);
}

#[test]
fn inspect_reports_the_analysis() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qdcover(&["inspect", "--input", s(&golden("donut.obj")), "--out", s(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("inspect.json")).unwrap()).unwrap();
    assert_eq!(v["analysis"]["zeros"].as_array().unwrap().len(), 4);
    assert_eq!(v["analysis"]["cells"].as_array().unwrap().len(), 6);
}

#[test]
fn usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let pants = golden("pants.obj");
    let torus = golden("flat_torus.obj");
    let cases: [(&[&str], i32); 4] = [
        (&["plan", "--input", s(&pants), "--epsilon", "2,4"], 27),
        (&["plan", "--input", s(&pants), "--delta", "-1"], 27),
        (&["plan", "--input", s(&torus), "--phi", "0,7"], 27),
        (&["plan", "--input", s(&pants), "--phi", "0,1", "--phi-coeffs", "x"], 27),
    ];
    for (args, code) in cases {
        let mut a = args.to_vec();
        a.extend(["--out", s(tmp.path())]);
        let o = qdcover(&a);
        assert_eq!(
            o.status.code(),
            Some(code),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(qdcover(&["--help"]).status.code(), Some(0));
}
