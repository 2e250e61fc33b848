use std::path::Path;

use qdcover::cli::config::{parse_coefficients, parse_pair, PipelineConfig, SurfaceOverride};
use qdcover::pipeline::PhiChoice;
use qdcover::Error;

#[test]
fn config_file_sets_values_relative_to_itself() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("phi.txt"), "# i j re im\n0 1 1.0 0.0\n1 1 0.5 -0.25\n").unwrap();
    let file = dir.path().join("run.cfg");
    std::fs::write(
        &file,
        "input = mesh.obj   # relative\nepsilon = 2, 4\ndelta = 0.01\nphi_coeffs = phi.txt\nsvg = off\nseed = 9\n",
    )
    .unwrap();
    let mut c = PipelineConfig::default();
    c.load_file(&file).unwrap();
    assert_eq!(c.input, dir.path().join("mesh.obj"));
    assert_eq!(c.epsilon, vec![2.0, 4.0]);
    assert_eq!(c.delta, vec![0.01]);
    assert!(!c.exports.svg);
    assert_eq!(c.seed, 9);
    assert_eq!(c.phi_source.as_deref(), Some(dir.path().join("phi.txt").as_path()));
    match &c.phi {
        PhiChoice::Coefficients(v) => assert_eq!(v.len(), 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn bad_settings_are_config_errors() {
    let mut c = PipelineConfig::default();
    let base = Path::new(".");
    assert!(matches!(c.set("colour", "red", base), Err(Error::Config(_))));
    assert!(matches!(c.set("svg", "maybe", base), Err(Error::Config(_))));
    assert!(matches!(c.set("resolution", "many", base), Err(Error::Config(_))));
    assert!("sideways".parse::<SurfaceOverride>().is_err());
}

#[test]
fn coefficient_errors_carry_line_numbers() {
    match parse_coefficients("0 0 1 0\n\n1 x 2 0\n") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert_eq!(parse_pair("1,2").unwrap(), PhiChoice::Pair(1, 2));
    assert!(parse_pair("1").is_err());
}

#[test]
fn missing_config_file_is_io_error() {
    let mut c = PipelineConfig::default();
    let e = c.load_file(Path::new("/nonexistent/run.cfg")).unwrap_err();
    assert_eq!(e.exit_code(), 2);
}
