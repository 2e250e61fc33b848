mod support;

use proptest::prelude::*;
use qdcover::coverage::{evaluate, spot_check, DEFAULT_RESOLUTION};
use qdcover::mesh::Vec3;
use qdcover::planner::{CoveragePath, PathSegment, SegmentKind};
use qdcover::shapes;
use support::planar;
use support::raster::raster_coverage;

fn path_of(points: &[[f64; 2]]) -> CoveragePath {
    CoveragePath {
        segments: vec![PathSegment {
            kind: SegmentKind::Sweep,
            cell: 0,
            visit: 1,
            points: points.iter().map(|p| Vec3::new(p[0], p[1], 0.0)).collect(),
        }],
    }
}

/// Zig-zag rotated off the mesh axes so samples do not alias with strokes.
fn zigzag(rows: usize) -> Vec<[f64; 2]> {
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    let mut pts = Vec::new();
    for k in 0..rows {
        let y = (k as f64 + 0.5) / rows as f64 - 0.5;
        let (a, b) = if k % 2 == 0 { (-0.35, 0.35) } else { (0.35, -0.35) };
        for x in [a, b] {
            let y = 0.8 * y;
            pts.push([0.5 + c * x - s * y, 0.5 + s * x + c * y]);
        }
    }
    pts
}

#[test]
fn raster_square_with_one_stroke() {
    let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let tris = [[0, 1, 2], [0, 2, 3]];
    let r = raster_coverage(&pts, &tris, &[[0.0, 0.5], [1.0, 0.5]], 0.25, 0.001);
    assert!((r.rate() - 0.5).abs() < 2e-3);
}

#[test]
fn evaluator_matches_raster_on_zigzag() {
    let mesh = shapes::strip(12, 12, 1.0, 1.0);
    let (pts, tris) = planar(&mesh);
    let poly = zigzag(6);
    for delta in [0.03, 0.06, 0.1] {
        let ours = evaluate(&mesh, &path_of(&poly), delta, DEFAULT_RESOLUTION, None).unwrap();
        let oracle = raster_coverage(&pts, &tris, &poly, delta, delta / 32.0).rate();
        assert!(
            (ours.coverage_rate - oracle).abs() < 3e-3,
            "δ={delta}: {} vs {oracle}",
            ours.coverage_rate
        );
        assert!(ours.exact_distance);
    }
}

#[test]
fn spot_check_agrees_within_noise() {
    let mesh = shapes::strip(12, 12, 1.0, 1.0);
    let path = path_of(&zigzag(5));
    let exact = evaluate(&mesh, &path, 0.05, DEFAULT_RESOLUTION, None)
        .unwrap()
        .coverage_rate;
    let spot = spot_check(&mesh, &path, 0.05, 20_000, 3).unwrap();
    let sigma = (exact * (1.0 - exact) / 20_000.0).sqrt();
    assert!((spot.coverage_rate - exact).abs() < 5.0 * sigma);
    assert_eq!(spot, spot_check(&mesh, &path, 0.05, 20_000, 3).unwrap());
}

#[test]
fn straight_stroke_has_no_overlap() {
    let mesh = shapes::strip(10, 10, 1.0, 1.0);
    let r = evaluate(
        &mesh,
        &path_of(&[[0.0, 0.5], [1.0, 0.5]]),
        0.05,
        DEFAULT_RESOLUTION,
        None,
    )
    .unwrap();
    assert_eq!(r.overlap_rate, 0.0);
    assert!((r.coverage_rate - 0.1).abs() < 2e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn coverage_grows_with_radius(
        pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..8),
        delta in 0.02f64..0.08,
    ) {
        let mesh = shapes::strip(8, 8, 1.0, 1.0);
        let poly: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
        let path = path_of(&poly);
        let small = evaluate(&mesh, &path, delta, DEFAULT_RESOLUTION, None).unwrap();
        let large = evaluate(&mesh, &path, 1.5 * delta, DEFAULT_RESOLUTION, None).unwrap();
        prop_assert!(large.coverage_rate >= small.coverage_rate - 5e-3);
        prop_assert!((0.0..=1.0).contains(&small.coverage_rate));
        prop_assert!(small.overlap_rate <= small.coverage_rate + 1e-12);
    }
}
