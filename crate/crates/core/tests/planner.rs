mod support;

use qdcover::coverage::{evaluate, DEFAULT_RESOLUTION};
use qdcover::pipeline::analyze;
use qdcover::planner::{plan_coverage, PlannerOptions, SegmentKind};
use qdcover::Error;
use support::surface;

#[test]
fn genus_two_visits_each_cylinder_twice_with_interlaced_sweeps() {
    let s = surface("genus2");
    let a = analyze(&s).unwrap();
    let eps = 4.0;
    let plan = plan_coverage(&s, &a, PlannerOptions { epsilon: eps }).unwrap();
    assert!(plan.path.is_closed());
    assert_eq!(plan.path.max_gap(), 0.0);
    assert_eq!(plan.visits.len(), 2 * a.decomposition.cells.len());
    for cell in &a.decomposition.cells {
        let mut heights: Vec<f64> = plan
            .visits
            .iter()
            .filter(|v| v.cell == cell.id)
            .flat_map(|v| v.heights.iter().copied())
            .collect();
        heights.sort_by(f64::total_cmp);
        for w in heights.windows(2) {
            assert!((w[1] - w[0] - 0.5 * eps).abs() < 1e-9, "cell {}: {heights:?}", cell.id);
        }
        assert!(*heights.last().unwrap() < cell.height);
    }
}

#[test]
fn pants_per_cell_coverage_adds_up() {
    let s = surface("pants");
    let a = analyze(&s).unwrap();
    let plan = plan_coverage(&s, &a, PlannerOptions { epsilon: 4.0 }).unwrap();
    let r = evaluate(&s.mesh, &plan.path, 0.01, DEFAULT_RESOLUTION, Some(&a.decomposition)).unwrap();
    assert_eq!(r.per_cell.len(), a.decomposition.cells.len());
    let area: f64 = r.per_cell.iter().map(|c| c.area).sum();
    let covered: f64 = r.per_cell.iter().map(|c| c.area * c.coverage_rate).sum();
    assert!((area - r.sampled_area).abs() < 1e-9 * area);
    assert!((covered / area - r.coverage_rate).abs() < 1e-9);
    assert!((plan.path.length(&s.mesh) - r.path_length).abs() < 1e-9 * r.path_length);
}

#[test]
fn path_lengths_split_by_kind() {
    let s = surface("pants");
    let a = analyze(&s).unwrap();
    let plan = plan_coverage(&s, &a, PlannerOptions { epsilon: 8.0 }).unwrap();
    let m = &s.mesh;
    let parts: f64 = [SegmentKind::Sweep, SegmentKind::Turn, SegmentKind::Transfer]
        .iter()
        .map(|&k| plan.path.length_of(m, k))
        .sum();
    assert!((parts - plan.path.length(m)).abs() < 1e-9 * parts);
    assert!(plan.path.length_of(m, SegmentKind::Sweep) > plan.path.length_of(m, SegmentKind::Turn));
}

#[test]
fn annulus_is_a_closed_spiral() {
    let s = surface("annulus");
    let a = analyze(&s).unwrap();
    assert!(a.zeros.is_empty());
    let plan = plan_coverage(&s, &a, PlannerOptions { epsilon: 4.0 }).unwrap();
    assert!(plan.special_case.is_some());
    assert!(plan.path.is_closed());
    let sweeps = plan
        .path
        .segments
        .iter()
        .filter(|g| g.kind == SegmentKind::Sweep)
        .count();
    assert_eq!(sweeps, plan.visits[0].heights.len());
}

#[test]
fn oversized_step_is_rejected() {
    let s = surface("pants");
    let a = analyze(&s).unwrap();
    match plan_coverage(&s, &a, PlannerOptions { epsilon: 500.0 }) {
        Err(Error::StepTooLarge { epsilon, .. }) => assert_eq!(epsilon, 500.0),
        other => panic!("expected StepTooLarge, got {:?}", other.map(|p| p.visits.len())),
    }
}
