//! The `plan`, `sweep` and `inspect` drivers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::coverage::{evaluate, spot_check, CoverageReport};
use crate::decomposition::ArcEnd;
use crate::error::{Error, Result};
use crate::mesh::io::load_mesh_file;
use crate::pipeline::{analyze, prepare, Analysis, PhiChoice, Surface, SurfaceKind};
use crate::planner::{plan_coverage, Plan, PlannerOptions, SegmentKind};

use super::config::{PipelineConfig, SurfaceOverride};
use super::export;

/// Points drawn by the seeded coverage spot check.
pub const SPOT_CHECK_SAMPLES: usize = 4096;

pub struct PlanOutcome {
    pub surface: Surface,
    pub analysis: Analysis,
    pub plan: Plan,
    pub coverage: CoverageReport,
    pub report: Value,
    pub artifacts: Vec<PathBuf>,
}

pub struct SweepRow {
    pub epsilon: f64,
    pub delta: f64,
    pub coverage_rate: f64,
    pub overlap_rate: f64,
    pub path_length: f64,
}

/// Loads the mesh and builds Φ.
pub fn load_surface(config: &PipelineConfig) -> Result<Surface> {
    config.validate()?;
    let mesh = load_mesh_file(&config.input, config.format)?;
    match (config.surface, mesh.is_closed()) {
        (SurfaceOverride::Closed, false) => {
            return Err(Error::Config(
                "surface declared closed but the mesh has boundary".into(),
            ))
        }
        (SurfaceOverride::Bordered, true) => {
            return Err(Error::Config("surface declared bordered but the mesh is closed".into()))
        }
        _ => {}
    }
    prepare(mesh, &config.phi, config.natural_scale)
}

fn single(values: &[f64], name: &str) -> Result<f64> {
    match values {
        [x] => Ok(*x),
        _ => Err(Error::Config(format!(
            "plan takes a single {name}; use sweep for lists"
        ))),
    }
}

fn create(dir: &Path, name: &str, artifacts: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    let p = dir.join(name);
    let f = File::create(&p)?;
    artifacts.push(p);
    Ok(BufWriter::new(f))
}

fn vec3(p: &crate::mesh::Vec3) -> Value {
    json!([p.x, p.y, p.z])
}

fn phi_json(config: &PipelineConfig) -> Value {
    match &config.phi {
        PhiChoice::Default => json!({"kind": "default"}),
        PhiChoice::Pair(i, j) => json!({"kind": "pair", "i": i, "j": j}),
        PhiChoice::Coefficients(c) => json!({
            "kind": "coefficients",
            "source": config.phi_source.as_ref().map(|p| p.display().to_string()),
            "terms": c.iter().map(|(i, j, z)| json!({"i": i, "j": j, "re": z.re, "im": z.im})).collect::<Vec<_>>(),
        }),
    }
}

fn surface_json(config: &PipelineConfig, s: &Surface) -> Value {
    let m = &s.mesh;
    json!({
        "input": config.input.display().to_string(),
        "vertices": m.n_vertices(),
        "faces": m.n_faces(),
        "genus": s.topology.genus,
        "boundary_count": s.topology.boundary_count,
        "euler_characteristic": s.topology.euler_characteristic,
        "planar": m.is_planar(1e-9),
        "periodic": m.period().is_some(),
        "area": m.total_area(),
        "kind": match s.kind { SurfaceKind::Closed => "closed", SurfaceKind::Bordered => "bordered" },
        "analysis_genus": s.analysis_genus,
        "holomorphic_forms": s.n_forms,
        "phi": phi_json(config),
        "phi_scale": s.phi_scale,
        "natural_scale": config.natural_scale,
        "natural_area": s.phi.natural_area(m),
        "boundary_vertical": s.boundary_vertical,
    })
}

fn analysis_json(s: &Surface, a: &Analysis) -> Value {
    let m = &s.mesh;
    let zeros: Vec<Value> = a
        .zeros
        .iter()
        .map(|z| json!({"vertex": z.vertex, "position": vec3(&m.position(z.vertex)), "angle_sum": z.angle_sum, "order": z.order}))
        .collect();
    let arcs: Vec<Value> = a
        .graph
        .arcs
        .iter()
        .map(|arc| {
            let end = match arc.end {
                ArcEnd::Zero(v) => json!({"zero": v}),
                ArcEnd::Boundary { loop_id, halfedge, t } => {
                    json!({"boundary_loop": loop_id, "halfedge": halfedge, "t": t})
                }
            };
            json!({
                "id": arc.id,
                "start": arc.start,
                "end": end,
                "natural_length": arc.trajectory.natural_length,
                "ambient_length": arc.trajectory.ambient_length(m),
                "points": arc.trajectory.points.len(),
            })
        })
        .collect();
    let cells: Vec<Value> = a
        .decomposition
        .cells
        .iter()
        .map(|c| {
            json!({
                "id": c.id,
                "kind": c.kind,
                "area": c.area,
                "natural_area": c.natural_area,
                "width": c.width,
                "height": c.height,
                "zeros": c.zeros,
                "boundary_cycles": c.cycles.len(),
                "fragments": c.fragments.len(),
            })
        })
        .collect();
    json!({
        "zeros": zeros,
        "critical_arcs": arcs,
        "cells": cells,
        "dual_graph": {
            "nodes": a.dual.nodes,
            "edges": a.dual.edges.iter().map(|e| json!({"cell": e.cell, "a": e.a, "b": e.b})).collect::<Vec<_>>(),
        },
        "route": {
            "start": a.route.start,
            "closed": a.route.traversals.first().zip(a.route.traversals.last()).is_none_or(|(f, l)| f.from == l.to),
            "traversals": a.route.traversals.iter().map(|t| json!({"cell": t.cell, "visit": t.visit, "from": t.from, "to": t.to})).collect::<Vec<_>>(),
        },
    })
}

fn path_json(s: &Surface, plan: &Plan) -> Value {
    let m = &s.mesh;
    let p = &plan.path;
    json!({
        "segments": p.segments.len(),
        "points": p.points().len(),
        "closed": p.is_closed(),
        "max_gap": p.max_gap(),
        "length": p.length(m),
        "sweep_length": p.length_of(m, SegmentKind::Sweep),
        "turn_length": p.length_of(m, SegmentKind::Turn),
        "transfer_length": p.length_of(m, SegmentKind::Transfer),
        "special_case": plan.special_case,
        "visits": serde_json::to_value(&plan.visits).expect("visit reports serialize"),
    })
}

/// Runs mesh → Φ → zeros → Γ → cells → dual graph → route → path → coverage
/// and writes the requested artifacts to `config.out`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PlanOutcome> {
    let epsilon = single(&config.epsilon, "epsilon")?;
    let delta = single(&config.delta, "delta")?;
    let surface = load_surface(config)?;
    let analysis = analyze(&surface)?;
    let plan = plan_coverage(&surface, &analysis, PlannerOptions { epsilon })?;
    let coverage = evaluate(
        &surface.mesh,
        &plan.path,
        delta,
        config.resolution,
        Some(&analysis.decomposition),
    )?;
    let spot = spot_check(&surface.mesh, &plan.path, delta, SPOT_CHECK_SAMPLES, config.seed)?;
    let report = json!({
        "parameters": {
            "epsilon": epsilon,
            "delta": delta,
            "resolution": config.resolution,
            "seed": config.seed,
        },
        "surface": surface_json(config, &surface),
        "analysis": analysis_json(&surface, &analysis),
        "path": path_json(&surface, &plan),
        "coverage": serde_json::to_value(&coverage).expect("coverage report serializes"),
        "spot_check": serde_json::to_value(&spot).expect("spot check serializes"),
    });

    let mut artifacts = Vec::new();
    let dir = &config.out;
    if config.exports.report_json {
        let mut w = create(dir, "report.json", &mut artifacts)?;
        w.write_all(super::json::to_string(&report).as_bytes())?;
        w.flush()?;
    }
    if config.exports.svg {
        if surface.mesh.is_planar(1e-9) {
            let mut w = create(dir, "path.svg", &mut artifacts)?;
            export::write_svg(&surface.mesh, Some(&analysis), &plan.path, delta, &mut w)?;
            w.flush()?;
        } else {
            log::info!("input is not planar; skipping the SVG figure");
        }
    }
    if config.exports.obj_path {
        let mut w = create(dir, "path.obj", &mut artifacts)?;
        export::write_path_obj(&plan.path, &mut w)?;
        w.flush()?;
        if !analysis.graph.arcs.is_empty() {
            let mut w = create(dir, "critical_arcs.obj", &mut artifacts)?;
            export::write_arcs_obj(&analysis, &mut w)?;
            w.flush()?;
        }
    }
    if config.exports.cells_obj && !analysis.decomposition.fragments.is_empty() {
        let mut w = create(dir, "cells.obj", &mut artifacts)?;
        export::write_cells_obj(&surface.mesh, &analysis.decomposition, &mut w)?;
        w.flush()?;
    }
    Ok(PlanOutcome {
        surface,
        analysis,
        plan,
        coverage,
        report,
        artifacts,
    })
}

/// Cartesian product of ε and δ, one plan per ε. Rows go to `sweep.csv`
/// sorted by (ε, δ); on failure the rows so far are kept and a marker row
/// names the error.
pub fn run_sweep(config: &PipelineConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let mut eps = config.epsilon.clone();
    let mut deltas = config.delta.clone();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    let mut artifacts = Vec::new();
    let mut w = create(&config.out, "sweep.csv", &mut artifacts)?;
    writeln!(w, "{}", export::CSV_HEADER)?;
    let mut rows = Vec::new();
    let fail = |w: &mut BufWriter<File>, e: f64, d: f64, err: Error| -> Result<Vec<SweepRow>> {
        writeln!(w, "{}", export::csv_failure_row(e, d, &err))?;
        w.flush()?;
        Err(err)
    };
    let prepared = load_surface(config).and_then(|s| analyze(&s).map(|a| (s, a)));
    let (surface, analysis) = match prepared {
        Ok(x) => x,
        Err(err) => return fail(&mut w, eps[0], deltas[0], err),
    };
    for &e in &eps {
        let plan = match plan_coverage(&surface, &analysis, PlannerOptions { epsilon: e }) {
            Ok(p) => p,
            Err(err) => return fail(&mut w, e, deltas[0], err),
        };
        for &d in &deltas {
            let r = match evaluate(&surface.mesh, &plan.path, d, config.resolution, None) {
                Ok(r) => r,
                Err(err) => return fail(&mut w, e, d, err),
            };
            writeln!(
                w,
                "{}",
                export::csv_row(e, d, r.coverage_rate, r.overlap_rate, r.path_length)
            )?;
            rows.push(SweepRow {
                epsilon: e,
                delta: d,
                coverage_rate: r.coverage_rate,
                overlap_rate: r.overlap_rate,
                path_length: r.path_length,
            });
        }
    }
    w.flush()?;
    Ok(rows)
}

/// Topology, zeros and cells without planning; written to `inspect.json`.
pub fn run_inspect(config: &PipelineConfig) -> Result<Value> {
    let surface = load_surface(config)?;
    let analysis = analyze(&surface)?;
    let report = json!({
        "surface": surface_json(config, &surface),
        "analysis": analysis_json(&surface, &analysis),
    });
    let mut artifacts = Vec::new();
    let mut w = create(&config.out, "inspect.json", &mut artifacts)?;
    w.write_all(super::json::to_string(&report).as_bytes())?;
    w.flush()?;
    Ok(report)
}
