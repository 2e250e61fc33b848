//! End-to-end acceptance checks on the golden meshes. Prints one line per
//! criterion and exits nonzero if any fails.

mod support;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use qdcover::coverage::{evaluate, DEFAULT_RESOLUTION};
use qdcover::decomposition::{CellKind, RunKind};
use qdcover::mesh::double_cover;
use qdcover::one_forms::{divergence, form_norm, harmonic_basis};
use qdcover::pipeline::{analyze, Analysis, Surface};
use qdcover::planner::{boundary_seed, cell_chart, plan_coverage, Plan, PlannerOptions, SegmentKind};
use qdcover::quad_diff::{natural_coordinates, sqrt_field};
use qdcover::singularities::{Anchor, Termination, TraceLimits, TraceStart, Tracer};
use qdcover::HalfEdgeMesh;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::raster::raster_coverage;
use support::{golden, planar, surface};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn plan(s: &Surface, a: &Analysis, epsilon: f64) -> Result<Plan, String> {
    plan_coverage(s, a, PlannerOptions { epsilon }).map_err(|e| format!("plan at ε={epsilon}: {e}"))
}

struct Donut {
    surface: Surface,
    analysis: Analysis,
    plans: Vec<(f64, Plan)>,
}

fn donut() -> Result<(Donut, f64), String> {
    let t = Instant::now();
    let surface = surface("donut");
    let analysis = analyze(&surface).map_err(|e| e.to_string())?;
    let mut plans = Vec::new();
    for eps in [2.0, 4.0, 8.0] {
        plans.push((eps, plan(&surface, &analysis, eps)?));
    }
    Ok((
        Donut {
            surface,
            analysis,
            plans,
        },
        t.elapsed().as_secs_f64(),
    ))
}

fn counts(d: &Donut, seconds: f64) -> Outcome {
    let a = &d.analysis;
    let closed = d
        .plans
        .iter()
        .all(|(_, p)| p.path.is_closed() && p.path.max_gap() == 0.0);
    let detail = format!(
        "zeros {} cells {} dual {}/{} traversals {} closed {closed} in {seconds:.1} s",
        a.zeros.len(),
        a.decomposition.cells.len(),
        a.dual.nodes.len(),
        a.dual.edges.len(),
        a.route.traversals.len()
    );
    check(
        a.zeros.len() == 4
            && a.decomposition.cells.len() == 6
            && a.dual.nodes.len() == 4
            && a.dual.edges.len() == 6
            && a.route.traversals.len() == 12
            && closed
            && seconds < 60.0,
        detail,
    )
}

fn genus_two() -> Outcome {
    let s = surface("genus2");
    let a = analyze(&s).map_err(|e| e.to_string())?;
    let cylinders = a
        .decomposition
        .cells
        .iter()
        .filter(|c| c.kind == CellKind::Cylinder)
        .count();
    let degrees: Vec<usize> = a.graph.degrees().values().copied().collect();
    check(
        a.zeros.len() == 4 && a.decomposition.cells.len() == 3 && cylinders == 3 && degrees == [3, 3, 3, 3],
        format!(
            "zeros {} cells {} cylinders {cylinders} arc degrees {degrees:?}",
            a.zeros.len(),
            a.decomposition.cells.len()
        ),
    )
}

fn flat_torus() -> Outcome {
    let s = surface("flat_torus");
    let mesh = &s.mesh;
    let basis = harmonic_basis(mesh).map_err(|e| e.to_string())?;
    let mut form_err: f64 = 0.0;
    for z in basis.holomorphic_forms() {
        let dz = |h: usize| {
            let d = mesh.min_image(mesh.position(mesh.dest(h)) - mesh.position(mesh.origin(h)));
            Complex64::new(d.x, d.y)
        };
        // ζ = c·dz or c·dz̄ depending on orientation; fit c on one edge.
        let c = z.values[0] / dz(0);
        let cb = z.values[0] / dz(0).conj();
        let e1: f64 = (0..mesh.n_halfedges())
            .map(|h| (z.values[h] - c * dz(h)).norm())
            .fold(0.0, f64::max);
        let e2: f64 = (0..mesh.n_halfedges())
            .map(|h| (z.values[h] - cb * dz(h).conj()).norm())
            .fold(0.0, f64::max);
        form_err = form_err.max(e1.min(e2) / c.norm());
    }
    let a = analyze(&s).map_err(|e| e.to_string())?;
    let eps = 4.0;
    let p = plan(&s, &a, eps)?;
    let root = s.phi.values[0].norm().sqrt();
    let turns: Vec<f64> = p
        .path
        .segments
        .iter()
        .filter(|g| g.kind == SegmentKind::Turn)
        .map(|g| root * qdcover::planner::polyline_length(mesh, &g.points))
        .collect();
    let turn_err = turns.iter().map(|l| (l - eps).abs()).fold(0.0, f64::max);
    check(
        form_err <= 1e-6 && p.path.is_closed() && !turns.is_empty() && turn_err <= 1e-6,
        format!(
            "form misfit {form_err:.2e}, spiral closed {}, {} turns off ε by {turn_err:.2e}",
            p.path.is_closed(),
            turns.len()
        ),
    )
}

/// Face of largest |Φ| and the faces reached from it by BFS, `n` in total.
fn patch(mesh: &HalfEdgeMesh, phi: &qdcover::quad_diff::QuadraticDifferential, n: usize) -> (Vec<bool>, usize) {
    let seed = (0..mesh.n_faces())
        .max_by(|&a, &b| phi.values[a].norm().total_cmp(&phi.values[b].norm()))
        .expect("faces");
    let mut set = vec![false; mesh.n_faces()];
    set[seed] = true;
    let mut queue = std::collections::VecDeque::from([seed]);
    let mut taken = 1;
    while let Some(f) = queue.pop_front() {
        for h in mesh.face_halfedges(f) {
            if let Some(g) = mesh.face(mesh.twin(h)) {
                if !set[g] && taken < n {
                    set[g] = true;
                    taken += 1;
                    queue.push_back(g);
                }
            }
        }
    }
    (set, seed)
}

fn invariants() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ["donut", "pants", "annulus", "genus2", "flat_torus"] {
        let s = surface(name);
        let owned;
        let closed_mesh = if s.mesh.is_closed() {
            &s.mesh
        } else {
            owned = double_cover(&s.mesh).map_err(|e| e.to_string())?.mesh;
            &owned
        };
        let basis = harmonic_basis(closed_mesh).map_err(|e| e.to_string())?;
        let (mut circ, mut div): (f64, f64) = (0.0, 0.0);
        for w in &basis.forms {
            for form in [w.clone(), basis.hodge_star(closed_mesh, w)] {
                let n = form_norm(&form);
                circ = circ.max(form.max_face_circulation(closed_mesh) / n);
                div = div.max(
                    divergence(closed_mesh, &form)
                        .iter()
                        .map(|x| x.abs())
                        .fold(0.0, f64::max)
                        / n,
                );
            }
        }
        let k = basis.star.nrows();
        let star2 = (&basis.star * &basis.star + DMatrix::<f64>::identity(k, k)).amax();

        let mesh = &s.mesh;
        let (set, seed) = patch(mesh, &s.phi, 400);
        let field = sqrt_field(mesh, &s.phi, seed, Some(&set)).map_err(|e| e.to_string())?;
        let mut closure: f64 = 0.0;
        for f in (0..mesh.n_faces()).filter(|&f| set[f]) {
            let sum: Complex64 = mesh
                .face_halfedges(f)
                .iter()
                .map(|&h| field.edge_value(mesh, h).expect("in set"))
                .sum();
            let scale: f64 = mesh
                .face_halfedges(f)
                .iter()
                .map(|&h| field.edge_value(mesh, h).unwrap().norm())
                .sum();
            closure = closure.max(sum.norm() / scale);
        }
        let base = mesh.face_vertices(seed)[0];
        let chart = natural_coordinates(mesh, &s.phi, base, &set).map_err(|e| e.to_string())?;
        let a = chart.integrate_tree(mesh, base, 0);
        let b = chart.integrate_tree(mesh, base, 1);
        let extent = a.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        let tree_gap = a
            .iter()
            .zip(&b)
            .filter_map(|(x, y)| Some((x.as_ref()? - y.as_ref()?).norm()))
            .fold(0.0, f64::max)
            / extent;

        let pass = circ <= 1e-10 && div <= 1e-8 && star2 <= 1e-8 && closure <= 1e-9 && tree_gap <= 1e-9;
        ok &= pass;
        lines.push(format!(
            "{name}: circ {circ:.1e} div {div:.1e} star² {star2:.1e} closure {closure:.1e} trees {tree_gap:.1e}"
        ));
    }
    check(ok, lines.join("; "))
}

/// Natural distance from the nearest zero at every vertex, by Dijkstra over
/// edges weighted with |√Φ·Δz|.
fn zero_distance(s: &Surface, zeros: &[usize]) -> Vec<f64> {
    let mesh = &s.mesh;
    let mut dist = vec![f64::INFINITY; mesh.n_vertices()];
    let mut heap = BinaryHeap::new();
    for &z in zeros {
        dist[z] = 0.0;
        heap.push(Reverse((0u64, z)));
    }
    while let Some(Reverse((bits, v))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[v] {
            continue;
        }
        for h in mesh.outgoing(v) {
            let w = mesh.dest(h);
            let mut len = 0.0;
            let mut n = 0.0;
            for k in [h, mesh.twin(h)] {
                if let Some(f) = mesh.face(k) {
                    let e = mesh.frame(f).edge(HalfEdgeMesh::corner_index(k));
                    len += s.phi.values[f].norm().sqrt() * e.norm();
                    n += 1.0;
                }
            }
            let nd = d + len / n;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Reverse((nd.to_bits(), w)));
            }
        }
    }
    dist
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn crosses(p: [f64; 2], q: [f64; 2], r: [f64; 2], s: [f64; 2]) -> bool {
    let (d1, d2) = (orient(p, q, r), orient(p, q, s));
    let (d3, d4) = (orient(r, s, p), orient(r, s, q));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn donut_trajectories(d: &Donut) -> Result<(usize, usize, usize), String> {
    let s = &d.surface;
    let mesh = &s.mesh;
    let a = &d.analysis;
    let tracer = Tracer::new(mesh, &s.phi, &a.zeros);
    let zero_ids: Vec<usize> = a.zeros.iter().map(|z| z.vertex).collect();
    let near = zero_distance(s, &zero_ids);
    let radius = 2.0 * 2.0;
    let mut segs: Vec<([f64; 2], [f64; 2], usize)> = Vec::new();
    let mut n_traj = 0;
    for cell in &a.decomposition.cells {
        let run = cell
            .cycles
            .iter()
            .flatten()
            .find(|r| matches!(r.kind, RunKind::Boundary { .. }))
            .ok_or_else(|| format!("cell {} has no boundary run", cell.id))?;
        let chart = cell_chart(&tracer, &a.decomposition, cell).map_err(|e| e.to_string())?;
        let mut limits = TraceLimits::for_mesh(mesh);
        limits.max_natural_length = Some(8.0 * cell.width.max(cell.height));
        for k in 0..200 {
            let h = (k as f64 + 0.5) / 200.0 * run.natural_length;
            let tr = tracer
                .trace_level(boundary_seed(mesh, run, h), limits, &chart)
                .map_err(|e| format!("cell {}: {e}", cell.id))?;
            if tr.termination != Termination::Boundary {
                return Err(format!(
                    "cell {} trajectory {k} ended with {:?}",
                    cell.id, tr.termination
                ));
            }
            for (i, &f) in tr.segment_faces.iter().enumerate() {
                if mesh.face_vertices(f).iter().any(|&v| near[v] < radius) {
                    continue;
                }
                let (p, q) = (tr.points[i].position, tr.points[i + 1].position);
                segs.push(([p.x, p.y], [q.x, q.y], n_traj));
            }
            n_traj += 1;
        }
    }
    let pitch = 0.02;
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, (p, q, _)) in segs.iter().enumerate() {
        let (x0, x1) = (
            (p[0].min(q[0]) / pitch).floor() as i64,
            (p[0].max(q[0]) / pitch).floor() as i64,
        );
        let (y0, y1) = (
            (p[1].min(q[1]) / pitch).floor() as i64,
            (p[1].max(q[1]) / pitch).floor() as i64,
        );
        for x in x0..=x1 {
            for y in y0..=y1 {
                buckets.entry((x, y)).or_default().push(i);
            }
        }
    }
    let mut hits = 0;
    for ids in buckets.values() {
        for (k, &i) in ids.iter().enumerate() {
            for &j in &ids[k + 1..] {
                let (a, b) = (&segs[i], &segs[j]);
                if a.2 != b.2 && crosses(a.0, a.1, b.0, b.1) {
                    hits += 1;
                }
            }
        }
    }
    Ok((n_traj, segs.len(), hits))
}

fn genus_two_closure() -> Result<(usize, f64), String> {
    let s = surface("genus2");
    let mesh = &s.mesh;
    let a = analyze(&s).map_err(|e| e.to_string())?;
    let tracer = Tracer::new(mesh, &s.phi, &a.zeros);
    let tol = 1e-6 * mesh.diameter();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut n, mut worst): (usize, f64) = (0, 0.0);
    for cell in &a.decomposition.cells {
        let chart = cell_chart(&tracer, &a.decomposition, cell).map_err(|e| e.to_string())?;
        let whole: Vec<usize> = cell
            .fragments
            .iter()
            .map(|&k| a.decomposition.fragments[k].face)
            .filter(|&f| a.decomposition.fragments.iter().filter(|fr| fr.face == f).count() == 1)
            .collect();
        let mut limits = TraceLimits::for_mesh(mesh);
        limits.max_natural_length = Some(4.0 * cell.width);
        limits.close_tolerance = Some(tol);
        for _ in 0..50 {
            let f = whole[rng.random_range(0..whole.len())];
            let (u, v): (f64, f64) = (rng.random(), rng.random());
            let (u, v) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
            let fr = mesh.frame(f);
            let start = TraceStart {
                face: f,
                point: fr.from_barycentric([1.0 - u - v, u, v]),
                hint: chart.root(f).expect("cell face").conj(),
                anchor: Anchor::Interior,
            };
            let tr = tracer.trace_level(start, limits, &chart).map_err(|e| e.to_string())?;
            let gap = (tr.last().position - tr.points[0].position).norm();
            if tr.termination != Termination::ClosedLoop {
                return Err(format!(
                    "cell {} seed in face {f} ended with {:?}",
                    cell.id, tr.termination
                ));
            }
            worst = worst.max(gap);
            n += 1;
        }
    }
    Ok((n, worst / mesh.diameter()))
}

fn trajectories(d: &Donut) -> Outcome {
    let (n, segs, hits) = donut_trajectories(d)?;
    let (m, gap) = genus_two_closure()?;
    check(
        hits == 0 && gap <= 1e-6,
        format!("donut {n} trajectories ({segs} segments) with {hits} crossings; genus2 {m} loops closed within {gap:.1e}·diam"),
    )
}

fn coverage(d: &Donut) -> Outcome {
    let mesh = &d.surface.mesh;
    let deltas = [0.005, 0.01];
    let mut table = Vec::new();
    for (eps, p) in &d.plans {
        let mut row = Vec::new();
        for &delta in &deltas {
            let r = evaluate(
                mesh,
                &p.path,
                delta,
                DEFAULT_RESOLUTION,
                Some(&d.analysis.decomposition),
            )
            .map_err(|e| e.to_string())?;
            row.push((r.coverage_rate, r.overlap_rate));
        }
        table.push((*eps, row));
    }
    let mut ok = true;
    for j in 0..deltas.len() {
        for w in table.windows(2) {
            // ε increases down the table: coverage and overlap fall.
            ok &= w[0].1[j].0 >= w[1].1[j].0 && w[0].1[j].1 >= w[1].1[j].1;
        }
    }
    for (_, row) in &table {
        ok &= row[1].0 >= row[0].0;
    }
    let (pts, tris) = planar(mesh);
    let poly: Vec<[f64; 2]> = d.plans[0].1.path.points().iter().map(|p| [p.x, p.y]).collect();
    let oracle = raster_coverage(&pts, &tris, &poly, deltas[0], deltas[0] / 4.0).rate();
    let ours = table[0].1[0].0;
    ok &= ours >= oracle - 1e-3;
    let cells: Vec<String> = table
        .iter()
        .map(|(e, row)| {
            let r: Vec<String> = row.iter().map(|(c, o)| format!("{c:.4}/{o:.4}")).collect();
            format!("ε={e}: {}", r.join(" "))
        })
        .collect();
    check(
        ok,
        format!(
            "coverage/overlap at δ={deltas:?}: {}; oracle {oracle:.4} vs {ours:.4}",
            cells.join(", ")
        ),
    )
}

fn qdcover(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qdcover"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.expect("entry");
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).expect("read"),
            )
        })
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let input = golden("pants.obj");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        let o = qdcover(&[
            "plan",
            "--input",
            input.to_str().unwrap(),
            "--epsilon",
            "4",
            "--delta",
            "0.01",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        if !o.status.success() {
            return Err(format!("run {k} failed: {}", String::from_utf8_lossy(&o.stderr)));
        }
        runs.push(read_dir_sorted(&out));
    }
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    check(
        runs[0] == runs[1] && names.contains(&"report.json") && names.contains(&"path.svg"),
        format!(
            "{} artifacts identical across two runs: {}",
            names.len(),
            names.join(" ")
        ),
    )
}

fn exit_codes() -> Outcome {
    let g = |n: &str| golden(n).to_string_lossy().into_owned();
    let cases: Vec<(Vec<String>, i32)> = vec![
        (vec!["inspect".into(), "--input".into(), g("sphere.obj")], 8),
        (vec!["inspect".into(), "--input".into(), g("tetrahedron.obj")], 8),
        (vec!["inspect".into(), "--input".into(), g("nonmanifold.obj")], 4),
        (vec!["inspect".into(), "--input".into(), g("missing.obj")], 2),
        (
            vec!["plan".into(), "--input".into(), g("pants.obj"), "--bogus".into()],
            27,
        ),
        (
            vec![
                "plan".into(),
                "--input".into(),
                g("pants.obj"),
                "--epsilon".into(),
                "500".into(),
            ],
            24,
        ),
    ];
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut seen = Vec::new();
    for (mut args, want) in cases {
        args.extend(["--out".into(), tmp.path().to_string_lossy().into_owned()]);
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let got = qdcover(&refs).status.code().unwrap_or(-1);
        ok &= got == want;
        seen.push(format!(
            "{}→{got}",
            Path::new(&args[2]).file_name().unwrap().to_string_lossy()
        ));
    }
    check(ok, seen.join(" "))
}

fn main() {
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let donut = donut();
    match &donut {
        Ok((d, secs)) => results.push((1, counts(d, *secs))),
        Err(e) => results.push((1, Err(e.clone()))),
    }
    results.push((2, genus_two()));
    results.push((3, flat_torus()));
    results.push((4, invariants()));
    match &donut {
        Ok((d, _)) => {
            results.push((5, trajectories(d)));
            results.push((6, coverage(d)));
        }
        Err(e) => {
            results.push((5, Err(e.clone())));
            results.push((6, Err(e.clone())));
        }
    }
    results.push((7, determinism()));
    results.push((8, exit_codes()));

    let mut failed = 0;
    for (n, r) in &results {
        match r {
            Ok(d) => println!("criterion {n}: PASS - {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n}: FAIL - {d}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
