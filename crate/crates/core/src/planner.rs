//! Coverage path: interlaced zig-zags per cell, strung together along the
//! Euler route with transfers over the critical graph and the boundary.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use num_complex::Complex64;
use serde::Serialize;

use crate::decomposition::{ArcEnd, Cell, CellDecomposition, CellKind, CriticalGraph, RunKind, SideRun, Traversal};
use crate::error::{Error, Result};
use crate::mesh::{FaceId, HalfEdgeMesh, Vec3, VertexId};
use crate::pipeline::{Analysis, Surface, SurfaceKind};
use crate::singularities::{Anchor, Direction, LevelChart, Termination, TraceLimits, TraceStart, Tracer, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Sweep,
    Turn,
    Transfer,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathSegment {
    pub kind: SegmentKind,
    pub cell: usize,
    pub visit: u8,
    #[serde(skip)]
    pub points: Vec<Vec3>,
}

/// Ordered polyline with per-segment labels.
#[derive(Debug, Clone, Default)]
pub struct CoveragePath {
    pub segments: Vec<PathSegment>,
}

impl CoveragePath {
    fn push(&mut self, kind: SegmentKind, cell: usize, visit: u8, points: Vec<Vec3>) {
        if points.len() >= 2 {
            self.segments.push(PathSegment {
                kind,
                cell,
                visit,
                points,
            });
        }
    }

    /// All points in order, with the shared joint between segments kept once.
    pub fn points(&self) -> Vec<Vec3> {
        let mut out: Vec<Vec3> = Vec::new();
        for s in &self.segments {
            let skip = usize::from(out.last().is_some_and(|p| *p == s.points[0]));
            out.extend_from_slice(&s.points[skip..]);
        }
        out
    }

    /// Ambient length; with a period, consecutive points are joined by the
    /// shortest image.
    pub fn length(&self, mesh: &HalfEdgeMesh) -> f64 {
        self.segments.iter().map(|s| polyline_length(mesh, &s.points)).sum()
    }

    pub fn length_of(&self, mesh: &HalfEdgeMesh, kind: SegmentKind) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.kind == kind)
            .map(|s| polyline_length(mesh, &s.points))
            .sum()
    }

    /// Largest distance between the end of one segment and the start of the next.
    pub fn max_gap(&self) -> f64 {
        let mut gap: f64 = 0.0;
        for w in self.segments.windows(2) {
            gap = gap.max((w[0].points.last().unwrap() - w[1].points[0]).norm());
        }
        gap
    }

    pub fn is_closed(&self) -> bool {
        match (self.segments.first(), self.segments.last()) {
            (Some(a), Some(b)) => a.points[0] == *b.points.last().unwrap(),
            _ => false,
        }
    }
}

pub fn polyline_length(mesh: &HalfEdgeMesh, pts: &[Vec3]) -> f64 {
    pts.windows(2).map(|w| mesh.min_image(w[1] - w[0]).norm()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlannerOptions {
    /// Sweep spacing within one visit, natural units.
    pub epsilon: f64,
}

/// What one visit of one cell produced.
#[derive(Debug, Clone, Serialize)]
pub struct VisitReport {
    pub cell: usize,
    pub visit: u8,
    pub phase: f64,
    pub cell_height: f64,
    pub cell_width: f64,
    /// Sweep heights in natural units, in sweep order.
    pub heights: Vec<f64>,
    pub sweep_natural_lengths: Vec<f64>,
    /// Ambient distance between consecutive seeds: min, mean, max.
    pub ambient_spacing: [f64; 3],
    pub seeding_loop: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub path: CoveragePath,
    pub visits: Vec<VisitReport>,
    pub special_case: Option<String>,
}

/// Phase of the sweep family for visit 1 or 2: the two families interlace
/// at spacing ε/2 and stay off the critical arcs.
pub fn visit_phase(epsilon: f64, visit: u8) -> f64 {
    if visit == 1 {
        0.25 * epsilon
    } else {
        0.75 * epsilon
    }
}

/// Heights phase + kε strictly below `height`.
pub fn sweep_heights(height: f64, epsilon: f64, phase: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let h = phase + k as f64 * epsilon;
        if h >= height {
            break;
        }
        out.push(h);
        k += 1;
    }
    out
}

// ---------------------------------------------------------------------------
// Transfer network over Γ ∪ ∂M.

struct Curve {
    pts: Vec<Vec3>,
    cum: Vec<f64>,
    closed: bool,
}

impl Curve {
    fn new(mesh: &HalfEdgeMesh, pts: Vec<Vec3>, closed: bool) -> Self {
        let mut cum = vec![0.0];
        for w in pts.windows(2) {
            cum.push(cum.last().unwrap() + mesh.min_image(w[1] - w[0]).norm());
        }
        Curve { pts, cum, closed }
    }

    fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    fn at(&self, s: f64) -> Vec3 {
        let s = s.clamp(0.0, self.total());
        let i = match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => return self.pts[i],
            Err(i) => i.clamp(1, self.pts.len() - 1),
        };
        let (a, b) = (self.cum[i - 1], self.cum[i]);
        let u = if b > a { (s - a) / (b - a) } else { 0.0 };
        self.pts[i - 1] + (self.pts[i] - self.pts[i - 1]) * u
    }

    /// Polyline from parameter `a` to `b` moving forward (wrapping if closed
    /// and b < a).
    fn forward(&self, a: f64, b: f64) -> Vec<Vec3> {
        let mut out = vec![self.at(a)];
        if b >= a {
            for i in 0..self.pts.len() {
                if self.cum[i] > a && self.cum[i] < b {
                    out.push(self.pts[i]);
                }
            }
        } else {
            for i in 0..self.pts.len() {
                if self.cum[i] > a {
                    out.push(self.pts[i]);
                }
            }
            for i in 0..self.pts.len() {
                if self.cum[i] > 0.0 && self.cum[i] < b {
                    out.push(self.pts[i]);
                }
            }
        }
        out.push(self.at(b));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loc {
    Node(usize),
    On { curve: usize, param: f64 },
}

struct Network {
    curves: Vec<Curve>,
    attach: Vec<Vec<(f64, usize)>>,
    n_nodes: usize,
    node_of_zero: BTreeMap<VertexId, usize>,
    /// Curve index of each boundary loop.
    loop_curve: Vec<usize>,
    arc_curve: Vec<usize>,
}

/// (to, weight, curve, from param, to param, forward).
type NetEdge = (usize, f64, usize, f64, f64, bool);

#[derive(PartialEq)]
struct QueueItem(f64, usize);
impl Eq for QueueItem {}
impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl Network {
    fn build(mesh: &HalfEdgeMesh, graph: &CriticalGraph) -> Self {
        let mut curves = Vec::new();
        let mut loop_curve = Vec::new();
        for lp in mesh.boundary_loops() {
            let mut pts: Vec<Vec3> = lp.iter().map(|&h| mesh.position(mesh.origin(h))).collect();
            pts.push(pts[0]);
            loop_curve.push(curves.len());
            curves.push(Curve::new(mesh, pts, true));
        }
        let mut attach: Vec<Vec<(f64, usize)>> = vec![Vec::new(); curves.len()];
        let mut node_of_zero = BTreeMap::new();
        for z in &graph.zeros {
            let n = node_of_zero.len();
            node_of_zero.insert(z.vertex, n);
        }
        let mut n_nodes = node_of_zero.len();
        let loop_of = mesh.boundary_loop_of();
        let mut arc_curve = Vec::new();
        for arc in &graph.arcs {
            let c = Curve::new(mesh, arc.trajectory.positions(), false);
            let total = c.total();
            arc_curve.push(curves.len());
            curves.push(c);
            let mut at = vec![(0.0, node_of_zero[&arc.start])];
            match arc.end {
                ArcEnd::Zero(v) => at.push((total, node_of_zero[&v])),
                ArcEnd::Boundary { loop_id, halfedge, t } => {
                    let foot = n_nodes;
                    n_nodes += 1;
                    at.push((total, foot));
                    let (_, i) = loop_of[halfedge].expect("boundary halfedge");
                    let lc = &curves[loop_curve[loop_id]];
                    let param = lc.cum[i] + t * (lc.cum[i + 1] - lc.cum[i]);
                    attach[loop_curve[loop_id]].push((param, foot));
                }
            }
            attach.push(at);
        }
        Network {
            curves,
            attach,
            n_nodes,
            node_of_zero,
            loop_curve,
            arc_curve,
        }
    }

    /// Point on boundary loop `l` given a boundary halfedge and parameter.
    fn on_loop(&self, loop_of: &[Option<(usize, usize)>], b: usize, t: f64) -> Loc {
        let (l, i) = loop_of[b].expect("boundary halfedge");
        let c = &self.curves[self.loop_curve[l]];
        Loc::On {
            curve: self.loop_curve[l],
            param: c.cum[i] + t * (c.cum[i + 1] - c.cum[i]),
        }
    }

    fn position(&self, loc: Loc) -> Option<Vec3> {
        match loc {
            Loc::On { curve, param } => Some(self.curves[curve].at(param)),
            Loc::Node(n) => {
                for (c, list) in self.attach.iter().enumerate() {
                    if let Some(&(p, _)) = list.iter().find(|a| a.1 == n) {
                        return Some(self.curves[c].at(p));
                    }
                }
                None
            }
        }
    }

    /// Shortest polyline from `a` to `b` along the network.
    fn route(&self, a: Loc, b: Loc) -> Result<Vec<Vec3>> {
        if a == b {
            let p = self.position(a).ok_or(Error::DisconnectedGraph)?;
            return Ok(vec![p, p]);
        }
        let na = self.n_nodes;
        let nb = self.n_nodes + 1;
        let node = |l: Loc, tmp: usize| match l {
            Loc::Node(n) => n,
            Loc::On { .. } => tmp,
        };
        let (sa, sb) = (node(a, na), node(b, nb));
        let mut adj: Vec<Vec<NetEdge>> = vec![Vec::new(); self.n_nodes + 2];
        for (c, base) in self.attach.iter().enumerate() {
            let mut list = base.clone();
            if let Loc::On { curve, param } = a {
                if curve == c {
                    list.push((param, na));
                }
            }
            if let Loc::On { curve, param } = b {
                if curve == c {
                    list.push((param, nb));
                }
            }
            list.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            let cv = &self.curves[c];
            let mut link = |i: usize, j: usize, w: f64| {
                let (pi, ni) = list[i];
                let (pj, nj) = list[j];
                adj[ni].push((nj, w, c, pi, pj, true));
                adj[nj].push((ni, w, c, pj, pi, false));
            };
            for i in 1..list.len() {
                link(i - 1, i, list[i].0 - list[i - 1].0);
            }
            if cv.closed && !list.is_empty() {
                let n = list.len();
                link(n - 1, 0, cv.total() - list[n - 1].0 + list[0].0);
            }
        }
        let mut dist = vec![f64::INFINITY; self.n_nodes + 2];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; self.n_nodes + 2];
        dist[sa] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(QueueItem(0.0, sa));
        while let Some(QueueItem(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if u == sb {
                break;
            }
            for (k, e) in adj[u].iter().enumerate() {
                let nd = d + e.1;
                if nd < dist[e.0] {
                    dist[e.0] = nd;
                    prev[e.0] = Some((u, k));
                    heap.push(QueueItem(nd, e.0));
                }
            }
        }
        if !dist[sb].is_finite() {
            return Err(Error::DisconnectedGraph);
        }
        let mut hops = Vec::new();
        let mut v = sb;
        while let Some((u, k)) = prev[v] {
            hops.push(adj[u][k]);
            v = u;
        }
        hops.reverse();
        let mut out: Vec<Vec3> = Vec::new();
        for (_, _, c, p0, p1, fwd) in hops {
            let cv = &self.curves[c];
            let piece = if fwd {
                cv.forward(p0, p1)
            } else {
                let mut r = cv.forward(p1, p0);
                r.reverse();
                r
            };
            let skip = usize::from(!out.is_empty());
            out.extend_from_slice(&piece[skip..]);
        }
        if out.len() < 2 {
            let p = self.position(a).ok_or(Error::DisconnectedGraph)?;
            out = vec![p, p];
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Per-cell sweeps.

/// Sweeps of one visit before they are joined.
struct VisitSweeps {
    report: VisitReport,
    /// Entry point of the visit on the network.
    start: Loc,
    end: Loc,
    /// Alternating pieces: sweep, turn-or-step, sweep, ...
    pieces: Vec<(SegmentKind, Vec<Vec3>)>,
    /// Turns to be routed along the network between consecutive sweeps
    /// (bordered cells only), indexed by the sweep they follow.
    network_turns: Vec<(Loc, Loc)>,
}

fn seed_stats(seeds: &[Vec3]) -> [f64; 3] {
    if seeds.len() < 2 {
        return [0.0; 3];
    }
    let d: Vec<f64> = seeds.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let max = d.iter().copied().fold(0.0, f64::max);
    [min, d.iter().sum::<f64>() / d.len() as f64, max]
}

fn run_of_kind(cell: &Cell, pred: impl Fn(&SideRun) -> bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (ci, cy) in cell.cycles.iter().enumerate() {
        for (ri, r) in cy.iter().enumerate() {
            if pred(r) {
                out.push((ci, ri));
            }
        }
    }
    out
}

/// Zero at the far end of the arc run adjacent to boundary run `ri`.
fn neighbour_zero(cell: &Cell, ci: usize, ri: usize, before: bool, zeros: &[VertexId]) -> Option<VertexId> {
    let cy = &cell.cycles[ci];
    let n = cy.len();
    let r = if before {
        &cy[(ri + n - 1) % n]
    } else {
        &cy[(ri + 1) % n]
    };
    let g = if before { r.start } else { r.end };
    zeros.contains(&g).then_some(g)
}

/// Horizontal level chart over the faces of `cell`.
pub fn cell_chart(tracer: &Tracer<'_>, decomp: &CellDecomposition, cell: &Cell) -> Result<LevelChart> {
    let mut faces: Vec<FaceId> = cell.fragments.iter().map(|&k| decomp.fragments[k].face).collect();
    faces.sort_unstable();
    faces.dedup();
    tracer.chart(&faces, Direction::Horizontal)
}

/// Trace start at natural distance `h` along a boundary run, pointing into
/// the cell.
pub fn boundary_seed(mesh: &HalfEdgeMesh, run: &SideRun, h: f64) -> TraceStart {
    let mut acc = 0.0;
    let last = run.intervals.len() - 1;
    for (k, iv) in run.intervals.iter().enumerate() {
        if acc + iv.natural_length >= h || k == last {
            let u = if iv.natural_length > 0.0 {
                ((h - acc) / iv.natural_length).clamp(1e-9, 1.0 - 1e-9)
            } else {
                0.5
            };
            return TraceStart {
                face: iv.face,
                point: iv.z0 + (iv.z1 - iv.z0) * u,
                hint: (iv.z1 - iv.z0) * Complex64::i(),
                anchor: Anchor::Edge {
                    halfedge: mesh.face_halfedge(iv.face) + iv.local_edge,
                    t: iv.t0 + u * (iv.t1 - iv.t0),
                },
            };
        }
        acc += iv.natural_length;
    }
    unreachable!("run has intervals")
}

struct Ctx<'a> {
    mesh: &'a HalfEdgeMesh,
    tracer: Tracer<'a>,
    graph: &'a CriticalGraph,
    decomp: &'a CellDecomposition,
    net: &'a Network,
    loop_of: Vec<Option<(usize, usize)>>,
    zero_ids: Vec<VertexId>,
    eps: f64,
}

impl Ctx<'_> {
    fn chart(&self, cell: &Cell) -> Result<LevelChart> {
        cell_chart(&self.tracer, self.decomp, cell)
    }

    fn bordered_visit(&self, cell: &Cell, t: &Traversal) -> Result<VisitSweeps> {
        let mesh = self.mesh;
        let outer = mesh.outer_loop();
        let bruns = run_of_kind(cell, |r| matches!(r.kind, RunKind::Boundary { .. }));
        let &(ci, ri) = bruns
            .iter()
            .find(|&&(ci, ri)| matches!(cell.cycles[ci][ri].kind, RunKind::Boundary { loop_id } if Some(loop_id) == outer))
            .or(bruns.first())
            .ok_or(Error::CellCountMismatch { found: 0, expected: 1 })?;
        let seed_run = &cell.cycles[ci][ri];
        let RunKind::Boundary { loop_id } = seed_run.kind else {
            unreachable!()
        };
        let height = seed_run.natural_length;
        if self.eps >= cell.height.min(height) {
            return Err(Error::StepTooLarge {
                cell: cell.id,
                epsilon: self.eps,
                height: cell.height.min(height),
            });
        }
        let phase = visit_phase(self.eps, t.visit);
        let mut heights = sweep_heights(height, self.eps, phase);
        let z_start = neighbour_zero(cell, ci, ri, true, &self.zero_ids);
        let z_end = neighbour_zero(cell, ci, ri, false, &self.zero_ids);
        if z_end == Some(t.from) && z_start != Some(t.from) {
            heights.reverse();
        }
        let mut limits = TraceLimits::for_mesh(mesh);
        limits.max_natural_length = Some(8.0 * cell.width.max(height));
        let chart = self.chart(cell)?;
        let mut sweeps = Vec::with_capacity(heights.len());
        let mut seeds = Vec::with_capacity(heights.len());
        for &h in &heights {
            let (start, loc) = self.seed_on_run(seed_run, h);
            seeds.push(mesh.frame(start.face).to_ambient(start.point));
            let tr = self.tracer.trace_level(start, limits, &chart)?;
            if tr.termination != Termination::Boundary {
                return Err(Error::TracingStall(format!(
                    "sweep in cell {} ended with {:?}",
                    cell.id, tr.termination
                )));
            }
            let Anchor::Edge { halfedge, t: s } = tr.last().anchor else {
                return Err(Error::TracingStall("sweep ended off an edge".into()));
            };
            let far = self.net.on_loop(&self.loop_of, mesh.twin(halfedge), 1.0 - s);
            sweeps.push((tr, loc, far));
        }
        let mut pieces = Vec::new();
        let mut network_turns = Vec::new();
        let mut lengths = Vec::new();
        let mut ends = Vec::new();
        for (j, (tr, near, far)) in sweeps.into_iter().enumerate() {
            let mut pts = tr.positions();
            let (a, b) = if j % 2 == 0 {
                (near, far)
            } else {
                pts.reverse();
                (far, near)
            };
            lengths.push(tr.natural_length);
            pieces.push((SegmentKind::Sweep, pts));
            ends.push((a, b));
        }
        for w in ends.windows(2) {
            network_turns.push((w[0].1, w[1].0));
        }
        Ok(VisitSweeps {
            report: VisitReport {
                cell: cell.id,
                visit: t.visit,
                phase,
                cell_height: cell.height,
                cell_width: cell.width,
                heights,
                sweep_natural_lengths: lengths,
                ambient_spacing: seed_stats(&seeds),
                seeding_loop: Some(loop_id),
            },
            start: ends.first().map_or(Loc::Node(self.net.node_of_zero[&t.from]), |e| e.0),
            end: ends.last().map_or(Loc::Node(self.net.node_of_zero[&t.to]), |e| e.1),
            pieces,
            network_turns,
        })
    }

    fn seed_on_run(&self, run: &SideRun, h: f64) -> (TraceStart, Loc) {
        let start = boundary_seed(self.mesh, run, h);
        let Anchor::Edge { halfedge, t } = start.anchor else {
            unreachable!("boundary seeds sit on edges")
        };
        (
            start,
            self.net.on_loop(&self.loop_of, self.mesh.twin(halfedge), 1.0 - t),
        )
    }

    fn cylinder_visit(&self, cell: &Cell, t: &Traversal) -> Result<VisitSweeps> {
        let mesh = self.mesh;
        // Start on the side holding the entry zero.
        let side = (0..cell.cycles.len())
            .find(|&c| cell.cycles[c].iter().any(|r| r.start == t.from || r.end == t.from))
            .unwrap_or(0);
        let other = 1 - side;
        let run = &cell.cycles[side][0];
        let RunKind::Arc { arc, forward } = run.kind else {
            return Err(Error::CellCountMismatch { found: 0, expected: 1 });
        };
        let tr = &self.graph.arcs[arc].trajectory;
        let s = tr.segment_faces.len() / 2;
        let f = tr.segment_faces[s];
        let fr = mesh.frame(f);
        let za = fr.from_barycentric(tr.points[s].bary_in(mesh, f));
        let zb = fr.from_barycentric(tr.points[s + 1].bary_in(mesh, f));
        let d = zb - za;
        let hint = if forward {
            d * Complex64::i()
        } else {
            -d * Complex64::i()
        };
        let start = TraceStart {
            face: f,
            point: (za + zb) * 0.5,
            hint,
            anchor: Anchor::Interior,
        };
        let arc_c = &self.net.curves[self.net.arc_curve[arc]];
        let start_loc = Loc::On {
            curve: self.net.arc_curve[arc],
            param: 0.5 * (arc_c.cum[s] + arc_c.cum[s + 1]),
        };
        let mut limits = TraceLimits::for_mesh(mesh);
        limits.max_natural_length = Some(3.0 * cell.height + 2.0 * self.eps);
        let transversal = self.tracer.trace(start, Direction::Vertical, limits)?;
        let far_arcs: Vec<usize> = cell.cycles[other]
            .iter()
            .filter_map(|r| match r.kind {
                RunKind::Arc { arc, .. } => Some(arc),
                RunKind::Boundary { .. } => None,
            })
            .collect();
        let (height, end_loc, cut) = self.first_crossing(&transversal, &far_arcs).ok_or_else(|| {
            Error::TracingStall(format!("transversal of cell {} does not reach the far side", cell.id))
        })?;
        if self.eps >= height {
            return Err(Error::StepTooLarge {
                cell: cell.id,
                epsilon: self.eps,
                height,
            });
        }
        let phase = visit_phase(self.eps, t.visit);
        let heights = sweep_heights(height, self.eps, phase);
        let tv = Transversal::new(mesh, &self.tracer, &transversal, cut);
        let mut limits = TraceLimits::for_mesh(mesh);
        limits.close_tolerance = Some(1e-6 * mesh.diameter());
        limits.max_natural_length = Some(4.0 * cell.width);
        let chart = self.chart(cell)?;
        let (pieces, seeds, lengths) = self.loops_along(&tv, &heights, limits, &chart, Some(height))?;
        Ok(VisitSweeps {
            report: VisitReport {
                cell: cell.id,
                visit: t.visit,
                phase,
                cell_height: height,
                cell_width: cell.width,
                heights,
                sweep_natural_lengths: lengths,
                ambient_spacing: seed_stats(&seeds),
                seeding_loop: None,
            },
            start: start_loc,
            end: end_loc,
            pieces,
            network_turns: Vec::new(),
        })
    }

    /// Closed horizontal loops seeded along a transversal, joined by steps
    /// along it, from natural parameter `from` to `to` (if given).
    #[allow(clippy::type_complexity)]
    fn loops_along(
        &self,
        tv: &Transversal,
        heights: &[f64],
        limits: TraceLimits,
        chart: &LevelChart,
        to: Option<f64>,
    ) -> Result<(Vec<(SegmentKind, Vec<Vec3>)>, Vec<Vec3>, Vec<f64>)> {
        let mut pieces = Vec::new();
        let mut seeds = Vec::new();
        let mut lengths = Vec::new();
        let mut at = 0.0;
        for (j, &h) in heights.iter().enumerate() {
            pieces.push((SegmentKind::Turn, tv.between(at, h)));
            let start = tv.start_at(h);
            seeds.push(self.mesh.frame(start.face).to_ambient(start.point));
            let lp = self.tracer.trace_level(start, limits, chart)?;
            if lp.termination != Termination::ClosedLoop {
                return Err(Error::TracingStall(format!(
                    "loop at height {h} ended with {:?}",
                    lp.termination
                )));
            }
            let mut pts = lp.positions();
            if j % 2 == 1 {
                pts.reverse();
            }
            lengths.push(lp.natural_length);
            pieces.push((SegmentKind::Sweep, pts));
            at = h;
        }
        if let Some(to) = to {
            pieces.push((SegmentKind::Turn, tv.between(at, to)));
        }
        Ok((pieces, seeds, lengths))
    }

    /// First crossing of a trajectory with one of `arcs`: natural distance,
    /// network location, and (segment index, fraction).
    fn first_crossing(&self, tr: &Trajectory, arcs: &[usize]) -> Option<(f64, Loc, (usize, f64))> {
        let mesh = self.mesh;
        let mut by_face: HashMap<FaceId, Vec<(usize, usize)>> = HashMap::new();
        for &a in arcs {
            for (s, &f) in self.graph.arcs[a].trajectory.segment_faces.iter().enumerate() {
                by_face.entry(f).or_default().push((a, s));
            }
        }
        let roots = self.tracer.phi();
        let mut acc = 0.0;
        for (k, &f) in tr.segment_faces.iter().enumerate() {
            let fr = mesh.frame(f);
            let p = fr.from_barycentric(tr.points[k].bary_in(mesh, f));
            let q = fr.from_barycentric(tr.points[k + 1].bary_in(mesh, f));
            let root = roots.values[f].norm().sqrt();
            let mut best: Option<(f64, usize, usize, f64)> = None;
            for &(a, s) in by_face.get(&f).map(Vec::as_slice).unwrap_or(&[]) {
                let at = &self.graph.arcs[a].trajectory;
                let c0 = fr.from_barycentric(at.points[s].bary_in(mesh, f));
                let c1 = fr.from_barycentric(at.points[s + 1].bary_in(mesh, f));
                if let Some((u, v)) = segment_intersection(p, q, c0, c1) {
                    if (k > 0 || u > 1e-9) && best.is_none_or(|b| u < b.0) {
                        best = Some((u, a, s, v));
                    }
                }
            }
            if let Some((u, a, s, v)) = best {
                let c = &self.net.curves[self.net.arc_curve[a]];
                let param = c.cum[s] + v * (c.cum[s + 1] - c.cum[s]);
                return Some((
                    acc + root * (q - p).norm() * u,
                    Loc::On {
                        curve: self.net.arc_curve[a],
                        param,
                    },
                    (k, u),
                ));
            }
            acc += root * (q - p).norm();
        }
        None
    }
}

/// Parameters (u along p→q, v along c0→c1) of a proper crossing.
fn segment_intersection(p: Complex64, q: Complex64, c0: Complex64, c1: Complex64) -> Option<(f64, f64)> {
    let r = q - p;
    let s = c1 - c0;
    let cross = |a: Complex64, b: Complex64| a.re * b.im - a.im * b.re;
    let den = cross(r, s);
    if den.abs() < 1e-300 {
        return None;
    }
    let w = c0 - p;
    let u = cross(w, s) / den;
    let v = cross(w, r) / den;
    ((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)).then_some((u, v))
}

/// Vertical trajectory parameterized by natural length.
struct Transversal {
    faces: Vec<FaceId>,
    local: Vec<(Complex64, Complex64)>,
    ambient: Vec<(Vec3, Vec3)>,
    cum: Vec<f64>,
    hint: Vec<Complex64>,
}

impl Transversal {
    fn new(mesh: &HalfEdgeMesh, tracer: &Tracer<'_>, tr: &Trajectory, cut: (usize, f64)) -> Self {
        let phi = tracer.phi();
        let mut t = Transversal {
            faces: Vec::new(),
            local: Vec::new(),
            ambient: Vec::new(),
            cum: vec![0.0],
            hint: Vec::new(),
        };
        for (k, &f) in tr.segment_faces.iter().enumerate() {
            if k > cut.0 {
                break;
            }
            let fr = mesh.frame(f);
            let p = fr.from_barycentric(tr.points[k].bary_in(mesh, f));
            let mut q = fr.from_barycentric(tr.points[k + 1].bary_in(mesh, f));
            let mut qa = tr.points[k + 1].position;
            if k == cut.0 {
                q = p + (q - p) * cut.1;
                qa = mesh.wrap(fr.to_ambient(q));
            }
            let h = tracer
                .field(f, Direction::Horizontal)
                .unwrap_or(Complex64::new(1.0, 0.0));
            t.faces.push(f);
            t.local.push((p, q));
            t.ambient.push((tr.points[k].position, qa));
            t.cum
                .push(t.cum.last().unwrap() + phi.values[f].norm().sqrt() * (q - p).norm());
            t.hint.push(h);
        }
        t
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let n = self.faces.len();
        for k in 0..n {
            if s <= self.cum[k + 1] || k == n - 1 {
                let len = self.cum[k + 1] - self.cum[k];
                let u = if len > 0.0 {
                    ((s - self.cum[k]) / len).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                return (k, u);
            }
        }
        (0, 0.0)
    }

    fn ambient_at(&self, s: f64) -> Vec3 {
        let (k, u) = self.locate(s);
        let (a, b) = self.ambient[k];
        a + (b - a) * u
    }

    fn start_at(&self, s: f64) -> TraceStart {
        let (k, u) = self.locate(s);
        let (p, q) = self.local[k];
        TraceStart {
            face: self.faces[k],
            point: p + (q - p) * u,
            hint: self.hint[k],
            anchor: Anchor::Interior,
        }
    }

    /// Polyline along the transversal between natural parameters a and b.
    fn between(&self, a: f64, b: f64) -> Vec<Vec3> {
        let (lo, hi) = (a.min(b), a.max(b));
        let mut pts = vec![self.ambient_at(lo)];
        for k in 1..self.cum.len() - 1 {
            if self.cum[k] > lo && self.cum[k] < hi {
                pts.push(self.ambient[k].0);
            }
        }
        pts.push(self.ambient_at(hi));
        if b < a {
            pts.reverse();
        }
        pts
    }
}

// ---------------------------------------------------------------------------

/// Full coverage path for an analyzed surface.
pub fn plan_coverage(surface: &Surface, analysis: &Analysis, opts: PlannerOptions) -> Result<Plan> {
    if !(opts.epsilon > 0.0) {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    if surface.genus_one() {
        return plan_genus_one(surface, opts);
    }
    let mesh = &surface.mesh;
    let net = Network::build(mesh, &analysis.graph);
    let ctx = Ctx {
        mesh,
        tracer: Tracer::new(mesh, &surface.phi, &analysis.zeros),
        graph: &analysis.graph,
        decomp: &analysis.decomposition,
        net: &net,
        loop_of: mesh.boundary_loop_of(),
        zero_ids: analysis.zeros.iter().map(|z| z.vertex).collect(),
        eps: opts.epsilon,
    };
    let cells = &analysis.decomposition.cells;
    for c in cells {
        if c.kind == CellKind::Other {
            return Err(Error::CellCountMismatch {
                found: cells.len(),
                expected: cells.len(),
            });
        }
    }
    let traversals = &analysis.route.traversals;
    let visits: Vec<Result<VisitSweeps>> = crate::par::map_slice(traversals, |t| {
        let cell = &cells[t.cell];
        match surface.kind {
            SurfaceKind::Bordered => ctx.bordered_visit(cell, t),
            SurfaceKind::Closed => ctx.cylinder_visit(cell, t),
        }
    });
    let visits: Vec<VisitSweeps> = visits.into_iter().collect::<Result<_>>()?;

    let mut path = CoveragePath::default();
    let home = Loc::Node(net.node_of_zero[&analysis.route.start]);
    let mut here = home;
    for (t, v) in traversals.iter().zip(&visits) {
        path.push(SegmentKind::Transfer, t.cell, t.visit, net.route(here, v.start)?);
        let mut turns = v.network_turns.iter();
        for (i, (kind, pts)) in v.pieces.iter().enumerate() {
            path.push(*kind, t.cell, t.visit, pts.clone());
            let last_sweep = v.pieces[i + 1..].iter().all(|p| p.0 != SegmentKind::Sweep);
            if surface.kind == SurfaceKind::Bordered && *kind == SegmentKind::Sweep && !last_sweep {
                let &(a, b) = turns.next().expect("one turn between sweeps");
                path.push(SegmentKind::Turn, t.cell, t.visit, net.route(a, b)?);
            }
        }
        here = v.end;
    }
    if let Some(t) = traversals.last() {
        path.push(SegmentKind::Transfer, t.cell, t.visit, net.route(here, home)?);
    }
    snap_joints(&mut path);
    if path.segments.is_empty() {
        return Err(Error::EmptyPath);
    }
    Ok(Plan {
        path,
        visits: visits.into_iter().map(|v| v.report).collect(),
        special_case: None,
    })
}

/// Makes each segment start exactly where the previous one ended.
fn snap_joints(path: &mut CoveragePath) {
    for i in 1..path.segments.len() {
        let end = *path.segments[i - 1].points.last().unwrap();
        path.segments[i].points[0] = end;
    }
    if path.segments.len() > 1 {
        let start = path.segments[0].points[0];
        let last = path.segments.last_mut().unwrap();
        if (last.points.last().unwrap() - start).norm() < 1e-9 {
            *last.points.last_mut().unwrap() = start;
        }
    }
}

/// Torus or annulus: a single spiral of closed horizontal loops stepped along
/// one vertical transversal.
fn plan_genus_one(surface: &Surface, opts: PlannerOptions) -> Result<Plan> {
    let mesh = &surface.mesh;
    let tracer = Tracer::new(mesh, &surface.phi, &[]);
    let eps = opts.epsilon;
    let mut loop_limits = TraceLimits::for_mesh(mesh);
    loop_limits.close_tolerance = Some(1e-6 * mesh.diameter());
    let (start, first_height_phase, note) = match surface.kind {
        SurfaceKind::Closed => {
            let fr = mesh.frame(0);
            let c = (fr.z[0] + fr.z[1] + fr.z[2]) / 3.0;
            let start = TraceStart {
                face: 0,
                point: c,
                hint: tracer.field(0, Direction::Vertical)?,
                anchor: Anchor::Interior,
            };
            (start, 0.0, "genus-1 special case, no critical graph")
        }
        SurfaceKind::Bordered => {
            let l = mesh.outer_loop().expect("bordered");
            let b = mesh.boundary_loops()[l][0];
            let h = mesh.twin(b);
            let f = mesh.face(h).expect("interior side");
            let e = HalfEdgeMesh::corner_index(h);
            let fr = mesh.frame(f);
            let z = fr.z[e] + fr.edge(e) * 0.5;
            let start = TraceStart {
                face: f,
                point: z,
                hint: fr.edge(e) * Complex64::i(),
                anchor: Anchor::Edge { halfedge: h, t: 0.5 },
            };
            (start, 0.5 * eps, "genus-1 special case (annulus), no critical graph")
        }
    };
    // Cylinder height: across to the other boundary, or area / circumference.
    let mut vlimits = TraceLimits::for_mesh(mesh);
    let height = match surface.kind {
        SurfaceKind::Closed => {
            let lp = tracer.trace(start, Direction::Horizontal, loop_limits)?;
            if lp.termination != Termination::ClosedLoop {
                return Err(Error::TracingStall(
                    "horizontal leaf on the torus does not close".into(),
                ));
            }
            surface.phi.natural_area(mesh) / lp.natural_length
        }
        SurfaceKind::Bordered => {
            let across = tracer.trace(start, Direction::Vertical, vlimits)?;
            across.natural_length
        }
    };
    if eps >= height {
        return Err(Error::StepTooLarge {
            cell: 0,
            epsilon: eps,
            height,
        });
    }
    let heights = sweep_heights(height * (1.0 - 1e-9), eps, first_height_phase);
    let top = *heights.last().expect("at least one sweep");
    vlimits.max_natural_length = Some(top.max(1e-12 * height));
    let transversal = tracer.trace(start, Direction::Vertical, vlimits)?;
    let cut = (transversal.segment_faces.len() - 1, 1.0);
    let tv = Transversal::new(mesh, &tracer, &transversal, cut);
    let chart = match surface.kind {
        SurfaceKind::Bordered => Some(tracer.chart(&(0..mesh.n_faces()).collect::<Vec<_>>(), Direction::Horizontal)?),
        SurfaceKind::Closed => None,
    };
    let ctx_pieces = {
        let mut pieces = Vec::new();
        let mut seeds = Vec::new();
        let mut lengths = Vec::new();
        let mut at = 0.0;
        for (j, &h) in heights.iter().enumerate() {
            if h > at {
                pieces.push((SegmentKind::Turn, tv.between(at, h)));
            }
            let s = if h == 0.0 { start } else { tv.start_at(h) };
            seeds.push(mesh.frame(s.face).to_ambient(s.point));
            let lp = match &chart {
                Some(c) => tracer.trace_level(s, loop_limits, c)?,
                None => tracer.trace(s, Direction::Horizontal, loop_limits)?,
            };
            if lp.termination != Termination::ClosedLoop {
                return Err(Error::TracingStall(format!(
                    "loop at height {h} ended with {:?}",
                    lp.termination
                )));
            }
            let mut pts = lp.positions();
            if j % 2 == 1 {
                pts.reverse();
            }
            lengths.push(lp.natural_length);
            pieces.push((SegmentKind::Sweep, pts));
            at = h;
        }
        pieces.push((SegmentKind::Transfer, tv.between(at, 0.0)));
        (pieces, seeds, lengths)
    };
    let (pieces, seeds, lengths) = ctx_pieces;
    let mut path = CoveragePath::default();
    for (kind, pts) in pieces {
        path.push(kind, 0, 1, pts);
    }
    snap_joints(&mut path);
    Ok(Plan {
        path,
        visits: vec![VisitReport {
            cell: 0,
            visit: 1,
            phase: first_height_phase,
            cell_height: height,
            cell_width: surface.phi.natural_area(mesh) / height,
            heights,
            sweep_natural_lengths: lengths,
            ambient_spacing: seed_stats(&seeds),
            seeding_loop: mesh.outer_loop(),
        }],
        special_case: Some(note.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heights_arithmetic() {
        assert_eq!(sweep_heights(1.0, 0.25, 0.125), vec![0.125, 0.375, 0.625, 0.875]);
        let a = sweep_heights(1.0, 0.5, visit_phase(0.5, 1));
        let b = sweep_heights(1.0, 0.5, visit_phase(0.5, 2));
        assert_eq!(a, vec![0.125, 0.625]);
        assert_eq!(b, vec![0.375, 0.875]);
        let mut all: Vec<f64> = a.into_iter().chain(b).collect();
        all.sort_by(f64::total_cmp);
        for w in all.windows(2) {
            assert!((w[1] - w[0] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn crossing_parameters() {
        let c = |x, y| Complex64::new(x, y);
        let (u, v) = segment_intersection(c(0.0, 0.0), c(2.0, 0.0), c(1.0, -1.0), c(1.0, 1.0)).unwrap();
        assert!((u - 0.5).abs() < 1e-15 && (v - 0.5).abs() < 1e-15);
        assert!(segment_intersection(c(0.0, 0.0), c(1.0, 0.0), c(2.0, -1.0), c(2.0, 1.0)).is_none());
    }
}
