//! Critical graph, the cell decomposition it cuts out, and the dual multigraph.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{FaceId, HalfEdgeMesh, HalfedgeId, Vec3, VertexId};
use crate::quad_diff::QuadraticDifferential;
use crate::singularities::{Anchor, Termination, Trajectory, ZeroPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcEnd {
    Zero(VertexId),
    /// Foot on boundary halfedge `halfedge` at parameter `t`.
    Boundary {
        loop_id: usize,
        halfedge: HalfedgeId,
        t: f64,
    },
}

#[derive(Debug, Clone)]
pub struct CriticalArc {
    pub id: usize,
    pub start: VertexId,
    pub end: ArcEnd,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone)]
pub struct CriticalGraph {
    pub zeros: Vec<ZeroPoint>,
    pub arcs: Vec<CriticalArc>,
}

impl CriticalGraph {
    /// Number of arc ends at each zero.
    pub fn degrees(&self) -> BTreeMap<VertexId, usize> {
        let mut deg: BTreeMap<VertexId, usize> = self.zeros.iter().map(|z| (z.vertex, 0)).collect();
        for a in &self.arcs {
            *deg.entry(a.start).or_default() += 1;
            if let ArcEnd::Zero(v) = a.end {
                *deg.entry(v).or_default() += 1;
            }
        }
        deg
    }
}

fn unit(v: Vec3) -> Vec3 {
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        v
    }
}

/// Direction in which an arc leaves its start zero.
fn start_dir(t: &Trajectory) -> Vec3 {
    unit(t.points[1].position - t.points[0].position)
}

/// Direction from the end zero back along the arc.
fn arrival_dir(t: &Trajectory) -> Vec3 {
    let n = t.points.len();
    unit(t.points[n - 2].position - t.points[n - 1].position)
}

fn arc_end(mesh: &HalfEdgeMesh, idx: usize, t: &Trajectory) -> Result<ArcEnd> {
    match t.termination {
        Termination::ZeroPoint => Ok(ArcEnd::Zero(t.end_zero.ok_or(Error::DanglingArc { arc: idx })?)),
        Termination::Boundary => {
            let Anchor::Edge { halfedge, t: s } = t.last().anchor else {
                return Err(Error::DanglingArc { arc: idx });
            };
            let b = mesh.twin(halfedge);
            let loops = mesh.boundary_loop_of();
            let (loop_id, _) = loops[b].ok_or(Error::DanglingArc { arc: idx })?;
            Ok(ArcEnd::Boundary {
                loop_id,
                halfedge: b,
                t: 1.0 - s,
            })
        }
        _ => Err(Error::DanglingArc { arc: idx }),
    }
}

/// Assembles traced critical trajectories into an embedded graph. Arcs that
/// join two zeros are traced from both ends; only the copy starting at the
/// smaller zero id is kept.
pub fn build_critical_graph(
    mesh: &HalfEdgeMesh,
    zeros: &[ZeroPoint],
    traces: Vec<Trajectory>,
) -> Result<CriticalGraph> {
    let mut ends = Vec::with_capacity(traces.len());
    for (i, t) in traces.iter().enumerate() {
        if t.start_zero.is_none() || t.points.len() < 2 {
            return Err(Error::DanglingArc { arc: i });
        }
        ends.push(arc_end(mesh, i, t)?);
    }
    let mut keep = vec![true; traces.len()];
    // Group zero-to-zero arcs by unordered endpoint pair.
    let mut pairs: BTreeMap<(VertexId, VertexId), Vec<usize>> = BTreeMap::new();
    for (i, e) in ends.iter().enumerate() {
        if let ArcEnd::Zero(b) = *e {
            let a = traces[i].start_zero.expect("checked");
            pairs.entry((a.min(b), a.max(b))).or_default().push(i);
        }
    }
    for ((lo, hi), ids) in pairs {
        if ids.len() % 2 != 0 {
            return Err(Error::DanglingArc { arc: ids[0] });
        }
        // A loop at a single zero is traced twice, once from each end; the
        // copies are paired by matching arrival and departure directions.
        let (_fwd, back): (Vec<usize>, Vec<usize>) = if lo == hi {
            let mut used = vec![false; ids.len()];
            let mut fwd = Vec::new();
            let mut back = Vec::new();
            for a in 0..ids.len() {
                if used[a] {
                    continue;
                }
                used[a] = true;
                let arr = arrival_dir(&traces[ids[a]]);
                let b = (0..ids.len())
                    .filter(|&b| !used[b])
                    .max_by(|&x, &y| {
                        let dx = start_dir(&traces[ids[x]]).dot(&arr);
                        let dy = start_dir(&traces[ids[y]]).dot(&arr);
                        dx.total_cmp(&dy)
                    })
                    .ok_or(Error::DanglingArc { arc: ids[a] })?;
                used[b] = true;
                fwd.push(ids[a]);
                back.push(ids[b]);
            }
            (fwd, back)
        } else {
            let fwd: Vec<usize> = ids
                .iter()
                .copied()
                .filter(|&i| traces[i].start_zero == Some(lo))
                .collect();
            let back: Vec<usize> = ids
                .iter()
                .copied()
                .filter(|&i| traces[i].start_zero == Some(hi))
                .collect();
            if fwd.len() != back.len() {
                return Err(Error::DanglingArc { arc: ids[0] });
            }
            (fwd, back)
        };
        for b in back {
            keep[b] = false;
        }
    }
    let mut arcs = Vec::new();
    for (i, t) in traces.into_iter().enumerate() {
        if keep[i] {
            arcs.push(CriticalArc {
                id: arcs.len(),
                start: t.start_zero.expect("checked"),
                end: ends[i],
                trajectory: t,
            });
        }
    }
    let graph = CriticalGraph {
        zeros: zeros.to_vec(),
        arcs,
    };
    for (v, d) in graph.degrees() {
        if d != 3 {
            let arc = graph
                .arcs
                .iter()
                .find(|a| a.start == v || a.end == ArcEnd::Zero(v))
                .map_or(0, |a| a.id);
            log::warn!("zero {v} has {d} incident arc ends");
            return Err(Error::DanglingArc { arc });
        }
    }
    Ok(graph)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Cylinder,
    SimplyConnected,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FragmentEdge {
    /// Side of a critical arc segment; `forward` when the polygon edge runs
    /// in the arc's direction.
    Chord { arc: usize, seg: usize, forward: bool },
    /// Piece of a mesh edge between consecutive cut points.
    Interval { local_edge: usize, boundary: bool },
}

/// Polygonal piece of one face cut out by critical arcs.
#[derive(Debug, Clone)]
pub struct Fragment {
    pub face: FaceId,
    /// Global point ids: vertex ids, or `n_vertices + k` for arc crossings.
    pub points: Vec<usize>,
    pub local: Vec<Complex64>,
    pub edges: Vec<FragmentEdge>,
    pub area: f64,
    pub cell: usize,
}

impl Fragment {
    pub fn ambient(&self, mesh: &HalfEdgeMesh) -> Vec<Vec3> {
        let fr = mesh.frame(self.face);
        self.local.iter().map(|&z| fr.to_ambient(z)).collect()
    }
}

/// One stretch of a cell boundary between two nodes of the embedded graph.
#[derive(Debug, Clone)]
pub struct SideRun {
    pub kind: RunKind,
    /// Ambient polyline along the run.
    pub positions: Vec<Vec3>,
    /// For boundary runs: the pieces of boundary edges in order.
    pub intervals: Vec<BoundaryInterval>,
    pub natural_length: f64,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Arc { arc: usize, forward: bool },
    Boundary { loop_id: usize },
}

/// Straight piece of a boundary edge inside face `face` (local edge
/// `local_edge`, parameters `t0 → t1` along halfedge `3·face + local_edge`).
#[derive(Debug, Clone, Copy)]
pub struct BoundaryInterval {
    pub face: FaceId,
    pub local_edge: usize,
    pub t0: f64,
    pub t1: f64,
    pub z0: Complex64,
    pub z1: Complex64,
    pub natural_length: f64,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub id: usize,
    pub fragments: Vec<usize>,
    pub area: f64,
    pub natural_area: f64,
    /// Boundary cycles, each a list of runs with the cell on the left.
    pub cycles: Vec<Vec<SideRun>>,
    pub kind: CellKind,
    /// Natural rectangle: horizontal extent and vertical extent.
    pub width: f64,
    pub height: f64,
    pub zeros: Vec<VertexId>,
}

#[derive(Debug, Clone)]
pub struct CellDecomposition {
    pub fragments: Vec<Fragment>,
    pub cells: Vec<Cell>,
    /// Crossing points `n_vertices + k` as (position, halfedge, t).
    pub crossings: Vec<(Vec3, HalfedgeId, f64)>,
    pub n_vertices: usize,
}

impl CellDecomposition {
    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    pub fn point_position(&self, mesh: &HalfEdgeMesh, gid: usize) -> Vec3 {
        if gid < self.n_vertices {
            mesh.position(gid)
        } else {
            self.crossings[gid - self.n_vertices].0
        }
    }

    /// Cell containing face-local point `z` of face `f`.
    pub fn cell_at(&self, mesh: &HalfEdgeMesh, f: FaceId, z: Complex64) -> Option<usize> {
        let _ = mesh;
        self.fragments
            .iter()
            .filter(|fr| fr.face == f)
            .find(|fr| polygon_contains(&fr.local, z))
            .map(|fr| fr.cell)
    }

    /// Cell of the first of `fragments` (all of one face) containing `z`.
    pub fn cell_in(&self, fragments: &[usize], z: Complex64) -> Option<usize> {
        fragments
            .iter()
            .map(|&k| &self.fragments[k])
            .find(|fr| polygon_contains(&fr.local, z))
            .map(|fr| fr.cell)
    }
}

fn polygon_area(pts: &[Complex64]) -> f64 {
    let n = pts.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.re * b.im - a.im * b.re
        })
        .sum::<f64>()
}

fn polygon_contains(pts: &[Complex64], z: Complex64) -> bool {
    let n = pts.len();
    (0..n).all(|i| {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        let e = b - a;
        let w = z - a;
        e.re * w.im - e.im * w.re >= -1e-12 * e.norm() * (e.norm() + w.norm())
    })
}

/// Expected number of cells: 3g−3 cylinders on a closed surface, 3g̃−3
/// simply connected cells on a bordered one, a single cell when g (or g̃) is 1.
pub fn expected_cell_count(genus: usize, boundary_count: usize) -> usize {
    let g = if boundary_count == 0 {
        genus
    } else {
        2 * genus + boundary_count - 1
    };
    if g < 2 {
        1
    } else {
        3 * g - 3
    }
}

#[derive(Default)]
struct FaceCuts {
    /// (local edge, t along halfedge 3f+edge, gid)
    crossings: Vec<(usize, f64, usize)>,
    /// (gid a, gid b, arc, segment)
    chords: Vec<(usize, usize, usize, usize)>,
}

/// Cuts the mesh along the critical graph.
pub fn decompose(mesh: &HalfEdgeMesh, graph: &CriticalGraph, phi: &QuadraticDifferential) -> Result<CellDecomposition> {
    let nv = mesh.n_vertices();
    let nf = mesh.n_faces();
    let mut crossings: Vec<(Vec3, HalfedgeId, f64)> = Vec::new();
    let mut cuts: BTreeMap<FaceId, FaceCuts> = BTreeMap::new();
    let mut arc_gids: Vec<Vec<usize>> = Vec::with_capacity(graph.arcs.len());

    for arc in &graph.arcs {
        let t = &arc.trajectory;
        let gids: Vec<usize> = t
            .points
            .iter()
            .map(|p| match p.anchor {
                Anchor::Vertex(v) => Ok(v),
                Anchor::Edge { halfedge, t } => {
                    crossings.push((p.position, halfedge, t));
                    Ok(nv + crossings.len() - 1)
                }
                Anchor::Interior => Err(Error::DanglingArc { arc: arc.id }),
            })
            .collect::<Result<_>>()?;
        for (s, &f) in t.segment_faces.iter().enumerate() {
            let entry = cuts.entry(f).or_default();
            for k in [s, s + 1] {
                if let Anchor::Edge { halfedge, t: par } = t.points[k].anchor {
                    let (e, tl) = if mesh.face(halfedge) == Some(f) {
                        (HalfEdgeMesh::corner_index(halfedge), par)
                    } else {
                        (HalfEdgeMesh::corner_index(mesh.twin(halfedge)), 1.0 - par)
                    };
                    if !entry.crossings.iter().any(|c| c.2 == gids[k]) {
                        entry.crossings.push((e, tl, gids[k]));
                    }
                }
            }
            entry.chords.push((gids[s], gids[s + 1], arc.id, s));
        }
        arc_gids.push(gids);
    }

    let mut fragments = Vec::new();
    for f in 0..nf {
        match cuts.get(&f) {
            None => fragments.push(whole_face(mesh, f)),
            Some(c) => split_face(mesh, f, c, &mut fragments)?,
        }
    }

    // Glue fragments across shared mesh-edge intervals.
    let mut offsets = Vec::with_capacity(fragments.len() + 1);
    offsets.push(0usize);
    for fr in &fragments {
        offsets.push(offsets.last().unwrap() + fr.points.len());
    }
    let n_pe = *offsets.last().unwrap();
    let mut owner = Vec::with_capacity(n_pe);
    for (i, fr) in fragments.iter().enumerate() {
        for k in 0..fr.points.len() {
            owner.push((i, k));
        }
    }
    let mut by_key: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, fr) in fragments.iter().enumerate() {
        for k in 0..fr.points.len() {
            if let FragmentEdge::Interval { boundary: false, .. } = fr.edges[k] {
                let (a, b) = (fr.points[k], fr.points[(k + 1) % fr.points.len()]);
                by_key.entry((a.min(b), a.max(b))).or_default().push(offsets[i] + k);
            }
        }
    }
    let mut twin = vec![usize::MAX; n_pe];
    let mut uf = UnionFind::new(fragments.len());
    for list in by_key.values() {
        if list.len() == 2 {
            twin[list[0]] = list[1];
            twin[list[1]] = list[0];
            uf.union(owner[list[0]].0, owner[list[1]].0);
        } else {
            return Err(Error::TracingStall(format!(
                "mesh edge interval shared by {} fragments",
                list.len()
            )));
        }
    }

    // Cell ids in order of first fragment.
    let mut cell_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cell_ids = vec![0usize; fragments.len()];
    for (i, cid) in cell_ids.iter_mut().enumerate() {
        let r = uf.find(i);
        let n = cell_of_root.len();
        *cid = *cell_of_root.entry(r).or_insert(n);
    }
    let n_cells = cell_of_root.len();
    for (fr, &c) in fragments.iter_mut().zip(&cell_ids) {
        fr.cell = c;
    }

    // Boundary cycles: walk cut and boundary edges, skipping over glued
    // intervals.
    let is_cut = |pe: usize| -> bool {
        let (i, k) = owner[pe];
        match fragments[i].edges[k] {
            FragmentEdge::Chord { .. } => true,
            FragmentEdge::Interval { boundary, .. } => boundary,
        }
    };
    let poly_next = |pe: usize| -> usize {
        let (i, k) = owner[pe];
        offsets[i] + (k + 1) % fragments[i].points.len()
    };
    let mut visited = vec![false; n_pe];
    let mut cycles_of: Vec<Vec<Vec<usize>>> = vec![Vec::new(); n_cells];
    for start in 0..n_pe {
        if visited[start] || !is_cut(start) {
            continue;
        }
        let mut cycle = Vec::new();
        let mut e = start;
        loop {
            visited[e] = true;
            cycle.push(e);
            let mut x = poly_next(e);
            let mut guard = 0;
            while !is_cut(x) {
                x = poly_next(twin[x]);
                guard += 1;
                if guard > n_pe {
                    return Err(Error::TracingStall("unterminated boundary walk".into()));
                }
            }
            e = x;
            if e == start {
                break;
            }
            if visited[e] {
                return Err(Error::TracingStall("boundary walk revisited an edge".into()));
            }
        }
        let cell = fragments[owner[start].0].cell;
        cycles_of[cell].push(cycle);
    }

    let mut cells: Vec<Cell> = (0..n_cells)
        .map(|id| Cell {
            id,
            fragments: Vec::new(),
            area: 0.0,
            natural_area: 0.0,
            cycles: Vec::new(),
            kind: CellKind::Other,
            width: 0.0,
            height: 0.0,
            zeros: Vec::new(),
        })
        .collect();
    for (i, fr) in fragments.iter().enumerate() {
        let c = &mut cells[fr.cell];
        c.fragments.push(i);
        c.area += fr.area;
        c.natural_area += fr.area * phi.values[fr.face].norm();
    }
    let loop_of = mesh.boundary_loop_of();
    let ctx = RunContext {
        mesh,
        phi,
        fragments: &fragments,
        owner: &owner,
        arcs: graph,
        arc_gids: &arc_gids,
        loop_of: &loop_of,
    };
    for (cid, cycles) in cycles_of.into_iter().enumerate() {
        let runs: Vec<Vec<SideRun>> = cycles.iter().map(|cy| ctx.runs(cy)).collect::<Result<_>>()?;
        let cell = &mut cells[cid];
        let mut zeros: Vec<VertexId> = runs
            .iter()
            .flatten()
            .flat_map(|r| [r.start, r.end])
            .filter(|&g| g < nv && graph.zeros.iter().any(|z| z.vertex == g))
            .collect();
        zeros.sort_unstable();
        zeros.dedup();
        cell.zeros = zeros;
        cell.cycles = runs;
        let boundary_runs: Vec<&SideRun> = cell
            .cycles
            .iter()
            .flatten()
            .filter(|r| matches!(r.kind, RunKind::Boundary { .. }))
            .collect();
        if cell.cycles.len() == 1 && boundary_runs.len() == 2 {
            cell.kind = CellKind::SimplyConnected;
            cell.height = 0.5 * (boundary_runs[0].natural_length + boundary_runs[1].natural_length);
            cell.width = cell.natural_area / cell.height;
        } else if cell.cycles.len() == 2 && boundary_runs.is_empty() {
            cell.kind = CellKind::Cylinder;
            let lens: Vec<f64> = cell
                .cycles
                .iter()
                .map(|c| c.iter().map(|r| r.natural_length).sum())
                .collect();
            cell.width = 0.5 * (lens[0] + lens[1]);
            cell.height = cell.natural_area / cell.width;
        }
    }

    let top = mesh.topology();
    let expected = expected_cell_count(top.genus, top.boundary_count);
    if n_cells != expected {
        return Err(Error::CellCountMismatch {
            found: n_cells,
            expected,
        });
    }
    Ok(CellDecomposition {
        fragments,
        cells,
        crossings,
        n_vertices: nv,
    })
}

fn whole_face(mesh: &HalfEdgeMesh, f: FaceId) -> Fragment {
    let fr = mesh.frame(f);
    let edges = (0..3)
        .map(|e| FragmentEdge::Interval {
            local_edge: e,
            boundary: mesh.is_boundary_edge(mesh.face_halfedge(f) + e),
        })
        .collect();
    Fragment {
        face: f,
        points: mesh.face_vertices(f).to_vec(),
        local: fr.z.to_vec(),
        edges,
        area: fr.area,
        cell: 0,
    }
}

fn split_face(mesh: &HalfEdgeMesh, f: FaceId, cuts: &FaceCuts, out: &mut Vec<Fragment>) -> Result<()> {
    let fr = mesh.frame(f);
    let verts = mesh.face_vertices(f);
    // Boundary sequence of the triangle with cut points inserted.
    let mut gids = Vec::new();
    let mut local = Vec::new();
    let mut edge_after = Vec::new();
    for e in 0..3 {
        gids.push(verts[e]);
        local.push(fr.z[e]);
        edge_after.push(e);
        let mut on_edge: Vec<&(usize, f64, usize)> = cuts.crossings.iter().filter(|c| c.0 == e).collect();
        on_edge.sort_by(|a, b| a.1.total_cmp(&b.1));
        for c in on_edge {
            gids.push(c.2);
            local.push(fr.z[e] + (fr.z[(e + 1) % 3] - fr.z[e]) * c.1);
            edge_after.push(e);
        }
    }
    let index_of = |g: usize| gids.iter().position(|&x| x == g);
    let mut chord_label: HashMap<(usize, usize), FragmentEdge> = HashMap::new();
    let mut pieces: Vec<Vec<usize>> = vec![(0..gids.len()).collect()];
    for &(ga, gb, arc, seg) in &cuts.chords {
        let (Some(a), Some(b)) = (index_of(ga), index_of(gb)) else {
            return Err(Error::DanglingArc { arc });
        };
        chord_label.insert(
            (a, b),
            FragmentEdge::Chord {
                arc,
                seg,
                forward: true,
            },
        );
        chord_label.insert(
            (b, a),
            FragmentEdge::Chord {
                arc,
                seg,
                forward: false,
            },
        );
        let Some(pi) = pieces.iter().position(|p| p.contains(&a) && p.contains(&b)) else {
            return Err(Error::TracingStall(format!("crossing critical arcs in face {f}")));
        };
        let p = &pieces[pi];
        let n = p.len();
        let pa = p.iter().position(|&x| x == a).unwrap();
        let pb = p.iter().position(|&x| x == b).unwrap();
        if (pa + 1) % n == pb || (pb + 1) % n == pa {
            continue;
        }
        let walk = |from: usize, to: usize| -> Vec<usize> {
            let mut v = Vec::new();
            let mut i = from;
            loop {
                v.push(p[i]);
                if i == to {
                    break;
                }
                i = (i + 1) % n;
            }
            v
        };
        let one = walk(pa, pb);
        let two = walk(pb, pa);
        pieces[pi] = one;
        pieces.push(two);
    }
    let m = gids.len();
    for piece in pieces {
        let n = piece.len();
        let mut edges = Vec::with_capacity(n);
        for k in 0..n {
            let (u, v) = (piece[k], piece[(k + 1) % n]);
            let kind = match chord_label.get(&(u, v)) {
                Some(c) => *c,
                None => {
                    if (u + 1) % m != v {
                        return Err(Error::TracingStall(format!("malformed fragment in face {f}")));
                    }
                    let e = edge_after[u];
                    FragmentEdge::Interval {
                        local_edge: e,
                        boundary: mesh.is_boundary_edge(mesh.face_halfedge(f) + e),
                    }
                }
            };
            edges.push(kind);
        }
        let loc: Vec<Complex64> = piece.iter().map(|&i| local[i]).collect();
        out.push(Fragment {
            face: f,
            points: piece.iter().map(|&i| gids[i]).collect(),
            area: polygon_area(&loc),
            local: loc,
            edges,
            cell: 0,
        });
    }
    Ok(())
}

struct RunContext<'a> {
    mesh: &'a HalfEdgeMesh,
    phi: &'a QuadraticDifferential,
    fragments: &'a [Fragment],
    owner: &'a [(usize, usize)],
    arcs: &'a CriticalGraph,
    arc_gids: &'a [Vec<usize>],
    loop_of: &'a [Option<(usize, usize)>],
}

impl RunContext<'_> {
    fn kind_of(&self, pe: usize) -> RunKind {
        let (i, k) = self.owner[pe];
        let fr = &self.fragments[i];
        match fr.edges[k] {
            FragmentEdge::Chord { arc, forward, .. } => RunKind::Arc { arc, forward },
            FragmentEdge::Interval { local_edge, .. } => {
                let h = self.mesh.face_halfedge(fr.face) + local_edge;
                let b = self.mesh.twin(h);
                RunKind::Boundary {
                    loop_id: self.loop_of[b].map_or(usize::MAX, |l| l.0),
                }
            }
        }
    }

    /// Splits a cycle of fragment edges into maximal runs of one arc or one
    /// boundary loop.
    fn runs(&self, cycle: &[usize]) -> Result<Vec<SideRun>> {
        let n = cycle.len();
        let kinds: Vec<RunKind> = cycle.iter().map(|&pe| self.kind_of(pe)).collect();
        // A run starts wherever the kind changes, or at a zero (an arc can
        // pass its own start zero only at its ends).
        let starts_here = |i: usize| -> bool {
            let prev = (i + n - 1) % n;
            if kinds[i] != kinds[prev] {
                return true;
            }
            if let RunKind::Arc { arc, .. } = kinds[i] {
                let (fi, k) = self.owner[cycle[i]];
                let g = self.fragments[fi].points[k];
                let gids = &self.arc_gids[arc];
                return g == gids[0] || g == *gids.last().unwrap();
            }
            false
        };
        let first = (0..n).find(|&i| starts_here(i));
        let order: Vec<usize> = match first {
            Some(s) => (0..n).map(|i| (s + i) % n).collect(),
            None => (0..n).collect(),
        };
        let mut runs = Vec::new();
        let mut cur: Vec<usize> = Vec::new();
        for (j, &i) in order.iter().enumerate() {
            if j > 0 && starts_here(i) && first.is_some() {
                runs.push(self.make_run(&cur.iter().map(|&x| cycle[x]).collect::<Vec<_>>(), kinds[cur[0]]));
                cur.clear();
            }
            cur.push(i);
        }
        if !cur.is_empty() {
            runs.push(self.make_run(&cur.iter().map(|&x| cycle[x]).collect::<Vec<_>>(), kinds[cur[0]]));
        }
        Ok(runs)
    }

    fn make_run(&self, pes: &[usize], kind: RunKind) -> SideRun {
        let mesh = self.mesh;
        let mut positions = Vec::with_capacity(pes.len() + 1);
        let mut intervals = Vec::new();
        let mut natural_length = 0.0;
        let mut start = 0;
        let mut end = 0;
        for (j, &pe) in pes.iter().enumerate() {
            let (i, k) = self.owner[pe];
            let fr = &self.fragments[i];
            let n = fr.points.len();
            let (za, zb) = (fr.local[k], fr.local[(k + 1) % n]);
            let frame = mesh.frame(fr.face);
            if j == 0 {
                start = fr.points[k];
                positions.push(mesh.wrap(frame.to_ambient(za)));
            }
            end = fr.points[(k + 1) % n];
            positions.push(mesh.wrap(frame.to_ambient(zb)));
            let nat = self.phi.values[fr.face].norm().sqrt() * (zb - za).norm();
            natural_length += nat;
            if let FragmentEdge::Interval { local_edge, .. } = fr.edges[k] {
                let e0 = frame.z[local_edge];
                let d = frame.z[(local_edge + 1) % 3] - e0;
                let par = |z: Complex64| ((z - e0) * d.conj()).re / d.norm_sqr();
                intervals.push(BoundaryInterval {
                    face: fr.face,
                    local_edge,
                    t0: par(za),
                    t1: par(zb),
                    z0: za,
                    z1: zb,
                    natural_length: nat,
                });
            }
        }
        let _ = self.arcs;
        SideRun {
            kind,
            positions,
            intervals,
            natural_length,
            start,
            end,
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Multigraph with zeros as nodes and one edge per cell.
#[derive(Debug, Clone, Serialize)]
pub struct DualGraph {
    pub nodes: Vec<VertexId>,
    /// (cell id, endpoint a, endpoint b, copy index starting at 1).
    pub edges: Vec<DualEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DualEdge {
    pub cell: usize,
    pub a: VertexId,
    pub b: VertexId,
    pub copy: u8,
}

impl DualGraph {
    pub fn degree(&self, v: VertexId) -> usize {
        self.edges
            .iter()
            .map(|e| (e.a == v) as usize + (e.b == v) as usize)
            .sum()
    }

    pub fn doubled(&self) -> DualGraph {
        let mut edges = Vec::with_capacity(2 * self.edges.len());
        for e in &self.edges {
            edges.push(DualEdge { copy: 1, ..*e });
            edges.push(DualEdge { copy: 2, ..*e });
        }
        DualGraph {
            nodes: self.nodes.clone(),
            edges,
        }
    }
}

/// Zeros on each horizontal side of a cell: the arc-only stretches of its
/// boundary cycles.
pub fn cell_sides(cell: &Cell, zero_ids: &[VertexId]) -> Vec<Vec<VertexId>> {
    let is_zero = |g: usize| zero_ids.contains(&g);
    let mut sides = Vec::new();
    for cycle in &cell.cycles {
        let has_boundary = cycle.iter().any(|r| matches!(r.kind, RunKind::Boundary { .. }));
        if !has_boundary {
            let mut zs: Vec<VertexId> = cycle
                .iter()
                .flat_map(|r| [r.start, r.end])
                .filter(|&g| is_zero(g))
                .collect();
            zs.sort_unstable();
            zs.dedup();
            if !zs.is_empty() {
                sides.push(zs);
            }
            continue;
        }
        // Rotate so the cycle starts after a boundary run.
        let n = cycle.len();
        let s = (0..n)
            .find(|&i| matches!(cycle[(i + n - 1) % n].kind, RunKind::Boundary { .. }))
            .unwrap_or(0);
        let mut cur: Vec<VertexId> = Vec::new();
        for i in 0..n {
            let r = &cycle[(s + i) % n];
            match r.kind {
                RunKind::Boundary { .. } => {
                    if !cur.is_empty() {
                        cur.sort_unstable();
                        cur.dedup();
                        sides.push(std::mem::take(&mut cur));
                    }
                }
                RunKind::Arc { .. } => {
                    for g in [r.start, r.end] {
                        if is_zero(g) {
                            cur.push(g);
                        }
                    }
                }
            }
        }
        if !cur.is_empty() {
            cur.sort_unstable();
            cur.dedup();
            sides.push(cur);
        }
    }
    sides
}

pub fn build_dual_graph(decomp: &CellDecomposition, graph: &CriticalGraph) -> DualGraph {
    let zero_ids: Vec<VertexId> = graph.zeros.iter().map(|z| z.vertex).collect();
    let mut edges = Vec::new();
    for cell in &decomp.cells {
        let sides = cell_sides(cell, &zero_ids);
        let ends: Vec<VertexId> = sides.iter().map(|s| s[0]).collect();
        match ends.len() {
            0 => {}
            1 => edges.push(DualEdge {
                cell: cell.id,
                a: ends[0],
                b: ends[0],
                copy: 1,
            }),
            _ => edges.push(DualEdge {
                cell: cell.id,
                a: ends[0],
                b: ends[1],
                copy: 1,
            }),
        }
    }
    DualGraph { nodes: zero_ids, edges }
}

/// One directed traversal of a doubled dual edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Traversal {
    pub cell: usize,
    pub visit: u8,
    pub from: VertexId,
    pub to: VertexId,
}

#[derive(Debug, Clone, Serialize)]
pub struct EulerRoute {
    pub start: VertexId,
    pub traversals: Vec<Traversal>,
}

/// Closed walk over every edge of `doubled` exactly once (Hierholzer), with
/// edges tried in (cell, copy) order.
pub fn euler_cycle(doubled: &DualGraph, start: Option<VertexId>) -> Result<EulerRoute> {
    let mut order: Vec<usize> = (0..doubled.edges.len()).collect();
    order.sort_by_key(|&i| (doubled.edges[i].cell, doubled.edges[i].copy));
    let mut incident: BTreeMap<VertexId, Vec<usize>> = BTreeMap::new();
    for &i in &order {
        let e = doubled.edges[i];
        incident.entry(e.a).or_default().push(i);
        if e.b != e.a {
            incident.entry(e.b).or_default().push(i);
        } else {
            incident.entry(e.a).or_default().push(i);
        }
    }
    for (&v, list) in &incident {
        if list.len() % 2 != 0 {
            return Err(Error::OddDegree {
                node: v,
                degree: list.len(),
            });
        }
    }
    let Some(&first) = incident.keys().next() else {
        return Ok(EulerRoute {
            start: start.unwrap_or(0),
            traversals: Vec::new(),
        });
    };
    let start = start.filter(|s| incident.contains_key(s)).unwrap_or(first);
    let mut used = vec![false; doubled.edges.len()];
    let mut ptr: BTreeMap<VertexId, usize> = incident.keys().map(|&v| (v, 0)).collect();
    // Stack of (node, edge used to arrive).
    let mut stack: Vec<(VertexId, Option<usize>)> = vec![(start, None)];
    let mut circuit: Vec<(VertexId, Option<usize>)> = Vec::new();
    while let Some(&(v, via)) = stack.last() {
        let list = &incident[&v];
        let p = ptr.get_mut(&v).expect("node");
        while *p < list.len() && used[list[*p]] {
            *p += 1;
        }
        if *p < list.len() {
            let ei = list[*p];
            used[ei] = true;
            let e = doubled.edges[ei];
            let w = if e.a == v { e.b } else { e.a };
            stack.push((w, Some(ei)));
        } else {
            circuit.push((v, via));
            stack.pop();
        }
    }
    if used.iter().any(|u| !u) {
        return Err(Error::DisconnectedGraph);
    }
    circuit.reverse();
    let mut traversals = Vec::with_capacity(doubled.edges.len());
    for w in circuit.windows(2) {
        let (from, _) = w[0];
        let (to, via) = w[1];
        let e = doubled.edges[via.expect("every step after the first has an edge")];
        traversals.push(Traversal {
            cell: e.cell,
            visit: e.copy,
            from,
            to,
        });
    }
    Ok(EulerRoute { start, traversals })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(usize, usize, usize)]) -> DualGraph {
        let mut nodes: Vec<usize> = edges.iter().flat_map(|e| [e.1, e.2]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        DualGraph {
            nodes,
            edges: edges
                .iter()
                .map(|&(cell, a, b)| DualEdge { cell, a, b, copy: 1 })
                .collect(),
        }
    }

    fn check_route(g: &DualGraph, r: &EulerRoute) {
        assert_eq!(r.traversals.len(), g.edges.len());
        assert_eq!(r.traversals[0].from, r.start);
        assert_eq!(r.traversals.last().unwrap().to, r.start);
        for w in r.traversals.windows(2) {
            assert_eq!(w[0].to, w[1].from);
        }
        let mut seen: Vec<(usize, u8)> = r.traversals.iter().map(|t| (t.cell, t.visit)).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), g.edges.len());
    }

    #[test]
    fn donut_shaped_dual_graph() {
        // Four nodes and six edges as in a three-hole disk.
        let g = graph(&[(0, 1, 2), (1, 2, 3), (2, 3, 4), (3, 4, 1), (4, 1, 3), (5, 2, 4)]);
        let d = g.doubled();
        assert_eq!(d.edges.len(), 12);
        for &v in &d.nodes {
            assert_eq!(d.degree(v) % 2, 0);
        }
        let r = euler_cycle(&d, Some(1)).unwrap();
        check_route(&d, &r);
        assert_eq!(r.start, 1);
        // Deterministic.
        assert_eq!(r.traversals, euler_cycle(&d, Some(1)).unwrap().traversals);
    }

    #[test]
    fn doubled_self_loop() {
        let d = graph(&[(0, 7, 7)]).doubled();
        let r = euler_cycle(&d, None).unwrap();
        check_route(&d, &r);
        assert_eq!(r.traversals.len(), 2);
    }

    #[test]
    fn disconnected_and_odd() {
        let d = graph(&[(0, 1, 2), (1, 3, 4)]).doubled();
        assert!(matches!(euler_cycle(&d, None), Err(Error::DisconnectedGraph)));
        let odd = graph(&[(0, 1, 2)]);
        assert!(matches!(euler_cycle(&odd, None), Err(Error::OddDegree { .. })));
    }

    #[test]
    fn polygon_helpers() {
        let sq = [
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(0.0, 1.0),
        ];
        assert!((polygon_area(&sq) - 1.0).abs() < 1e-15);
        assert!(polygon_contains(&sq, Complex64::new(0.5, 0.5)));
        assert!(!polygon_contains(&sq, Complex64::new(1.5, 0.5)));
        assert_eq!(expected_cell_count(0, 4), 6);
        assert_eq!(expected_cell_count(2, 0), 3);
        assert_eq!(expected_cell_count(0, 2), 1);
        assert_eq!(expected_cell_count(1, 0), 1);
    }
}
