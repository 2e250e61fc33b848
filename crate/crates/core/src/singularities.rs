//! Zero points of Φ (natural angle sums) and trajectory tracing.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, CgOptions, CsrMatrix};
use crate::mesh::{FaceId, HalfEdgeMesh, HalfedgeId, Vec3, VertexId};
use crate::quad_diff::QuadraticDifferential;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroPoint {
    pub vertex: VertexId,
    pub angle_sum: f64,
    pub order: u32,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroOptions {
    /// Boundary edges are treated as exactly vertical (Φ(t, t) < 0), and
    /// boundary vertices report twice their half-fan angle.
    pub boundary_vertical: bool,
    /// Expected number of zeros counted with order, if known.
    pub expected: Option<usize>,
}

/// Natural-coordinate geometry of one vertex fan.
#[derive(Debug, Clone)]
pub struct Fan {
    /// Spokes `e_0..e_m` (outgoing halfedges). Closed fans repeat no spoke;
    /// the face between spoke k and k+1 is `faces[k]`.
    pub spokes: Vec<HalfedgeId>,
    pub faces: Vec<FaceId>,
    /// Euclidean corner angle of each fan face.
    pub theta: Vec<f64>,
    /// Corner angle after gluing the per-face natural charts along the
    /// averaged edge directions.
    pub alpha: Vec<f64>,
    /// Natural direction (mod π) of spoke 0.
    pub psi0: f64,
    pub closed: bool,
}

impl Fan {
    pub fn new(mesh: &HalfEdgeMesh, phi: &QuadraticDifferential, v: VertexId, boundary_vertical: bool) -> Self {
        let spokes_all = mesh.outgoing(v);
        let closed = !mesh.is_boundary_vertex(v);
        let faces: Vec<FaceId> = spokes_all.iter().filter_map(|&h| mesh.face(h)).collect();
        let mut spokes: Vec<HalfedgeId> = spokes_all.clone();
        if closed {
            spokes.truncate(faces.len());
        }
        let q = |h: HalfedgeId| -> Complex64 {
            let a = mesh.face(h).map(|_| phi.on_halfedge(mesh, h));
            let b = mesh.face(mesh.twin(h)).map(|_| phi.on_halfedge(mesh, mesh.twin(h)));
            match (a, b) {
                (Some(a), Some(b)) => (a + b) * 0.5,
                (Some(a), None) | (None, Some(a)) => {
                    if boundary_vertical {
                        Complex64::new(-a.norm(), 0.0)
                    } else {
                        a
                    }
                }
                (None, None) => unreachable!("edge without faces"),
            }
        };
        let qs: Vec<Complex64> = spokes.iter().map(|&h| q(h)).collect();
        let m = faces.len();
        let mut theta = Vec::with_capacity(m);
        let mut alpha = Vec::with_capacity(m);
        for k in 0..m {
            let f = faces[k];
            let fr = mesh.frame(f);
            let h0 = spokes[k];
            let h1 = mesh.prev(h0);
            let v0 = fr.edge(HalfEdgeMesh::corner_index(h0));
            let v1 = -fr.edge(HalfEdgeMesh::corner_index(h1));
            let th = (v1 / v0).arg();
            let c = phi.values[f];
            let k1 = (k + 1) % spokes.len();
            let adj1 = (qs[k1] / (c * v1 * v1)).arg();
            let adj0 = (qs[k] / (c * v0 * v0)).arg();
            theta.push(th);
            alpha.push(th + 0.5 * (adj1 - adj0));
        }
        Fan {
            psi0: 0.5 * qs[0].arg(),
            spokes,
            faces,
            theta,
            alpha,
            closed,
        }
    }

    pub fn angle_sum(&self) -> f64 {
        let s: f64 = self.alpha.iter().sum();
        if self.closed {
            s
        } else {
            2.0 * s
        }
    }

    /// Start face and local direction of each horizontal ray from the fan
    /// centre (natural angle ≡ 0 mod π).
    pub fn horizontal_rays(&self, mesh: &HalfEdgeMesh) -> Vec<(FaceId, Complex64)> {
        self.rays(mesh, 0.0)
    }

    pub fn rays(&self, mesh: &HalfEdgeMesh, offset: f64) -> Vec<(FaceId, Complex64)> {
        let mut out = Vec::new();
        let mut psi = self.psi0;
        for k in 0..self.faces.len() {
            let a = self.alpha[k];
            if a > 0.0 {
                // Multiples of π (shifted by `offset`) in [psi, psi + a).
                let mut m = ((psi - offset) / PI).ceil();
                while offset + m * PI < psi + a {
                    let frac = (offset + m * PI - psi) / a;
                    let f = self.faces[k];
                    let fr = mesh.frame(f);
                    let e0 = fr.edge(HalfEdgeMesh::corner_index(self.spokes[k]));
                    let dir = e0 / e0.norm() * Complex64::from_polar(1.0, self.theta[k] * frac);
                    out.push((f, dir));
                    m += 1.0;
                }
            }
            psi += a;
        }
        out
    }
}

pub fn vertex_angle_sums(mesh: &HalfEdgeMesh, phi: &QuadraticDifferential, boundary_vertical: bool) -> Vec<f64> {
    crate::par::map_range(mesh.n_vertices(), |v| {
        Fan::new(mesh, phi, v, boundary_vertical).angle_sum()
    })
}

/// Vertices whose natural angle sum is at least 2.5π.
pub fn locate_zero_points(
    mesh: &HalfEdgeMesh,
    phi: &QuadraticDifferential,
    opts: ZeroOptions,
) -> Result<Vec<ZeroPoint>> {
    let sums = vertex_angle_sums(mesh, phi, opts.boundary_vertical);
    let mut zeros = Vec::new();
    for (v, &s) in sums.iter().enumerate() {
        if s >= 3.5 * PI {
            return Err(Error::HighOrderZero {
                vertex: v,
                angle_sum: s,
            });
        }
        if s >= 2.5 * PI {
            zeros.push(ZeroPoint {
                vertex: v,
                angle_sum: s,
                order: 1,
            });
        } else if s < 1.5 * PI {
            log::warn!("vertex {v} has natural angle sum {s:.4} (pole-like)");
        }
    }
    if let Some(expected) = opts.expected {
        let poles = sums.iter().filter(|&&s| s < 1.5 * PI).count();
        if zeros.len() != expected || poles > 0 {
            return Err(Error::ZeroCountMismatch {
                found: zeros.len(),
                expected,
            });
        }
    }
    Ok(zeros)
}

/// Topological zero count: 4g−4 on a closed surface, 2g̃−2 on a bordered
/// surface whose double has genus g̃ = 2g + b − 1.
pub fn expected_zero_count(genus: usize, boundary_count: usize) -> Option<usize> {
    let g = if boundary_count == 0 {
        genus
    } else {
        2 * genus + boundary_count - 1
    };
    if g < 2 {
        return Some(0);
    }
    Some(if boundary_count == 0 { 4 * g - 4 } else { 2 * g - 2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Critical,
    Regular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ZeroPoint,
    Boundary,
    ClosedLoop,
    MaxSteps,
    LengthLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Anchor {
    Vertex(VertexId),
    /// On the edge of `halfedge` at parameter `t` from its origin.
    Edge {
        halfedge: HalfedgeId,
        t: f64,
    },
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub face: FaceId,
    pub bary: [f64; 3],
    pub position: Vec3,
    pub anchor: Anchor,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<TracePoint>,
    /// Face of the segment `points[i] → points[i+1]`.
    pub segment_faces: Vec<FaceId>,
    pub kind: TrajectoryKind,
    pub direction: Direction,
    pub termination: Termination,
    pub natural_length: f64,
    pub start_zero: Option<VertexId>,
    pub end_zero: Option<VertexId>,
}

impl Trajectory {
    pub fn positions(&self) -> Vec<Vec3> {
        self.points.iter().map(|p| p.position).collect()
    }

    pub fn last(&self) -> &TracePoint {
        self.points.last().expect("trajectories have points")
    }

    /// Ambient length (segments measured inside their faces).
    pub fn ambient_length(&self, mesh: &HalfEdgeMesh) -> f64 {
        self.segment_faces
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let fr = mesh.frame(f);
                (fr.from_barycentric(self.points[i + 1].bary_in(mesh, f))
                    - fr.from_barycentric(self.points[i].bary_in(mesh, f)))
                .norm()
            })
            .sum()
    }
}

impl TracePoint {
    /// Barycentric coordinates of this point with respect to face `f`,
    /// which must be its own face or share the anchoring edge or vertex.
    pub fn bary_in(&self, mesh: &HalfEdgeMesh, f: FaceId) -> [f64; 3] {
        if f == self.face {
            return self.bary;
        }
        let verts = mesh.face_vertices(f);
        let mut b = [0.0; 3];
        match self.anchor {
            Anchor::Vertex(v) => {
                if let Some(i) = verts.iter().position(|&w| w == v) {
                    b[i] = 1.0;
                }
            }
            Anchor::Edge { halfedge, t } => {
                let (a, c) = (mesh.origin(halfedge), mesh.dest(halfedge));
                for (i, &w) in verts.iter().enumerate() {
                    if w == a {
                        b[i] = 1.0 - t;
                    } else if w == c {
                        b[i] = t;
                    }
                }
            }
            Anchor::Interior => return self.bary,
        }
        b
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TraceLimits {
    pub max_steps: usize,
    pub max_natural_length: Option<f64>,
    /// Stop when the path returns within this ambient distance of its start.
    pub close_tolerance: Option<f64>,
    /// Stop on entering the one-ring of a zero through its link.
    pub stop_at_zeros: bool,
}

impl TraceLimits {
    pub fn for_mesh(mesh: &HalfEdgeMesh) -> Self {
        TraceLimits {
            max_steps: 100 * mesh.n_faces(),
            max_natural_length: None,
            close_tolerance: None,
            stop_at_zeros: false,
        }
    }
}

/// Where a trace begins.
#[derive(Debug, Clone, Copy)]
pub struct TraceStart {
    pub face: FaceId,
    /// Local coordinates inside `face`.
    pub point: Complex64,
    /// Preferred local direction; the field direction closest to it is taken.
    pub hint: Complex64,
    pub anchor: Anchor,
}

/// Straight-segment tracer over the piecewise constant line fields of Φ.
pub struct Tracer<'a> {
    mesh: &'a HalfEdgeMesh,
    phi: &'a QuadraticDifferential,
    roots: Vec<Complex64>,
    is_zero: Vec<bool>,
    min_root: f64,
}

const EDGE_CLAMP: f64 = 1e-9;

impl<'a> Tracer<'a> {
    pub fn new(mesh: &'a HalfEdgeMesh, phi: &'a QuadraticDifferential, zeros: &[ZeroPoint]) -> Self {
        let mut is_zero = vec![false; mesh.n_vertices()];
        for z in zeros {
            is_zero[z.vertex] = true;
        }
        Tracer {
            mesh,
            phi,
            roots: phi.values.iter().map(|c| c.sqrt()).collect(),
            is_zero,
            min_root: 1e-7 * phi.max_abs().sqrt(),
        }
    }

    pub fn mesh(&self) -> &HalfEdgeMesh {
        self.mesh
    }

    pub fn phi(&self) -> &QuadraticDifferential {
        self.phi
    }

    pub fn is_zero(&self, v: VertexId) -> bool {
        self.is_zero[v]
    }

    /// Unit field direction in face `f` (sign arbitrary).
    pub fn field(&self, f: FaceId, dir: Direction) -> Result<Complex64> {
        let r = self.roots[f];
        if !(r.norm() > self.min_root) {
            return Err(Error::TracingStall(format!("Φ vanishes on face {f}")));
        }
        let d = r.conj() / r.norm();
        Ok(match dir {
            Direction::Horizontal => d,
            Direction::Vertical => d * Complex64::i(),
        })
    }

    fn point(&self, f: FaceId, z: Complex64, anchor: Anchor) -> TracePoint {
        let fr = self.mesh.frame(f);
        let mut bary = fr.barycentric(z);
        if let Anchor::Vertex(v) = anchor {
            let verts = self.mesh.face_vertices(f);
            bary = [0.0; 3];
            if let Some(i) = verts.iter().position(|&w| w == v) {
                bary[i] = 1.0;
            }
        }
        TracePoint {
            face: f,
            bary,
            position: self.mesh.wrap(fr.to_ambient(z)),
            anchor,
        }
    }

    /// Regular trace from an arbitrary start.
    pub fn trace(&self, start: TraceStart, dir: Direction, limits: TraceLimits) -> Result<Trajectory> {
        let d0 = self.field(start.face, dir)?;
        let d0 = if (d0 * start.hint.conj()).re < 0.0 { -d0 } else { d0 };
        self.run(start, d0, dir, limits, TrajectoryKind::Regular, None)
    }

    /// The horizontal critical trajectories leaving a zero.
    pub fn trace_critical(
        &self,
        zero: &ZeroPoint,
        boundary_vertical: bool,
        limits: TraceLimits,
    ) -> Result<Vec<Trajectory>> {
        let fan = Fan::new(self.mesh, self.phi, zero.vertex, boundary_vertical);
        let rays = fan.horizontal_rays(self.mesh);
        if rays.len() != 3 {
            return Err(Error::TracingStall(format!(
                "zero {} emits {} horizontal rays",
                zero.vertex,
                rays.len()
            )));
        }
        let mut out = Vec::with_capacity(3);
        for (f, dir) in rays {
            let verts = self.mesh.face_vertices(f);
            let i = verts.iter().position(|&w| w == zero.vertex).expect("fan face");
            let start = TraceStart {
                face: f,
                point: self.mesh.frame(f).z[i],
                hint: dir,
                anchor: Anchor::Vertex(zero.vertex),
            };
            out.push(self.run(
                start,
                dir,
                Direction::Horizontal,
                limits,
                TrajectoryKind::Critical,
                Some(zero.vertex),
            )?);
        }
        Ok(out)
    }

    /// Level chart over `faces` (connected through interior edges), fitted
    /// in least squares to the face-averaged edge increments.
    pub fn chart(&self, faces: &[FaceId], dir: Direction) -> Result<LevelChart> {
        let mesh = self.mesh;
        let mut chart = LevelChart::empty(dir);
        let Some(&f0) = faces.first() else {
            return Ok(chart);
        };
        let inside: HashMap<FaceId, ()> = faces.iter().map(|&f| (f, ())).collect();
        chart.roots.insert(f0, self.roots[f0]);
        let mut queue = VecDeque::from([f0]);
        let mut order = Vec::with_capacity(faces.len());
        while let Some(f) = queue.pop_front() {
            order.push(f);
            let rf = chart.roots[&f];
            for i in 0..3 {
                let Some(g) = mesh.face(mesh.twin(mesh.face_halfedge(f) + i)) else {
                    continue;
                };
                if !inside.contains_key(&g) || chart.roots.contains_key(&g) {
                    continue;
                }
                chart.match_root(mesh, &self.roots, f, rf, i);
                queue.push_back(g);
            }
        }
        // Edge increments, averaged over the faces on both sides.
        let mut index: HashMap<VertexId, usize> = HashMap::new();
        let mut verts = Vec::new();
        let mut edge_of: HashMap<(usize, usize), usize> = HashMap::new();
        let mut incr: Vec<((usize, usize), f64, f64)> = Vec::new();
        for &f in &order {
            let r = chart.roots[&f];
            let fr = mesh.frame(f);
            let fv = mesh.face_vertices(f);
            let ids = fv.map(|v| {
                *index.entry(v).or_insert_with(|| {
                    verts.push(v);
                    verts.len() - 1
                })
            });
            for i in 0..3 {
                let (a, b) = (ids[i], ids[(i + 1) % 3]);
                let d = chart.key(r * fr.edge(i));
                let (k, d) = if a < b { ((a, b), d) } else { ((b, a), -d) };
                let e = *edge_of.entry(k).or_insert_with(|| {
                    incr.push((k, 0.0, 0.0));
                    incr.len() - 1
                });
                incr[e].1 += d;
                incr[e].2 += 1.0;
            }
        }
        let n = verts.len();
        let mut trip = Vec::with_capacity(4 * incr.len() + 1);
        let mut rhs = vec![0.0; n];
        for &((a, b), sum, count) in &incr {
            let eta = sum / count;
            trip.extend([(a, a, 1.0), (b, b, 1.0), (a, b, -1.0), (b, a, -1.0)]);
            rhs[b] += eta;
            rhs[a] -= eta;
        }
        trip.push((0, 0, 1.0));
        let lap = CsrMatrix::from_triplets(n, trip);
        let opts = CgOptions {
            tolerance: 1e-13,
            ..CgOptions::default()
        };
        let x = conjugate_gradient(&lap, &rhs, opts)?.x;
        for (k, v) in verts.into_iter().enumerate() {
            chart.values.insert(v, x[k] - x[0]);
        }
        Ok(chart)
    }

    /// Level set of the chart through the start point. Faces outside the
    /// chart are integrated on the fly for this trace only.
    pub fn trace_level(&self, start: TraceStart, limits: TraceLimits, chart: &LevelChart) -> Result<Trajectory> {
        let dir = chart.direction();
        let mesh = self.mesh;
        let mut chart = chart.clone();
        let mut f = start.face;
        let mut p = start.point;
        let mut anchor = start.anchor;
        let mut rf = match chart.root(f) {
            Some(r) => r,
            None => {
                chart.seed(mesh, f, self.roots[f]);
                self.roots[f]
            }
        };
        if chart.at(mesh, f, p).is_none() {
            chart.seed(mesh, f, rf);
        }
        let level = chart.at(mesh, f, p).expect("seeded");
        let heights = |chart: &LevelChart, f: FaceId| -> [f64; 3] {
            let v = mesh.face_vertices(f);
            [0, 1, 2].map(|k| chart.value(v[k]).expect("chart corner"))
        };
        let crossing = |h: &[f64; 3], e: usize| -> Option<f64> {
            let (a, b) = (h[e], h[(e + 1) % 3]);
            ((a > level) != (b > level)).then(|| ((level - a) / (b - a)).clamp(EDGE_CLAMP, 1.0 - EDGE_CLAMP))
        };
        let entry_of = |f: FaceId, anchor: Anchor| match anchor {
            Anchor::Edge { halfedge, .. } if mesh.face(halfedge) == Some(f) => {
                Some(HalfEdgeMesh::corner_index(halfedge))
            }
            Anchor::Edge { halfedge, .. } if mesh.face(mesh.twin(halfedge)) == Some(f) => {
                Some(HalfEdgeMesh::corner_index(mesh.twin(halfedge)))
            }
            _ => None,
        };
        let entry = entry_of(f, anchor);
        // Pick the first exit by the hint; an edge start may need the other side.
        let first = {
            let h = heights(&chart, f);
            let fr = mesh.frame(f);
            let best = (0..3)
                .filter(|&e| Some(e) != entry)
                .filter_map(|e| crossing(&h, e).map(|t| (e, (fr.z[e] + fr.edge(e) * t - p) * start.hint.conj())))
                .max_by(|a, b| a.1.re.total_cmp(&b.1.re));
            match best {
                Some((e, _)) => e,
                None => return Err(Error::TracingStall(format!("level set misses face {f}"))),
            }
        };
        let goes_back = {
            let fr = mesh.frame(f);
            let h = heights(&chart, f);
            let t = crossing(&h, first).unwrap_or(0.5);
            ((fr.z[first] + fr.edge(first) * t - p) * start.hint.conj()).re < 0.0
        };
        let mut exit = first;
        if let (Some(i), true) = (entry, goes_back) {
            if let Some((g, rg)) = chart.cross(mesh, &self.roots, f, rf, i) {
                let tw = mesh.twin(mesh.face_halfedge(f) + i);
                let j = HalfEdgeMesh::corner_index(tw);
                let fr = mesh.frame(f);
                let t = fr.barycentric(p)[(i + 1) % 3];
                p = mesh.frame(g).z[j] + mesh.frame(g).edge(j) * (1.0 - t);
                anchor = Anchor::Edge {
                    halfedge: tw,
                    t: 1.0 - t,
                };
                f = g;
                rf = rg;
                let h = heights(&chart, f);
                exit = (1..3)
                    .map(|k| (j + k) % 3)
                    .find(|&e| crossing(&h, e).is_some())
                    .ok_or_else(|| Error::TracingStall(format!("level set misses face {f}")))?;
            }
        }
        let start_face = f;
        let start_point = p;
        let start_pos = mesh.frame(f).to_ambient(p);
        let mut points = vec![self.point(f, p, anchor)];
        let mut segment_faces = Vec::new();
        let mut natural_length = 0.0;
        let mut steps = 0usize;
        let finish = |points, segment_faces, termination, natural_length| Trajectory {
            points,
            segment_faces,
            kind: TrajectoryKind::Regular,
            direction: dir,
            termination,
            natural_length,
            start_zero: None,
            end_zero: None,
        };
        loop {
            let fr = mesh.frame(f);
            let h = heights(&chart, f);
            let t = crossing(&h, exit).unwrap_or(0.5);
            let q = fr.z[exit] + fr.edge(exit) * t;
            let root = rf.norm();
            let seg_nat = root * (q - p).norm();
            if let Some(tol) = limits.close_tolerance {
                if steps > 0 && f == start_face {
                    let u = q - p;
                    let lam = (((start_point - p) * u.conj()).re / u.norm_sqr()).clamp(0.0, 1.0);
                    let c = p + u * lam;
                    if (c - start_point).norm() <= tol {
                        natural_length += root * (c - p).norm();
                        segment_faces.push(f);
                        let mut end = points[0];
                        end.position = mesh.wrap(start_pos);
                        points.push(end);
                        return Ok(finish(points, segment_faces, Termination::ClosedLoop, natural_length));
                    }
                }
            }
            if let Some(limit) = limits.max_natural_length {
                if natural_length + seg_nat >= limit {
                    let frac = if seg_nat > 0.0 {
                        (limit - natural_length) / seg_nat
                    } else {
                        0.0
                    };
                    segment_faces.push(f);
                    points.push(self.point(f, p + (q - p) * frac, Anchor::Interior));
                    return Ok(finish(points, segment_faces, Termination::LengthLimit, limit));
                }
            }
            natural_length += seg_nat;
            segment_faces.push(f);
            let he = mesh.face_halfedge(f) + exit;
            points.push(self.point(f, q, Anchor::Edge { halfedge: he, t }));
            let Some((g, rg)) = chart.cross(mesh, &self.roots, f, rf, exit) else {
                return Ok(finish(points, segment_faces, Termination::Boundary, natural_length));
            };
            steps += 1;
            if steps > limits.max_steps {
                return Err(Error::NonTermination {
                    max_steps: limits.max_steps,
                });
            }
            let j = HalfEdgeMesh::corner_index(mesh.twin(he));
            let gfr = mesh.frame(g);
            p = gfr.z[j] + gfr.edge(j) * (1.0 - t);
            f = g;
            rf = rg;
            let hg = heights(&chart, g);
            exit = (1..3)
                .map(|k| (j + k) % 3)
                .find(|&e| crossing(&hg, e).is_some())
                .ok_or_else(|| Error::TracingStall(format!("level set misses face {g}")))?;
        }
    }

    fn run(
        &self,
        start: TraceStart,
        first_dir: Complex64,
        dir: Direction,
        limits: TraceLimits,
        kind: TrajectoryKind,
        start_zero: Option<VertexId>,
    ) -> Result<Trajectory> {
        let mesh = self.mesh;
        let mut points = vec![self.point(start.face, start.point, start.anchor)];
        let start_pos = mesh.frame(start.face).to_ambient(start.point);
        let mut segment_faces = Vec::new();
        let mut natural_length = 0.0;
        let mut f = start.face;
        let mut p = start.point;
        let mut d = first_dir;
        let mut entry: Option<usize> = match start.anchor {
            Anchor::Edge { halfedge, .. } if mesh.face(halfedge) == Some(f) => {
                Some(HalfEdgeMesh::corner_index(halfedge))
            }
            Anchor::Edge { halfedge, .. } if mesh.face(mesh.twin(halfedge)) == Some(f) => {
                Some(HalfEdgeMesh::corner_index(mesh.twin(halfedge)))
            }
            _ => None,
        };
        let mut steps = 0usize;
        let mut fallbacks = 0usize;
        let finish =
            |points: Vec<TracePoint>, segment_faces: Vec<FaceId>, termination, natural_length, end_zero| Trajectory {
                points,
                segment_faces,
                kind,
                direction: dir,
                termination,
                natural_length,
                start_zero,
                end_zero,
            };
        loop {
            let fr = mesh.frame(f);
            let b = fr.barycentric(p);
            let bd = {
                let q = fr.barycentric(p + d);
                [q[0] - b[0], q[1] - b[1], q[2] - b[2]]
            };
            // Exit through the edge whose opposite corner's coordinate first
            // reaches zero.
            let mut best: Option<(f64, usize)> = None;
            for k in 0..3 {
                let edge = (k + 1) % 3;
                if Some(edge) == entry || bd[k] >= -1e-15 {
                    continue;
                }
                let s = (b[k].max(0.0)) / (-bd[k]);
                if best.is_none_or(|(bs, _)| s < bs) {
                    best = Some((s, edge));
                }
            }
            let Some((s, edge)) = best else {
                return Err(Error::TracingStall(format!("no exit from face {f}")));
            };
            let h = mesh.face_halfedge(f) + edge;
            let raw = p + d * s;
            let bq = fr.barycentric(raw);
            let t = bq[(edge + 1) % 3].clamp(EDGE_CLAMP, 1.0 - EDGE_CLAMP);
            let q = fr.z[edge] + (fr.z[(edge + 1) % 3] - fr.z[edge]) * t;
            let root = self.roots[f].norm();
            let seg_nat = root * (q - p).norm();

            if let Some(tol) = limits.close_tolerance {
                if steps > 0 && f == start.face {
                    let a = start.point;
                    let u = q - p;
                    let lam = (((a - p) * u.conj()).re / u.norm_sqr()).clamp(0.0, 1.0);
                    let c = p + u * lam;
                    if (c - a).norm() <= tol {
                        natural_length += root * (c - p).norm();
                        segment_faces.push(f);
                        let mut end = points[0];
                        end.position = mesh.wrap(start_pos);
                        points.push(end);
                        return Ok(finish(
                            points,
                            segment_faces,
                            Termination::ClosedLoop,
                            natural_length,
                            None,
                        ));
                    }
                }
            }
            if let Some(limit) = limits.max_natural_length {
                if natural_length + seg_nat >= limit {
                    let frac = if seg_nat > 0.0 {
                        (limit - natural_length) / seg_nat
                    } else {
                        0.0
                    };
                    let c = p + (q - p) * frac;
                    segment_faces.push(f);
                    points.push(self.point(f, c, Anchor::Interior));
                    return Ok(finish(points, segment_faces, Termination::LengthLimit, limit, None));
                }
            }
            natural_length += seg_nat;
            segment_faces.push(f);
            points.push(self.point(f, q, Anchor::Edge { halfedge: h, t }));

            let tw = mesh.twin(h);
            let Some(g) = mesh.face(tw) else {
                return Ok(finish(
                    points,
                    segment_faces,
                    Termination::Boundary,
                    natural_length,
                    None,
                ));
            };
            steps += 1;
            if steps > limits.max_steps {
                return Err(Error::NonTermination {
                    max_steps: limits.max_steps,
                });
            }
            let gj = HalfEdgeMesh::corner_index(tw);
            let gfr = mesh.frame(g);
            if limits.stop_at_zeros {
                let opp = mesh.dest(mesh.next(tw));
                if self.is_zero[opp] && !(steps == 1 && start_zero == Some(opp)) {
                    let zi = (gj + 2) % 3;
                    let zpt = gfr.z[zi];
                    let qg = gfr.z[gj] + gfr.edge(gj) * (1.0 - t);
                    natural_length += self.roots[g].norm() * (zpt - qg).norm();
                    segment_faces.push(g);
                    points.push(self.point(g, zpt, Anchor::Vertex(opp)));
                    return Ok(finish(
                        points,
                        segment_faces,
                        Termination::ZeroPoint,
                        natural_length,
                        Some(opp),
                    ));
                }
            }
            // Unfold: rotation taking f-local vectors to g-local vectors.
            let ef = fr.edge(edge);
            let eg = -gfr.edge(gj);
            let rot = (eg / ef) * (ef.norm() / eg.norm());
            let carried = d * rot;
            let mut dg = self.field(g, dir)?;
            if (dg * carried.conj()).re < 0.0 {
                dg = -dg;
            }
            let inward = |v: Complex64| (v * gfr.edge(gj).conj()).im > 0.0;
            if !inward(dg) {
                fallbacks += 1;
                log::trace!("fallback in face {g}");
                dg = carried / carried.norm();
            }
            p = gfr.z[gj] + gfr.edge(gj) * (1.0 - t);
            d = dg;
            f = g;
            entry = Some(gj);
            if fallbacks > 0 && fallbacks.is_multiple_of(1000) {
                log::debug!("trace used {fallbacks} tangential fallbacks");
            }
        }
    }
}

/// Piecewise linear level function (Im ξ for horizontal leaves, Re ξ for
/// vertical ones) on a connected set of faces, with the sign-matched root of
/// Φ on each face.
#[derive(Debug, Clone)]
pub struct LevelChart {
    dir: Direction,
    values: HashMap<VertexId, f64>,
    roots: HashMap<FaceId, Complex64>,
}

impl LevelChart {
    fn empty(dir: Direction) -> Self {
        LevelChart {
            dir,
            values: HashMap::new(),
            roots: HashMap::new(),
        }
    }

    pub fn direction(&self) -> Direction {
        self.dir
    }

    pub fn value(&self, v: VertexId) -> Option<f64> {
        self.values.get(&v).copied()
    }

    pub fn root(&self, f: FaceId) -> Option<Complex64> {
        self.roots.get(&f).copied()
    }

    pub fn n_faces(&self) -> usize {
        self.roots.len()
    }

    fn key(&self, x: Complex64) -> f64 {
        match self.dir {
            Direction::Horizontal => x.im,
            Direction::Vertical => x.re,
        }
    }

    /// Level at local point `z` of face `f`, if all three corners are known.
    pub fn at(&self, mesh: &HalfEdgeMesh, f: FaceId, z: Complex64) -> Option<f64> {
        let b = mesh.frame(f).barycentric(z);
        let verts = mesh.face_vertices(f);
        let mut out = 0.0;
        for k in 0..3 {
            out += self.value(verts[k])? * b[k];
        }
        Some(out)
    }

    /// Sign-matched root of the face across local edge `i` of `f`.
    fn match_root(
        &mut self,
        mesh: &HalfEdgeMesh,
        raw: &[Complex64],
        f: FaceId,
        rf: Complex64,
        i: usize,
    ) -> Option<(FaceId, Complex64)> {
        let tw = mesh.twin(mesh.face_halfedge(f) + i);
        let g = mesh.face(tw)?;
        if let Some(&r) = self.roots.get(&g) {
            return Some((g, r));
        }
        let j = HalfEdgeMesh::corner_index(tw);
        let ef = mesh.frame(f).edge(i);
        let eg = mesh.frame(g).edge(j);
        let r = raw[g];
        let r = if ((-rf * ef).conj() * (r * eg)).re < 0.0 { -r } else { r };
        self.roots.insert(g, r);
        Some((g, r))
    }

    /// Crosses local edge `i` of `f` into the neighbouring face, filling in
    /// its third corner if needed.
    fn cross(
        &mut self,
        mesh: &HalfEdgeMesh,
        raw: &[Complex64],
        f: FaceId,
        rf: Complex64,
        i: usize,
    ) -> Option<(FaceId, Complex64)> {
        let (g, rg) = self.match_root(mesh, raw, f, rf, i)?;
        let j = HalfEdgeMesh::corner_index(mesh.twin(mesh.face_halfedge(f) + i));
        let verts = mesh.face_vertices(g);
        let c = verts[(j + 2) % 3];
        if !self.values.contains_key(&c) {
            let z = &mesh.frame(g).z;
            if let (Some(xa), Some(xb)) = (self.value(verts[j]), self.value(verts[(j + 1) % 3])) {
                let zc = z[(j + 2) % 3];
                let xc = 0.5 * (xa + self.key(rg * (zc - z[j])) + xb + self.key(rg * (zc - z[(j + 1) % 3])));
                self.values.insert(c, xc);
            }
        }
        Some((g, rg))
    }

    /// Seeds face `f` with root `r`, keeping corners that are already known.
    fn seed(&mut self, mesh: &HalfEdgeMesh, f: FaceId, r: Complex64) {
        self.roots.insert(f, r);
        let verts = mesh.face_vertices(f);
        let z = &mesh.frame(f).z;
        let known = (0..3).find_map(|k| self.value(verts[k]).map(|x| (k, x)));
        for k in 0..3 {
            if !self.values.contains_key(&verts[k]) {
                let x = match known {
                    Some((m, xm)) => xm + self.key(r * (z[k] - z[m])),
                    None => self.key(r * z[k]),
                };
                self.values.insert(verts[k], x);
            }
        }
    }
}

/// Traces the three critical trajectories of one zero (stand-alone form).
pub fn trace_critical_trajectories(
    mesh: &HalfEdgeMesh,
    phi: &QuadraticDifferential,
    zeros: &[ZeroPoint],
    zero: &ZeroPoint,
) -> Result<Vec<Trajectory>> {
    let tracer = Tracer::new(mesh, phi, zeros);
    let mut limits = TraceLimits::for_mesh(mesh);
    limits.stop_at_zeros = mesh.is_closed();
    tracer.trace_critical(zero, !mesh.is_closed(), limits)
}

/// Regular trajectory from a point inside face `start.face`.
pub fn trace_regular_trajectory(
    mesh: &HalfEdgeMesh,
    phi: &QuadraticDifferential,
    start: TraceStart,
    dir: Direction,
) -> Result<Trajectory> {
    let tracer = Tracer::new(mesh, phi, &[]);
    let mut limits = TraceLimits::for_mesh(mesh);
    limits.close_tolerance = Some(1e-6 * mesh.diameter());
    tracer.trace(start, dir, limits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn ambient_phi(mesh: &HalfEdgeMesh, f: impl Fn(Complex64) -> Complex64) -> QuadraticDifferential {
        let values = (0..mesh.n_faces())
            .map(|i| {
                let fr = mesh.frame(i);
                let c = (fr.corners[0] + fr.corners[1] + fr.corners[2]) / 3.0;
                let rot = Complex64::new(fr.e1.x, fr.e1.y);
                f(Complex64::new(c.x, c.y)) * rot * rot
            })
            .collect();
        QuadraticDifferential { values }
    }

    #[test]
    fn constant_phi_has_regular_vertices() {
        let mesh = shapes::flat_torus(7, 5, 1.0, 1.0);
        let phi = ambient_phi(&mesh, |_| Complex64::new(0.3, 0.8));
        for s in vertex_angle_sums(&mesh, &phi, false) {
            assert!((s - 2.0 * PI).abs() < 1e-9);
        }
        let zeros = locate_zero_points(
            &mesh,
            &phi,
            ZeroOptions {
                expected: Some(0),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(zeros.is_empty());
    }

    #[test]
    fn z_dz2_has_one_simple_zero_with_three_rays() {
        let mesh = shapes::disk(8, 48, 1.0);
        let phi = ambient_phi(&mesh, |z| z);
        let zeros = locate_zero_points(&mesh, &phi, ZeroOptions::default()).unwrap();
        assert_eq!(zeros.len(), 1);
        assert_eq!(zeros[0].vertex, 0);
        assert!((zeros[0].angle_sum - 3.0 * PI).abs() < 1e-9);
        let arcs = trace_critical_trajectories(&mesh, &phi, &zeros, &zeros[0]).unwrap();
        assert_eq!(arcs.len(), 3);
        for a in &arcs {
            assert_eq!(a.termination, Termination::Boundary);
            // Horizontal rays of z dz² leave at angles 0, ±2π/3.
            let p = a.points[1].position;
            let ang = p.y.atan2(p.x);
            let k = (ang / (2.0 * PI / 3.0)).round();
            assert!((ang - k * 2.0 * PI / 3.0).abs() < 0.2, "{ang}");
        }
    }

    #[test]
    fn horizontal_trace_on_torus_closes() {
        let mesh = shapes::flat_torus(8, 8, 1.0, 1.0);
        let phi = ambient_phi(&mesh, |_| Complex64::new(1.0, 0.0));
        let fr = mesh.frame(3);
        let start = TraceStart {
            face: 3,
            point: fr.from_barycentric([0.3, 0.3, 0.4]),
            hint: fr.to_local(fr.corners[0] + Vec3::x()) - fr.to_local(fr.corners[0]),
            anchor: Anchor::Interior,
        };
        let t = trace_regular_trajectory(&mesh, &phi, start, Direction::Horizontal).unwrap();
        assert_eq!(t.termination, Termination::ClosedLoop);
        assert!((t.natural_length - 1.0).abs() < 1e-9);
        assert!((t.ambient_length(&mesh) - 1.0).abs() < 1e-9);
        let y0 = t.points[0].position.y;
        assert!(t.points.iter().all(|p| (p.position.y - y0).abs() < 1e-12));
    }

    #[test]
    fn expected_counts() {
        assert_eq!(expected_zero_count(2, 0), Some(4));
        assert_eq!(expected_zero_count(0, 4), Some(4));
        assert_eq!(expected_zero_count(0, 3), Some(2));
        assert_eq!(expected_zero_count(0, 2), Some(0));
        assert_eq!(expected_zero_count(1, 0), Some(0));
    }
}
