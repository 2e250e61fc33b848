//! Halfedge triangle mesh, topology queries and the symmetric double.

mod double;
mod frame;
pub mod io;

use std::collections::{HashMap, VecDeque};

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub use double::{double_cover, DoubleCover};
pub use frame::FaceFrame;

pub type Vec3 = Vector3<f64>;
pub type VertexId = usize;
pub type HalfedgeId = usize;
pub type FaceId = usize;

/// Manifold, consistently oriented triangle mesh with halfedge connectivity.
///
/// Face `f` owns halfedges `3f`, `3f + 1`, `3f + 2` in counter-clockwise order.
/// Boundary halfedges follow the face halfedges and carry no face; they are
/// linked into `boundary_loops` at construction. The mesh is immutable once
/// built.
#[derive(Debug, Clone)]
pub struct HalfEdgeMesh {
    positions: Vec<Vec3>,
    origin: Vec<VertexId>,
    twin: Vec<HalfedgeId>,
    next: Vec<HalfedgeId>,
    prev: Vec<HalfedgeId>,
    face: Vec<Option<FaceId>>,
    vertex_halfedge: Vec<HalfedgeId>,
    vertex_on_boundary: Vec<bool>,
    boundary_loops: Vec<Vec<HalfedgeId>>,
    period: Option<[f64; 2]>,
    n_faces: usize,
    frames: Vec<FaceFrame>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct TopologySummary {
    pub genus: usize,
    pub boundary_count: usize,
    pub euler_characteristic: i64,
}

impl HalfEdgeMesh {
    /// Builds and validates a mesh from a triangle soup.
    ///
    /// `period`, when given, makes the planar domain a flat torus: face corners
    /// are unwrapped to their minimum image in x and y.
    pub fn from_faces(positions: Vec<Vec3>, faces: &[[VertexId; 3]], period: Option<[f64; 2]>) -> Result<Self> {
        let n_vertices = positions.len();
        let n_faces = faces.len();
        if n_faces == 0 {
            return Err(Error::NonManifold("mesh has no faces".into()));
        }

        let mut origin = Vec::with_capacity(3 * n_faces + 64);
        let mut directed: HashMap<(VertexId, VertexId), HalfedgeId> = HashMap::with_capacity(3 * n_faces);
        for (f, tri) in faces.iter().enumerate() {
            for &v in tri {
                if v >= n_vertices {
                    return Err(Error::parse(0, format!("face {f} references vertex {v}")));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[2] == tri[0] {
                return Err(Error::NonManifold(format!("face {f} repeats a vertex")));
            }
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                let h = 3 * f + i;
                origin.push(a);
                if directed.insert((a, b), h).is_some() {
                    return Err(Error::NonManifold(format!(
                        "edge ({a}, {b}) has more than two faces or inconsistent orientation"
                    )));
                }
            }
        }

        let n_face_he = 3 * n_faces;
        let mut twin = vec![usize::MAX; n_face_he];
        let mut face: Vec<Option<FaceId>> = (0..n_face_he).map(|h| Some(h / 3)).collect();
        let mut next: Vec<HalfedgeId> = (0..n_face_he).map(|h| 3 * (h / 3) + (h + 1) % 3).collect();
        let mut prev: Vec<HalfedgeId> = (0..n_face_he).map(|h| 3 * (h / 3) + (h + 2) % 3).collect();

        let mut boundary_out: HashMap<VertexId, HalfedgeId> = HashMap::new();
        for h in 0..n_face_he {
            let a = origin[h];
            let b = origin[next[h]];
            if let Some(&t) = directed.get(&(b, a)) {
                twin[h] = t;
            } else {
                let g = origin.len();
                origin.push(b);
                face.push(None);
                twin.push(h);
                next.push(usize::MAX);
                prev.push(usize::MAX);
                twin[h] = g;
                if boundary_out.insert(b, g).is_some() {
                    return Err(Error::NonManifold(format!(
                        "vertex {b} has a non-disk neighbourhood (several boundary fans)"
                    )));
                }
            }
        }
        for g in n_face_he..origin.len() {
            let dest = origin[twin[g]];
            let n = boundary_out[&dest];
            next[g] = n;
            prev[n] = g;
        }

        // Outgoing halfedge per vertex; boundary vertices start their fan at
        // the interior halfedge right after the boundary.
        let mut vertex_halfedge = vec![usize::MAX; n_vertices];
        let mut out_count = vec![0usize; n_vertices];
        for h in 0..origin.len() {
            out_count[origin[h]] += 1;
            if face[h].is_some() && vertex_halfedge[origin[h]] == usize::MAX {
                vertex_halfedge[origin[h]] = h;
            }
        }
        let mut vertex_on_boundary = vec![false; n_vertices];
        for (&v, &g) in &boundary_out {
            vertex_on_boundary[v] = true;
            // g = v -> w boundary; the interior fan starts at twin(prev(g))'s
            // successor: the interior halfedge whose twin is boundary.
            let incoming_boundary = prev[g];
            vertex_halfedge[v] = twin[incoming_boundary];
        }
        for v in 0..n_vertices {
            if vertex_halfedge[v] == usize::MAX {
                return Err(Error::NonManifold(format!("vertex {v} is not used by any face")));
            }
        }

        let mut boundary_loops = Vec::new();
        let mut seen = vec![false; origin.len()];
        for g in n_face_he..origin.len() {
            if seen[g] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut h = g;
            loop {
                seen[h] = true;
                cycle.push(h);
                h = next[h];
                if h == g {
                    break;
                }
                if cycle.len() > origin.len() {
                    return Err(Error::NonManifold("boundary loop does not close".into()));
                }
            }
            boundary_loops.push(cycle);
        }

        let mut mesh = HalfEdgeMesh {
            positions,
            origin,
            twin,
            next,
            prev,
            face,
            vertex_halfedge,
            vertex_on_boundary,
            boundary_loops,
            period,
            n_faces,
            frames: Vec::new(),
        };

        for v in 0..n_vertices {
            if mesh.outgoing(v).len() != out_count[v] {
                return Err(Error::NonManifold(format!("vertex {v} has a non-disk neighbourhood")));
            }
        }
        let components = mesh.face_components();
        if components != 1 {
            return Err(Error::DisconnectedMesh { components });
        }
        mesh.frames = (0..n_faces).map(|f| FaceFrame::new(&mesh, f)).collect();
        Ok(mesh)
    }

    fn face_components(&self) -> usize {
        let nf = self.n_faces();
        let mut comp = vec![usize::MAX; nf];
        let mut count = 0;
        for start in 0..nf {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut queue = VecDeque::from([start]);
            comp[start] = count;
            while let Some(f) = queue.pop_front() {
                for h in self.face_halfedges(f) {
                    if let Some(g) = self.face[self.twin[h]] {
                        if comp[g] == usize::MAX {
                            comp[g] = count;
                            queue.push_back(g);
                        }
                    }
                }
            }
            count += 1;
        }
        count
    }

    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn n_faces(&self) -> usize {
        self.n_faces
    }

    pub fn n_halfedges(&self) -> usize {
        self.origin.len()
    }

    pub fn n_edges(&self) -> usize {
        self.origin.len() / 2
    }

    pub fn position(&self, v: VertexId) -> Vec3 {
        self.positions[v]
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn period(&self) -> Option<[f64; 2]> {
        self.period
    }

    pub fn origin(&self, h: HalfedgeId) -> VertexId {
        self.origin[h]
    }

    pub fn dest(&self, h: HalfedgeId) -> VertexId {
        self.origin[self.twin[h]]
    }

    pub fn twin(&self, h: HalfedgeId) -> HalfedgeId {
        self.twin[h]
    }

    pub fn next(&self, h: HalfedgeId) -> HalfedgeId {
        self.next[h]
    }

    pub fn prev(&self, h: HalfedgeId) -> HalfedgeId {
        self.prev[h]
    }

    pub fn face(&self, h: HalfedgeId) -> Option<FaceId> {
        self.face[h]
    }

    pub fn is_boundary_halfedge(&self, h: HalfedgeId) -> bool {
        self.face[h].is_none()
    }

    pub fn is_boundary_edge(&self, h: HalfedgeId) -> bool {
        self.face[h].is_none() || self.face[self.twin[h]].is_none()
    }

    pub fn is_boundary_vertex(&self, v: VertexId) -> bool {
        self.vertex_on_boundary[v]
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_loops.is_empty()
    }

    pub fn face_halfedge(&self, f: FaceId) -> HalfedgeId {
        3 * f
    }

    pub fn face_halfedges(&self, f: FaceId) -> [HalfedgeId; 3] {
        [3 * f, 3 * f + 1, 3 * f + 2]
    }

    pub fn face_vertices(&self, f: FaceId) -> [VertexId; 3] {
        [self.origin[3 * f], self.origin[3 * f + 1], self.origin[3 * f + 2]]
    }

    /// Index (0..3) of halfedge `h` inside its face.
    pub fn corner_index(h: HalfedgeId) -> usize {
        h % 3
    }

    pub fn boundary_loops(&self) -> &[Vec<HalfedgeId>] {
        &self.boundary_loops
    }

    pub fn frame(&self, f: FaceId) -> &FaceFrame {
        &self.frames[f]
    }

    pub fn frames(&self) -> &[FaceFrame] {
        &self.frames
    }

    /// Halfedge with origin `a` and destination `b`, if the edge exists.
    pub fn find_halfedge(&self, a: VertexId, b: VertexId) -> Option<HalfedgeId> {
        self.outgoing(a).into_iter().find(|&h| self.dest(h) == b)
    }

    /// Outgoing halfedges of `v` in counter-clockwise order.
    ///
    /// For a boundary vertex the list starts at the interior halfedge following
    /// the boundary and ends with the outgoing boundary halfedge.
    pub fn outgoing(&self, v: VertexId) -> Vec<HalfedgeId> {
        let start = self.vertex_halfedge[v];
        let mut out = vec![start];
        let mut h = start;
        loop {
            if self.face[h].is_none() {
                break;
            }
            h = self.twin[self.prev[h]];
            if h == start {
                break;
            }
            out.push(h);
            if out.len() > self.origin.len() {
                break;
            }
        }
        out
    }

    /// Outgoing halfedges of `v` whose faces form its one-ring fan, in
    /// counter-clockwise order. Fan face `k` is spanned by spokes `k` and
    /// `twin(prev(spoke k))`.
    pub fn vertex_fan(&self, v: VertexId) -> Vec<HalfedgeId> {
        self.outgoing(v)
            .into_iter()
            .filter(|&h| self.face[h].is_some())
            .collect()
    }

    pub fn topology(&self) -> TopologySummary {
        let v = self.n_vertices() as i64;
        let e = self.n_edges() as i64;
        let f = self.n_faces() as i64;
        let chi = v - e + f;
        let b = self.boundary_loops.len();
        let genus = ((2 - chi - b as i64) / 2).max(0) as usize;
        TopologySummary {
            genus,
            boundary_count: b,
            euler_characteristic: chi,
        }
    }

    pub fn face_area(&self, f: FaceId) -> f64 {
        self.frames[f].area
    }

    pub fn total_area(&self) -> f64 {
        self.frames.iter().map(|fr| fr.area).sum()
    }

    /// Diagonal of the axis-aligned bounding box.
    pub fn diameter(&self) -> f64 {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &self.positions {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (hi - lo).norm()
    }

    /// True when every vertex lies in the plane z = 0 within `tol`.
    pub fn is_planar(&self, tol: f64) -> bool {
        self.period.is_none() && self.positions.iter().all(|p| p.z.abs() <= tol)
    }

    /// Ambient corner positions of face `f`, unwrapped for periodic meshes.
    pub fn face_corners(&self, f: FaceId) -> [Vec3; 3] {
        let [a, b, c] = self.face_vertices(f);
        let p0 = self.positions[a];
        [
            p0,
            self.unwrap_near(p0, self.positions[b]),
            self.unwrap_near(p0, self.positions[c]),
        ]
    }

    fn unwrap_near(&self, anchor: Vec3, p: Vec3) -> Vec3 {
        match self.period {
            None => p,
            Some([lx, ly]) => {
                let mut d = p - anchor;
                d.x -= lx * (d.x / lx).round();
                d.y -= ly * (d.y / ly).round();
                anchor + d
            }
        }
    }

    /// Shortest periodic image of a displacement.
    pub fn min_image(&self, d: Vec3) -> Vec3 {
        self.unwrap_near(Vec3::zeros(), d)
    }

    /// Wraps an ambient point back into the fundamental domain of a periodic mesh.
    pub fn wrap(&self, p: Vec3) -> Vec3 {
        match self.period {
            None => p,
            Some([lx, ly]) => Vec3::new(p.x.rem_euclid(lx), p.y.rem_euclid(ly), p.z),
        }
    }

    /// Ambient length of the edge carrying `h`.
    pub fn edge_length(&self, h: HalfedgeId) -> f64 {
        let a = self.positions[self.origin[h]];
        let b = self.unwrap_near(a, self.positions[self.dest(h)]);
        (b - a).norm()
    }

    /// Ambient length of a boundary loop.
    pub fn loop_length(&self, l: usize) -> f64 {
        self.boundary_loops[l].iter().map(|&h| self.edge_length(h)).sum()
    }

    /// Index of the outer boundary loop: the one with the largest ambient length.
    pub fn outer_loop(&self) -> Option<usize> {
        (0..self.boundary_loops.len()).max_by(|&a, &b| {
            self.loop_length(a)
                .partial_cmp(&self.loop_length(b))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    }

    /// Position of the boundary loop and offset of boundary halfedge `h`.
    pub fn boundary_loop_of(&self) -> Vec<Option<(usize, usize)>> {
        let mut out = vec![None; self.origin.len()];
        for (l, cycle) in self.boundary_loops.iter().enumerate() {
            for (i, &h) in cycle.iter().enumerate() {
                out[h] = Some((l, i));
            }
        }
        out
    }

    /// Interpolates the ambient position of a point on halfedge `h` at
    /// parameter `t` from origin to destination.
    pub fn point_on_halfedge(&self, h: HalfedgeId, t: f64) -> Vec3 {
        let a = self.positions[self.origin[h]];
        let b = self.unwrap_near(a, self.positions[self.dest(h)]);
        self.wrap(a + (b - a) * t)
    }

    /// Cotangent of the interior angle opposite halfedge `h` (0 for boundary halfedges).
    pub fn cot_opposite(&self, h: HalfedgeId) -> f64 {
        let Some(f) = self.face[h] else { return 0.0 };
        let fr = &self.frames[f];
        let i = Self::corner_index(h);
        let k = (i + 2) % 3;
        let a = fr.z[i] - fr.z[k];
        let b = fr.z[(i + 1) % 3] - fr.z[k];
        let dot = a.re * b.re + a.im * b.im;
        let cross = a.re * b.im - a.im * b.re;
        dot / cross
    }
}
