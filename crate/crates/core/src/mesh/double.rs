use super::{FaceId, HalfEdgeMesh, HalfedgeId, VertexId};
use crate::error::{Error, Result};

/// Closed symmetric double of a bordered mesh.
///
/// Vertices `0..base_vertices` and faces `0..base_faces` are the original
/// surface in its original order; the mirror copy follows. Boundary vertices
/// are shared by both halves and are the fixed points of the involution.
#[derive(Debug, Clone)]
pub struct DoubleCover {
    pub mesh: HalfEdgeMesh,
    pub involution: Vec<VertexId>,
    pub base_vertices: usize,
    pub base_faces: usize,
}

impl DoubleCover {
    pub fn mirror_face(&self, f: FaceId) -> FaceId {
        if f < self.base_faces {
            f + self.base_faces
        } else {
            f - self.base_faces
        }
    }

    pub fn is_base_face(&self, f: FaceId) -> bool {
        f < self.base_faces
    }

    /// Halfedge `ι(a) → ι(b)` for halfedge `a → b`.
    pub fn mirror_halfedge(&self, h: HalfedgeId) -> HalfedgeId {
        let m = &self.mesh;
        let a = self.involution[m.origin(h)];
        let b = self.involution[m.dest(h)];
        m.find_halfedge(a, b).expect("involution maps edges to edges")
    }

    /// Mirror halfedge for every halfedge of the double.
    pub fn halfedge_involution(&self) -> Vec<HalfedgeId> {
        (0..self.mesh.n_halfedges()).map(|h| self.mirror_halfedge(h)).collect()
    }
}

/// Glues `mesh` to a mirrored copy of itself along all boundary loops.
///
/// Interior vertices are duplicated at the same ambient position; mirrored
/// faces have reversed orientation so the result is consistently oriented.
pub fn double_cover(mesh: &HalfEdgeMesh) -> Result<DoubleCover> {
    if mesh.is_closed() {
        return Err(Error::NoBoundary);
    }
    let nv = mesh.n_vertices();
    let nf = mesh.n_faces();
    let mut positions = mesh.positions().to_vec();
    let mut involution: Vec<VertexId> = (0..nv).collect();
    for v in 0..nv {
        if !mesh.is_boundary_vertex(v) {
            let m = positions.len();
            positions.push(mesh.position(v));
            involution[v] = m;
            involution.push(v);
        }
    }
    let mut faces = Vec::with_capacity(2 * nf);
    for f in 0..nf {
        faces.push(mesh.face_vertices(f));
    }
    for f in 0..nf {
        let [a, b, c] = mesh.face_vertices(f);
        faces.push([involution[a], involution[c], involution[b]]);
    }
    let doubled = HalfEdgeMesh::from_faces(positions, &faces, mesh.period())?;
    Ok(DoubleCover {
        mesh: doubled,
        involution,
        base_vertices: nv,
        base_faces: nf,
    })
}
