//! Homology basis via tree–cotree and the dual closed cochains.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::{FaceId, HalfEdgeMesh, HalfedgeId, VertexId};

/// Closed cycle of halfedges. `halfedges[0]` is the generator edge that
/// closes a loop in the primal spanning tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomologyLoop {
    pub halfedges: Vec<HalfedgeId>,
}

impl HomologyLoop {
    pub fn generator(&self) -> HalfedgeId {
        self.halfedges[0]
    }

    pub fn is_closed(&self, mesh: &HalfEdgeMesh) -> bool {
        let n = self.halfedges.len();
        n > 0 && (0..n).all(|i| mesh.dest(self.halfedges[i]) == mesh.origin(self.halfedges[(i + 1) % n]))
    }
}

/// Real value per halfedge with `value[twin(h)] = -value[h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CochainOneForm {
    pub values: Vec<f64>,
}

impl CochainOneForm {
    pub fn zeros(mesh: &HalfEdgeMesh) -> Self {
        CochainOneForm {
            values: vec![0.0; mesh.n_halfedges()],
        }
    }

    pub fn set(&mut self, mesh: &HalfEdgeMesh, h: HalfedgeId, value: f64) {
        self.values[h] = value;
        self.values[mesh.twin(h)] = -value;
    }

    pub fn integrate(&self, path: &[HalfedgeId]) -> f64 {
        path.iter().map(|&h| self.values[h]).sum()
    }

    /// Largest |sum over ∂f| across faces.
    pub fn max_face_circulation(&self, mesh: &HalfEdgeMesh) -> f64 {
        (0..mesh.n_faces())
            .map(|f| {
                mesh.face_halfedges(f)
                    .iter()
                    .map(|&h| self.values[h])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Primal spanning tree, dual spanning cotree and the leftover generator edges.
#[derive(Debug, Clone)]
pub struct TreeCotree {
    /// Halfedge from each vertex towards its parent (`None` at the root).
    pub parent: Vec<Option<HalfedgeId>>,
    pub depth: Vec<usize>,
    /// For each face, halfedge (inside that face) crossing to its cotree parent.
    pub face_parent: Vec<Option<HalfedgeId>>,
    /// Faces in cotree BFS order, root first.
    pub face_order: Vec<FaceId>,
    pub in_tree: Vec<bool>,
    pub generators: Vec<HalfedgeId>,
}

impl TreeCotree {
    pub fn build(mesh: &HalfEdgeMesh) -> Self {
        let nv = mesh.n_vertices();
        let nh = mesh.n_halfedges();
        let mut parent = vec![None; nv];
        let mut depth = vec![0usize; nv];
        let mut visited = vec![false; nv];
        let mut in_tree = vec![false; nh];
        let mut queue = VecDeque::from([0usize]);
        visited[0] = true;
        while let Some(v) = queue.pop_front() {
            for h in mesh.outgoing(v) {
                let w = mesh.dest(h);
                if !visited[w] {
                    visited[w] = true;
                    parent[w] = Some(mesh.twin(h));
                    depth[w] = depth[v] + 1;
                    in_tree[h] = true;
                    in_tree[mesh.twin(h)] = true;
                    queue.push_back(w);
                }
            }
        }

        let nf = mesh.n_faces();
        let mut face_parent = vec![None; nf];
        let mut face_seen = vec![false; nf];
        let mut in_cotree = vec![false; nh];
        let mut face_order = Vec::with_capacity(nf);
        let mut fq = VecDeque::from([0usize]);
        face_seen[0] = true;
        while let Some(f) = fq.pop_front() {
            face_order.push(f);
            for h in mesh.face_halfedges(f) {
                if in_tree[h] {
                    continue;
                }
                let t = mesh.twin(h);
                if let Some(g) = mesh.face(t) {
                    if !face_seen[g] {
                        face_seen[g] = true;
                        face_parent[g] = Some(t);
                        in_cotree[h] = true;
                        in_cotree[t] = true;
                        fq.push_back(g);
                    }
                }
            }
        }

        let mut generators = Vec::new();
        for h in 0..nh {
            let t = mesh.twin(h);
            if h < t && !in_tree[h] && !in_cotree[h] && !mesh.is_boundary_edge(h) {
                generators.push(h);
            }
        }
        TreeCotree {
            parent,
            depth,
            face_parent,
            face_order,
            in_tree,
            generators,
        }
    }

    /// Halfedges walking the tree from `v` up to the root.
    fn path_to_root(&self, mesh: &HalfEdgeMesh, mut v: VertexId) -> Vec<HalfedgeId> {
        let mut out = Vec::new();
        while let Some(h) = self.parent[v] {
            out.push(h);
            v = mesh.dest(h);
        }
        out
    }

    /// Cycle: generator `h = a → b`, then the tree path from `b` back to `a`.
    pub fn generator_loop(&self, mesh: &HalfEdgeMesh, h: HalfedgeId) -> HomologyLoop {
        let a = mesh.origin(h);
        let b = mesh.dest(h);
        let up_b = self.path_to_root(mesh, b);
        let up_a = self.path_to_root(mesh, a);
        // Strip the common suffix (shared path above the lowest common ancestor).
        let mut i = up_b.len();
        let mut j = up_a.len();
        while i > 0 && j > 0 && up_b[i - 1] == up_a[j - 1] {
            i -= 1;
            j -= 1;
        }
        let mut halfedges = vec![h];
        halfedges.extend_from_slice(&up_b[..i]);
        halfedges.extend(up_a[..j].iter().rev().map(|&e| mesh.twin(e)));
        HomologyLoop { halfedges }
    }
}

fn require_closed(mesh: &HalfEdgeMesh) -> Result<()> {
    if !mesh.is_closed() {
        return Err(Error::Config(
            "homology basis requires a closed mesh; double bordered inputs first".into(),
        ));
    }
    Ok(())
}

/// The 2g generator loops of a closed mesh.
pub fn homology_basis(mesh: &HalfEdgeMesh) -> Result<Vec<HomologyLoop>> {
    require_closed(mesh)?;
    let tc = TreeCotree::build(mesh);
    if tc.generators.is_empty() {
        return Err(Error::GenusZero);
    }
    debug_assert_eq!(tc.generators.len(), 2 * mesh.topology().genus);
    Ok(tc.generators.iter().map(|&h| tc.generator_loop(mesh, h)).collect())
}

/// Closed cochains ψ_i with ∮_{γ_j} ψ_i = δ_ij.
///
/// ψ_i is 1 on the generator of loop i, zero on the spanning tree and on the
/// other generators; cotree edges are fixed by peeling the cotree from its
/// leaves so that every face sums to zero.
pub fn cohomology_dual_basis(mesh: &HalfEdgeMesh, loops: &[HomologyLoop]) -> Result<Vec<CochainOneForm>> {
    require_closed(mesh)?;
    let tc = TreeCotree::build(mesh);
    let mut forms = Vec::with_capacity(loops.len());
    for lp in loops {
        let mut psi = CochainOneForm::zeros(mesh);
        psi.set(mesh, lp.generator(), 1.0);
        for &f in tc.face_order.iter().rev() {
            let Some(up) = tc.face_parent[f] else { continue };
            let up_in_f = up;
            let others: f64 = mesh
                .face_halfedges(f)
                .iter()
                .filter(|&&h| h != up_in_f)
                .map(|&h| psi.values[h])
                .sum();
            psi.set(mesh, up_in_f, -others);
        }
        forms.push(psi);
    }
    let p = period_matrix(&forms, loops);
    let rcond = reciprocal_condition(&p);
    if !(rcond >= 1e-10) {
        return Err(Error::DegenerateBasis { rcond });
    }
    Ok(forms)
}

/// `P[i][j] = ∮_{γ_j} ψ_i`.
pub fn period_matrix(forms: &[CochainOneForm], loops: &[HomologyLoop]) -> DMatrix<f64> {
    DMatrix::from_fn(forms.len(), loops.len(), |i, j| forms[i].integrate(&loops[j].halfedges))
}

pub fn reciprocal_condition(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes as testmesh;

    #[test]
    fn torus_has_two_loops_and_identity_periods() {
        let mesh = testmesh::flat_torus(6, 5, 1.0, 1.0);
        let loops = homology_basis(&mesh).unwrap();
        assert_eq!(loops.len(), 2);
        for l in &loops {
            assert!(l.is_closed(&mesh));
        }
        let forms = cohomology_dual_basis(&mesh, &loops).unwrap();
        let p = period_matrix(&forms, &loops);
        assert_eq!(p, DMatrix::identity(2, 2));
        for psi in &forms {
            assert!(psi.max_face_circulation(&mesh) < 1e-12);
            for h in 0..mesh.n_halfedges() {
                assert_eq!(psi.values[h], -psi.values[mesh.twin(h)]);
            }
        }
    }

    #[test]
    fn sphere_has_no_basis() {
        let mesh = testmesh::tetrahedron();
        assert!(matches!(homology_basis(&mesh), Err(Error::GenusZero)));
    }

    #[test]
    fn degenerate_loop_set_is_rejected() {
        let mesh = testmesh::flat_torus(4, 4, 1.0, 1.0);
        let loops = homology_basis(&mesh).unwrap();
        let dup = vec![loops[0].clone(), loops[0].clone()];
        assert!(matches!(
            cohomology_dual_basis(&mesh, &dup),
            Err(Error::DegenerateBasis { .. })
        ));
    }
}
