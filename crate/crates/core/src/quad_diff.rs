//! Quadratic differentials Φ = Σ c·ζ_i·ζ_j as per-face dz² coefficients,
//! sign-consistent square roots and natural coordinates ξ = ∫√Φ.

use std::collections::VecDeque;

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, CgOptions, CsrMatrix};
use crate::mesh::{DoubleCover, FaceId, HalfEdgeMesh, HalfedgeId, VertexId};
use crate::one_forms::{pullback, HarmonicBasis, HolomorphicOneForm};
use crate::par;

/// Φ|_f = values[f]·dz² in the local frame of face f.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticDifferential {
    pub values: Vec<Complex64>,
}

impl QuadraticDifferential {
    /// Φ evaluated on the edge vector of halfedge `h` (frame independent).
    /// Boundary halfedges use the face on the other side.
    pub fn on_halfedge(&self, mesh: &HalfEdgeMesh, h: HalfedgeId) -> Complex64 {
        let (f, dz) = edge_in_face(mesh, h);
        self.values[f] * dz * dz
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        QuadraticDifferential {
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// First `n` faces (the original half of a symmetric double).
    pub fn truncated(&self, n: usize) -> Self {
        QuadraticDifferential {
            values: self.values[..n].to_vec(),
        }
    }

    /// Natural length ∫|Φ|^{1/2} of the straight segment a → b inside face f
    /// (local coordinates).
    pub fn natural_length(&self, f: FaceId, a: Complex64, b: Complex64) -> f64 {
        self.values[f].norm().sqrt() * (b - a).norm()
    }

    /// Natural area Σ |Φ_f|·A_f.
    pub fn natural_area(&self, mesh: &HalfEdgeMesh) -> f64 {
        (0..self.values.len())
            .map(|f| self.values[f].norm() * mesh.frame(f).area)
            .sum()
    }
}

/// Face containing `h` (or its twin, for boundary halfedges) and the local
/// edge vector of `h` in that face.
pub fn edge_in_face(mesh: &HalfEdgeMesh, h: HalfedgeId) -> (FaceId, Complex64) {
    match mesh.face(h) {
        Some(f) => (f, mesh.frame(f).edge(HalfEdgeMesh::corner_index(h))),
        None => {
            let t = mesh.twin(h);
            let f = mesh.face(t).expect("an edge has at least one face");
            (f, -mesh.frame(f).edge(HalfEdgeMesh::corner_index(t)))
        }
    }
}

fn check_faces(mesh: &HalfEdgeMesh) -> Result<()> {
    let scale = mesh.diameter().max(f64::MIN_POSITIVE);
    match (0..mesh.n_faces()).find(|&f| !(mesh.frame(f).area > 1e-14 * scale * scale)) {
        Some(face) => Err(Error::DegenerateFace { face }),
        None => Ok(()),
    }
}

/// Per-face product ζ_i·ζ_j of the dz coefficients.
pub fn product(mesh: &HalfEdgeMesh, zi: &HolomorphicOneForm, zj: &HolomorphicOneForm) -> Result<QuadraticDifferential> {
    check_faces(mesh)?;
    let a = zi.face_values(mesh);
    let b = zj.face_values(mesh);
    Ok(QuadraticDifferential {
        values: a.iter().zip(&b).map(|(x, y)| x * y).collect(),
    })
}

/// Σ_k c_k Φ_k.
pub fn combine(terms: &[(Complex64, &QuadraticDifferential)]) -> Result<QuadraticDifferential> {
    if terms.is_empty() || terms.iter().all(|(c, _)| c.norm() == 0.0) {
        return Err(Error::EmptyCombination);
    }
    let n = terms[0].1.values.len();
    if terms.iter().any(|(_, q)| q.values.len() != n) {
        return Err(Error::Config("quadratic differentials live on different meshes".into()));
    }
    let values = par::map_range(n, |f| terms.iter().map(|(c, q)| c * q.values[f]).sum());
    Ok(QuadraticDifferential { values })
}

/// Φ = Σ_{(i,j,c)} c·ζ_i·ζ_j over a coefficient list.
pub fn from_coefficients(
    mesh: &HalfEdgeMesh,
    forms: &[HolomorphicOneForm],
    coeffs: &[(usize, usize, Complex64)],
) -> Result<QuadraticDifferential> {
    if coeffs.is_empty() {
        return Err(Error::EmptyCombination);
    }
    let face_values: Vec<Vec<Complex64>> = forms.iter().map(|z| z.face_values(mesh)).collect();
    for &(i, j, _) in coeffs {
        if i >= forms.len() || j >= forms.len() {
            return Err(Error::Config(format!(
                "coefficient index ({i}, {j}) out of range for {} forms",
                forms.len()
            )));
        }
    }
    if coeffs.iter().all(|c| c.2.norm() == 0.0) {
        return Err(Error::EmptyCombination);
    }
    check_faces(mesh)?;
    let values = par::map_range(mesh.n_faces(), |f| {
        coeffs
            .iter()
            .map(|&(i, j, c)| c * face_values[i][f] * face_values[j][f])
            .sum()
    });
    Ok(QuadraticDifferential { values })
}

/// Coordinates (G-orthonormal) of the forms on a symmetric double that flip
/// sign under the involution.
pub fn odd_coordinates(dc: &DoubleCover, basis: &HarmonicBasis) -> Vec<DVector<f64>> {
    let mesh = &dc.mesh;
    let sigma = dc.halfedge_involution();
    let n = basis.len();
    let mut m = nalgebra::DMatrix::zeros(n, n);
    for k in 0..n {
        let col = basis.coordinates(mesh, &pullback(&basis.forms[k], &sigma));
        m.set_column(k, &col);
    }
    let eig = SymmetricEigen::new(basis.gram.clone());
    let root = &eig.eigenvectors
        * nalgebra::DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
        * eig.eigenvectors.transpose();
    let root_inv = &eig.eigenvectors
        * nalgebra::DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    // S M S⁻¹ is an orthogonal involution, hence symmetric.
    let mt = &root * m * &root_inv;
    let mt = (&mt + mt.transpose()) * 0.5;
    let e = SymmetricEigen::new(mt);
    let mut out: Vec<(usize, DVector<f64>)> = (0..n)
        .filter(|&i| e.eigenvalues[i] < 0.0)
        .map(|i| (i, &root_inv * e.eigenvectors.column(i)))
        .collect();
    out.sort_by_key(|p| p.0);
    out.into_iter().map(|p| p.1).collect()
}

/// Φ = Σ_a ζ_a² over a G-orthonormal basis of the odd harmonic forms.
///
/// Every odd form vanishes along the fixed boundary, so each boundary loop
/// is a vertical trajectory and horizontal trajectories of the original half
/// run from boundary to boundary.
pub fn symmetric_default(dc: &DoubleCover, basis: &HarmonicBasis) -> Result<QuadraticDifferential> {
    let odd = odd_coordinates(dc, basis);
    if odd.is_empty() {
        return Err(Error::EmptyCombination);
    }
    let squares: Vec<QuadraticDifferential> = odd
        .iter()
        .map(|x| {
            let z = basis.holomorphic(x);
            product(&dc.mesh, &z, &z)
        })
        .collect::<Result<_>>()?;
    let terms: Vec<(Complex64, &QuadraticDifferential)> =
        squares.iter().map(|q| (Complex64::new(1.0, 0.0), q)).collect();
    combine(&terms)
}

/// Coefficients C_kl of the same Φ in terms of ζ_k·ζ_l (upper triangle,
/// off-diagonal entries doubled).
pub fn symmetric_default_coefficients(dc: &DoubleCover, basis: &HarmonicBasis) -> Vec<(usize, usize, Complex64)> {
    let odd = odd_coordinates(dc, basis);
    let n = basis.len();
    let mut out = Vec::new();
    for k in 0..n {
        for l in k..n {
            let c: f64 = odd.iter().map(|r| r[k] * r[l]).sum();
            let c = if k == l { c } else { 2.0 * c };
            out.push((k, l, Complex64::new(c, 0.0)));
        }
    }
    out
}

/// Signed principal root √Φ_f per face of a connected face set.
#[derive(Debug, Clone)]
pub struct SqrtField {
    /// `Some(±√Φ_f)` for faces in the set.
    pub root: Vec<Option<Complex64>>,
    /// ±1 relative to the principal root, 0 outside the set.
    pub sign: Vec<i8>,
    /// Faces in BFS order starting at the seed.
    pub order: Vec<FaceId>,
}

impl SqrtField {
    /// Signed √Φ·Δz on halfedge `h` of a face in the set.
    pub fn edge_value(&self, mesh: &HalfEdgeMesh, h: HalfedgeId) -> Option<Complex64> {
        let f = mesh.face(h)?;
        Some(self.root[f]? * mesh.frame(f).edge(HalfEdgeMesh::corner_index(h)))
    }
}

fn zero_face_tolerance(phi: &QuadraticDifferential) -> f64 {
    1e-14 * phi.max_abs()
}

/// Propagates a consistent sign of √Φ from `seed_face` across the face set
/// (`None` = all faces). Neighbouring roots must agree on their shared edge
/// (angle difference below 90°).
pub fn sqrt_field(
    mesh: &HalfEdgeMesh,
    phi: &QuadraticDifferential,
    seed_face: FaceId,
    face_set: Option<&[bool]>,
) -> Result<SqrtField> {
    let nf = mesh.n_faces();
    let inside = |f: FaceId| face_set.is_none_or(|s| s[f]);
    let tol = zero_face_tolerance(phi);
    let principal = |f: FaceId| -> Result<Complex64> {
        let v = phi.values[f];
        if !(v.norm() > tol) {
            return Err(Error::ZeroFace { face: f });
        }
        Ok(v.sqrt())
    };
    let mut root = vec![None; nf];
    let mut sign = vec![0i8; nf];
    let mut order = Vec::new();
    root[seed_face] = Some(principal(seed_face)?);
    sign[seed_face] = 1;
    let mut queue = VecDeque::from([seed_face]);
    let mut non_tree = Vec::new();
    while let Some(f) = queue.pop_front() {
        order.push(f);
        let rf = root[f].expect("queued faces have roots");
        for h in mesh.face_halfedges(f) {
            let t = mesh.twin(h);
            let Some(g) = mesh.face(t) else { continue };
            if !inside(g) {
                continue;
            }
            if root[g].is_some() {
                non_tree.push(h);
                continue;
            }
            let wf = rf * mesh.frame(f).edge(HalfEdgeMesh::corner_index(h));
            let pg = principal(g)?;
            let wg = -pg * mesh.frame(g).edge(HalfEdgeMesh::corner_index(t));
            let s = if (wf * wg.conj()).re >= 0.0 { 1i8 } else { -1i8 };
            root[g] = Some(pg * s as f64);
            sign[g] = s;
            queue.push_back(g);
        }
    }
    for h in non_tree {
        let f = mesh.face(h).expect("interior halfedge");
        let t = mesh.twin(h);
        let g = mesh.face(t).expect("interior halfedge");
        let wf = root[f].expect("in set") * mesh.frame(f).edge(HalfEdgeMesh::corner_index(h));
        let wg = -root[g].expect("in set") * mesh.frame(g).edge(HalfEdgeMesh::corner_index(t));
        if (wf * wg.conj()).re < 0.0 {
            return Err(Error::InconsistentHolonomy { halfedge: h });
        }
    }
    Ok(SqrtField { root, sign, order })
}

/// Natural coordinate chart over a simply connected face set.
#[derive(Debug, Clone)]
pub struct NaturalChart {
    pub field: SqrtField,
    /// ξ per vertex of the chart (`None` outside).
    pub xi: Vec<Option<Complex64>>,
    pub base_vertex: VertexId,
    /// Largest |ξ(b) − ξ(a) − η(a→b)| over chart edges, where η is the
    /// face-averaged signed √Φ·Δz.
    pub max_misfit: f64,
}

impl NaturalChart {
    /// Integrates dξ along a spanning tree of chart edges rooted at
    /// `root` (BFS, neighbours visited in the order given by `rotate`).
    pub fn integrate_tree(&self, mesh: &HalfEdgeMesh, root: VertexId, rotate: usize) -> Vec<Option<Complex64>> {
        let mut out = vec![None; mesh.n_vertices()];
        let x0 = self.xi[root].expect("root inside chart");
        out[root] = Some(x0);
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            let mut outs = mesh.outgoing(v);
            let k = outs.len();
            outs.rotate_left(rotate % k);
            for h in outs {
                let w = mesh.dest(h);
                if out[w].is_some() || self.xi[w].is_none() {
                    continue;
                }
                let step = self.xi[w].expect("checked") - self.xi[v].expect("visited");
                out[w] = Some(out[v].expect("visited") + step);
                queue.push_back(w);
            }
        }
        out
    }
}

/// ξ with ξ(base_vertex) = 0, fitted in least squares to the averaged signed
/// edge values of √Φ over the face set.
pub fn natural_coordinates(
    mesh: &HalfEdgeMesh,
    phi: &QuadraticDifferential,
    base_vertex: VertexId,
    face_set: &[bool],
) -> Result<NaturalChart> {
    let faces: Vec<FaceId> = (0..mesh.n_faces()).filter(|&f| face_set[f]).collect();
    let seed = *faces
        .iter()
        .find(|&&f| mesh.face_vertices(f).contains(&base_vertex))
        .ok_or_else(|| Error::Config("base vertex is not in the chart".into()))?;

    // Local vertex and edge numbering.
    let mut local = vec![usize::MAX; mesh.n_vertices()];
    let mut verts = Vec::new();
    let mut edges: Vec<HalfedgeId> = Vec::new();
    for &f in &faces {
        for h in mesh.face_halfedges(f) {
            let v = mesh.origin(h);
            if local[v] == usize::MAX {
                local[v] = verts.len();
                verts.push(v);
            }
            let t = mesh.twin(h);
            let twin_inside = mesh.face(t).is_some_and(|g| face_set[g]);
            if !twin_inside || h < t {
                edges.push(h);
            }
        }
    }
    let euler = verts.len() as i64 - edges.len() as i64 + faces.len() as i64;
    if euler != 1 {
        return Err(Error::ChartNotSimplyConnected { euler });
    }
    let field = sqrt_field(mesh, phi, seed, Some(face_set))?;

    let eta: Vec<Complex64> = edges
        .iter()
        .map(|&h| {
            let t = mesh.twin(h);
            let mut sum = Complex64::new(0.0, 0.0);
            let mut n = 0.0;
            if let Some(v) = field.edge_value(mesh, h) {
                sum += v;
                n += 1.0;
            }
            if mesh.face(t).is_some_and(|g| face_set[g]) {
                if let Some(v) = field.edge_value(mesh, t) {
                    sum -= v;
                    n += 1.0;
                }
            }
            sum / n
        })
        .collect();

    let nloc = verts.len();
    let base = local[base_vertex];
    let mut trip = Vec::with_capacity(4 * edges.len() + 1);
    let mut rhs_re = vec![0.0; nloc];
    let mut rhs_im = vec![0.0; nloc];
    for (e, &h) in edges.iter().enumerate() {
        let (a, b) = (local[mesh.origin(h)], local[mesh.dest(h)]);
        trip.extend([(a, a, 1.0), (b, b, 1.0), (a, b, -1.0), (b, a, -1.0)]);
        rhs_re[b] += eta[e].re;
        rhs_re[a] -= eta[e].re;
        rhs_im[b] += eta[e].im;
        rhs_im[a] -= eta[e].im;
    }
    trip.push((base, base, 1.0));
    let lap = CsrMatrix::from_triplets(nloc, trip);
    let opts = CgOptions {
        tolerance: 1e-13,
        ..CgOptions::default()
    };
    let xr = conjugate_gradient(&lap, &rhs_re, opts)?.x;
    let xi_im = conjugate_gradient(&lap, &rhs_im, opts)?.x;
    let (br, bi) = (xr[base], xi_im[base]);
    let mut xi = vec![None; mesh.n_vertices()];
    for (k, &v) in verts.iter().enumerate() {
        xi[v] = Some(Complex64::new(xr[k] - br, xi_im[k] - bi));
    }
    let max_misfit = edges
        .iter()
        .zip(&eta)
        .map(|(&h, e)| (xi[mesh.dest(h)].expect("chart") - xi[mesh.origin(h)].expect("chart") - e).norm())
        .fold(0.0, f64::max);
    Ok(NaturalChart {
        field,
        xi,
        base_vertex,
        max_misfit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Vec3;
    use crate::one_forms::harmonic_basis;
    use crate::shapes;

    fn constant_phi(mesh: &HalfEdgeMesh, c: Complex64) -> QuadraticDifferential {
        // c·dz² in ambient xy coordinates, rewritten in each local frame.
        let values = (0..mesh.n_faces())
            .map(|f| {
                let e1 = mesh.frame(f).e1;
                let rot = Complex64::new(e1.x, e1.y);
                c * rot * rot
            })
            .collect();
        QuadraticDifferential { values }
    }

    #[test]
    fn product_is_symmetric_and_multiplicative() {
        let mesh = shapes::flat_torus(6, 4, 1.0, 1.0);
        let forms = harmonic_basis(&mesh).unwrap().holomorphic_forms();
        let a = product(&mesh, &forms[0], &forms[1]).unwrap();
        let b = product(&mesh, &forms[1], &forms[0]).unwrap();
        assert_eq!(a, b);
        let sq = product(&mesh, &forms[0], &forms[0]).unwrap();
        let fv = forms[0].face_values(&mesh);
        for f in 0..mesh.n_faces() {
            assert!((sq.values[f].norm() - fv[f].norm_sqr()).abs() < 1e-12 * fv[f].norm_sqr());
        }
    }

    #[test]
    fn combine_rejects_empty() {
        assert!(matches!(combine(&[]), Err(Error::EmptyCombination)));
        let q = QuadraticDifferential {
            values: vec![Complex64::new(1.0, 0.0)],
        };
        let single = combine(&[(Complex64::new(1.0, 0.0), &q)]).unwrap();
        assert_eq!(single, q);
        let cancel = combine(&[(Complex64::new(1.0, 0.0), &q), (Complex64::new(-1.0, 0.0), &q)]).unwrap();
        assert_eq!(cancel.values[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn unit_phi_on_strip_gives_identity_chart() {
        let mesh = shapes::strip(6, 3, 1.0, 0.5);
        let phi = constant_phi(&mesh, Complex64::new(1.0, 0.0));
        let all = vec![true; mesh.n_faces()];
        let chart = natural_coordinates(&mesh, &phi, 0, &all).unwrap();
        let p0 = mesh.position(0);
        for v in 0..mesh.n_vertices() {
            let d: Vec3 = mesh.position(v) - p0;
            let xi = chart.xi[v].unwrap();
            assert!((xi - Complex64::new(d.x, d.y)).norm() < 1e-9, "{v}: {xi}");
        }
        assert!(chart.max_misfit < 1e-9);
    }

    #[test]
    fn chart_rejects_annulus() {
        let mesh = shapes::annulus(2, 12, 0.5, 1.0);
        let phi = constant_phi(&mesh, Complex64::new(1.0, 0.0));
        let all = vec![true; mesh.n_faces()];
        assert!(matches!(
            natural_coordinates(&mesh, &phi, 0, &all),
            Err(Error::ChartNotSimplyConnected { euler: 0 })
        ));
    }

    #[test]
    fn holonomy_flips_around_simple_zero() {
        // Φ = z·dz² on a disk centred on the zero: the sign cannot be made
        // globally consistent on the punctured disk.
        let mesh = shapes::disk(4, 24, 1.0);
        let values = (0..mesh.n_faces())
            .map(|f| {
                let fr = mesh.frame(f);
                let c = (fr.corners[0] + fr.corners[1] + fr.corners[2]) / 3.0;
                let rot = Complex64::new(fr.e1.x, fr.e1.y);
                Complex64::new(c.x, c.y) * rot * rot
            })
            .collect();
        let phi = QuadraticDifferential { values };
        let ring: Vec<bool> = (0..mesh.n_faces())
            .map(|f| !mesh.face_vertices(f).contains(&0))
            .collect();
        let seed = ring.iter().position(|&b| b).unwrap();
        assert!(matches!(
            sqrt_field(&mesh, &phi, seed, Some(&ring)),
            Err(Error::InconsistentHolonomy { .. })
        ));
        // A constant Φ has trivial holonomy on the same ring.
        let c = constant_phi(&mesh, Complex64::new(0.3, 0.4));
        assert!(sqrt_field(&mesh, &c, seed, Some(&ring)).is_ok());
    }

    #[test]
    fn per_face_closure() {
        let mesh = shapes::torus_of_revolution(16, 10, 2.0, 0.6);
        let forms = harmonic_basis(&mesh).unwrap().holomorphic_forms();
        let phi = product(&mesh, &forms[0], &forms[1]).unwrap();
        let field = sqrt_field(&mesh, &phi, 0, None);
        // The torus product has no zeros, so the whole surface is consistent
        // up to global holonomy; check closure on each face either way.
        let root: Vec<Complex64> = (0..mesh.n_faces()).map(|f| phi.values[f].sqrt()).collect();
        for f in 0..mesh.n_faces() {
            let s: Complex64 = (0..3).map(|i| root[f] * mesh.frame(f).edge(i)).sum();
            assert!(s.norm() < 1e-9 * root[f].norm());
        }
        let _ = field;
    }
}
