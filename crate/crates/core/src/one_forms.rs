//! Harmonic one-forms, the Hodge star on the harmonic space and the
//! holomorphic basis ζ_k = ω_k + i·*ω_k.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::homology::{cohomology_dual_basis, homology_basis, CochainOneForm};
use crate::linalg::{conjugate_gradient, CgOptions, CsrMatrix};
use crate::mesh::{HalfEdgeMesh, HalfedgeId};
use crate::par;

/// Closed and co-closed real one-form, stored per halfedge.
pub type HarmonicOneForm = CochainOneForm;

const COT_CLAMP: f64 = 1e4;

/// Cotangent weight `(cot α + cot β) / 2` of the edge of `h`, clamped.
/// Returns whether clamping happened.
pub fn cotan_weight(mesh: &HalfEdgeMesh, h: HalfedgeId) -> (f64, bool) {
    let mut clamped = false;
    let mut clamp = |c: f64| {
        if c.abs() > COT_CLAMP || !c.is_finite() {
            clamped = true;
            c.clamp(-COT_CLAMP, COT_CLAMP)
        } else {
            c
        }
    };
    let w = 0.5 * (clamp(mesh.cot_opposite(h)) + clamp(mesh.cot_opposite(mesh.twin(h))));
    (w, clamped)
}

/// Per-halfedge cotangent weights, with a warning when any were clamped.
pub fn cotan_weights(mesh: &HalfEdgeMesh) -> Vec<f64> {
    let res = par::map_range(mesh.n_halfedges(), |h| cotan_weight(mesh, h));
    let n_clamped = res.iter().filter(|r| r.1).count();
    if n_clamped > 0 {
        log::warn!(
            "mesh quality: {} cotangent values clamped to ±{COT_CLAMP:e}",
            n_clamped / 2
        );
    }
    res.into_iter().map(|r| r.0).collect()
}

fn check_faces(mesh: &HalfEdgeMesh) -> Result<()> {
    let scale = mesh.diameter().max(f64::MIN_POSITIVE);
    for f in 0..mesh.n_faces() {
        if !(mesh.frame(f).area > 1e-14 * scale * scale) {
            return Err(Error::DegenerateFace { face: f });
        }
    }
    Ok(())
}

fn laplacian(mesh: &HalfEdgeMesh, weights: &[f64]) -> CsrMatrix {
    let mut trip = Vec::with_capacity(2 * mesh.n_halfedges() + 1);
    for h in 0..mesh.n_halfedges() {
        let (i, j) = (mesh.origin(h), mesh.dest(h));
        let w = weights[h];
        trip.push((i, i, w));
        trip.push((i, j, -w));
    }
    // Gauge: pin vertex 0. Exact because the right-hand side sums to zero.
    trip.push((0, 0, 1.0));
    CsrMatrix::from_triplets(mesh.n_vertices(), trip)
}

/// ω = ψ − df with f solving the cotangent Laplace equation, so that ω is
/// co-closed and has the same periods as ψ.
pub fn harmonize(mesh: &HalfEdgeMesh, psi: &CochainOneForm) -> Result<HarmonicOneForm> {
    let weights = cotan_weights(mesh);
    let lap = laplacian(mesh, &weights);
    harmonize_with(mesh, &weights, &lap, psi)
}

fn harmonize_with(
    mesh: &HalfEdgeMesh,
    weights: &[f64],
    lap: &CsrMatrix,
    psi: &CochainOneForm,
) -> Result<HarmonicOneForm> {
    // Σ_j w_ij (f_i − f_j) = −Σ_j w_ij ψ_ij
    let mut rhs = vec![0.0; mesh.n_vertices()];
    for h in 0..mesh.n_halfedges() {
        rhs[mesh.origin(h)] -= weights[h] * psi.values[h];
    }
    let sol = conjugate_gradient(lap, &rhs, CgOptions::default())?;
    let f = sol.x;
    let values = par::map_range(mesh.n_halfedges(), |h| {
        psi.values[h] - (f[mesh.dest(h)] - f[mesh.origin(h)])
    });
    Ok(CochainOneForm { values })
}

/// Cotangent-weighted divergence of ω at every vertex.
pub fn divergence(mesh: &HalfEdgeMesh, omega: &CochainOneForm) -> Vec<f64> {
    let weights = cotan_weights(mesh);
    let mut out = vec![0.0; mesh.n_vertices()];
    for h in 0..mesh.n_halfedges() {
        out[mesh.origin(h)] += weights[h] * omega.values[h];
    }
    out
}

/// Euclidean norm of the halfedge values.
pub fn form_norm(omega: &CochainOneForm) -> f64 {
    par::dot(&omega.values, &omega.values).sqrt()
}

/// Per-face constant vector of a closed real form, in the face's local frame.
pub fn face_vectors(mesh: &HalfEdgeMesh, omega: &CochainOneForm) -> Vec<Complex64> {
    par::map_range(mesh.n_faces(), |f| {
        let h = mesh.face_halfedge(f);
        mesh.frame(f).vector_from_edges(omega.values[h], -omega.values[h + 2])
    })
}

/// Harmonic energy Σ_f A_f |u_f|².
pub fn energy(mesh: &HalfEdgeMesh, omega: &CochainOneForm) -> f64 {
    face_vectors(mesh, omega)
        .iter()
        .enumerate()
        .map(|(f, u)| mesh.frame(f).area * u.norm_sqr())
        .sum()
}

/// Pullback of ω under a halfedge map `h ↦ σ(h)`.
pub fn pullback(omega: &CochainOneForm, halfedge_map: &[HalfedgeId]) -> CochainOneForm {
    CochainOneForm {
        values: halfedge_map.iter().map(|&s| omega.values[s]).collect(),
    }
}

/// Basis of the harmonic space with its L² Gram matrix and the Hodge star
/// expressed in basis coordinates (`*ω_k = Σ_j star[(j, k)] ω_j`).
#[derive(Debug, Clone)]
pub struct HarmonicBasis {
    pub forms: Vec<HarmonicOneForm>,
    pub gram: DMatrix<f64>,
    pub star: DMatrix<f64>,
    face_vectors: Vec<Vec<Complex64>>,
}

fn sym_pow(m: &DMatrix<f64>, p: f64) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.amax();
    if eig.eigenvalues.iter().any(|&l| !(l > 1e-13 * max)) {
        return None;
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.powf(p)));
    Some(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

impl HarmonicBasis {
    pub fn new(mesh: &HalfEdgeMesh, forms: Vec<HarmonicOneForm>) -> Result<Self> {
        check_faces(mesh)?;
        let n = forms.len();
        let fv: Vec<Vec<Complex64>> = forms.iter().map(|w| face_vectors(mesh, w)).collect();
        let mut gram = DMatrix::zeros(n, n);
        let mut twist = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in j..n {
                let mut g = 0.0;
                let mut b = 0.0;
                for f in 0..mesh.n_faces() {
                    let p = fv[j][f] * fv[k][f].conj() * mesh.frame(f).area;
                    g += p.re;
                    b += p.im;
                }
                gram[(j, k)] = g;
                gram[(k, j)] = g;
                twist[(j, k)] = b;
                twist[(k, j)] = -b;
            }
        }
        let degenerate = || Error::DegenerateBasis {
            rcond: crate::homology::reciprocal_condition(&gram),
        };
        let s = sym_pow(&gram, 0.5).ok_or_else(degenerate)?;
        let s_inv = sym_pow(&gram, -0.5).ok_or_else(degenerate)?;
        let mut a = &s_inv * &twist * &s_inv;
        a = (&a - a.transpose()) * 0.5;
        let neg_sq = -(&a * &a);
        let neg_sq = (&neg_sq + neg_sq.transpose()) * 0.5;
        let inv_root = sym_pow(&neg_sq, -0.5).ok_or_else(degenerate)?;
        let q = &a * inv_root;
        let star = &s_inv * q * &s;
        Ok(HarmonicBasis {
            forms,
            gram,
            star,
            face_vectors: fv,
        })
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    /// L² inner products ⟨ω_j, ω⟩ against the basis.
    fn inner(&self, mesh: &HalfEdgeMesh, omega: &CochainOneForm) -> DVector<f64> {
        let u = face_vectors(mesh, omega);
        DVector::from_fn(self.len(), |j, _| {
            (0..mesh.n_faces())
                .map(|f| (self.face_vectors[j][f] * u[f].conj()).re * mesh.frame(f).area)
                .sum()
        })
    }

    /// Coordinates of a harmonic form in this basis (L² projection).
    pub fn coordinates(&self, mesh: &HalfEdgeMesh, omega: &CochainOneForm) -> DVector<f64> {
        let rhs = self.inner(mesh, omega);
        self.gram
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .unwrap_or_else(|| DVector::zeros(self.len()))
    }

    pub fn combine(&self, x: &DVector<f64>) -> CochainOneForm {
        let nh = self.forms.first().map_or(0, |w| w.values.len());
        let values = par::map_range(nh, |h| {
            self.forms.iter().zip(x.iter()).map(|(w, c)| c * w.values[h]).sum()
        });
        CochainOneForm { values }
    }

    pub fn hodge_star(&self, mesh: &HalfEdgeMesh, omega: &CochainOneForm) -> CochainOneForm {
        let x = self.coordinates(mesh, omega);
        self.combine(&(&self.star * x))
    }

    /// ζ = ω + i·*ω for the form with coordinates `x`.
    pub fn holomorphic(&self, x: &DVector<f64>) -> HolomorphicOneForm {
        let re = self.combine(x);
        let im = self.combine(&(&self.star * x));
        HolomorphicOneForm {
            values: re
                .values
                .iter()
                .zip(&im.values)
                .map(|(&a, &b)| Complex64::new(a, b))
                .collect(),
        }
    }

    /// ζ_k for every basis element.
    pub fn holomorphic_forms(&self) -> Vec<HolomorphicOneForm> {
        (0..self.len())
            .map(|k| {
                let mut e = DVector::zeros(self.len());
                e[k] = 1.0;
                self.holomorphic(&e)
            })
            .collect()
    }
}

/// Harmonic representatives of the cohomology basis of a closed mesh.
pub fn harmonic_basis(mesh: &HalfEdgeMesh) -> Result<HarmonicBasis> {
    check_faces(mesh)?;
    let loops = homology_basis(mesh)?;
    let duals = cohomology_dual_basis(mesh, &loops)?;
    let weights = cotan_weights(mesh);
    let lap = laplacian(mesh, &weights);
    let forms = duals
        .iter()
        .map(|psi| harmonize_with(mesh, &weights, &lap, psi))
        .collect::<Result<Vec<_>>>()?;
    HarmonicBasis::new(mesh, forms)
}

/// *ω for a harmonic form ω on a closed mesh.
pub fn hodge_star(mesh: &HalfEdgeMesh, omega: &HarmonicOneForm) -> Result<HarmonicOneForm> {
    let basis = harmonic_basis(mesh)?;
    Ok(basis.hodge_star(mesh, omega))
}

/// The 2g forms ζ_k = ω_k + i·*ω_k.
pub fn holomorphic_basis(mesh: &HalfEdgeMesh) -> Result<Vec<HolomorphicOneForm>> {
    Ok(harmonic_basis(mesh)?.holomorphic_forms())
}

/// Complex value per halfedge: real part ω, imaginary part *ω.
#[derive(Debug, Clone, PartialEq)]
pub struct HolomorphicOneForm {
    pub values: Vec<Complex64>,
}

impl HolomorphicOneForm {
    pub fn real_part(&self) -> CochainOneForm {
        CochainOneForm {
            values: self.values.iter().map(|z| z.re).collect(),
        }
    }

    pub fn imag_part(&self) -> CochainOneForm {
        CochainOneForm {
            values: self.values.iter().map(|z| z.im).collect(),
        }
    }

    /// `(c, d)` with ζ|_f = c·dz + d·dz̄ in the local frame of `f`.
    pub fn face_split(&self, mesh: &HalfEdgeMesh, f: usize) -> (Complex64, Complex64) {
        let h = mesh.face_halfedge(f);
        mesh.frame(f).complex_coefficients(self.values[h], -self.values[h + 2])
    }

    /// Holomorphic coefficient c of ζ|_f = c·dz on every face.
    pub fn face_values(&self, mesh: &HalfEdgeMesh) -> Vec<Complex64> {
        par::map_range(mesh.n_faces(), |f| self.face_split(mesh, f).0)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        HolomorphicOneForm {
            values: self.values.iter().map(|z| z * s).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn flat_torus_forms_are_constant() {
        let mesh = shapes::flat_torus(8, 6, 1.0, 1.0);
        let basis = harmonic_basis(&mesh).unwrap();
        assert_eq!(basis.len(), 2);
        for w in &basis.forms {
            let u: Vec<_> = face_vectors(&mesh, w)
                .iter()
                .enumerate()
                .map(|(f, v)| mesh.frame(f).e1 * v.re + mesh.frame(f).e2 * v.im)
                .collect();
            for v in &u {
                assert!((v - u[0]).norm() < 1e-9 * u[0].norm());
            }
            let div = divergence(&mesh, w);
            assert!(div.iter().all(|d| d.abs() < 1e-8 * form_norm(w)));
        }
    }

    #[test]
    fn harmonic_form_is_fixed_point() {
        let mesh = shapes::flat_torus(6, 6, 1.0, 2.0);
        let basis = harmonic_basis(&mesh).unwrap();
        let again = harmonize(&mesh, &basis.forms[0]).unwrap();
        for (a, b) in again.values.iter().zip(&basis.forms[0].values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn star_squares_to_minus_one_and_keeps_energy() {
        let mesh = shapes::torus_of_revolution(24, 12, 2.0, 0.7);
        let basis = harmonic_basis(&mesh).unwrap();
        for w in &basis.forms {
            let s = basis.hodge_star(&mesh, w);
            let ss = basis.hodge_star(&mesh, &s);
            let n = form_norm(w);
            for (a, b) in ss.values.iter().zip(&w.values) {
                assert!((a + b).abs() < 1e-8 * n);
            }
            let (e0, e1) = (energy(&mesh, w), energy(&mesh, &s));
            assert!((e0 - e1).abs() < 1e-8 * e0);
            assert!(s.max_face_circulation(&mesh) < 1e-10 * n);
        }
    }

    #[test]
    fn dx_rotates_to_dy_on_flat_torus() {
        let mesh = shapes::flat_torus(5, 5, 1.0, 1.0);
        let basis = harmonic_basis(&mesh).unwrap();
        let w = &basis.forms[0];
        let s = basis.hodge_star(&mesh, w);
        let u = face_vectors(&mesh, w)[0];
        let v = face_vectors(&mesh, &s)[0];
        let rotated = u * Complex64::i();
        assert!((v - rotated).norm() < 1e-9 * u.norm());
    }
}
