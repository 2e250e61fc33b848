//! Surface preparation and the analysis stages up to the Euler route.

use num_complex::Complex64;
use serde::Serialize;

use crate::decomposition::{
    build_critical_graph, build_dual_graph, decompose, euler_cycle, CellDecomposition, CriticalGraph, DualGraph,
    EulerRoute,
};
use crate::error::{Error, Result};
use crate::mesh::{double_cover, DoubleCover, HalfEdgeMesh, TopologySummary};
use crate::one_forms::{harmonic_basis, HarmonicBasis, HolomorphicOneForm};
use crate::quad_diff::{edge_in_face, from_coefficients, product, symmetric_default, QuadraticDifferential};
use crate::singularities::{expected_zero_count, locate_zero_points, TraceLimits, Tracer, ZeroOptions, ZeroPoint};

/// How Φ is assembled from the holomorphic basis.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiChoice {
    /// Closed: ζ_0·ζ_1. Bordered: Σ ζ_a² over the odd forms of the double.
    Default,
    Pair(usize, usize),
    Coefficients(Vec<(usize, usize, Complex64)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    Closed,
    Bordered,
}

/// A mesh together with the quadratic differential the planner works with.
#[derive(Debug, Clone)]
pub struct Surface {
    pub mesh: HalfEdgeMesh,
    pub kind: SurfaceKind,
    pub topology: TopologySummary,
    /// Genus of the closed surface carrying the forms (the double if bordered).
    pub analysis_genus: usize,
    pub n_forms: usize,
    pub phi: QuadraticDifferential,
    pub boundary_vertical: bool,
    pub expected_zeros: Option<usize>,
    /// Factor applied to Φ so that natural units have the reference scale.
    pub phi_scale: f64,
}

impl Surface {
    pub fn genus_one(&self) -> bool {
        self.analysis_genus == 1
    }
}

fn phi_from_choice(
    mesh: &HalfEdgeMesh,
    forms: &[HolomorphicOneForm],
    choice: &PhiChoice,
) -> Result<QuadraticDifferential> {
    match choice {
        PhiChoice::Default => {
            if forms.len() < 2 {
                return Err(Error::EmptyCombination);
            }
            product(mesh, &forms[0], &forms[1])
        }
        PhiChoice::Pair(i, j) => from_coefficients(mesh, forms, &[(*i, *j, Complex64::new(1.0, 0.0))]),
        PhiChoice::Coefficients(c) => from_coefficients(mesh, forms, c),
    }
}

/// Genus 1 always uses ζ² of the single form; a requested combination is
/// only checked for valid indices.
fn genus_one_choice(choice: &PhiChoice, n_forms: usize) -> Result<()> {
    let pairs: Vec<(usize, usize)> = match choice {
        PhiChoice::Default => return Ok(()),
        PhiChoice::Pair(i, j) => vec![(*i, *j)],
        PhiChoice::Coefficients(c) => c.iter().map(|t| (t.0, t.1)).collect(),
    };
    if let Some((i, j)) = pairs.into_iter().find(|&(i, j)| i >= n_forms || j >= n_forms) {
        return Err(Error::Config(format!(
            "coefficient index ({i}, {j}) out of range for {n_forms} forms"
        )));
    }
    log::warn!("genus one: Φ is the square of the holomorphic form, requested combination ignored");
    Ok(())
}

/// ½(Φ + conj(ι*Φ)): the part of Φ that is symmetric under the reflection.
fn symmetrize(dc: &DoubleCover, phi: &QuadraticDifferential) -> QuadraticDifferential {
    let m = &dc.mesh;
    let values = (0..m.n_faces())
        .map(|f| {
            let h = m.face_halfedge(f);
            let dz = m.frame(f).edge(0);
            let (g, dzm) = edge_in_face(m, dc.mirror_halfedge(h));
            let reflected = (phi.values[g] * dzm * dzm).conj() / (dz * dz);
            0.5 * (phi.values[f] + reflected)
        })
        .collect();
    QuadraticDifferential { values }
}

/// ζ rotated so that its period along `path` is real; Φ = ζ².
fn closed_leaf_phi(mesh: &HalfEdgeMesh, zeta: &HolomorphicOneForm, period: Complex64) -> Result<QuadraticDifferential> {
    if !(period.norm() > 0.0) {
        return Err(Error::EmptyCombination);
    }
    let z = zeta.scale(period.conj() / period.norm());
    product(mesh, &z, &z)
}

fn torus_period(basis: &HarmonicBasis) -> Complex64 {
    // ω_0 has period 1 on the first generator; *ω_0 = Σ_j J_j0 ω_j.
    Complex64::new(1.0, basis.star[(0, 0)])
}

fn outer_natural_length(mesh: &HalfEdgeMesh, phi: &QuadraticDifferential) -> (f64, f64) {
    let l = mesh.outer_loop().expect("bordered");
    let mut nat = 0.0;
    for &b in &mesh.boundary_loops()[l] {
        nat += phi.on_halfedge(mesh, b).norm().sqrt();
    }
    (nat, mesh.loop_length(l))
}

/// Builds Φ on `mesh` and rescales it so that the outer boundary (bordered)
/// or the square root of the area (closed) measures `natural_scale` times its
/// ambient size in natural units.
pub fn prepare(mesh: HalfEdgeMesh, choice: &PhiChoice, natural_scale: f64) -> Result<Surface> {
    if !(natural_scale > 0.0) {
        return Err(Error::Config("natural scale must be positive".into()));
    }
    let topology = mesh.topology();
    let (kind, analysis_genus) = if mesh.is_closed() {
        (SurfaceKind::Closed, topology.genus)
    } else {
        (SurfaceKind::Bordered, 2 * topology.genus + topology.boundary_count - 1)
    };
    if analysis_genus == 0 {
        return Err(Error::GenusZero);
    }
    let (phi, n_forms, boundary_vertical) = match kind {
        SurfaceKind::Closed => {
            let basis = harmonic_basis(&mesh)?;
            let forms = basis.holomorphic_forms();
            let phi = if analysis_genus == 1 {
                genus_one_choice(choice, forms.len())?;
                closed_leaf_phi(&mesh, &forms[0], torus_period(&basis))?
            } else {
                phi_from_choice(&mesh, &forms, choice)?
            };
            (phi, forms.len(), false)
        }
        SurfaceKind::Bordered => {
            let dc = double_cover(&mesh)?;
            let basis = harmonic_basis(&dc.mesh)?;
            let forms = basis.holomorphic_forms();
            let (full, vertical) = if analysis_genus == 1 {
                genus_one_choice(choice, forms.len())?;
                // Period of ζ_0 around the first boundary loop (the core curve).
                let period: Complex64 = mesh.boundary_loops()[0]
                    .iter()
                    .map(|&b| -forms[0].values[mesh.twin(b)])
                    .sum();
                (closed_leaf_phi(&dc.mesh, &forms[0], period)?, false)
            } else if *choice == PhiChoice::Default {
                (symmetric_default(&dc, &basis)?, true)
            } else {
                (symmetrize(&dc, &phi_from_choice(&dc.mesh, &forms, choice)?), false)
            };
            (full.truncated(dc.base_faces), forms.len(), vertical)
        }
    };
    let phi_scale = match kind {
        SurfaceKind::Bordered => {
            let (nat, amb) = outer_natural_length(&mesh, &phi);
            (natural_scale * amb / nat).powi(2)
        }
        SurfaceKind::Closed => natural_scale * natural_scale * mesh.total_area() / phi.natural_area(&mesh),
    };
    if !phi_scale.is_finite() {
        return Err(Error::ZeroFace { face: 0 });
    }
    let phi = phi.scaled(phi_scale);
    let expected_zeros = match (kind, choice, analysis_genus) {
        (_, _, 1) => Some(0),
        (SurfaceKind::Closed, _, _) => expected_zero_count(topology.genus, 0),
        (SurfaceKind::Bordered, PhiChoice::Default, _) => expected_zero_count(topology.genus, topology.boundary_count),
        _ => None,
    };
    Ok(Surface {
        mesh,
        kind,
        topology,
        analysis_genus,
        n_forms,
        phi,
        boundary_vertical,
        expected_zeros,
        phi_scale,
    })
}

/// Zeros, critical graph, cells, dual graph and Euler route.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub zeros: Vec<ZeroPoint>,
    pub graph: CriticalGraph,
    pub decomposition: CellDecomposition,
    pub dual: DualGraph,
    pub route: EulerRoute,
}

pub fn locate_zeros(surface: &Surface) -> Result<Vec<ZeroPoint>> {
    if surface.genus_one() {
        return Ok(Vec::new());
    }
    locate_zero_points(
        &surface.mesh,
        &surface.phi,
        ZeroOptions {
            boundary_vertical: surface.boundary_vertical,
            expected: surface.expected_zeros,
        },
    )
}

pub fn critical_graph(surface: &Surface, zeros: &[ZeroPoint]) -> Result<CriticalGraph> {
    let mesh = &surface.mesh;
    let tracer = Tracer::new(mesh, &surface.phi, zeros);
    let mut limits = TraceLimits::for_mesh(mesh);
    limits.stop_at_zeros = mesh.is_closed();
    let traced = crate::par::map_slice(zeros, |z| tracer.trace_critical(z, surface.boundary_vertical, limits));
    let mut all = Vec::with_capacity(3 * zeros.len());
    for t in traced {
        all.extend(t?);
    }
    build_critical_graph(mesh, zeros, all)
}

pub fn analyze(surface: &Surface) -> Result<Analysis> {
    let zeros = locate_zeros(surface)?;
    let graph = critical_graph(surface, &zeros)?;
    let decomposition = decompose(&surface.mesh, &graph, &surface.phi)?;
    let dual = build_dual_graph(&decomposition, &graph);
    let route = if surface.genus_one() {
        EulerRoute {
            start: 0,
            traversals: Vec::new(),
        }
    } else {
        euler_cycle(&dual.doubled(), None)?
    };
    Ok(Analysis {
        zeros,
        graph,
        decomposition,
        dual,
        route,
    })
}
