//! Shared helpers for the integration tests.
#![allow(dead_code)]

pub mod raster;

use std::path::PathBuf;

use qdcover::cli::config::read_coefficients;
use qdcover::mesh::io::load_mesh_file;
use qdcover::pipeline::{prepare, PhiChoice, Surface};

pub const NATURAL_SCALE: f64 = 50.0;

pub fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/golden")
        .join(name)
}

/// Golden mesh `name` with the default Φ, or the coefficients in
/// `name.coeffs` when that file exists.
pub fn surface(name: &str) -> Surface {
    let mesh = load_mesh_file(&golden(&format!("{name}.obj")), None).expect("golden mesh loads");
    let coeffs = golden(&format!("{name}.coeffs"));
    let choice = if coeffs.exists() {
        PhiChoice::Coefficients(read_coefficients(&coeffs).expect("coefficients parse"))
    } else {
        PhiChoice::Default
    };
    prepare(mesh, &choice, NATURAL_SCALE).expect("surface prepares")
}

/// Planar xy coordinates and triangles of a mesh.
pub fn planar(mesh: &qdcover::HalfEdgeMesh) -> (Vec<[f64; 2]>, Vec<[usize; 3]>) {
    let pts = mesh.positions().iter().map(|p| [p.x, p.y]).collect();
    let tris = (0..mesh.n_faces()).map(|f| mesh.face_vertices(f)).collect();
    (pts, tris)
}
