//! Writes the reference meshes under `data/golden/`.
//!
//! Usage: `qdcover-golden [out_dir]`

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qdcover::mesh::io::{load_mesh_file, write_obj};
use qdcover::mesh::{double_cover, DoubleCover, HalfEdgeMesh, Vec3};
use qdcover::one_forms::harmonic_basis;
use qdcover::quad_diff::symmetric_default_coefficients;
use qdcover::shapes;
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

struct Circle {
    cx: f64,
    cy: f64,
    r: f64,
}

impl Circle {
    fn points(&self, spacing: f64) -> Vec<Point2<f64>> {
        let n = ((2.0 * PI * self.r / spacing).ceil() as usize).max(12);
        (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                Point2::new(self.cx + self.r * t.cos(), self.cy + self.r * t.sin())
            })
            .collect()
    }

    fn power(&self, x: f64, y: f64) -> f64 {
        (x - self.cx).powi(2) + (y - self.cy).powi(2) - self.r * self.r
    }
}

/// Unit disk with circular holes, refined to roughly uniform triangles.
fn holed_disk(holes: &[Circle], spacing: f64) -> HalfEdgeMesh {
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::new();
    let outer = Circle {
        cx: 0.0,
        cy: 0.0,
        r: 1.0,
    };
    cdt.add_constraint_edges(outer.points(spacing), true)
        .expect("outer loop");
    for h in holes {
        cdt.add_constraint_edges(h.points(spacing), true).expect("hole loop");
    }
    let max_area = 0.5 * spacing * spacing;
    let result = cdt.refine(
        RefinementParameters::<f64>::new()
            .exclude_outer_faces(true)
            .with_angle_limit(AngleLimit::from_deg(28.0))
            .with_max_allowed_area(max_area)
            .with_max_additional_vertices(2_000_000),
    );
    let excluded: BTreeSet<usize> = result.excluded_faces.iter().map(|f| f.index()).collect();
    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix().index()) {
            continue;
        }
        let mut tri = [0usize; 3];
        for (k, v) in face.vertices().iter().enumerate() {
            let key = v.fix().index();
            let next = positions.len();
            let id = *remap.entry(key).or_insert(next);
            if id == next {
                let p = v.position();
                positions.push(Vec3::new(p.x, p.y, 0.0));
            }
            tri[k] = id;
        }
        faces.push(tri);
    }
    HalfEdgeMesh::from_faces(positions, &faces, None).expect("refined triangulation is manifold")
}

fn donut_holes() -> Vec<Circle> {
    vec![
        Circle {
            cx: -0.42,
            cy: 0.18,
            r: 0.2,
        },
        Circle {
            cx: 0.33,
            cy: 0.36,
            r: 0.15,
        },
        Circle {
            cx: 0.12,
            cy: -0.43,
            r: 0.23,
        },
    ]
}

fn pants_holes() -> Vec<Circle> {
    vec![
        Circle {
            cx: -0.4,
            cy: 0.05,
            r: 0.25,
        },
        Circle {
            cx: 0.42,
            cy: -0.08,
            r: 0.2,
        },
    ]
}

/// Closed genus-2 surface: the double of the pants with the two halves
/// lifted to z = ±h, h vanishing on the boundary.
fn genus_two(pants: &HalfEdgeMesh) -> DoubleCover {
    let mut dc = double_cover(pants).expect("pants has boundary");
    let holes = pants_holes();
    let outer = Circle {
        cx: 0.0,
        cy: 0.0,
        r: 1.0,
    };
    let height = |p: Vec3| -> f64 {
        let mut s = -outer.power(p.x, p.y);
        for h in &holes {
            s *= h.power(p.x, p.y);
        }
        s.max(0.0).sqrt()
    };
    let peak = (0..pants.n_vertices())
        .map(|v| height(pants.position(v)))
        .fold(0.0, f64::max);
    let scale = 0.35 / peak;
    let mut positions = dc.mesh.positions().to_vec();
    for v in 0..pants.n_vertices() {
        if pants.is_boundary_vertex(v) {
            continue;
        }
        let z = scale * height(pants.position(v));
        positions[v].z = z;
        positions[dc.involution[v]].z = -z;
    }
    let faces: Vec<[usize; 3]> = (0..dc.mesh.n_faces()).map(|f| dc.mesh.face_vertices(f)).collect();
    dc.mesh = HalfEdgeMesh::from_faces(positions, &faces, None).expect("lifted double");
    dc
}

fn save(mesh: &HalfEdgeMesh, path: &Path) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_obj(mesh, &mut out)?;
    out.flush()?;
    let t = mesh.topology();
    println!(
        "{}: V={} F={} g={} b={}",
        path.display(),
        mesh.n_vertices(),
        mesh.n_faces(),
        t.genus,
        t.boundary_count
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/golden".into()));
    std::fs::create_dir_all(&dir)?;

    save(&holed_disk(&donut_holes(), 0.015), &dir.join("donut.obj"))?;
    let pants = holed_disk(&pants_holes(), 0.045);
    save(&pants, &dir.join("pants.obj"))?;

    let dc = genus_two(&pants);
    let g2_path = dir.join("genus2.obj");
    save(&dc.mesh, &g2_path)?;
    // Coefficients are computed on the mesh as read back from disk so that the
    // harmonic basis matches what the CLI will compute.
    let reread = load_mesh_file(&g2_path, None)?;
    let dc = DoubleCover { mesh: reread, ..dc };
    let basis = harmonic_basis(&dc.mesh)?;
    let mut out = BufWriter::new(File::create(dir.join("genus2.coeffs"))?);
    writeln!(out, "# i j re im: Φ = Σ c·ζ_i·ζ_j")?;
    let coeffs = symmetric_default_coefficients(&dc, &basis);
    let largest = coeffs.iter().map(|t| t.2.norm()).fold(0.0, f64::max);
    for (i, j, c) in coeffs {
        // Terms at round-off level are dropped.
        if c.norm() > 1e-12 * largest {
            writeln!(out, "{i} {j} {:.16e} {:.16e}", c.re, c.im)?;
        }
    }
    out.flush()?;

    save(&shapes::flat_torus(40, 40, 1.0, 1.0), &dir.join("flat_torus.obj"))?;
    save(&shapes::annulus(24, 160, 0.45, 1.0), &dir.join("annulus.obj"))?;
    save(&shapes::icosphere(2), &dir.join("sphere.obj"))?;
    save(&shapes::tetrahedron(), &dir.join("tetrahedron.obj"))?;

    // Three triangles sharing one edge.
    std::fs::write(
        dir.join("nonmanifold.obj"),
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 -1 0\nv 0 0 1\nf 1 2 3\nf 2 1 4\nf 1 2 5\n",
    )?;
    println!("wrote {}", dir.join("nonmanifold.obj").display());
    Ok(())
}
