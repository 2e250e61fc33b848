//! Small procedural meshes used by tests, benches and the reference-mesh
//! generator.

use std::f64::consts::PI;

use crate::mesh::{HalfEdgeMesh, Vec3};

fn build(positions: Vec<Vec3>, faces: Vec<[usize; 3]>, period: Option<[f64; 2]>) -> HalfEdgeMesh {
    HalfEdgeMesh::from_faces(positions, &faces, period).expect("procedural mesh is manifold")
}

pub fn single_triangle() -> HalfEdgeMesh {
    build(
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ],
        vec![[0, 1, 2]],
        None,
    )
}

pub fn tetrahedron() -> HalfEdgeMesh {
    build(
        vec![
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.0, -1.0, -1.0),
            Vec3::new(-1.0, 1.0, -1.0),
            Vec3::new(-1.0, -1.0, 1.0),
        ],
        vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
        None,
    )
}

/// Icosahedron refined `levels` times and projected to the unit sphere.
pub fn icosphere(levels: usize) -> HalfEdgeMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut pos: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..levels {
        let mut mid = std::collections::HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, pos: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                pos.push(((pos[a] + pos[b]) * 0.5).normalize());
                pos.len() - 1
            })
        };
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut pos);
            let bc = midpoint(b, c, &mut pos);
            let ca = midpoint(c, a, &mut pos);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    build(pos, faces, None)
}

/// Flat torus: `nx × ny` vertex grid on `[0, lx) × [0, ly)` with periodic
/// identification. Every square is split along the same diagonal.
pub fn flat_torus(nx: usize, ny: usize, lx: f64, ly: f64) -> HalfEdgeMesh {
    let mut pos = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            pos.push(Vec3::new(lx * i as f64 / nx as f64, ly * j as f64 / ny as f64, 0.0));
        }
    }
    let id = |i: usize, j: usize| (j % ny) * nx + (i % nx);
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    build(pos, faces, Some([lx, ly]))
}

/// Planar rectangle grid `[0, w] × [0, h]` with `nx × ny` cells, skipping
/// the cells for which `hole(i, j)` is true. Unused vertices are dropped.
pub fn grid_with_holes(nx: usize, ny: usize, w: f64, h: f64, hole: impl Fn(usize, usize) -> bool) -> HalfEdgeMesh {
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if hole(i, j) {
                continue;
            }
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            // Alternate diagonals to avoid a global directional bias.
            if (i + j) % 2 == 0 {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            } else {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            }
        }
    }
    let mut remap = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut pos = Vec::new();
    for f in &mut faces {
        for v in f.iter_mut() {
            if remap[*v] == usize::MAX {
                remap[*v] = pos.len();
                let (i, j) = (*v % (nx + 1), *v / (nx + 1));
                pos.push(Vec3::new(w * i as f64 / nx as f64, h * j as f64 / ny as f64, 0.0));
            }
            *v = remap[*v];
        }
    }
    build(pos, faces, None)
}

pub fn strip(nx: usize, ny: usize, w: f64, h: f64) -> HalfEdgeMesh {
    grid_with_holes(nx, ny, w, h, |_, _| false)
}

/// Planar annulus with `n_r` rings of quads split into triangles.
pub fn annulus(n_r: usize, n_theta: usize, r_in: f64, r_out: f64) -> HalfEdgeMesh {
    let mut pos = Vec::new();
    for k in 0..=n_r {
        let r = r_in + (r_out - r_in) * k as f64 / n_r as f64;
        for i in 0..n_theta {
            let th = 2.0 * PI * (i as f64 + 0.5 * k as f64) / n_theta as f64;
            pos.push(Vec3::new(r * th.cos(), r * th.sin(), 0.0));
        }
    }
    let id = |k: usize, i: usize| k * n_theta + i % n_theta;
    let mut faces = Vec::new();
    for k in 0..n_r {
        for i in 0..n_theta {
            let (a, b, c, d) = (id(k, i), id(k, i + 1), id(k + 1, i + 1), id(k + 1, i));
            faces.push([a, d, b]);
            faces.push([b, d, c]);
        }
    }
    build(pos, faces, None)
}

/// Planar disk: center vertex plus `n_r` rings.
pub fn disk(n_r: usize, n_theta: usize, radius: f64) -> HalfEdgeMesh {
    let mut pos = vec![Vec3::zeros()];
    for k in 1..=n_r {
        let r = radius * k as f64 / n_r as f64;
        for i in 0..n_theta {
            let th = 2.0 * PI * i as f64 / n_theta as f64;
            pos.push(Vec3::new(r * th.cos(), r * th.sin(), 0.0));
        }
    }
    let id = |k: usize, i: usize| 1 + (k - 1) * n_theta + i % n_theta;
    let mut faces = Vec::new();
    for i in 0..n_theta {
        faces.push([0, id(1, i), id(1, i + 1)]);
    }
    for k in 1..n_r {
        for i in 0..n_theta {
            let (a, b, c, d) = (id(k, i), id(k, i + 1), id(k + 1, i + 1), id(k + 1, i));
            faces.push([a, d, c]);
            faces.push([a, c, b]);
        }
    }
    build(pos, faces, None)
}

/// Torus of revolution with major radius `big_r` and tube radius `small_r`.
pub fn torus_of_revolution(n_u: usize, n_v: usize, big_r: f64, small_r: f64) -> HalfEdgeMesh {
    let mut pos = Vec::new();
    for j in 0..n_v {
        let v = 2.0 * PI * j as f64 / n_v as f64;
        for i in 0..n_u {
            let u = 2.0 * PI * i as f64 / n_u as f64;
            let rr = big_r + small_r * v.cos();
            pos.push(Vec3::new(rr * u.cos(), rr * u.sin(), small_r * v.sin()));
        }
    }
    let id = |i: usize, j: usize| (j % n_v) * n_u + i % n_u;
    let mut faces = Vec::new();
    for j in 0..n_v {
        for i in 0..n_u {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    build(pos, faces, None)
}

/// Square grid with three square holes: a planar disk with three holes (b = 4).
pub fn three_hole_grid(n: usize) -> HalfEdgeMesh {
    let s = n as f64;
    grid_with_holes(n, n, 1.0, 1.0, move |i, j| {
        let (x, y) = ((i as f64 + 0.5) / s, (j as f64 + 0.5) / s);
        let in_box = |cx: f64, cy: f64, r: f64| (x - cx).abs() < r && (y - cy).abs() < r;
        in_box(0.27, 0.3, 0.09) || in_box(0.7, 0.28, 0.08) || in_box(0.45, 0.72, 0.1)
    })
}

/// Square grid with two square holes (b = 3).
pub fn two_hole_grid(n: usize) -> HalfEdgeMesh {
    let s = n as f64;
    grid_with_holes(n, n, 1.0, 1.0, move |i, j| {
        let (x, y) = ((i as f64 + 0.5) / s, (j as f64 + 0.5) / s);
        let in_box = |cx: f64, cy: f64, r: f64| (x - cx).abs() < r && (y - cy).abs() < r;
        in_box(0.3, 0.35, 0.1) || in_box(0.68, 0.62, 0.12)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn procedural_topologies() {
        assert_eq!(tetrahedron().topology().genus, 0);
        assert_eq!(icosphere(2).topology().euler_characteristic, 2);
        let t = flat_torus(16, 16, 1.0, 1.0).topology();
        assert_eq!((t.genus, t.boundary_count, t.euler_characteristic), (1, 0, 0));
        assert_eq!(torus_of_revolution(12, 8, 2.0, 0.5).topology().genus, 1);
        let a = annulus(3, 20, 0.5, 1.0).topology();
        assert_eq!((a.genus, a.boundary_count, a.euler_characteristic), (0, 2, 0));
        let d = three_hole_grid(40).topology();
        assert_eq!((d.genus, d.boundary_count, d.euler_characteristic), (0, 4, -2));
        assert_eq!(two_hole_grid(30).topology().boundary_count, 3);
        assert_eq!(disk(4, 16, 1.0).topology().boundary_count, 1);
    }
}
