//! Brute-force planar coverage rasterizer used as a reference.
//!
//! Kept independent of the library's coverage evaluator: it samples a regular
//! grid over the bounding box, keeps grid points inside the triangulation and
//! tests each against every path segment in its bucket row.

pub struct Raster {
    pub inside: usize,
    pub covered: usize,
}

impl Raster {
    pub fn rate(&self) -> f64 {
        self.covered as f64 / self.inside as f64
    }
}

fn inside_triangle(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    let s = |u: [f64; 2], v: [f64; 2]| (v[0] - u[0]) * (p[1] - u[1]) - (v[1] - u[1]) * (p[0] - u[0]);
    let (d1, d2, d3) = (s(a, b), s(b, c), s(c, a));
    let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(neg && pos)
}

fn segment_distance2(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let l2 = dx * dx + dy * dy;
    let t = if l2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (x, y) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    x * x + y * y
}

/// Coverage of the planar triangulation by the δ-neighbourhood of `path`,
/// sampled on a square grid of pitch `pitch`.
pub fn raster_coverage(
    points: &[[f64; 2]],
    triangles: &[[usize; 3]],
    path: &[[f64; 2]],
    delta: f64,
    pitch: f64,
) -> Raster {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let nx = ((hi[0] - lo[0]) / pitch).ceil() as usize + 1;
    let ny = ((hi[1] - lo[1]) / pitch).ceil() as usize + 1;
    let row_of = |y: f64| (((y - lo[1]) / pitch).floor().max(0.0) as usize).min(ny - 1);

    // Triangles and segments bucketed by grid row only.
    let mut tri_rows: Vec<Vec<usize>> = vec![Vec::new(); ny];
    for (t, tri) in triangles.iter().enumerate() {
        let ys = tri.map(|v| points[v][1]);
        let (a, b) = (
            ys.iter().cloned().fold(f64::INFINITY, f64::min),
            ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        for r in row_of(a)..=row_of(b) {
            tri_rows[r].push(t);
        }
    }
    let mut seg_rows: Vec<Vec<usize>> = vec![Vec::new(); ny];
    for s in 0..path.len().saturating_sub(1) {
        let (a, b) = (path[s][1].min(path[s + 1][1]), path[s][1].max(path[s + 1][1]));
        for r in row_of(a - delta)..=row_of(b + delta) {
            seg_rows[r].push(s);
        }
    }
    let mut out = Raster { inside: 0, covered: 0 };
    for j in 0..ny {
        let y = lo[1] + (j as f64 + 0.5) * pitch;
        if y > hi[1] {
            continue;
        }
        for i in 0..nx {
            let x = lo[0] + (i as f64 + 0.5) * pitch;
            let p = [x, y];
            let r = row_of(y);
            let inside = tri_rows[r].iter().any(|&t| {
                let [a, b, c] = triangles[t];
                inside_triangle(p, points[a], points[b], points[c])
            });
            if !inside {
                continue;
            }
            out.inside += 1;
            if seg_rows[r]
                .iter()
                .any(|&s| segment_distance2(p, path[s], path[s + 1]) <= delta * delta)
            {
                out.covered += 1;
            }
        }
    }
    out
}
