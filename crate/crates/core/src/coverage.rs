//! Swept-area coverage and overlap of a path for a disk robot of radius δ.

use std::collections::HashMap;

use serde::Serialize;

use crate::decomposition::CellDecomposition;
use crate::error::{Error, Result};
use crate::mesh::{FaceId, HalfEdgeMesh, Vec3};
use crate::planner::CoveragePath;

/// Samples per δ along each direction unless told otherwise.
pub const DEFAULT_RESOLUTION: usize = 8;

/// Upper bound on the number of samples of one evaluation.
const MAX_SAMPLES: f64 = 4e8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCoverage {
    pub cell: usize,
    pub area: f64,
    pub coverage_rate: f64,
    pub overlap_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub coverage_rate: f64,
    pub overlap_rate: f64,
    pub path_length: f64,
    pub delta: f64,
    pub resolution: usize,
    pub samples: usize,
    pub sampled_area: f64,
    /// False when distances are straight-line distances on a curved surface.
    pub exact_distance: bool,
    pub per_cell: Vec<CellCoverage>,
}

/// Path polyline flattened to segments with the arc length at their start.
struct Segments {
    a: Vec<Vec3>,
    d: Vec<Vec3>,
    s0: Vec<f64>,
    total: f64,
    closed: bool,
}

impl Segments {
    fn new(mesh: &HalfEdgeMesh, path: &CoveragePath) -> Self {
        let pts = path.points();
        let mut out = Segments {
            a: Vec::with_capacity(pts.len()),
            d: Vec::with_capacity(pts.len()),
            s0: Vec::with_capacity(pts.len()),
            total: 0.0,
            closed: path.is_closed(),
        };
        for w in pts.windows(2) {
            let d = mesh.min_image(w[1] - w[0]);
            out.a.push(w[0]);
            out.d.push(d);
            out.s0.push(out.total);
            out.total += d.norm();
        }
        out
    }

    /// Distance from `p` to segment `k` and the arc length of the closest point.
    fn closest(&self, mesh: &HalfEdgeMesh, k: usize, p: Vec3) -> (f64, f64) {
        let w = mesh.min_image(p - self.a[k]);
        let d = self.d[k];
        let l2 = d.norm_squared();
        let t = if l2 > 0.0 {
            (w.dot(&d) / l2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        ((w - d * t).norm(), self.s0[k] + t * l2.sqrt())
    }

    fn separation(&self, s: f64, t: f64) -> f64 {
        let d = (s - t).abs();
        if self.closed {
            d.min(self.total - d)
        } else {
            d
        }
    }
}

/// Uniform bucket grid over segment bounding boxes grown by δ. Periodic axes
/// wrap their bucket index.
struct Buckets {
    size: [f64; 3],
    wrap: [Option<i64>; 3],
    map: HashMap<[i64; 3], Vec<u32>>,
}

impl Buckets {
    fn new(mesh: &HalfEdgeMesh, segs: &Segments, delta: f64) -> Self {
        let cell = 2.0 * delta;
        let mut size = [cell; 3];
        let mut wrap = [None; 3];
        if let Some(period) = mesh.period() {
            for k in 0..2 {
                let n = ((period[k] / cell).floor() as i64).max(1);
                size[k] = period[k] / n as f64;
                wrap[k] = Some(n);
            }
        }
        let mut b = Buckets {
            size,
            wrap,
            map: HashMap::new(),
        };
        for k in 0..segs.a.len() {
            let (a, c) = (segs.a[k], segs.a[k] + segs.d[k]);
            let mut range = [(0i64, 0i64); 3];
            for ax in 0..3 {
                let lo = ((a[ax].min(c[ax]) - delta) / b.size[ax]).floor() as i64;
                let mut hi = ((a[ax].max(c[ax]) + delta) / b.size[ax]).floor() as i64;
                if let Some(n) = b.wrap[ax] {
                    hi = hi.min(lo + n - 1);
                }
                range[ax] = (lo, hi);
            }
            for i in range[0].0..=range[0].1 {
                for j in range[1].0..=range[1].1 {
                    for l in range[2].0..=range[2].1 {
                        let key = b.key([i, j, l]);
                        b.map.entry(key).or_default().push(k as u32);
                    }
                }
            }
        }
        b
    }

    fn key(&self, mut idx: [i64; 3]) -> [i64; 3] {
        for ax in 0..3 {
            if let Some(n) = self.wrap[ax] {
                idx[ax] = idx[ax].rem_euclid(n);
            }
        }
        idx
    }

    fn near(&self, p: Vec3) -> &[u32] {
        let idx = [0, 1, 2].map(|ax| (p[ax] / self.size[ax]).floor() as i64);
        self.map.get(&self.key(idx)).map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    area: f64,
    covered: f64,
    overlapped: f64,
}

/// Evaluates `path` on `mesh` for a robot of radius `delta` (ambient units),
/// sampling each face at `resolution` points per δ along each direction.
/// With `cells`, the tallies are also broken down per cell.
pub fn evaluate(
    mesh: &HalfEdgeMesh,
    path: &CoveragePath,
    delta: f64,
    resolution: usize,
    cells: Option<&CellDecomposition>,
) -> Result<CoverageReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!("robot radius must be positive, got {delta}")));
    }
    if resolution < 4 {
        return Err(Error::Resolution(format!(
            "{resolution} samples per radius, need at least 4"
        )));
    }
    if path.segments.is_empty() || path.points().len() < 2 {
        return Err(Error::EmptyPath);
    }
    let pitch = delta / resolution as f64;
    let divisions: Vec<usize> = (0..mesh.n_faces())
        .map(|f| {
            let c = mesh.face_corners(f);
            let longest = (c[1] - c[0]).norm().max((c[2] - c[1]).norm()).max((c[0] - c[2]).norm());
            ((longest / pitch).ceil() as usize).max(1)
        })
        .collect();
    let n_samples: f64 = divisions.iter().map(|&n| (n * n) as f64).sum();
    if n_samples > MAX_SAMPLES {
        return Err(Error::Resolution(format!(
            "{n_samples:.3e} samples exceed the limit of {MAX_SAMPLES:.0e}"
        )));
    }
    let segs = Segments::new(mesh, path);
    let buckets = Buckets::new(mesh, &segs, delta);
    let by_face: HashMap<FaceId, Vec<usize>> = match cells {
        Some(d) => {
            let mut m: HashMap<FaceId, Vec<usize>> = HashMap::new();
            for (k, fr) in d.fragments.iter().enumerate() {
                m.entry(fr.face).or_default().push(k);
            }
            m
        }
        None => HashMap::new(),
    };
    let n_cells = cells.map_or(0, |d| d.cells.len());

    let per_face: Vec<(Tally, Vec<(usize, Tally)>)> = crate::par::map_range(mesh.n_faces(), |f| {
        let n = divisions[f];
        let corners = mesh.face_corners(f);
        let weight = mesh.face_area(f) / (n * n) as f64;
        let fr = mesh.frame(f);
        let frags = by_face.get(&f).map(Vec::as_slice).unwrap_or(&[]);
        let mut total = Tally::default();
        let mut split: Vec<(usize, Tally)> = Vec::new();
        let mut hits: Vec<f64> = Vec::new();
        let mut sample = |b: [f64; 3]| {
            let p = corners[0] * b[0] + corners[1] * b[1] + corners[2] * b[2];
            let q = mesh.wrap(p);
            hits.clear();
            for &k in buckets.near(q) {
                let (dist, s) = segs.closest(mesh, k as usize, q);
                if dist <= delta {
                    hits.push(s);
                }
            }
            let covered = !hits.is_empty();
            let overlapped = hits
                .iter()
                .enumerate()
                .any(|(i, &s)| hits[i + 1..].iter().any(|&t| segs.separation(s, t) > 4.0 * delta));
            let t = Tally {
                area: weight,
                covered: if covered { weight } else { 0.0 },
                overlapped: if overlapped { weight } else { 0.0 },
            };
            total.area += t.area;
            total.covered += t.covered;
            total.overlapped += t.overlapped;
            if let Some(d) = cells {
                let cell = match frags {
                    [] => None,
                    [only] => Some(d.fragments[*only].cell),
                    _ => {
                        let z = fr.from_barycentric(b);
                        d.cell_in(frags, z)
                    }
                };
                if let Some(c) = cell {
                    match split.iter_mut().find(|e| e.0 == c) {
                        Some(e) => {
                            e.1.area += t.area;
                            e.1.covered += t.covered;
                            e.1.overlapped += t.overlapped;
                        }
                        None => split.push((c, t)),
                    }
                }
            }
        };
        let inv = 1.0 / n as f64;
        for i in 0..n {
            for j in 0..n - i {
                let (u, v) = (i as f64, j as f64);
                sample([
                    (u + 1.0 / 3.0) * inv,
                    (v + 1.0 / 3.0) * inv,
                    1.0 - (u + v + 2.0 / 3.0) * inv,
                ]);
                if i + j + 1 < n {
                    sample([
                        (u + 2.0 / 3.0) * inv,
                        (v + 2.0 / 3.0) * inv,
                        1.0 - (u + v + 4.0 / 3.0) * inv,
                    ]);
                }
            }
        }
        (total, split)
    });

    let mut total = Tally::default();
    let mut cell_tally = vec![Tally::default(); n_cells];
    for (t, split) in &per_face {
        total.area += t.area;
        total.covered += t.covered;
        total.overlapped += t.overlapped;
        for &(c, s) in split {
            cell_tally[c].area += s.area;
            cell_tally[c].covered += s.covered;
            cell_tally[c].overlapped += s.overlapped;
        }
    }
    let rate = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    Ok(CoverageReport {
        coverage_rate: rate(total.covered, total.area),
        overlap_rate: rate(total.overlapped, total.area),
        path_length: path.length(mesh),
        delta,
        resolution,
        samples: n_samples as usize,
        sampled_area: total.area,
        exact_distance: mesh.is_planar(1e-9),
        per_cell: cell_tally
            .iter()
            .enumerate()
            .map(|(cell, t)| CellCoverage {
                cell,
                area: t.area,
                coverage_rate: rate(t.covered, t.area),
                overlap_rate: rate(t.overlapped, t.area),
            })
            .collect(),
    })
}

/// Monte Carlo estimate of the coverage rate from `samples` points drawn
/// uniformly by area with a seeded generator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpotCheck {
    pub seed: u64,
    pub samples: usize,
    pub coverage_rate: f64,
}

pub fn spot_check(
    mesh: &HalfEdgeMesh,
    path: &CoveragePath,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<SpotCheck> {
    use rand::{Rng, SeedableRng};
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!("robot radius must be positive, got {delta}")));
    }
    if path.segments.is_empty() || path.points().len() < 2 {
        return Err(Error::EmptyPath);
    }
    let segs = Segments::new(mesh, path);
    let buckets = Buckets::new(mesh, &segs, delta);
    let mut cum = Vec::with_capacity(mesh.n_faces());
    let mut acc = 0.0;
    for f in 0..mesh.n_faces() {
        acc += mesh.face_area(f);
        cum.push(acc);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut hit = 0usize;
    for _ in 0..samples {
        let r: f64 = rng.random::<f64>() * acc;
        let f = cum.partition_point(|&c| c < r).min(mesh.n_faces() - 1);
        let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let c = mesh.face_corners(f);
        let q = mesh.wrap(c[0] * (1.0 - u - v) + c[1] * u + c[2] * v);
        if buckets
            .near(q)
            .iter()
            .any(|&k| segs.closest(mesh, k as usize, q).0 <= delta)
        {
            hit += 1;
        }
    }
    Ok(SpotCheck {
        seed,
        samples,
        coverage_rate: if samples > 0 { hit as f64 / samples as f64 } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::SegmentKind;

    fn strip(length: f64, width: f64, n: usize) -> HalfEdgeMesh {
        let mut pos = Vec::new();
        for i in 0..=n {
            let x = length * i as f64 / n as f64;
            pos.push(Vec3::new(x, -0.5 * width, 0.0));
            pos.push(Vec3::new(x, 0.5 * width, 0.0));
        }
        let mut faces = Vec::new();
        for i in 0..n {
            let (a, b, c, d) = (2 * i, 2 * i + 1, 2 * i + 2, 2 * i + 3);
            faces.push([a, c, d]);
            faces.push([a, d, b]);
        }
        HalfEdgeMesh::from_faces(pos, &faces, None).unwrap()
    }

    fn line(points: Vec<Vec3>) -> CoveragePath {
        let mut p = CoveragePath::default();
        p.segments.push(crate::planner::PathSegment {
            kind: SegmentKind::Sweep,
            cell: 0,
            visit: 1,
            points,
        });
        p
    }

    #[test]
    fn straight_stroke_covers_its_strip() {
        let delta = 0.05;
        let mesh = strip(1.0, 2.0 * delta, 10);
        let path = line(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)]);
        let r = evaluate(&mesh, &path, delta, 8, None).unwrap();
        assert!((r.coverage_rate - 1.0).abs() < 1e-12);
        assert_eq!(r.overlap_rate, 0.0);
        assert!((r.path_length - 1.0).abs() < 1e-12);
        assert!((r.sampled_area - 2.0 * delta).abs() < 1e-12);
    }

    #[test]
    fn doubling_back_counts_as_overlap() {
        let delta = 0.05;
        let mesh = strip(1.0, 2.0 * delta, 10);
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 0.0, 0.0);
        let r = evaluate(&mesh, &line(vec![a, b, a]), delta, 8, None).unwrap();
        assert!(r.overlap_rate > 0.7);
    }

    #[test]
    fn preconditions() {
        let mesh = strip(1.0, 0.1, 4);
        let path = line(vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)]);
        assert!(matches!(evaluate(&mesh, &path, 0.0, 8, None), Err(Error::Config(_))));
        assert!(matches!(
            evaluate(&mesh, &path, 0.1, 3, None),
            Err(Error::Resolution(_))
        ));
        assert!(matches!(
            evaluate(&mesh, &CoveragePath::default(), 0.1, 8, None),
            Err(Error::EmptyPath)
        ));
    }
}
