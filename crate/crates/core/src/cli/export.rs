//! SVG, OBJ and CSV artifacts.

use std::io::Write;

use crate::decomposition::CellDecomposition;
use crate::mesh::io::{write_obj_groups, write_obj_polylines};
use crate::mesh::{HalfEdgeMesh, Vec3};
use crate::pipeline::Analysis;
use crate::planner::{CoveragePath, SegmentKind};

use super::json::num17;

const SVG_WIDTH: f64 = 1000.0;

fn kind_name(k: SegmentKind) -> &'static str {
    match k {
        SegmentKind::Sweep => "sweep",
        SegmentKind::Turn => "turn",
        SegmentKind::Transfer => "transfer",
    }
}

/// Maps the xy bounding box (with a margin) to a picture `SVG_WIDTH` wide,
/// y pointing up.
struct Canvas {
    x0: f64,
    y1: f64,
    scale: f64,
    height: f64,
}

impl Canvas {
    fn new(mesh: &HalfEdgeMesh) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in mesh.positions() {
            lo = [lo[0].min(p.x), lo[1].min(p.y)];
            hi = [hi[0].max(p.x), hi[1].max(p.y)];
        }
        let margin = 0.02 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let (x0, x1, y0, y1) = (lo[0] - margin, hi[0] + margin, lo[1] - margin, hi[1] + margin);
        let scale = SVG_WIDTH / (x1 - x0);
        Canvas {
            x0,
            y1,
            scale,
            height: (y1 - y0) * scale,
        }
    }

    fn pt(&self, p: &Vec3) -> String {
        format!(
            "{:.3},{:.3}",
            (p.x - self.x0) * self.scale,
            (self.y1 - p.y) * self.scale
        )
    }

    fn points(&self, pts: &[Vec3]) -> String {
        pts.iter().map(|p| self.pt(p)).collect::<Vec<_>>().join(" ")
    }
}

fn cell_colour(c: usize) -> String {
    // Golden-angle hue steps keep neighbouring ids apart; pastel HSL to hex.
    let h = (c as f64 * 137.507_764_050_037_85) % 360.0 / 60.0;
    let (s, l) = (0.45, 0.86);
    let chroma = (1.0 - (2.0 * l - 1.0_f64).abs()) * s;
    let x = chroma * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as usize {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    let m = l - chroma / 2.0;
    let byte = |v: f64| ((v + m) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", byte(r), byte(g), byte(b))
}

/// Planar figure: cells tinted, swept band of radius `delta` in light blue,
/// the path, the critical arcs and the zeros.
pub fn write_svg<W: Write>(
    mesh: &HalfEdgeMesh,
    analysis: Option<&Analysis>,
    path: &CoveragePath,
    delta: f64,
    out: &mut W,
) -> std::io::Result<()> {
    let cv = Canvas::new(mesh);
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#,
        w = SVG_WIDTH,
        h = cv.height
    )?;
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    match analysis {
        Some(a) if !a.decomposition.fragments.is_empty() => {
            for c in 0..a.decomposition.cells.len() {
                let colour = cell_colour(c);
                writeln!(
                    out,
                    r#"<g id="cell{c}" fill="{colour}" stroke="{colour}" stroke-width="0.5">"#
                )?;
                for fr in a.decomposition.fragments.iter().filter(|fr| fr.cell == c) {
                    writeln!(out, r#"<polygon points="{}"/>"#, cv.points(&fr.ambient(mesh)))?;
                }
                writeln!(out, "</g>")?;
            }
        }
        _ => {
            let colour = cell_colour(0);
            writeln!(
                out,
                r#"<g id="surface" fill="{colour}" stroke="{colour}" stroke-width="0.5">"#
            )?;
            for f in 0..mesh.n_faces() {
                writeln!(out, r#"<polygon points="{}"/>"#, cv.points(&mesh.face_corners(f)))?;
            }
            writeln!(out, "</g>")?;
        }
    }
    let outline: Vec<Vec<Vec3>> = mesh
        .boundary_loops()
        .iter()
        .map(|l| {
            let mut pts: Vec<Vec3> = l.iter().map(|&h| mesh.position(mesh.origin(h))).collect();
            pts.push(pts[0]);
            pts
        })
        .collect();
    let polyline = |pts: &[Vec3], style: &str, out: &mut W| -> std::io::Result<()> {
        writeln!(out, r#"<polyline points="{}" {style}/>"#, cv.points(pts))
    };
    let pts = path.points();
    let band = format!(
        r#"fill="none" stroke="lightblue" stroke-opacity="0.7" stroke-width="{:.3}" stroke-linejoin="round" stroke-linecap="round""#,
        2.0 * delta * cv.scale
    );
    writeln!(out, r#"<g id="covered">"#)?;
    polyline(&pts, &band, out)?;
    writeln!(out, "</g>")?;
    writeln!(out, r#"<g id="boundary">"#)?;
    for l in &outline {
        polyline(l, r#"fill="none" stroke="black" stroke-width="1""#, out)?;
    }
    writeln!(out, "</g>")?;
    writeln!(out, r#"<g id="path">"#)?;
    polyline(&pts, r#"fill="none" stroke="navy" stroke-width="0.6""#, out)?;
    writeln!(out, "</g>")?;
    if let Some(a) = analysis {
        writeln!(out, r#"<g id="critical">"#)?;
        for arc in &a.graph.arcs {
            polyline(
                &arc.trajectory.positions(),
                r#"fill="none" stroke="crimson" stroke-width="1.2""#,
                out,
            )?;
        }
        for z in &a.zeros {
            let p = mesh.position(z.vertex);
            let (x, y) = ((p.x - cv.x0) * cv.scale, (cv.y1 - p.y) * cv.scale);
            writeln!(out, r#"<circle cx="{x:.3}" cy="{y:.3}" r="4" fill="black"/>"#)?;
        }
        writeln!(out, "</g>")?;
    }
    writeln!(out, "</svg>")
}

/// Path segments as OBJ polylines named `<index>_<kind>_cell<c>_visit<v>`.
pub fn write_path_obj<W: Write>(path: &CoveragePath, out: &mut W) -> std::io::Result<()> {
    let lines: Vec<(String, Vec<Vec3>)> = path
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| {
            (
                format!("{i:05}_{}_cell{}_visit{}", kind_name(s.kind), s.cell, s.visit),
                s.points.clone(),
            )
        })
        .collect();
    write_obj_polylines(&lines, out)
}

/// Critical arcs as OBJ polylines.
pub fn write_arcs_obj<W: Write>(analysis: &Analysis, out: &mut W) -> std::io::Result<()> {
    let lines: Vec<(String, Vec<Vec3>)> = analysis
        .graph
        .arcs
        .iter()
        .map(|a| (format!("arc{}", a.id), a.trajectory.positions()))
        .collect();
    write_obj_polylines(&lines, out)
}

/// One OBJ group of polygons per cell.
pub fn write_cells_obj<W: Write>(mesh: &HalfEdgeMesh, decomp: &CellDecomposition, out: &mut W) -> std::io::Result<()> {
    let mut groups: Vec<(String, Vec<Vec<Vec3>>)> = (0..decomp.cells.len())
        .map(|c| (format!("cell{c}"), Vec::new()))
        .collect();
    for fr in &decomp.fragments {
        groups[fr.cell].1.push(fr.ambient(mesh));
    }
    write_obj_groups(&groups, out)
}

pub const CSV_HEADER: &str = "epsilon,delta,coverage_rate,overlap_rate,path_length";

pub fn csv_row(epsilon: f64, delta: f64, coverage: f64, overlap: f64, length: f64) -> String {
    format!(
        "{},{},{},{},{}",
        num17(epsilon),
        num17(delta),
        num17(coverage),
        num17(overlap),
        num17(length)
    )
}

/// Marker row closing a sweep that stopped on an error.
pub fn csv_failure_row(epsilon: f64, delta: f64, error: &crate::Error) -> String {
    let full = error.to_string();
    let msg = full
        .strip_prefix(error.name())
        .and_then(|m| m.strip_prefix(": "))
        .unwrap_or(&full)
        .replace([',', '\n'], ";");
    format!("FAILED,{},{},{},{msg}", num17(epsilon), num17(delta), error.name())
}
