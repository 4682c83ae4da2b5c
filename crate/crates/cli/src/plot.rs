//! Static SVG rendering of a 3-flow sweep against its analytic region:
//! fixed isometric projection, stable/unstable scatter, binding-facet
//! wireframe. Output bytes are deterministic for fixed input.

use crate::Failure;
use qswitch::region::RateRegion;
use std::path::Path;

pub struct PlotPoint {
    pub lam: Vec<f64>,
    pub stable: bool,
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

/// Parse a sweep CSV (header `lam1,...,lamK,slope,stable,inside,agree`).
pub fn read_sweep_csv(path: &Path) -> Result<Vec<PlotPoint>, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| config_err(format!("{}: empty file", path.display())))?;
    let columns: Vec<&str> = header.split(',').collect();
    let n_lam = columns.iter().take_while(|c| c.starts_with("lam")).count();
    if n_lam == 0 {
        return Err(config_err(format!("{}: no lam columns", path.display())));
    }
    if n_lam != 3 {
        return Err(config_err(format!(
            "plotting supports 3 flows, sweep has {n_lam} (CSV output remains available)"
        )));
    }
    let stable_idx = columns
        .iter()
        .position(|c| *c == "stable")
        .ok_or_else(|| config_err(format!("{}: no 'stable' column", path.display())))?;
    let mut points = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() <= stable_idx {
            return Err(config_err(format!("{}: short row {}", path.display(), lineno + 2)));
        }
        let lam = fields[..n_lam]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| config_err(format!("{}: row {}: {e}", path.display(), lineno + 2)))?;
        let stable = match fields[stable_idx] {
            "true" => true,
            "false" => false,
            other => {
                return Err(config_err(format!(
                    "{}: row {}: bad stable value '{other}'",
                    path.display(),
                    lineno + 2
                )))
            }
        };
        points.push(PlotPoint { lam, stable });
    }
    Ok(points)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 600.0;
const SCALE: f64 = 250.0;
const CX: f64 = 320.0;
const BASE_Y: f64 = 300.0;

/// Fixed isometric projection of the unit rate cube to screen coordinates
/// (z up, screen y down).
fn project(p: &[f64]) -> (f64, f64) {
    let dx = (p[0] - p[1]) * 0.866_025_403_784_438_6;
    let dy_up = p[2] - (p[0] + p[1]) * 0.5;
    (CX + SCALE * dx, BASE_Y - SCALE * dy_up)
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn polyline(points: &[(f64, f64)]) -> String {
    points
        .iter()
        .map(|(x, y)| format!("{},{}", fmt(*x), fmt(*y)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Vertices lying on a facet, ordered around their centroid within the
/// facet plane.
fn facet_polygon(vertices: &[Vec<f64>], subset: u32, bound: f64) -> Option<Vec<Vec<f64>>> {
    let members: Vec<usize> = (0..3).filter(|i| subset & (1 << i) != 0).collect();
    let mut on_facet: Vec<Vec<f64>> = vertices
        .iter()
        .filter(|v| {
            let sum: f64 = members.iter().map(|&i| v[i]).sum();
            (sum - bound).abs() < 1e-9
        })
        .cloned()
        .collect();
    if on_facet.len() < 3 {
        return None;
    }
    let inv = 1.0 / on_facet.len() as f64;
    let centroid: Vec<f64> = (0..3)
        .map(|i| on_facet.iter().map(|v| v[i]).sum::<f64>() * inv)
        .collect();
    // Orthonormal basis of the facet plane.
    let norm = (members.len() as f64).sqrt();
    let n: Vec<f64> = (0..3)
        .map(|i| if members.contains(&i) { 1.0 / norm } else { 0.0 })
        .collect();
    let seed = if members.contains(&0) && members.len() > 1 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let dot: f64 = (0..3).map(|i| seed[i] * n[i]).sum();
    let mut u: Vec<f64> = (0..3).map(|i| seed[i] - dot * n[i]).collect();
    let ulen = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if ulen < 1e-12 {
        u = vec![0.0, 1.0, 0.0];
    } else {
        for x in &mut u {
            *x /= ulen;
        }
    }
    let w = [
        n[1] * u[2] - n[2] * u[1],
        n[2] * u[0] - n[0] * u[2],
        n[0] * u[1] - n[1] * u[0],
    ];
    on_facet.sort_by(|a, b| {
        let angle = |v: &Vec<f64>| {
            let d: Vec<f64> = (0..3).map(|i| v[i] - centroid[i]).collect();
            let du: f64 = (0..3).map(|i| d[i] * u[i]).sum();
            let dw: f64 = (0..3).map(|i| d[i] * w[i]).sum();
            dw.atan2(du)
        };
        angle(a).partial_cmp(&angle(b)).unwrap()
    });
    Some(on_facet)
}

/// Render the scatter plus the binding-facet wireframe.
pub fn render_svg(points: &[PlotPoint], region: &RateRegion) -> Result<String, Failure> {
    let vertices = region
        .vertices()
        .map_err(|e| config_err(e.to_string()))?;
    let binding = region
        .binding_facets()
        .map_err(|e| config_err(e.to_string()))?;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Unit-cube frame.
    let cube_edges: [([f64; 3], [f64; 3]); 12] = [
        ([0., 0., 0.], [1., 0., 0.]),
        ([0., 0., 0.], [0., 1., 0.]),
        ([0., 0., 0.], [0., 0., 1.]),
        ([1., 0., 0.], [1., 1., 0.]),
        ([1., 0., 0.], [1., 0., 1.]),
        ([0., 1., 0.], [1., 1., 0.]),
        ([0., 1., 0.], [0., 1., 1.]),
        ([0., 0., 1.], [1., 0., 1.]),
        ([0., 0., 1.], [0., 1., 1.]),
        ([1., 1., 0.], [1., 1., 1.]),
        ([1., 0., 1.], [1., 1., 1.]),
        ([0., 1., 1.], [1., 1., 1.]),
    ];
    for (a, b) in &cube_edges {
        let (x1, y1) = project(a);
        let (x2, y2) = project(b);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
            fmt(x1), fmt(y1), fmt(x2), fmt(y2)
        ));
    }
    // Axis labels just beyond the unit corners.
    for (label, corner) in [("lam1", [1.12, 0.0, 0.0]), ("lam2", [0.0, 1.12, 0.0]), ("lam3", [0.0, 0.0, 1.08])] {
        let (x, y) = project(&corner);
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"13\" font-family=\"sans-serif\" fill=\"#555555\" text-anchor=\"middle\">{label}</text>\n",
            fmt(x), fmt(y)
        ));
    }

    // Scatter: unstable beneath stable.
    for p in points.iter().filter(|p| !p.stable) {
        let (x, y) = project(&p.lam);
        svg.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"1.2\" fill=\"#bbbbbb\" fill-opacity=\"0.45\"/>\n",
            fmt(x), fmt(y)
        ));
    }
    for p in points.iter().filter(|p| p.stable) {
        let (x, y) = project(&p.lam);
        svg.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"#3b6fb6\" fill-opacity=\"0.85\"/>\n",
            fmt(x), fmt(y)
        ));
    }

    // Binding facet polygons on top.
    for (b, &is_binding) in region.bounds.iter().zip(&binding) {
        if !is_binding {
            continue;
        }
        if let Some(poly) = facet_polygon(&vertices, b.subset, b.bound) {
            let screen: Vec<(f64, f64)> = poly.iter().map(|v| project(v)).collect();
            svg.push_str(&format!(
                "<polygon points=\"{}\" fill=\"#c23b3b\" fill-opacity=\"0.10\" stroke=\"#c23b3b\" stroke-width=\"1.3\"/>\n",
                polyline(&screen)
            ));
        }
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}
