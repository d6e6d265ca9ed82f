//! Plot data: partition drawings and counter curves.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::io::CounterRow;
use crate::regions::{PwaLaw, StageClass};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 20.0;
const VERTEX_TOL: f64 = 1e-7;

fn fill(class: StageClass) -> &'static str {
    match class {
        StageClass::TerminalActive => "#a0a0a0",
        StageClass::LastStageActive => "#6a9fdc",
        StageClass::Interior => "#ffffff",
    }
}

/// Vertices of a bounded planar polytope `{z : C z <= d}` in counter-clockwise order.
pub fn polygon_vertices(c: &nalgebra::DMatrix<f64>, d: &nalgebra::DVector<f64>) -> Vec<(f64, f64)> {
    let rows = c.nrows();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for i in 0..rows {
        for j in i + 1..rows {
            let det = c[(i, 0)] * c[(j, 1)] - c[(i, 1)] * c[(j, 0)];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (d[i] * c[(j, 1)] - c[(i, 1)] * d[j]) / det;
            let y = (c[(i, 0)] * d[j] - d[i] * c[(j, 0)]) / det;
            let inside = (0..rows).all(|k| c[(k, 0)] * x + c[(k, 1)] * y <= d[k] + VERTEX_TOL);
            if inside && !pts.iter().any(|p| (p.0 - x).abs() < 1e-9 && (p.1 - y).abs() < 1e-9) {
                pts.push((x, y));
            }
        }
    }
    if pts.is_empty() {
        return pts;
    }
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    pts.sort_by(|a, b| (a.1 - cy).atan2(a.0 - cx).total_cmp(&(b.1 - cy).atan2(b.0 - cx)));
    pts
}

/// SVG drawing of a two-dimensional partition, one polygon per region coloured by
/// [`StageClass`]. Returns `None` unless the state dimension is two.
pub fn partition_svg(law: &PwaLaw) -> Option<String> {
    if law.n != 2 {
        return None;
    }
    let polys: Vec<(StageClass, Vec<(f64, f64)>)> = law
        .regions
        .iter()
        .map(|r| (r.class, polygon_vertices(r.polytope.c(), r.polytope.d())))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in polys.iter().flat_map(|(_, v)| v) {
        x0 = x0.min(p.0);
        x1 = x1.max(p.0);
        y0 = y0.min(p.1);
        y1 = y1.max(p.1);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
    }
    let sx = (WIDTH - 2.0 * MARGIN) / (x1 - x0).max(1e-12);
    let sy = (HEIGHT - 2.0 * MARGIN) / (y1 - y0).max(1e-12);
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(out, r##"<rect width="100%" height="100%" fill="#f4f4f4"/>"##).unwrap();
    for (k, (class, verts)) in polys.iter().enumerate() {
        if verts.len() < 3 {
            continue;
        }
        let points: Vec<String> = verts
            .iter()
            .map(|&(x, y)| format!("{:.3},{:.3}", MARGIN + (x - x0) * sx, HEIGHT - MARGIN - (y - y0) * sy))
            .collect();
        writeln!(
            out,
            r##"<polygon id="r{k}" class="{}" points="{}" fill="{}" stroke="#000000" stroke-width="0.5"/>"##,
            class_name(*class),
            points.join(" "),
            fill(*class)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    Some(out)
}

fn class_name(class: StageClass) -> &'static str {
    match class {
        StageClass::TerminalActive => "terminal_active",
        StageClass::LastStageActive => "last_stage_active",
        StageClass::Interior => "interior",
    }
}

/// Region table: index, active set, class, number of facets and Chebyshev data.
pub fn region_csv(law: &PwaLaw) -> String {
    let mut out = String::from("region,active_set,stage_classification,facets,center,radius\n");
    for (k, r) in law.regions.iter().enumerate() {
        let (center, radius) = r
            .polytope
            .chebyshev_ball()
            .map(|(c, r)| (c.iter().map(|v| format!("{v:.9}")).collect::<Vec<_>>().join(" "), r))
            .unwrap_or_default();
        let aset: Vec<String> = r.aset.indices().iter().map(u32::to_string).collect();
        writeln!(
            out,
            "{k},{},{},{},{center},{radius:.9}",
            aset.join(" "),
            class_name(r.class),
            r.polytope.num_rows()
        )
        .unwrap();
    }
    out
}

/// Counter curves in long form, `counter,N,dp,baseline`, with empty cells where an algorithm
/// has no value.
pub fn curves_csv(rows: &[CounterRow]) -> String {
    let mut table: BTreeMap<(&str, usize), [Option<u64>; 2]> = BTreeMap::new();
    for r in rows {
        let slot = match r.algorithm.as_str() {
            "dp" => 0,
            "baseline" => 1,
            _ => continue,
        };
        for (name, value) in [
            ("candidates", r.candidates),
            ("pruning_tests", r.pruning_tests),
            ("rank_tests", r.rank_tests),
            ("optimality_lps", r.optimality_lps),
            ("feasibility_lps", r.feasibility_lps),
        ] {
            table.entry((name, r.horizon)).or_default()[slot] = Some(value);
        }
    }
    let order = [
        "candidates",
        "pruning_tests",
        "rank_tests",
        "optimality_lps",
        "feasibility_lps",
    ];
    let mut out = String::from("counter,N,dp,baseline\n");
    for name in order {
        for ((_, n), v) in table.range((name, 0)..=(name, usize::MAX)) {
            let cell = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{name},{n},{},{}", cell(v[0]), cell(v[1])).unwrap();
        }
    }
    out
}
