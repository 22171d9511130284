use std::fmt::Write;

use qg::landscape::GridResult;

const CELL: f64 = 8.0;
const MARGIN: f64 = 40.0;

/// Five-stop approximation of the viridis colour map.
fn colour(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 1.0 };
    let x = t * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Heatmap of the grid values with the argmin cell outlined in red.
///
/// Colours are scaled by rank so saturated regions stay readable.
pub fn heatmap(grid: &GridResult, title: &str) -> String {
    let (ny, nx) = (grid.ys.len(), grid.xs.len());
    let width = 2.0 * MARGIN + nx as f64 * CELL;
    let height = 2.0 * MARGIN + ny as f64 * CELL;
    let mut sorted: Vec<f64> = grid.values.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let rank = |v: f64| {
        let r = sorted.partition_point(|&s| s < v);
        if sorted.len() > 1 {
            r as f64 / (sorted.len() - 1) as f64
        } else {
            0.0
        }
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="14">{title}</text>"#,
        MARGIN / 2.0
    );
    for iy in 0..ny {
        // Larger y is drawn higher.
        let y = MARGIN + (ny - 1 - iy) as f64 * CELL;
        for ix in 0..nx {
            let x = MARGIN + ix as f64 * CELL;
            let _ = writeln!(
                out,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"/>"#,
                colour(rank(grid.values[(iy, ix)]))
            );
        }
    }
    let (ay, ax) = grid.argmin;
    let _ = writeln!(
        out,
        r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="none" stroke="red" stroke-width="2"/>"#,
        MARGIN + ax as f64 * CELL,
        MARGIN + (ny - 1 - ay) as f64 * CELL
    );
    let axis_y = height - MARGIN / 2.0;
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{axis_y}" font-family="sans-serif" font-size="10">x ∈ [{}, {}], y ∈ [{}, {}], argmin ({}, {})</text>"#,
        grid.xs[0],
        grid.xs[nx - 1],
        grid.ys[0],
        grid.ys[ny - 1],
        grid.xs[ax],
        grid.ys[ay]
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use qg::landscape::{figure_domain, grid_eval, GridObjective, GridSpec};

    #[test]
    fn colour_endpoints() {
        assert_eq!(colour(0.0), "#440154");
        assert_eq!(colour(1.0), "#fde725");
        assert_eq!(colour(f64::NAN), "#fde725");
    }

    #[test]
    fn heatmap_has_one_rect_per_cell_and_a_marker() {
        let (x, c) = figure_domain();
        let spec = GridSpec {
            x_range: (-1.0, 1.0),
            y_range: (-1.0, 1.0),
            resolution: (3, 4),
            objective: GridObjective::Entropy,
        };
        let g = grid_eval(&x, &c, 1.0, 0.2, 0.03, &spec).unwrap();
        let svg = heatmap(&g, "entropy");
        assert_eq!(svg.matches("<rect").count(), 13);
        assert_eq!(svg.matches("stroke=\"red\"").count(), 1);
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
