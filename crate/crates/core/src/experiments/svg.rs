//! Minimal static SVG output: sweep heatmaps and overlaid KDE curves.

use std::fmt::Write as _;

use super::kde::KdeCurve;
use super::sweep::SweepResult;

const CELL: f64 = 40.0;
const MARGIN: f64 = 70.0;

/// Diverging blue–white–red colour for `t ∈ [-1, 1]`.
fn diverging(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("rgb({},{},{})", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Heatmap of `mean_diff`, colour scale centred at zero and symmetric in
/// the largest absolute cell value.
pub fn heatmap(result: &SweepResult) -> String {
    let rows = result.config.grid_a.len();
    let cols = result.config.grid_b.len();
    let scale = result
        .cells
        .iter()
        .map(|c| c.mean_diff.abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let width = 2.0 * MARGIN + cols as f64 * CELL;
    let height = 2.0 * MARGIN + rows as f64 * CELL;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
    );
    for c in &result.cells {
        let x = MARGIN + c.col as f64 * CELL;
        // first row at the bottom
        let y = MARGIN + (rows - 1 - c.row) as f64 * CELL;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"><title>{:.4} ± {:.4}</title></rect>"#,
            diverging(c.mean_diff / scale),
            c.mean_diff,
            c.se_diff
        );
    }
    for (j, v) in result.config.grid_b.iter().enumerate() {
        let x = MARGIN + (j as f64 + 0.5) * CELL;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="middle">{v:.3}</text>"#,
            MARGIN + rows as f64 * CELL + 14.0
        );
    }
    for (i, v) in result.config.grid_a.iter().enumerate() {
        let y = MARGIN + (rows - 1 - i) as f64 * CELL + CELL * 0.5 + 3.0;
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end">{v:.3}</text>"#, MARGIN - 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">L_PCA - L_SSL (scale ±{scale:.4})</text>"#,
        width / 2.0,
        MARGIN / 2.0
    );
    s.push_str("</svg>\n");
    s
}

/// Overlaid density curves on shared axes.
pub fn kde_overlay(curves: &[(&str, &KdeCurve, &str)]) -> String {
    let (w, h) = (640.0, 400.0);
    let xs = curves.iter().flat_map(|(_, c, _)| c.eval_points.iter().copied());
    let (xmin, xmax) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let ymax = curves.iter().map(|(_, c, _)| c.peak()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let px = |x: f64| MARGIN + (x - xmin) / (xmax - xmin).max(f64::MIN_POSITIVE) * (w - 2.0 * MARGIN);
    let py = |y: f64| h - MARGIN - y / ymax * (h - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        h - MARGIN,
        w - MARGIN
    );
    for (i, (label, curve, colour)) in curves.iter().enumerate() {
        let mut pts = String::new();
        for (x, y) in curve.eval_points.iter().zip(&curve.densities) {
            let _ = write!(pts, "{:.2},{:.2} ", px(*x), py(*y));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            pts.trim_end()
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{colour}">{label}</text>"#,
            w - MARGIN - 60.0,
            MARGIN + 14.0 * i as f64
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}">{xmin:.2}</text><text x="{}" y="{}" text-anchor="end">{xmax:.2}</text>"#,
        h - MARGIN + 14.0,
        w - MARGIN,
        h - MARGIN + 14.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::kde::kde;
    use crate::experiments::sweep::{run_sweep, Regime, SweepConfig};

    #[test]
    fn colour_scale_is_centred() {
        assert_eq!(diverging(0.0), "rgb(255,255,255)");
        assert_eq!(diverging(1.0), "rgb(255,0,0)");
        assert_eq!(diverging(-1.0), "rgb(0,0,255)");
    }

    #[test]
    fn heatmap_has_one_rect_per_cell() {
        let cfg = SweepConfig {
            regime: Regime::Orthogonal,
            grid_a: vec![1.1, 1.5],
            grid_b: vec![1.2, 1.6, 1.9],
            d: 2,
            k: 1,
            n: 50,
            reps: 2,
            base_seed: 1,
        };
        let svg = heatmap(&run_sweep(&cfg).unwrap());
        assert_eq!(svg.matches("<rect").count(), 6);
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn overlay_draws_each_curve() {
        let a = kde(&[0.0, 1.0, 2.0], None).unwrap();
        let b = kde(&[0.5, 1.5], None).unwrap();
        let svg = kde_overlay(&[("a", &a, "red"), ("b", &b, "blue")]);
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
