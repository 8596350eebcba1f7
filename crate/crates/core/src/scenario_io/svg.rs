//! SVG 1.1 plots: mask overlays for grid runs and shaded profile figures.

use std::fmt::Write;

use crate::geometry::BinaryField;
use crate::profile::Profile;

const WIDTH: f64 = 512.0;

fn header(w: f64, h: f64) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.3} {h:.3}\">\n"
    )
}

/// Horizontal runs of set cells as rectangles.
fn runs(z: &BinaryField, scale: f64, fill: &str, opacity: f64) -> String {
    let grid = z.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut d = String::new();
    for j in 0..ny {
        let y = (ny - 1 - j) as f64 * scale;
        let mut i = 0;
        while i < nx {
            if !z.get(i, j) {
                i += 1;
                continue;
            }
            let start = i;
            while i < nx && z.get(i, j) {
                i += 1;
            }
            let _ = write!(
                d,
                "M{:.3} {:.3}h{:.3}v{:.3}h{:.3}z",
                start as f64 * scale,
                y,
                (i - start) as f64 * scale,
                scale,
                -((i - start) as f64) * scale
            );
        }
    }
    if d.is_empty() {
        return String::new();
    }
    format!("<path d=\"{d}\" fill=\"{fill}\" fill-opacity=\"{opacity}\" stroke=\"none\"/>\n")
}

/// Cell edges between the set and its complement inside the grid.
fn outline(z: &BinaryField, scale: f64, stroke: &str) -> String {
    let grid = z.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut d = String::new();
    for j in 0..ny {
        for i in 0..nx {
            let x0 = i as f64 * scale;
            let y0 = (ny - 1 - j) as f64 * scale;
            if i + 1 < nx && z.get(i, j) != z.get(i + 1, j) {
                let _ = write!(d, "M{:.3} {:.3}v{:.3}", x0 + scale, y0, scale);
            }
            if j + 1 < ny && z.get(i, j) != z.get(i, j + 1) {
                let _ = write!(d, "M{:.3} {:.3}h{:.3}", x0, y0, scale);
            }
        }
    }
    if d.is_empty() {
        return String::new();
    }
    format!("<path d=\"{d}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1\"/>\n")
}

fn ramp(k: usize, n: usize) -> String {
    let s = if n <= 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
    let r = (30.0 + 200.0 * s) as u8;
    let b = (200.0 - 170.0 * s) as u8;
    format!("#{r:02x}30{b:02x}")
}

/// The forced region `forced` in grey, the last mask filled, and the outline
/// of every mask coloured from blue (first) to red (last).
pub fn mask_overlay_svg(masks: &[&BinaryField], forced: Option<&BinaryField>) -> String {
    let Some(first) = masks.first() else {
        return header(WIDTH, WIDTH) + "</svg>\n";
    };
    let grid = first.grid();
    let scale = WIDTH / grid.nx() as f64;
    let height = scale * grid.ny() as f64;
    let mut out = header(WIDTH, height);
    let _ = writeln!(out, "<rect width=\"{WIDTH:.3}\" height=\"{height:.3}\" fill=\"white\"/>");
    if let Some(f) = forced {
        out.push_str(&runs(f, scale, "#555555", 0.6));
    }
    out.push_str(&runs(masks[masks.len() - 1], scale, "#9ecae1", 0.8));
    for (k, m) in masks.iter().enumerate() {
        out.push_str(&outline(m, scale, &ramp(k, masks.len())));
    }
    out.push_str("</svg>\n");
    out
}

/// Profile figure: the forced region above `v` dark, `Z` below `u` light.
/// With `full`, the mirror image below the axis is drawn too.
pub fn profile_svg(p: &Profile, a: f64, full: bool) -> String {
    let n = p.n();
    let top = p.v.iter().cloned().fold(0.0, f64::max).max(1e-9) * 1.1;
    let sx = WIDTH;
    let sy = WIDTH / (if full { 2.0 } else { 1.0 }) / top * 0.5;
    let height = if full { 2.0 * top * sy } else { top * sy };
    let axis = if full { top * sy } else { height };
    let pt = |x: f64, y: f64| (x * sx, axis - y * sy);
    let poly = |ys: &dyn Fn(usize) -> f64, base: f64, sign: f64| {
        let mut d = String::new();
        let (x0, y0) = pt(0.0, sign * base);
        let _ = write!(d, "M{x0:.3} {y0:.3}");
        for i in 0..=n {
            let (x, y) = pt(p.x(i), sign * ys(i));
            let _ = write!(d, "L{x:.3} {y:.3}");
        }
        let (x1, y1) = pt(1.0, sign * base);
        let _ = write!(d, "L{x1:.3} {y1:.3}z");
        d
    };
    let mut out = header(sx, height);
    let _ = writeln!(out, "<rect width=\"{sx:.3}\" height=\"{height:.3}\" fill=\"white\"/>");
    let signs: &[f64] = if full { &[1.0, -1.0] } else { &[1.0] };
    for &sgn in signs {
        let _ = writeln!(
            out,
            "<path d=\"{}\" fill=\"#404040\" stroke=\"none\"/>",
            poly(&|i| p.v[i], top, sgn)
        );
        let _ = writeln!(
            out,
            "<path d=\"{}\" fill=\"#c6dbef\" stroke=\"#08519c\" stroke-width=\"1.5\"/>",
            poly(&|i| p.u[i], 0.0, sgn)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"8\" y=\"16\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#ffffff\">a = {a}</text>"
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridSpec;

    #[test]
    fn overlay_contains_one_outline_per_mask() {
        let g = GridSpec::default_domain(16).unwrap();
        let a = BinaryField::from_fn(&g, |i, j| i > 4 && j > 4 && i < 10 && j < 10);
        let b = BinaryField::from_fn(&g, |i, j| i > 5 && j > 5 && i < 9 && j < 9);
        let svg = mask_overlay_svg(&[&a, &b], Some(&a.complement()));
        assert!(svg.starts_with("<?xml"));
        assert_eq!(svg.matches("stroke-width=\"1\"").count(), 2);
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn profile_figure_has_both_halves_when_full() {
        let p = Profile::new(vec![0.0, 0.3, 0.0], vec![0.5, 0.5, 0.5]).unwrap();
        assert_eq!(profile_svg(&p, 5.0, false).matches("<path").count(), 2);
        assert_eq!(profile_svg(&p, 5.0, true).matches("<path").count(), 4);
    }
}
