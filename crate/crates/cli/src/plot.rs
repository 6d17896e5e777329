//! Minimal static SVG output: a heatmap of the map and a line plot of the
//! linewidth trace.

use std::fmt::Write as _;

use magnon_cavity_lab::fit::TracePoint;
use magnon_cavity_lab::synth::Spectrum2D;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;
const MAX_CELLS: usize = 200;

/// Perceptually ordered blue → yellow ramp.
fn colour(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (68.0 + t * (253.0 - 68.0)) as u8;
    let g = (1.0 + t * (231.0 - 1.0)) as u8;
    let b = (84.0 + t * (37.0 - 84.0)) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn frame(svg: &mut String, x_label: &str, y_label: &str, x: (f64, f64), y: (f64, f64)) {
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{x_label}</text>"#,
        W / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 15 {})">{y_label}</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (v, px, py, anchor) in [
        (x.0, MARGIN, H - MARGIN + 18.0, "start"),
        (x.1, W - MARGIN, H - MARGIN + 18.0, "end"),
        (y.0, MARGIN - 5.0, H - MARGIN, "end"),
        (y.1, MARGIN - 5.0, MARGIN + 10.0, "end"),
    ] {
        let _ = writeln!(
            svg,
            r#"<text x="{px}" y="{py}" text-anchor="{anchor}" font-size="11">{v:.4}</text>"#
        );
    }
}

fn header() -> String {
    format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#) + "\n"
}

/// Heatmap of |S21|² in dB, block-averaged to at most 200 × 200 cells.
pub fn heatmap(sp: &Spectrum2D) -> String {
    let (nb, nf) = (sp.n_field(), sp.n_freq());
    let cb = nb.min(MAX_CELLS);
    let cf = nf.min(MAX_CELLS);
    let mut cells = vec![0.0; cb * cf];
    for (i, cell_row) in cells.chunks_mut(cf).enumerate() {
        let (i0, i1) = (i * nb / cb, ((i + 1) * nb / cb).max(i * nb / cb + 1));
        for (j, cell) in cell_row.iter_mut().enumerate() {
            let (j0, j1) = (j * nf / cf, ((j + 1) * nf / cf).max(j * nf / cf + 1));
            let mut sum = 0.0;
            for a in i0..i1 {
                for b in j0..j1 {
                    sum += sp.at(a, b);
                }
            }
            *cell = sum / ((i1 - i0) * (j1 - j0)) as f64;
        }
    }
    let lo = cells.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = cells.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (pw, ph) = ((W - 2.0 * MARGIN) / cb as f64, (H - 2.0 * MARGIN) / cf as f64);

    let mut svg = header();
    for i in 0..cb {
        for j in 0..cf {
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                MARGIN + i as f64 * pw,
                H - MARGIN - (j + 1) as f64 * ph,
                pw + 0.05,
                ph + 0.05,
                colour((cells[i * cf + j] - lo) / span)
            );
        }
    }
    let b = (sp.field_axis[0] * 1e3, sp.field_axis[nb - 1] * 1e3);
    let f = (sp.freq_axis[0] * 1e-9, sp.freq_axis[nf - 1] * 1e-9);
    frame(&mut svg, "field (mT)", "frequency (GHz)", b, f);
    svg.push_str("</svg>\n");
    svg
}

/// FWHM against field on a log axis, one marker per fitted slice.
pub fn trace(points: &[TracePoint]) -> String {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.flag.has_fit() && p.fwhm > 0.0)
        .map(|p| (p.field * 1e3, (p.fwhm * 1e-6).log10()))
        .collect();
    let mut svg = header();
    if pts.is_empty() {
        frame(&mut svg, "field (mT)", "log10 FWHM (MHz)", (0.0, 1.0), (0.0, 1.0));
        svg.push_str("</svg>\n");
        return svg;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    for &(x, y) in &pts {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="none" stroke="steelblue"/>"#,
            sx(x),
            sy(y)
        );
    }
    frame(&mut svg, "field (mT)", "log10 FWHM (MHz)", (x0, x1), (y0, y1));
    svg.push_str("</svg>\n");
    svg
}
