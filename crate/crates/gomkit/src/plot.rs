//! Static SVG figures of recorded versus simulated descriptor traces.

use std::fmt::Write as _;

const PANEL_W: f64 = 260.0;
const PANEL_H: f64 = 120.0;
const MARGIN: f64 = 28.0;
const COLUMNS: usize = 3;
/// Points per polyline; longer traces are decimated.
const MAX_POINTS: usize = 600;

pub struct Trace<'a> {
    pub label: &'a str,
    pub real: &'a [f64],
    pub simulated: &'a [f64],
}

fn polyline(out: &mut String, values: &[f64], x0: f64, y0: f64, lo: f64, hi: f64, style: &str) {
    let n = values.len();
    if n == 0 {
        return;
    }
    let step = n.div_ceil(MAX_POINTS).max(1);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let _ = write!(out, "<polyline fill=\"none\" {style} points=\"");
    for (k, &v) in values.iter().enumerate().step_by(step) {
        let x = x0 + PANEL_W * k as f64 / (n.max(2) - 1) as f64;
        let y = y0 + PANEL_H * (1.0 - (v - lo) / span);
        let _ = write!(out, "{x:.1},{y:.1} ");
    }
    out.push_str("\"/>\n");
}

/// One panel per descriptor, three per row; time runs over each panel's width.
pub fn traces_svg(title: &str, frame_time: f64, traces: &[Trace<'_>]) -> String {
    let rows = traces.len().div_ceil(COLUMNS).max(1);
    let width = COLUMNS as f64 * (PANEL_W + 2.0 * MARGIN);
    let height = 40.0 + rows as f64 * (PANEL_H + 2.0 * MARGIN);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(out, "<text x=\"{MARGIN}\" y=\"22\" font-size=\"15\">{}</text>", escape(title));
    let _ = writeln!(
        out,
        "<text x=\"{:.0}\" y=\"22\"><tspan fill=\"#222\">recorded</tspan> <tspan fill=\"#d62728\">simulated</tspan></text>",
        width - 160.0
    );
    for (i, t) in traces.iter().enumerate() {
        let x0 = MARGIN + (i % COLUMNS) as f64 * (PANEL_W + 2.0 * MARGIN);
        let y0 = 40.0 + MARGIN + (i / COLUMNS) as f64 * (PANEL_H + 2.0 * MARGIN);
        let finite = t.real.iter().chain(t.simulated).copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
        let _ = writeln!(
            out,
            "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{PANEL_W}\" height=\"{PANEL_H}\" fill=\"none\" stroke=\"#999\"/>"
        );
        let _ = writeln!(out, "<text x=\"{x0:.1}\" y=\"{:.1}\">{} (deg)</text>", y0 - 6.0, escape(t.label));
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{hi:.1}</text>", x0 - 3.0, y0 + 9.0);
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{lo:.1}</text>", x0 - 3.0, y0 + PANEL_H);
        let seconds = t.real.len().saturating_sub(1) as f64 * frame_time;
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{seconds:.1} s</text>",
            x0 + PANEL_W,
            y0 + PANEL_H + 13.0
        );
        polyline(&mut out, t.real, x0, y0, lo, hi, "stroke=\"#222\" stroke-width=\"1\"");
        polyline(&mut out, t.simulated, x0, y0, lo, hi, "stroke=\"#d62728\" stroke-width=\"1\" stroke-dasharray=\"4 2\"");
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
