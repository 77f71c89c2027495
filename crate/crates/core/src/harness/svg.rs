//! Minimal SVG rendering for boxplot grids and line traces.

use std::fmt::Write;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_B: f64 = 90.0;
const MARGIN_T: f64 = 30.0;

const PALETTE: [&str; 6] = ["#d6604d", "#4393c3", "#1b7837", "#762a83", "#e08214", "#525252"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Linear-interpolated quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Self { lo: lo - pad, hi: hi + pad, log }
    }

    /// Fraction of the axis, 0 at the bottom.
    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.max(1e-300).log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn tick_label(&self, f: f64) -> String {
        let v = self.lo + f * (self.hi - self.lo);
        if self.log { format!("1e{v:.1}") } else { format!("{v:.3}") }
    }
}

fn open(panels: usize, cols: usize) -> (String, usize) {
    let rows = panels.div_ceil(cols).max(1);
    let w = cols as f64 * (PANEL_W + MARGIN_L) + 20.0;
    let h = rows as f64 * (PANEL_H + MARGIN_B + MARGIN_T);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    (s, rows)
}

fn frame(s: &mut String, x0: f64, y0: f64, title: &str, axis: &Axis) {
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-weight="bold">{}</text>"#, x0, y0 - 10.0, escape(title));
    let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let y = y0 + PANEL_H * (1.0 - f);
        let _ = writeln!(s, r##"<line x1="{x0}" x2="{}" y1="{y}" y2="{y}" stroke="#ddd"/>"##, x0 + PANEL_W);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 - 4.0, y + 4.0, axis.tick_label(f));
    }
}

/// One panel per group; one box (quartiles, median, 1.5 IQR whiskers) per
/// labelled sample. The value axis is logarithmic when `log` is set.
pub fn boxplot_grid(panels: &[(String, Vec<(String, Vec<f64>)>)], log: bool) -> String {
    let cols = panels.len().clamp(1, 3);
    let (mut s, _) = open(panels.len(), cols);
    for (k, (title, boxes)) in panels.iter().enumerate() {
        let x0 = MARGIN_L + (k % cols) as f64 * (PANEL_W + MARGIN_L);
        let y0 = MARGIN_T + (k / cols) as f64 * (PANEL_H + MARGIN_B + MARGIN_T);
        let axis = Axis::new(boxes.iter().flat_map(|(_, v)| v.iter().copied()), log);
        frame(&mut s, x0, y0, title, &axis);
        let slot = PANEL_W / boxes.len().max(1) as f64;
        let y = |v: f64| y0 + PANEL_H * (1.0 - axis.frac(v));
        for (j, (label, values)) in boxes.iter().enumerate() {
            let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
            v.sort_by(f64::total_cmp);
            let cx = x0 + slot * (j as f64 + 0.5);
            let _ = writeln!(
                s,
                r#"<text transform="translate({cx},{}) rotate(45)" text-anchor="start">{}</text>"#,
                y0 + PANEL_H + 12.0,
                escape(label)
            );
            if v.is_empty() {
                continue;
            }
            let (q1, med, q3) = (quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.5), quantile_sorted(&v, 0.75));
            let iqr = q3 - q1;
            let lo = v.iter().copied().find(|&x| x >= q1 - 1.5 * iqr).unwrap_or(q1);
            let hi = v.iter().rev().copied().find(|&x| x <= q3 + 1.5 * iqr).unwrap_or(q3);
            let color = PALETTE[j % PALETTE.len()];
            let half = (slot * 0.3).min(18.0);
            let _ = writeln!(s, r#"<line x1="{cx}" x2="{cx}" y1="{}" y2="{}" stroke="black"/>"#, y(lo), y(hi));
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{color}" fill-opacity="0.5" stroke="black"/>"#,
                cx - half,
                y(q3),
                2.0 * half,
                (y(q1) - y(q3)).max(0.5)
            );
            let _ = writeln!(s, r#"<line x1="{}" x2="{}" y1="{}" y2="{}" stroke="black" stroke-width="2"/>"#, cx - half, cx + half, y(med), y(med));
            for &o in v.iter().filter(|&&x| x < lo || x > hi) {
                let _ = writeln!(s, r#"<circle cx="{cx}" cy="{}" r="1.5" fill="none" stroke="{color}"/>"#, y(o));
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// A panel of polylines with an optional vertical reference line.
pub struct LinePanel {
    pub title: String,
    /// `(series group index, points)`; the group picks the colour.
    pub series: Vec<(usize, Vec<(f64, f64)>)>,
    pub reference_x: Option<f64>,
}

/// Grid of line panels with a horizontal zero line.
pub fn line_grid(panels: &[LinePanel]) -> String {
    let cols = panels.len().clamp(1, 2);
    let (mut s, _) = open(panels.len(), cols);
    for (k, panel) in panels.iter().enumerate() {
        let x0 = MARGIN_L + (k % cols) as f64 * (PANEL_W + MARGIN_L);
        let y0 = MARGIN_T + (k / cols) as f64 * (PANEL_H + MARGIN_B + MARGIN_T);
        let pts = || panel.series.iter().flat_map(|(_, p)| p.iter().copied());
        let yaxis = Axis::new(pts().map(|p| p.1).chain([0.0]), false);
        let xaxis = Axis::new(pts().map(|p| p.0).chain(panel.reference_x), false);
        frame(&mut s, x0, y0, &panel.title, &yaxis);
        let px = |x: f64| x0 + PANEL_W * xaxis.frac(x);
        let py = |y: f64| y0 + PANEL_H * (1.0 - yaxis.frac(y));
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, x0 + PANEL_W * f, y0 + PANEL_H + 14.0, xaxis.tick_label(f));
        }
        let _ = writeln!(s, r#"<line x1="{x0}" x2="{}" y1="{}" y2="{}" stroke="grey"/>"#, x0 + PANEL_W, py(0.0), py(0.0));
        for (group, points) in &panel.series {
            let path: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-opacity="0.5"/>"#,
                path.join(" "),
                PALETTE[group % PALETTE.len()]
            );
        }
        if let Some(rx) = panel.reference_x {
            let _ = writeln!(s, r#"<line x1="{0}" x2="{0}" y1="{y0}" y2="{1}" stroke="black" stroke-width="2"/>"#, px(rx), y0 + PANEL_H);
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_type7() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
    }

    #[test]
    fn renders_well_formed_documents() {
        let b = boxplot_grid(&[("a<b".into(), vec![("x".into(), vec![0.1, 0.2, 5.0]), ("y".into(), vec![])])], true);
        assert!(b.starts_with("<svg") && b.ends_with("</svg>\n") && b.contains("a&lt;b"));
        let l = line_grid(&[LinePanel { title: "h".into(), series: vec![(0, vec![(0.0, 1.0), (1.0, -1.0)])], reference_x: Some(0.5) }]);
        assert!(l.contains("<polyline"));
    }
}
