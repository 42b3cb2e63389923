//! Minimal static SVG charts. Figures are views over the emitted data
//! files, never sources: the CSVs carry the numbers, these just draw them.
//! Output is deterministic (fixed palette, fixed float formatting).

use std::fmt::Write;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 44.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 1.0, hi + 1.0);
    }
    (lo, hi)
}

fn x_pos(k: usize, n: usize) -> f64 {
    MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) * k as f64 / (n.max(2) - 1) as f64
}

fn y_pos(v: f64, lo: f64, hi: f64) -> f64 {
    let frac = (v - lo) / (hi - lo);
    HEIGHT - MARGIN_B - (HEIGHT - MARGIN_T - MARGIN_B) * frac
}

fn header(title: &str, hash: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, "<!-- config_hash={hash} -->");
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" font-family="sans-serif" font-size="14">{}</text>"#,
        MARGIN_L,
        xml_escape(title)
    );
    s
}

fn axes(lo: f64, hi: f64, n: usize) -> String {
    let mut s = String::new();
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let _ = writeln!(
        s,
        r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x0:.2}" y1="{:.2}" x2="{x0:.2}" y2="{y0:.2}" stroke="black"/>"#,
        MARGIN_T
    );
    for frac in [0.0, 0.5, 1.0] {
        let v = lo + (hi - lo) * frac;
        let y = y_pos(v, lo, hi);
        let _ = writeln!(
            s,
            r#"<text x="4" y="{:.2}" font-family="sans-serif" font-size="11">{v:.2}</text>"#,
            y + 4.0
        );
    }
    for k in (0..n).step_by(8.max(n / 6)) {
        let x = x_pos(k, n);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{k}</text>"#,
            x - 6.0,
            HEIGHT - MARGIN_B + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">half-hour interval</text>"#,
        WIDTH / 2.0 - 50.0,
        HEIGHT - 8.0
    );
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Multi-series line chart over the 48 intervals. NaN points break the line.
pub fn line_chart(title: &str, hash: &str, series: &[(String, Vec<f64>)]) -> String {
    let n = series.first().map(|(_, v)| v.len()).unwrap_or(0);
    let (lo, hi) = finite_range(series.iter().flat_map(|(_, v)| v.iter().copied()));
    let mut s = header(title, hash);
    s.push_str(&axes(lo, hi, n));
    for (i, (name, values)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        let mut pen_down = false;
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                pen_down = false;
                continue;
            }
            let cmd = if pen_down { 'L' } else { 'M' };
            let _ = write!(path, "{cmd}{:.2} {:.2} ", x_pos(k, n), y_pos(v, lo, hi));
            pen_down = true;
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.trim_end()
        );
        let ly = MARGIN_T + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{ly:.2}" width="10" height="3" fill="{color}"/>"#,
            WIDTH - 170.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            WIDTH - 155.0,
            ly + 5.0,
            xml_escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Bars (left series) with an overlaid line (right series), each scaled to
/// its own range.
pub fn bar_line_chart(
    title: &str,
    hash: &str,
    bars: (&str, &[f64]),
    line: (&str, &[f64]),
) -> String {
    let n = bars.1.len();
    let (blo, bhi) = finite_range(bars.1.iter().copied());
    let (llo, lhi) = finite_range(line.1.iter().copied());
    let blo = blo.min(0.0);
    let mut s = header(title, hash);
    s.push_str(&axes(blo, bhi, n));
    let slot = (WIDTH - MARGIN_L - MARGIN_R) / n as f64;
    for (k, &v) in bars.1.iter().enumerate() {
        let x = MARGIN_L + slot * k as f64 + slot * 0.15;
        let y = y_pos(v, blo, bhi);
        let base = y_pos(0.0, blo, bhi);
        let (top, height) = if y <= base { (y, base - y) } else { (base, y - base) };
        let _ = writeln!(
            s,
            r##"<rect x="{x:.2}" y="{top:.2}" width="{:.2}" height="{height:.2}" fill="#9ecae1"/>"##,
            slot * 0.7,
        );
    }
    let mut path = String::new();
    for (k, &v) in line.1.iter().enumerate() {
        let cmd = if k == 0 { 'M' } else { 'L' };
        let _ = write!(
            path,
            "{cmd}{:.2} {:.2} ",
            MARGIN_L + slot * (k as f64 + 0.5),
            y_pos(v, llo, lhi)
        );
    }
    let _ = writeln!(
        s,
        r##"<path d="{}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##,
        path.trim_end()
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">bars: {} | line: {} (own scale)</text>"#,
        MARGIN_L,
        MARGIN_T - 6.0,
        xml_escape(bars.0),
        xml_escape(line.0)
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_well_formed_and_deterministic() {
        let series = vec![
            ("A".to_string(), (0..48).map(|k| k as f64).collect::<Vec<_>>()),
            ("B".to_string(), (0..48).map(|k| (48 - k) as f64).collect()),
        ];
        let a = line_chart("test", "deadbeef", &series);
        let b = line_chart("test", "deadbeef", &series);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));
        assert!(a.contains("config_hash=deadbeef"));
    }

    #[test]
    fn nan_breaks_the_line_without_poisoning_the_chart() {
        let series = vec![("A".to_string(), vec![1.0, f64::NAN, 3.0, 4.0])];
        let chart = line_chart("gaps", "h", &series);
        assert!(!chart.contains("NaN"));
    }
}
