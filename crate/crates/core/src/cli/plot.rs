//! Deterministic SVG line plots of CSV columns.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::table::Table;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 86.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 28.0;
const BOTTOM: f64 = 56.0;
const COLOURS: [&str; 6] = [
    "#1f5fa8", "#c0392b", "#2e8b57", "#8e44ad", "#d68910", "#34495e",
];

/// Reads `csv_path`, plots every `y` column against `x` and writes `out_path`.
/// Nothing is written when a column is missing or there are no finite rows.
pub fn emit_plot(csv_path: &Path, x: &str, ys: &[&str], out_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(csv_path)?;
    let table = Table::from_csv(&text)?;
    let svg = render(&table, x, ys)?;
    std::fs::write(out_path, svg)?;
    Ok(())
}

/// SVG document for the given columns of `table`.
pub fn render(table: &Table, x: &str, ys: &[&str]) -> Result<String> {
    let missing: Vec<&str> = std::iter::once(&x)
        .chain(ys)
        .filter(|c| table.column_index(c).is_none())
        .copied()
        .collect();
    if !missing.is_empty() {
        let available: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
        return Err(Error::Config(format!(
            "missing column(s) {}; available: {}",
            missing.join(", "),
            available.join(", ")
        )));
    }
    if ys.is_empty() {
        return Err(Error::Config("no y column requested".into()));
    }
    let xs = table.column(x).expect("checked");
    let series: Vec<Vec<(f64, f64)>> = ys
        .iter()
        .map(|c| {
            xs.iter()
                .zip(table.column(c).expect("checked"))
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .map(|(a, b)| (*a, b))
                .collect()
        })
        .collect();
    if series.iter().all(Vec::is_empty) {
        return Err(Error::Domain("no finite data rows to plot".into()));
    }
    let all = series.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(a, b) in all {
        x0 = x0.min(a);
        x1 = x1.max(a);
        y0 = y0.min(b);
        y1 = y1.max(b);
    }
    let (x0, x1) = widen(x0, x1);
    let (y0, y1) = widen(y0, y1);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |v: f64| LEFT + (v - x0) / (x1 - x0) * pw;
    let sy = |v: f64| TOP + (1.0 - (v - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in ticks(x0, x1) {
        let px = sx(t);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 19.0,
            label(t)
        );
    }
    for t in ticks(y0, y1) {
        let py = sy(t);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(x)
    );
    for (i, (name, pts)) in ys.iter().zip(&series).enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let mut d = String::new();
        for (a, b) in pts {
            let _ = write!(d, "{:.2},{:.2} ", sx(*a), sy(*b));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            d.trim_end()
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="{colour}">{}</text>"#,
            LEFT + 8.0,
            TOP + 16.0 + 14.0 * i as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

/// Round-number ticks inside `[lo, hi]` with a 1-2-5 step giving at most about six marks.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
