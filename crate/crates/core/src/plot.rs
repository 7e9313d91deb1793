//! SVG confidence plot from a trace CSV.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 1000.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 40.0;

pub const REQUIRED_COLUMNS: [&str; 5] = ["time_s", "confidence", "events", "alert", "trip"];

#[derive(Debug, Clone, Default)]
pub struct TraceSeries {
    pub time: Vec<f64>,
    pub confidence: Vec<f64>,
    /// Event labels active in each window (empty when none).
    pub events: Vec<String>,
    pub alerts: Vec<f64>,
    pub trips: Vec<f64>,
}

pub fn read_trace(path: &Path) -> Result<TraceSeries> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 5];
    for (k, name) in REQUIRED_COLUMNS.iter().enumerate() {
        idx[k] = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| Error::Csv(format!("{}: missing column `{name}`", path.display())))?;
    }
    let mut s = TraceSeries::default();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            let v = rec.get(idx[k]).unwrap_or("");
            v.parse::<f64>()
                .map_err(|_| Error::Csv(format!("row {}: bad `{}` value {v:?}", line + 2, REQUIRED_COLUMNS[k])))
        };
        let t = num(0)?;
        s.time.push(t);
        s.confidence.push(num(1)?);
        s.events.push(rec.get(idx[2]).unwrap_or("").to_string());
        if num(3)? != 0.0 {
            s.alerts.push(t);
        }
        if num(4)? != 0.0 {
            s.trips.push(t);
        }
    }
    Ok(s)
}

/// Min/max of each pixel column; keeps spikes visible on long traces.
fn decimate(time: &[f64], values: &[f64], t0: f64, t1: f64, columns: usize) -> Vec<(f64, f64, f64)> {
    if time.len() <= 2 * columns || t1 <= t0 {
        return time.iter().zip(values).map(|(&t, &v)| (t, v, v)).collect();
    }
    let mut out: Vec<(f64, f64, f64)> = Vec::with_capacity(columns);
    let mut cur: Option<(usize, f64, f64, f64)> = None;
    for (&t, &v) in time.iter().zip(values) {
        let col = (((t - t0) / (t1 - t0)) * columns as f64)
            .floor()
            .clamp(0.0, (columns - 1) as f64) as usize;
        match &mut cur {
            Some((c, _, lo, hi)) if *c == col => {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
            _ => {
                if let Some((_, tt, lo, hi)) = cur {
                    out.push((tt, lo, hi));
                }
                cur = Some((col, t, v, v));
            }
        }
    }
    if let Some((_, tt, lo, hi)) = cur {
        out.push((tt, lo, hi));
    }
    out
}

/// Render the confidence trace with threshold, event shading and decision marks.
pub fn render_svg(s: &TraceSeries, threshold: f64) -> String {
    let (t0, t1) = match (s.time.first(), s.time.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a, a + 1.0),
        _ => (0.0, 1.0),
    };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let x = |t: f64| LEFT + (t - t0) / (t1 - t0) * pw;
    let y = |c: f64| TOP + (1.0 - c.clamp(0.0, 1.0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    // event shading
    let mut k = 0;
    while k < s.events.len() {
        if s.events[k].is_empty() {
            k += 1;
            continue;
        }
        let label = &s.events[k];
        let start = k;
        while k < s.events.len() && s.events[k] == *label {
            k += 1;
        }
        let (a, b) = (x(s.time[start]), x(s.time[k - 1]));
        let fill = if label.contains("SLG_FAULT") {
            "#f4c7c3"
        } else {
            "#c9daf8"
        };
        let _ = writeln!(
            svg,
            r#"<rect x="{a:.2}" y="{TOP}" width="{:.2}" height="{ph}" fill="{fill}" fill-opacity="0.6"><title>{label}</title></rect>"#,
            (b - a).max(1.0)
        );
    }

    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for c in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{:.1}" text-anchor="end">{c:.2}</text>"##,
            LEFT - 6.0,
            y(c) + 4.0
        );
    }
    for i in 0..=5 {
        let t = t0 + (t1 - t0) * i as f64 / 5.0;
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{:.1}" text-anchor="middle">{t:.3}</text>"##,
            x(t),
            HEIGHT - BOTTOM + 16.0
        );
    }
    let _ = writeln!(
        svg,
        r##"<text x="{:.1}" y="{:.1}" text-anchor="middle">time (s)</text>"##,
        LEFT + pw / 2.0,
        HEIGHT - 6.0
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{LEFT}" y1="{yt:.2}" x2="{:.2}" y2="{yt:.2}" stroke="#c00" stroke-dasharray="6 4"/>"##,
        LEFT + pw,
        yt = y(threshold)
    );

    let pts = decimate(&s.time, &s.confidence, t0, t1, pw as usize);
    let mut path = String::new();
    for (i, (t, lo, hi)) in pts.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(path, "{cmd}{:.2},{:.2}", x(*t), y(*hi));
        if lo != hi {
            let _ = write!(path, "L{:.2},{:.2}", x(*t), y(*lo));
        }
    }
    let _ = writeln!(
        svg,
        r##"<path d="{path}" fill="none" stroke="#1a5fb4" stroke-width="1.2"/>"##
    );

    for (times, color, name) in [(&s.alerts, "#e69500", "ALERT"), (&s.trips, "#a00", "TRIP")] {
        for &t in times.iter() {
            let xt = x(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{xt:.2}" y1="{TOP}" x2="{xt:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"><title>{name} {t:.6} s</title></line>"##,
                TOP + ph
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Read `trace_csv` and write the plot to `out_svg`.
pub fn emit_plot(trace_csv: &Path, out_svg: &Path, threshold: f64) -> Result<()> {
    let series = read_trace(trace_csv)?;
    std::fs::write(out_svg, render_svg(&series, threshold))?;
    Ok(())
}
