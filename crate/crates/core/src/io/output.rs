//! Result artifacts: trace and locus CSV, metrics JSON, SVG charts.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! re-parsed CSV reproduces the in-memory values exactly.

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::gridcode::ThresholdTable;
use crate::sim::Trace;
use crate::stability::SweepReport;

fn csv_error(e: csv::Error) -> Error {
    Error::schema("csv", e.to_string())
}

/// Column names: time, five per-area columns, then two per generator.
pub fn trace_header(trace: &Trace, generator_numbers: &[Vec<usize>]) -> Vec<String> {
    let mut header = vec!["time".to_string()];
    for a in 1..=trace.areas.len() {
        for col in ["df_hz", "dptie", "ace", "dpc", "dpl"] {
            header.push(format!("area{a}_{col}"));
        }
    }
    for (a, area) in trace.areas.iter().enumerate() {
        for g in 0..area.mech.len() {
            let number = generator_numbers.get(a).and_then(|n| n.get(g)).copied();
            let label = number.map_or_else(|| format!("a{}g{}", a + 1, g + 1), |n| format!("gen{n}"));
            header.push(format!("{label}_dpm"));
            header.push(format!("{label}_dpg"));
        }
    }
    header
}

/// Row `k` of the trace in [`trace_header`] order. Frequency columns hold
/// the deviation in Hz.
pub fn trace_row(trace: &Trace, k: usize) -> Vec<f64> {
    let mut row = vec![trace.time[k]];
    for area in &trace.areas {
        row.extend([
            area.freq_dev[k] * trace.nominal_frequency,
            area.tie[k],
            area.ace[k],
            area.control[k],
            area.injected_load[k],
        ]);
    }
    for area in &trace.areas {
        for g in 0..area.mech.len() {
            row.push(area.mech[g][k]);
            row.push(area.gov[g][k]);
        }
    }
    row
}

pub fn write_trace_csv<W: Write>(out: W, trace: &Trace, generator_numbers: &[Vec<usize>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(trace, generator_numbers)).map_err(csv_error)?;
    for k in 0..trace.len() {
        w.write_record(trace_row(trace, k).iter().map(|v| v.to_string())).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("trace.csv", e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Reads a numeric CSV with a header row.
pub fn read_numeric_csv<R: Read>(input: R) -> Result<Table> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let row = record
            .iter()
            .map(|cell| {
                cell.parse::<f64>()
                    .map_err(|_| Error::schema(format!("csv row {}", line + 2), format!("`{cell}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::schema(format!("csv row {}", line + 2), "wrong number of fields"));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Locus rows: parameter value, eigenvalue track index, re, im, stable flag.
pub fn write_locus_csv<W: Write>(out: W, report: &SweepReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value", "index", "re", "im", "stable"]).map_err(csv_error)?;
    for (p, point) in report.locus.iter().enumerate() {
        for (k, track) in report.tracks.iter().enumerate() {
            let z = track[p];
            w.write_record([
                point.value.to_string(),
                k.to_string(),
                z.re.to_string(),
                z.im.to_string(),
                u8::from(point.stable).to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| Error::io("locus.csv", e))
}

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
/// Points per polyline after min/max decimation.
const MAX_BUCKETS: usize = 900;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn nice_step(span: f64, target_ticks: f64) -> f64 {
    let raw = span / target_ticks;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 6.0);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn svg_open(s: &mut String, title: &str, frame: &Frame, x_label: &str, y_label: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (left, right) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (top, bottom) = (MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);
    let _ = writeln!(
        s,
        r#"<defs><clipPath id="plot"><rect x="{left}" y="{top}" width="{}" height="{}"/></clipPath></defs>"#,
        right - left,
        bottom - top
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, (left + right) / 2.0, escape(title));
    for t in ticks(frame.x0, frame.x1) {
        let x = frame.px(t);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{bottom}" stroke="#eeeeee"/>"##);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, bottom + 18.0, fmt_tick(t));
    }
    for t in ticks(frame.y0, frame.y1) {
        let y = frame.py(t);
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y:.2}" x2="{right}" y2="{y:.2}" stroke="#eeeeee"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, left - 6.0, y + 4.0, fmt_tick(t));
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (left + right) / 2.0, HEIGHT - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        (top + bottom) / 2.0,
        escape(y_label)
    );
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Min/max decimation keeping the extremes of every bucket.
fn decimate(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    if n <= 2 * MAX_BUCKETS {
        return x.iter().copied().zip(y.iter().copied()).collect();
    }
    let size = n.div_ceil(MAX_BUCKETS);
    let mut out = Vec::with_capacity(2 * MAX_BUCKETS + 1);
    for start in (0..n).step_by(size) {
        let end = (start + size).min(n);
        let (mut lo, mut hi) = (start, start);
        for k in start..end {
            if y[k] < y[lo] {
                lo = k;
            }
            if y[k] > y[hi] {
                hi = k;
            }
        }
        let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        out.push((x[a], y[a]));
        if b != a {
            out.push((x[b], y[b]));
        }
    }
    if out.last().map(|p| p.0) != Some(x[n - 1]) {
        out.push((x[n - 1], y[n - 1]));
    }
    out
}

fn polyline(s: &mut String, frame: &Frame, points: &[(f64, f64)], color: &str, width: f64) {
    let mut d = String::with_capacity(points.len() * 16);
    for (x, y) in points {
        let _ = write!(d, "{:.2},{:.2} ", frame.px(*x), frame.py(*y));
    }
    let _ = writeln!(
        s,
        r#"<polyline clip-path="url(#plot)" fill="none" stroke="{color}" stroke-width="{width}" points="{}"/>"#,
        d.trim_end()
    );
}

/// Frequency of every area in Hz, with the table's band limits drawn as
/// dashed horizontal pairs.
pub fn frequency_svg(trace: &Trace, table: &ThresholdTable, area_names: &[String], title: &str) -> String {
    let series: Vec<Vec<f64>> = (0..trace.areas.len()).map(|a| trace.frequency_hz(a)).collect();
    let (outer_lo, outer_hi) = table.outer_range();
    let finite = series.iter().flatten().filter(|v| v.is_finite());
    let (data_lo, data_hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let f0 = trace.nominal_frequency;
    let y0 = data_lo.min(outer_lo - 0.5).max(f0 - 10.0);
    let y1 = data_hi.max(outer_hi + 0.5).min(f0 + 10.0);
    let x1 = trace.time.last().copied().unwrap_or(1.0).max(trace.dt);
    let frame = Frame { x0: 0.0, x1, y0, y1 };

    let mut s = String::new();
    svg_open(&mut s, title, &frame, "time [s]", "frequency [Hz]");
    let dashes = ["6,3", "3,3", "1,3"];
    for (k, band) in table.bands.iter().enumerate() {
        for y in [band.below.0, band.above.1] {
            let py = frame.py(y);
            let _ = writeln!(
                s,
                r##"<line x1="{MARGIN_LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#555555" stroke-dasharray="{}"/>"##,
                WIDTH - MARGIN_RIGHT,
                dashes[k % dashes.len()]
            );
        }
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" fill="#555555">{} / {} Hz ({})</text>"##,
            WIDTH - MARGIN_RIGHT + 6.0,
            frame.py(band.below.0) + 4.0,
            fmt_tick(band.below.0),
            fmt_tick(band.above.1),
            band.requirement
        );
    }
    for (a, y) in series.iter().enumerate() {
        let color = COLORS[a % COLORS.len()];
        polyline(&mut s, &frame, &decimate(&trace.time, y), color, 1.5);
        let name = area_names.get(a).cloned().unwrap_or_else(|| format!("area {}", a + 1));
        let ly = MARGIN_TOP + 16.0 * a as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{0:.2}" y1="{ly:.2}" x2="{1:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{2:.2}" y="{3:.2}">{4}</text>"#,
            WIDTH - MARGIN_RIGHT + 6.0,
            WIDTH - MARGIN_RIGHT + 26.0,
            WIDTH - MARGIN_RIGHT + 30.0,
            ly + 4.0,
            escape(&name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Complex-plane locus: one polyline per eigenvalue track, starting
/// positions marked with an asterisk.
pub fn locus_svg(report: &SweepReport, title: &str) -> String {
    let all = report.tracks.iter().flatten();
    let (mut re0, mut re1, mut im0, mut im1) = all.fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), z| (a.min(z.re), b.max(z.re), c.min(z.im), d.max(z.im)),
    );
    if !re0.is_finite() {
        (re0, re1, im0, im1) = (-1.0, 1.0, -1.0, 1.0);
    }
    re1 = re1.max(0.0);
    let pad = |lo: f64, hi: f64| {
        let p = ((hi - lo) * 0.05).max(1e-3);
        (lo - p, hi + p)
    };
    let (x0, x1) = pad(re0, re1);
    let (y0, y1) = pad(im0, im1);
    let frame = Frame { x0, x1, y0, y1 };

    let mut s = String::new();
    svg_open(&mut s, title, &frame, "real part [1/s]", "imaginary part [rad/s]");
    let ax = frame.px(0.0);
    let _ = writeln!(
        s,
        r##"<line x1="{ax:.2}" y1="{MARGIN_TOP}" x2="{ax:.2}" y2="{}" stroke="#888888" stroke-dasharray="4,3"/>"##,
        HEIGHT - MARGIN_BOTTOM
    );
    for (k, track) in report.tracks.iter().enumerate() {
        let color = if track.iter().any(|z| z.re > report.tolerance) { "#d62728" } else { "#1f77b4" };
        let pts: Vec<(f64, f64)> = track.iter().map(|z| (z.re, z.im)).collect();
        if pts.len() > 1 {
            polyline(&mut s, &frame, &pts, color, 1.0);
        }
        if let Some(z) = track.last() {
            let _ = writeln!(
                s,
                r#"<circle clip-path="url(#plot)" cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"><title>track {k}</title></circle>"#,
                frame.px(z.re),
                frame.py(z.im)
            );
        }
        if let Some(z) = track.first() {
            let _ = writeln!(
                s,
                r##"<text clip-path="url(#plot)" x="{:.2}" y="{:.2}" text-anchor="middle" font-size="16" fill="#0000cc">*</text>"##,
                frame.px(z.re),
                frame.py(z.im) + 6.0
            );
        }
    }
    let mut legend = format!("{} from {} to {}", report.parameter, fmt_value(report.locus.first().map(|p| p.value)), fmt_value(report.locus.last().map(|p| p.value)));
    if let Some(c) = &report.critical_value {
        let _ = write!(legend, ", critical {}", fmt_value(Some(c.value)));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, MARGIN_LEFT + 8.0, MARGIN_TOP + 16.0, escape(&legend));
    s.push_str("</svg>\n");
    s
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.6}").trim_end_matches('0').trim_end_matches('.').to_string())
}
