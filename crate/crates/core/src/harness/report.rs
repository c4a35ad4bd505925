//! Writes study records to disk: a JSON index, and per record its JSON,
//! table and verdict CSVs, and an SVG plot. Numbers are written with
//! Rust's shortest round-trip formatting, in the CSVs and in the SVG's
//! `data-x`/`data-y` attributes alike, so the plot can be checked against
//! the table exactly. Output depends only on the records.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::record::{PlotKind, PlotSpec, StudyRecord, Table};
use crate::error::{Error, Result};

#[derive(Serialize)]
struct IndexEntry<'a> {
    id: &'a str,
    outcome: &'static str,
    config_hash: &'a str,
    record: String,
    table: String,
    verdicts: String,
    plot: Option<String>,
}

/// Writes the report and returns the paths written, index first.
pub fn emit_report(records: &[StudyRecord], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = vec![out_dir.join("index.json")];
    let mut index = Vec::with_capacity(records.len());
    for (n, rec) in records.iter().enumerate() {
        let stem = format!("{n:02}_{}", rec.id);
        let entry = IndexEntry {
            id: &rec.id,
            outcome: rec.outcome().as_str(),
            config_hash: &rec.config_hash,
            record: format!("{stem}.json"),
            table: format!("{stem}_table.csv"),
            verdicts: format!("{stem}_verdicts.csv"),
            plot: rec.plot.as_ref().map(|_| format!("{stem}.svg")),
        };
        write_file(out_dir, &entry.record, &serde_json::to_string_pretty(rec)?, &mut written)?;
        write_file(out_dir, &entry.table, &table_csv(&rec.table)?, &mut written)?;
        write_file(out_dir, &entry.verdicts, &verdicts_csv(rec)?, &mut written)?;
        if let (Some(spec), Some(name)) = (&rec.plot, &entry.plot) {
            write_file(out_dir, name, &svg(rec, spec), &mut written)?;
        }
        index.push(entry);
    }
    fs::write(&written[0], serde_json::to_string_pretty(&index)? + "\n")?;
    Ok(written)
}

fn write_file(dir: &Path, name: &str, body: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, body)?;
    written.push(path);
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn to_csv(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn table_csv(table: &Table) -> Result<String> {
    to_csv(&table.columns, table.rows.iter().map(|r| r.iter().map(|&v| num(v)).collect()))
}

fn verdicts_csv(rec: &StudyRecord) -> Result<String> {
    let header = ["check", "status", "measured", "tolerance", "detail"].map(String::from);
    to_csv(
        &header,
        rec.verdicts().iter().map(|v| {
            vec![
                v.check.clone(),
                v.status.as_str().to_string(),
                num(v.measured),
                num(v.tolerance),
                v.detail.clone(),
            ]
        }),
    )
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Decade-aligned log range covering the positive finite values.
fn decades(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite() && *v > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let (a, b) = (lo.log10().floor(), hi.log10().ceil());
    if a == b {
        (a, a + 1.0)
    } else {
        (a, b)
    }
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, v: f64) -> f64 {
        LEFT + (v.log10() - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v.log10() - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn svg(rec: &StudyRecord, spec: &PlotSpec) -> String {
    let xs = rec.table.column(&spec.x).unwrap_or_default();
    let series: Vec<(&String, Vec<f64>)> = spec
        .y
        .iter()
        .filter_map(|name| rec.table.column(name).map(|c| (name, c)))
        .collect();
    let bound = spec.bound.as_ref().and_then(|b| rec.fits.get(b).map(|&c| (b, c)));
    let keep = |x: f64, y: f64| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite();
    let x = decades(xs.iter().copied());
    let mut ys: Vec<f64> = series.iter().flat_map(|(_, c)| c.iter().copied()).collect();
    if let Some((_, c)) = bound {
        ys.extend([c * 10f64.powf(x.0), c * 10f64.powf(x.1)]);
    }
    let axes = Axes {
        x,
        y: decades(ys.into_iter()),
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{LEFT}" y="18">{}</text>"#, escape(&rec.id));
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
    for e in axes.x.0 as i32..=axes.x.1 as i32 {
        let p = axes.px(10f64.powi(e));
        let _ = writeln!(s, r##"<line x1="{p:.2}" y1="{y1}" x2="{p:.2}" y2="{y0}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r#"<text x="{p:.2}" y="{}" text-anchor="middle">1e{e}</text>"#, y1 + 16.0);
    }
    for e in axes.y.0 as i32..=axes.y.1 as i32 {
        let p = axes.py(10f64.powi(e));
        let _ = writeln!(s, r##"<line x1="{x0}" y1="{p:.2}" x2="{x1}" y2="{p:.2}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{e}</text>"#, x0 - 6.0, p + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 10.0,
        escape(&spec.x)
    );

    for (k, (name, ys)) in series.iter().enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        let mut pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(&x, &y)| (x, y)).filter(|&(x, y)| keep(x, y)).collect();
        let _ = writeln!(s, r#"<g class="series" data-column="{}" fill="{colour}" stroke="{colour}">"#, escape(name));
        if spec.kind == PlotKind::EpsilonSweep && pts.len() > 1 {
            let mut line = pts.clone();
            line.sort_by(|a, b| a.0.total_cmp(&b.0));
            let path: Vec<String> = line.iter().map(|&(x, y)| format!("{:.2},{:.2}", axes.px(x), axes.py(y))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" points="{}"/>"#, path.join(" "));
        }
        for (x, y) in pts.drain(..) {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" data-x="{}" data-y="{}"/>"#,
                axes.px(x),
                axes.py(y),
                num(x),
                num(y)
            );
        }
        let _ = writeln!(s, "</g>");
        let ly = TOP + 16.0 * (k as f64 + 1.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{colour}">{}</text>"#, x1 + 10.0, escape(name));
    }

    if let Some((name, c)) = bound {
        let (a, b) = (10f64.powf(axes.x.0), 10f64.powf(axes.x.1));
        let _ = writeln!(
            s,
            r#"<line class="bound" data-slope="{}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-dasharray="6 4"/>"#,
            num(c),
            axes.px(a),
            axes.py(c * a),
            axes.px(b),
            axes.py(c * b)
        );
        let ly = TOP + 16.0 * (series.len() as f64 + 1.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">bound {} = {}</text>"#, x1 + 10.0, escape(name), num(c));
    }
    s.push_str("</svg>\n");
    s
}
