use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::engine::{EventKind, SimResult};
use crate::error::{Error, Result};

/// Decimal rendering with 9 significant digits; NaN becomes an empty field.
pub(crate) fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    if x == 0.0 {
        return "0".into();
    }
    let e = x.abs().log10().floor() as i32;
    let decimals = (8 - e).clamp(0, 40) as usize;
    format!("{x:.decimals$}")
}

fn write_table(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn series_rows<'a>(time: &'a [f64], m: &'a DMatrix<f64>) -> impl Iterator<Item = Vec<String>> + 'a {
    time.iter().enumerate().map(move |(k, &t)| {
        std::iter::once(fmt_sig(t))
            .chain(m.row(k).iter().map(|&v| fmt_sig(v)))
            .collect()
    })
}

/// Writes `residuals.csv`, `voltages.csv` and `events.csv` into `dir`.
pub fn export_csv(result: &SimResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let n = result.nsubsystems();
    let res = dir.join("residuals.csv");
    let header: Vec<String> = std::iter::once("time_s".to_string())
        .chain((1..=n).map(|i| format!("eps_{i}")))
        .collect();
    write_table(&res, &header, series_rows(&result.time, &result.residual_norms))?;

    let volt = dir.join("voltages.csv");
    let header: Vec<String> = std::iter::once("time_s".to_string()).chain(result.bus_names.iter().cloned()).collect();
    write_table(&volt, &header, series_rows(&result.time, &result.voltages))?;

    let ev = dir.join("events.csv");
    let header = ["time_s", "type", "detail"].map(String::from);
    let rows = result
        .events
        .iter()
        .map(|e| vec![fmt_sig(e.time), e.type_name().to_string(), e.detail()]);
    write_table(&ev, &header, rows)?;
    Ok(vec![res, volt, ev])
}

/// Reads a time-series CSV written by [`export_csv`]: header, times, values
/// (empty fields as NaN).
pub fn read_series_csv(path: &Path) -> Result<(Vec<String>, Vec<f64>, DMatrix<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().skip(1).map(String::from).collect();
    let mut time = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| -> Result<f64> {
            if s.is_empty() {
                return Ok(f64::NAN);
            }
            s.parse().map_err(|_| Error::Parse {
                line: line + 2,
                column: 0,
                message: format!("not a number: {s:?}"),
            })
        };
        time.push(parse(&rec[0])?);
        for field in rec.iter().skip(1) {
            values.push(parse(field)?);
        }
    }
    let m = DMatrix::from_row_slice(time.len(), header.len(), &values);
    Ok((header, time, m))
}

/// Times and residual norms from `residuals.csv`.
pub fn read_residuals_csv(path: &Path) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (_, t, m) = read_series_csv(path)?;
    Ok((t, m))
}

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 180.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_T: f64 = 20.0;
const GAP: f64 = 40.0;
const MAX_POINTS: usize = 1500;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

struct Panel {
    top: f64,
    t_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Panel {
    fn x(&self, t: f64) -> f64 {
        MARGIN_L + PANEL_W * t / self.t_max
    }
    fn y(&self, v: f64) -> f64 {
        self.top + PANEL_H * (1.0 - (v - self.y_min) / (self.y_max - self.y_min))
    }

    fn frame(&self, svg: &mut String, title: &str) {
        let _ = writeln!(
            svg,
            r#"<rect x="{MARGIN_L}" y="{:.2}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/>"#,
            self.top
        );
        let _ = writeln!(svg, r#"<text x="{MARGIN_L}" y="{:.2}" font-size="12">{title}</text>"#, self.top - 5.0);
        for (v, anchor) in [(self.y_min, self.y_min), (self.y_max, self.y_max)] {
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"#,
                MARGIN_L - 4.0,
                self.y(anchor) + 3.0,
                fmt_short(v)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{} s</text>"#,
            MARGIN_L + PANEL_W,
            self.top + PANEL_H + 12.0,
            fmt_short(self.t_max)
        );
    }

    /// Polylines broken at NaN samples, thinned to at most `MAX_POINTS`.
    fn trace(&self, svg: &mut String, time: &[f64], values: impl Iterator<Item = f64>, color: &str) {
        let stride = time.len().div_ceil(MAX_POINTS).max(1);
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, svg: &mut String| {
            if run.len() > 1 {
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#,
                    run.join(" ")
                );
            }
            run.clear();
        };
        for (k, v) in values.enumerate() {
            if v.is_nan() {
                flush(&mut run, svg);
                continue;
            }
            if k % stride == 0 || k + 1 == time.len() {
                let y = self.y(v.clamp(self.y_min, self.y_max));
                run.push(format!("{:.2},{:.2}", self.x(time[k]), y));
            }
        }
        flush(&mut run, svg);
    }
}

fn fmt_short(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn document(height: f64, body: &str) -> String {
    let width = MARGIN_L + PANEL_W + 20.0;
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn finite_max(values: impl Iterator<Item = f64>) -> f64 {
    values.filter(|v| v.is_finite()).fold(0.0, |m, v| m.max(v.abs()))
}

/// `residuals.svg`: one panel per subsystem with the threshold at 1 and
/// markers at every disconnection; `voltages.svg`: deviations of all buses.
pub fn render_svg(result: &SimResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let t_max = result.time.last().copied().unwrap_or(0.0).max(result.step);
    let cuts: Vec<f64> = result
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Disconnection { .. }))
        .map(|e| e.time)
        .collect();

    let mut body = String::new();
    for i in 0..result.nsubsystems() {
        let col = result.residual_norms.column(i);
        let panel = Panel {
            top: MARGIN_T + i as f64 * (PANEL_H + GAP),
            t_max,
            y_min: 0.0,
            y_max: (finite_max(col.iter().copied()) * 1.1).max(1.5),
        };
        panel.frame(&mut body, &format!("subsystem {} residual norm / threshold", i + 1));
        let y1 = panel.y(1.0);
        let _ = writeln!(
            body,
            r#"<line class="threshold" data-value="1" x1="{MARGIN_L}" y1="{y1:.2}" x2="{:.2}" y2="{y1:.2}" stroke="gray" stroke-dasharray="6,4"/>"#,
            MARGIN_L + PANEL_W
        );
        for &t in &cuts {
            let x = panel.x(t);
            let _ = writeln!(
                body,
                r#"<line class="disconnection" data-time="{}" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black" stroke-dasharray="2,3"/>"#,
                fmt_sig(t),
                panel.top,
                panel.top + PANEL_H
            );
        }
        panel.trace(&mut body, &result.time, col.iter().copied(), PALETTE[i % PALETTE.len()]);
    }
    let n = result.nsubsystems().max(1) as f64;
    let res = dir.join("residuals.svg");
    std::fs::write(&res, document(MARGIN_T + n * (PANEL_H + GAP), &body))?;

    let mut body = String::new();
    let span = finite_max(result.voltages.iter().copied()).max(1e-6) * 1.1;
    let panel = Panel {
        top: MARGIN_T,
        t_max,
        y_min: -span,
        y_max: span,
    };
    panel.frame(&mut body, "voltage deviation v_k - v0 (per-unit)");
    let y0 = panel.y(0.0);
    let _ = writeln!(
        body,
        r#"<line x1="{MARGIN_L}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="lightgray"/>"#,
        MARGIN_L + PANEL_W
    );
    for &t in &cuts {
        let x = panel.x(t);
        let _ = writeln!(
            body,
            r#"<line class="disconnection" data-time="{}" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black" stroke-dasharray="2,3"/>"#,
            fmt_sig(t),
            panel.top,
            panel.top + PANEL_H
        );
    }
    for b in 0..result.voltages.ncols() {
        panel.trace(&mut body, &result.time, result.voltages.column(b).iter().copied(), PALETTE[b % PALETTE.len()]);
    }
    let volt = dir.join("voltages.svg");
    std::fs::write(&volt, document(MARGIN_T + PANEL_H + GAP, &body))?;
    Ok(vec![res, volt])
}
