//! CSV and SVG artifacts.
//!
//! CSV schemas:
//! - `pmf.csv`: `support,mass`
//! - `sweep.csv`: `A,capacity_nats,capacity_bits,shannon_bits,mckellips_bits,n_atoms`
//! - `trace.csv`: `step,J,capacity_nats,penalty`
//!
//! Reals are written with 17 significant digits so parsing restores them
//! exactly. Failed sweep points carry `NaN` capacities and `n_atoms = 0`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::pmf::Pmf;
use super::sweep::{SweepResult, SweepRow};
use crate::error::{Error, Result};
use crate::trainer::{CapacityTrace, StepRecord};

pub const PMF_HEADER: &str = "support,mass";
pub const SWEEP_HEADER: &str = "A,capacity_nats,capacity_bits,shannon_bits,mckellips_bits,n_atoms";
pub const TRACE_HEADER: &str = "step,J,capacity_nats,penalty";

fn real(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn pmf_csv(pmf: &Pmf) -> String {
    let mut s = format!("{PMF_HEADER}\n");
    for (x, m) in pmf.support().iter().zip(pmf.mass()) {
        let _ = writeln!(s, "{},{}", real(*x), real(*m));
    }
    s
}

pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for r in sweep.rows() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            real(r.a),
            real(r.capacity_nats),
            real(r.capacity_bits),
            real(r.shannon_bits),
            real(r.mckellips_bits),
            r.n_atoms
        );
    }
    s
}

pub fn trace_csv(trace: &CapacityTrace) -> String {
    let mut s = format!("{TRACE_HEADER}\n");
    for r in &trace.records {
        let _ = writeln!(s, "{},{},{},{}", r.step, real(r.value), real(r.capacity), real(r.penalty));
    }
    s
}

fn rows<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header => {}
        other => return Err(Error::Parse(format!("expected header '{header}', found {other:?}"))),
    }
    let width = header.split(',').count();
    let body: Vec<(usize, Vec<&str>)> = lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 2, l.split(',').map(str::trim).collect::<Vec<_>>()))
        .collect();
    if let Some((line, _)) = body.iter().find(|(_, f)| f.len() != width) {
        return Err(Error::Parse(format!("line {line}: expected {width} fields")));
    }
    Ok(body.into_iter())
}

fn num<T: std::str::FromStr>(field: &str, line: usize) -> Result<T> {
    field.parse().map_err(|_| Error::Parse(format!("line {line}: cannot parse '{field}'")))
}

pub fn parse_pmf_csv(text: &str) -> Result<Pmf> {
    let mut support = Vec::new();
    let mut mass = Vec::new();
    for (line, f) in rows(text, PMF_HEADER)? {
        support.push(num(f[0], line)?);
        mass.push(num(f[1], line)?);
    }
    Pmf::new(support, mass)
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    rows(text, SWEEP_HEADER)?
        .map(|(line, f)| {
            Ok(SweepRow {
                a: num(f[0], line)?,
                capacity_nats: num(f[1], line)?,
                capacity_bits: num(f[2], line)?,
                shannon_bits: num(f[3], line)?,
                mckellips_bits: num(f[4], line)?,
                n_atoms: num(f[5], line)?,
            })
        })
        .collect()
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<StepRecord>> {
    rows(text, TRACE_HEADER)?
        .map(|(line, f)| {
            Ok(StepRecord {
                step: num(f[0], line)?,
                value: num(f[1], line)?,
                capacity: num(f[2], line)?,
                penalty: num(f[3], line)?,
            })
        })
        .collect()
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 70.0;
const TICKS: usize = 5;

/// Linear axes on the fixed 800×600 canvas.
struct Plot {
    x: (f64, f64),
    y: (f64, f64),
    body: String,
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    padded(lo, hi)
}

impl Plot {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Self { x, y, body: String::new() }
    }

    fn px(&self, v: f64) -> f64 {
        MARGIN + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn marker(&mut self, class: &str, x: f64, y: f64, r: f64) {
        if x.is_finite() && y.is_finite() {
            let _ = writeln!(
                self.body,
                r#"<circle class="{class}" cx="{:.2}" cy="{:.2}" r="{:.2}"/>"#,
                self.px(x),
                self.py(y),
                r
            );
        }
    }

    fn curve(&mut self, class: &str, pts: &[(f64, f64)]) {
        let coords: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        let _ = writeln!(self.body, r#"<polyline class="{class}" fill="none" points="{}"/>"#, coords.join(" "));
    }

    fn finish(self, title: &str, xlabel: &str, ylabel: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">"#
        );
        let _ = writeln!(
            s,
            "<style>.axis{{stroke:#000}} .tick{{font:12px sans-serif}} .marker{{fill:#1f77b4;fill-opacity:0.7}} \
             .capacity{{fill:#d62728}} .shannon{{stroke:#2ca02c}} .mckellips{{stroke:#9467bd}} .trace{{stroke:#1f77b4}}</style>"
        );
        let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle" class="title">{title}</text>"#, WIDTH / 2.0);
        let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
        let _ = writeln!(s, r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>"#);
        let _ = writeln!(s, r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#);
        for i in 0..TICKS {
            let t = i as f64 / (TICKS - 1) as f64;
            let (xv, yv) = (self.x.0 + t * (self.x.1 - self.x.0), self.y.0 + t * (self.y.1 - self.y.0));
            let (px, py) = (self.px(xv), self.py(yv));
            let _ = writeln!(s, r#"<text class="tick" x="{px:.2}" y="{:.2}" text-anchor="middle">{xv:.3}</text>"#, y0 + 20.0);
            let _ = writeln!(s, r#"<text class="tick" x="{:.2}" y="{py:.2}" text-anchor="end">{yv:.3}</text>"#, x0 - 8.0);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, WIDTH / 2.0, HEIGHT - 20.0);
        let _ = writeln!(
            s,
            r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{ylabel}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0
        );
        s.push_str(&self.body);
        s.push_str("</svg>\n");
        s
    }
}

fn mass_radius(m: f64) -> f64 {
    3.0 + 17.0 * m.sqrt()
}

/// Support points on the horizontal axis, marker radius growing with mass.
pub fn pmf_svg(pmf: &Pmf, xlabel: &str) -> String {
    let mut p = Plot::new(extent(pmf.support().iter().copied()), padded(0.0, 1.0));
    for (x, m) in pmf.support().iter().zip(pmf.mass()) {
        p.marker("marker", *x, *m, mass_radius(*m));
    }
    p.finish("input distribution", xlabel, "mass")
}

/// Support points of every sweep PMF against `A`.
pub fn bifurcation_svg(sweep: &SweepResult) -> String {
    let ys = sweep.points.iter().filter_map(|p| p.pmf.as_ref()).flat_map(|pmf| pmf.support().to_vec());
    let mut p = Plot::new(extent(sweep.points.iter().map(|p| p.a)), extent(ys));
    for pt in &sweep.points {
        if let Some(pmf) = &pt.pmf {
            for (x, m) in pmf.support().iter().zip(pmf.mass()) {
                p.marker("marker", pt.a, *x, mass_radius(*m));
            }
        }
    }
    p.finish("support versus peak amplitude", "A", "support")
}

/// Capacity estimates (bits) with the Shannon and McKellips bounds.
pub fn capacity_svg(sweep: &SweepResult) -> String {
    let rows = sweep.rows();
    let ys = rows.iter().flat_map(|r| [r.capacity_bits, r.shannon_bits, r.mckellips_bits, 0.0]);
    let mut p = Plot::new(extent(rows.iter().map(|r| r.a)), extent(ys));
    p.curve("shannon", &rows.iter().map(|r| (r.a, r.shannon_bits)).collect::<Vec<_>>());
    p.curve("mckellips", &rows.iter().map(|r| (r.a, r.mckellips_bits)).collect::<Vec<_>>());
    for r in &rows {
        p.marker("capacity", r.a, r.capacity_bits, 5.0);
    }
    p.finish("capacity and upper bounds", "A", "bits")
}

pub fn trace_svg(trace: &CapacityTrace) -> String {
    let pts: Vec<(f64, f64)> = trace.records.iter().map(|r| (r.step as f64, r.capacity)).collect();
    let mut p = Plot::new(extent(pts.iter().map(|q| q.0)), extent(pts.iter().map(|q| q.1)));
    p.curve("trace", &pts);
    p.finish("capacity estimate during training", "step", "nats")
}

/// Scatter of 2-D points (at most `limit` are drawn).
pub fn scatter_svg(points: &[[f64; 2]], limit: usize) -> String {
    let shown = &points[..points.len().min(limit)];
    let r = extent(shown.iter().flat_map(|q| [q[0].abs(), q[1].abs()]).chain([0.0])).1;
    let mut p = Plot::new((-r, r), (-r, r));
    for q in shown {
        p.marker("marker", q[0], q[1], 1.5);
    }
    p.finish("generated inputs", "x1", "x2")
}
