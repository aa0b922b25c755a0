//! CSV, JSON and SVG emission for scan results.

use std::fmt::Write as _;
use std::io::{self, Write};

use serde::Serialize;

use crate::bifurcation::{PlaneCell, ScanRecord, StairStep};
use crate::models::{FiringRecord, IfPlaneCell, PlanarPoint};
use crate::farey::Rational;

/// Floats are written with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_rational(r: Option<Rational>) -> (String, String) {
    match r {
        Some(r) => (r.numer().to_string(), r.denom().to_string()),
        None => (String::new(), String::new()),
    }
}

/// Commas and newlines would break the column layout.
fn clean(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: Vec<&'static str>) -> Self {
        CsvTable {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Header line, then `# config` comment line, then rows.
    pub fn write<W: Write>(&self, mut w: W, config: &str) -> io::Result<()> {
        writeln!(w, "{}", self.header.join(","))?;
        writeln!(w, "# config: {}", config.replace('\n', " "))?;
        for row in &self.rows {
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_string_with(&self, config: &str) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf, config).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Rows as JSON objects keyed by column; numeric cells become numbers.
    pub fn to_json_rows(&self) -> serde_json::Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let obj = self
                    .header
                    .iter()
                    .zip(row)
                    .map(|(h, v)| {
                        let cell = match v.parse::<f64>() {
                            Ok(x) if x.is_finite() => serde_json::json!(x),
                            _ if v.is_empty() => serde_json::Value::Null,
                            _ => serde_json::Value::String(v.clone()),
                        };
                        (h.to_string(), cell)
                    })
                    .collect::<serde_json::Map<_, _>>();
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}

pub fn scan_table(records: &[ScanRecord]) -> CsvTable {
    let mut t = CsvTable::new(vec![
        "lambda", "mu_l", "mu_r", "outcome", "period", "eta_p", "eta_q", "word", "second_word", "rho_estimate", "case",
    ]);
    for r in records {
        let orbits = r.outcome.orbits();
        let eta = r.outcome.eta().or_else(|| orbits.first().map(|o| o.eta));
        let (p, q) = opt_rational(eta);
        t.push(vec![
            fmt_f64(r.lambda),
            fmt_f64(r.mu_left),
            fmt_f64(r.mu_right),
            r.outcome.label().to_string(),
            orbits.first().map(|o| o.period.to_string()).unwrap_or_default(),
            p,
            q,
            orbits.first().map(|o| o.word.to_string()).unwrap_or_default(),
            orbits.get(1).map(|o| o.word.to_string()).unwrap_or_default(),
            r.rotation.map(|x| fmt_f64(x.estimate)).unwrap_or_default(),
            r.geometry
                .as_ref()
                .map(|g| format!("{:?}", g.case))
                .unwrap_or_default(),
        ]);
    }
    t
}

pub fn staircase_table(steps: &[StairStep]) -> CsvTable {
    let mut t = CsvTable::new(vec!["lambda", "eta_p", "eta_q", "eta"]);
    for s in steps {
        let (p, q) = opt_rational(s.eta);
        t.push(vec![
            fmt_f64(s.lambda),
            p,
            q,
            s.eta.map(|e| fmt_f64(e.to_f64())).unwrap_or_default(),
        ]);
    }
    t
}

pub fn plane_table(cells: &[PlaneCell]) -> CsvTable {
    let mut t = CsvTable::new(vec!["i", "j", "mu_l", "mu_r", "outcome", "periods", "eta_p", "eta_q", "coexistence"]);
    for c in cells {
        let (p, q) = opt_rational(c.eta);
        t.push(vec![
            c.i.to_string(),
            c.j.to_string(),
            fmt_f64(c.mu_left),
            fmt_f64(c.mu_right),
            c.label.to_string(),
            c.periods.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" "),
            p,
            q,
            c.coexistence.to_string(),
        ]);
    }
    t
}

pub fn firing_table(records: &[FiringRecord], period: f64) -> CsvTable {
    let mut t = CsvTable::new(vec![
        "amplitude",
        "spikes",
        "firing_number_p",
        "firing_number_q",
        "firing_rate",
        "rho_p",
        "rho_q",
        "period",
        "spike_average_p",
        "spike_average_q",
        "contracting",
        "weak_expansion",
        "note",
    ]);
    for r in records {
        let (ep, eq) = opt_rational(r.eta);
        let (rp, rq) = opt_rational(r.rho);
        let (sp, sq) = opt_rational(r.spike_average);
        t.push(vec![
            fmt_f64(r.amplitude),
            r.spikes_low.to_string(),
            ep,
            eq,
            r.firing_rate(period).map(fmt_f64).unwrap_or_default(),
            rp,
            rq,
            r.period.map(|p| p.to_string()).unwrap_or_default(),
            sp,
            sq,
            r.contracting.to_string(),
            r.weak_expansion.to_string(),
            clean(&r.note),
        ]);
    }
    t
}

pub fn if_plane_table(cells: &[IfPlaneCell]) -> CsvTable {
    let mut t = CsvTable::new(vec!["i", "j", "duty", "inv_amplitude", "spikes", "firing_number_p", "firing_number_q", "period"]);
    for c in cells {
        let (p, q) = opt_rational(c.eta);
        t.push(vec![
            c.i.to_string(),
            c.j.to_string(),
            fmt_f64(c.duty),
            fmt_f64(c.inv_amplitude),
            c.spikes_low.to_string(),
            p,
            q,
            c.period.map(|p| p.to_string()).unwrap_or_default(),
        ]);
    }
    t
}

pub fn planar_table(points: &[PlanarPoint]) -> CsvTable {
    let mut t = CsvTable::new(vec![
        "k", "y_star", "both_virtual", "attractors", "words", "etas", "maximin", "quasi_contraction_ok", "border_collisions", "unresolved", "error",
    ]);
    for p in points {
        let mut row = vec![fmt_f64(p.k), fmt_f64(p.y_star)];
        match &p.analysis {
            Some(a) => {
                let words: Vec<String> = a.orbits.iter().map(|o| o.word.to_string()).collect();
                let etas: Vec<String> = a.orbits.iter().map(|o| o.eta.to_string()).collect();
                let maximin = a.orbits.iter().all(|o| o.is_maximin().unwrap_or(false));
                row.extend([
                    a.both_virtual.to_string(),
                    a.orbits.len().to_string(),
                    words.join(" "),
                    etas.join(" "),
                    maximin.to_string(),
                    a.quasi_contraction_ok().to_string(),
                    a.border_collisions.to_string(),
                    a.unresolved.to_string(),
                    String::new(),
                ]);
            }
            None => {
                row.extend(std::iter::repeat_n(String::new(), 8));
                row.push(clean(p.error.as_deref().unwrap_or("")));
            }
        }
        t.push(row);
    }
    t
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    serde_json::to_string_pretty(value)
}

/// Minimal SVG document built from rects, paths and text.
#[derive(Debug, Clone)]
pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

const MARGIN: f64 = 40.0;

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Svg {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.3}" y="{y:.3}" width="{w:.3}" height="{h:.3}" fill="{fill}"/>"#
        );
    }

    pub fn path(&mut self, d: &str, stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            r#"<path d="{d}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#
        );
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, s: &str) {
        let s = s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        let _ = writeln!(self.body, r#"<text x="{x:.3}" y="{y:.3}" font-size="{size}" font-family="sans-serif">{s}</text>"#);
    }

    pub fn render(&self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{body}</svg>\n",
            w = self.width,
            h = self.height,
            body = self.body
        )
    }
}

/// Fixed colour per period; grey for unresolved cells.
pub fn period_color(period: Option<usize>) -> String {
    match period {
        Some(p) => format!("hsl({},70%,{}%)", (p * 47) % 360, 35 + (p * 13) % 40),
        None => "#bbbbbb".to_string(),
    }
}

/// η against the parameter, as a polyline through the resolved samples.
pub fn staircase_svg(steps: &[StairStep], title: &str) -> String {
    let (w, h) = (640.0, 420.0);
    let mut svg = Svg::new(w, h);
    svg.rect(0.0, 0.0, w, h, "white");
    let (pw, ph) = (w - 2.0 * MARGIN, h - 2.0 * MARGIN);
    let (lo, hi) = steps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| {
        (a.min(s.lambda), b.max(s.lambda))
    });
    let (elo, ehi) = steps
        .iter()
        .filter_map(|s| s.eta.map(|e| e.to_f64()))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), e| (a.min(e), b.max(e)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let espan = if ehi > elo { ehi - elo } else { 1.0 };
    let mut d = String::new();
    for s in steps {
        if let Some(e) = s.eta {
            let x = MARGIN + pw * (s.lambda - lo) / span;
            let y = MARGIN + ph * (1.0 - (e.to_f64() - elo) / espan);
            let _ = write!(d, "{}{x:.3},{y:.3} ", if d.is_empty() { "M" } else { "L" });
        }
    }
    svg.path(&format!("M{MARGIN},{MARGIN} L{MARGIN},{} L{},{}", h - MARGIN, w - MARGIN, h - MARGIN), "black", 1.0);
    if !d.is_empty() {
        svg.path(d.trim_end(), "#1f4e9c", 1.5);
    }
    svg.text(MARGIN, 0.6 * MARGIN, 14.0, title);
    svg.text(w - MARGIN - 20.0, h - 0.3 * MARGIN, 12.0, "lambda");
    svg.text(4.0, MARGIN - 4.0, 12.0, "eta");
    svg.render()
}

/// One raster cell for [`raster_svg`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterCell {
    pub i: usize,
    pub j: usize,
    pub period: Option<usize>,
    pub hatched: bool,
}

/// Region map: cells coloured by period, coexistence hatched.
pub fn raster_svg(width: usize, height: usize, cells: &[RasterCell], title: &str, x_label: &str, y_label: &str) -> String {
    let (w, h) = (640.0, 640.0);
    let mut svg = Svg::new(w, h);
    svg.rect(0.0, 0.0, w, h, "white");
    let cw = (w - 2.0 * MARGIN) / width.max(1) as f64;
    let ch = (h - 2.0 * MARGIN) / height.max(1) as f64;
    let mut hatch = String::new();
    for c in cells {
        let x = MARGIN + c.i as f64 * cw;
        let y = h - MARGIN - (c.j + 1) as f64 * ch;
        svg.rect(x, y, cw, ch, &period_color(c.period));
        if c.hatched {
            let _ = write!(hatch, "M{:.3},{:.3} L{:.3},{:.3} ", x, y + ch, x + cw, y);
        }
    }
    if !hatch.is_empty() {
        svg.path(hatch.trim_end(), "black", 0.6);
    }
    svg.text(MARGIN, 0.6 * MARGIN, 14.0, title);
    svg.text(w - MARGIN - 40.0, h - 0.3 * MARGIN, 12.0, x_label);
    svg.text(4.0, MARGIN - 4.0, 12.0, y_label);
    svg.render()
}

pub fn plane_svg(cells: &[PlaneCell], width: usize, height: usize, title: &str) -> String {
    let raster: Vec<RasterCell> = cells
        .iter()
        .map(|c| RasterCell {
            i: c.i,
            j: c.j,
            period: c.periods.first().copied(),
            hatched: c.coexistence,
        })
        .collect();
    raster_svg(width, height, &raster, title, "mu_L", "mu_R")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(-1.0 / 3.0), "-3.3333333333333331e-1");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_has_header_then_config() {
        let mut t = CsvTable::new(vec!["a", "b"]);
        t.push(vec!["1".into(), "x".into()]);
        let s = t.to_string_with("samples=3\njobs=1");
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines, vec!["a,b", "# config: samples=3 jobs=1", "1,x"]);
    }

    #[test]
    fn svg_is_well_formed_and_escaped() {
        let mut svg = Svg::new(10.0, 10.0);
        svg.text(1.0, 1.0, 8.0, "a<b & c");
        let s = svg.render();
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a&lt;b &amp; c"));
        let raster = raster_svg(
            2,
            1,
            &[
                RasterCell { i: 0, j: 0, period: Some(3), hatched: true },
                RasterCell { i: 1, j: 0, period: None, hatched: false },
            ],
            "t",
            "x",
            "y",
        );
        assert_eq!(raster.matches("<rect").count(), 3);
        assert_eq!(raster.matches("<path").count(), 1);
    }
}
