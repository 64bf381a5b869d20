//! Report artifacts: CSV tables, the JSON summary, SVG plots and binary field dumps.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};
use skl_core::discretization::{Grid, ScalarField};
use skl_core::kernels::RatioReport;

use crate::error::{ErrorRecord, RunError, RunResult};

pub const DUMP_MAGIC: &[u8; 4] = b"SKL1";

/// One line of the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
    /// Acceptance criterion number, 0 for supplementary checks.
    #[serde(skip)]
    pub group: u8,
}

impl Criterion {
    pub fn at_most(group: u8, name: impl Into<String>, value: f64, bound: f64) -> Self {
        Criterion { name: name.into(), value, bound, pass: value <= bound, group }
    }

    pub fn at_least(group: u8, name: impl Into<String>, value: f64, bound: f64) -> Self {
        Criterion { name: name.into(), value, bound, pass: value >= bound, group }
    }

    /// `pass` is given; value and bound are informational.
    pub fn flag(group: u8, name: impl Into<String>, value: f64, bound: f64, pass: bool) -> Self {
        Criterion { name: name.into(), value, bound, pass, group }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub criteria: Vec<Criterion>,
    #[serde(default)]
    pub errors: Vec<ErrorRecord>,
}

impl Summary {
    pub fn pass(&self) -> bool {
        self.errors.is_empty() && self.criteria.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Points,
    Line,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

impl Plot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Plot { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), log_x: false, log_y: false, series: Vec::new() }
    }

    pub fn log_log(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn log_x(mut self) -> Self {
        self.log_x = true;
        self
    }

    pub fn log_y(mut self) -> Self {
        self.log_y = true;
        self
    }

    pub fn with(mut self, label: impl Into<String>, points: Vec<(f64, f64)>, style: Style) -> Self {
        self.series.push(Series { label: label.into(), points, style });
        self
    }

    fn range(&self, axis: usize, log: bool) -> (f64, f64) {
        let vals = self.series.iter().flat_map(|s| s.points.iter()).map(|p| if axis == 0 { p.0 } else { p.1 });
        let vals: Vec<f64> = vals.filter(|v| v.is_finite() && (!log || *v > 0.0)).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            return if log { (0.1, 10.0) } else { (0.0, 1.0) };
        }
        if log {
            let (lo, hi) = if hi / lo < 1.01 { (lo / 2.0, hi * 2.0) } else { (lo, hi) };
            (lo / 1.1, hi * 1.1)
        } else {
            let pad = if hi > lo { 0.05 * (hi - lo) } else { lo.abs().max(1.0) * 0.1 };
            (lo - pad, hi + pad)
        }
    }

    /// Renders the plot as an SVG document.
    pub fn render(&self) -> RunResult<String> {
        let mut svg = String::new();
        let (x0, x1) = self.range(0, self.log_x);
        let (y0, y1) = self.range(1, self.log_y);
        {
            let root = SVGBackend::with_string(&mut svg, (720, 480)).into_drawing_area();
            root.fill(&WHITE).map_err(plot_err)?;
            let mut builder = ChartBuilder::on(&root);
            builder.caption(&self.title, ("sans-serif", 18)).margin(12).x_label_area_size(36).y_label_area_size(60);
            match (self.log_x, self.log_y) {
                (false, false) => {
                    let mut c = builder.build_cartesian_2d(x0..x1, y0..y1).map_err(plot_err)?;
                    c.configure_mesh().x_desc(&self.x_label).y_desc(&self.y_label).draw().map_err(plot_err)?;
                    self.draw(&mut c)?;
                    c.configure_series_labels().border_style(BLACK).draw().map_err(plot_err)?;
                }
                (true, true) => {
                    let mut c = builder.build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale()).map_err(plot_err)?;
                    c.configure_mesh().x_desc(&self.x_label).y_desc(&self.y_label).draw().map_err(plot_err)?;
                    self.draw(&mut c)?;
                    c.configure_series_labels().border_style(BLACK).draw().map_err(plot_err)?;
                }
                (false, true) => {
                    let mut c = builder.build_cartesian_2d(x0..x1, (y0..y1).log_scale()).map_err(plot_err)?;
                    c.configure_mesh().x_desc(&self.x_label).y_desc(&self.y_label).draw().map_err(plot_err)?;
                    self.draw(&mut c)?;
                    c.configure_series_labels().border_style(BLACK).draw().map_err(plot_err)?;
                }
                (true, false) => {
                    let mut c = builder.build_cartesian_2d((x0..x1).log_scale(), y0..y1).map_err(plot_err)?;
                    c.configure_mesh().x_desc(&self.x_label).y_desc(&self.y_label).draw().map_err(plot_err)?;
                    self.draw(&mut c)?;
                    c.configure_series_labels().border_style(BLACK).draw().map_err(plot_err)?;
                }
            }
            root.present().map_err(plot_err)?;
        }
        Ok(svg)
    }

    fn draw<'a, X, Y>(&self, chart: &mut ChartContext<'a, SVGBackend<'a>, Cartesian2d<X, Y>>) -> RunResult<()>
    where
        X: Ranged<ValueType = f64>,
        Y: Ranged<ValueType = f64>,
    {
        for (k, s) in self.series.iter().enumerate() {
            let color = Palette99::pick(k).to_rgba();
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .copied()
                .filter(|p| p.0.is_finite() && p.1.is_finite() && (!self.log_x || p.0 > 0.0) && (!self.log_y || p.1 > 0.0))
                .collect();
            let anno = match s.style {
                Style::Points => chart
                    .draw_series(pts.iter().map(|p| Circle::new(*p, 2, color.filled())))
                    .map_err(plot_err)?,
                Style::Line => chart.draw_series(LineSeries::new(pts, color.stroke_width(2))).map_err(plot_err)?,
            };
            anno.label(s.label.clone()).legend(move |(x, y)| Rectangle::new([(x, y - 4), (x + 12, y + 4)], color.filled()));
        }
        Ok(())
    }
}

fn plot_err<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Output(e.to_string())
}

/// Output directory with ordered, single-threaded writers.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    plots: bool,
    dumps: bool,
    stamp: String,
    written: Vec<PathBuf>,
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn row(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| fmt(*v)).collect()
}

impl Artifacts {
    pub fn new(dir: impl Into<PathBuf>, plots: bool, dumps: bool) -> RunResult<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| RunError::io(&dir, e))?;
        let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let stamp = format!("# skl {} generated unix={secs}", env!("CARGO_PKG_VERSION"));
        Ok(Artifacts { dir, plots, dumps, stamp, written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn create(&mut self, name: &str) -> RunResult<(PathBuf, BufWriter<File>)> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| RunError::io(&path, e))?;
        self.written.push(path.clone());
        Ok((path, BufWriter::new(file)))
    }

    /// CSV table; the first line is a `#` comment carrying the timestamp.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> RunResult<PathBuf> {
        let (path, mut w) = self.create(&format!("{name}.csv"))?;
        writeln!(w, "{}", self.stamp).map_err(|e| RunError::io(&path, e))?;
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| RunError::Output(format!("{}: {e}", path.display()));
        out.write_record(header).map_err(csv_err)?;
        for r in rows {
            out.write_record(&r).map_err(csv_err)?;
        }
        out.flush().map_err(|e| RunError::io(&path, e))?;
        Ok(path)
    }

    /// One row per sample of a ratio report.
    pub fn ratio_csv(&mut self, name: &str, report: &RatioReport) -> RunResult<PathBuf> {
        let header = ["label", "x1", "x2", "x3", "y1", "y2", "y3", "t", "numeric", "envelope", "ratio"];
        let rows = report.records.iter().map(|r| {
            let mut v = vec![report.label.clone()];
            v.extend(row(&[r.x[0], r.x[1], r.x[2], r.y[0], r.y[1], r.y[2]]));
            v.push(r.t.map(fmt).unwrap_or_default());
            v.extend(row(&[r.numeric, r.envelope, r.ratio]));
            v
        });
        self.csv(name, &header, rows)
    }

    /// Node coordinates and values of a field.
    pub fn field_csv(&mut self, name: &str, grid: &Grid, field: &ScalarField) -> RunResult<PathBuf> {
        let rows = (0..field.len()).map(|i| {
            let p = grid.point(i);
            row(&[i as f64, p[0], p[1], p[2], field.values[i]])
        });
        self.csv(name, &["node", "x1", "x2", "x3", "value"], rows)
    }

    /// Binary dump of field values, written only when dumps are enabled.
    pub fn dump(&mut self, name: &str, values: &[f64]) -> RunResult<Option<PathBuf>> {
        if !self.dumps {
            return Ok(None);
        }
        let (path, mut w) = self.create(&format!("{name}.skl"))?;
        write_dump(&mut w, values).map_err(|e| RunError::io(&path, e))?;
        w.flush().map_err(|e| RunError::io(&path, e))?;
        Ok(Some(path))
    }

    pub fn svg(&mut self, name: &str, plot: &Plot) -> RunResult<Option<PathBuf>> {
        if !self.plots {
            return Ok(None);
        }
        let text = plot.render()?;
        let (path, mut w) = self.create(&format!("{name}.svg"))?;
        w.write_all(text.as_bytes()).map_err(|e| RunError::io(&path, e))?;
        w.flush().map_err(|e| RunError::io(&path, e))?;
        Ok(Some(path))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> RunResult<PathBuf> {
        let (path, mut w) = self.create(&format!("{name}.json"))?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| RunError::Output(e.to_string()))?;
        writeln!(w).map_err(|e| RunError::io(&path, e))?;
        w.flush().map_err(|e| RunError::io(&path, e))?;
        Ok(path)
    }
}

/// `"SKL1"`, the value count as little-endian `u64`, then little-endian `f64` values.
pub fn write_dump(w: &mut impl Write, values: &[f64]) -> std::io::Result<()> {
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_dump(r: &mut impl Read) -> std::io::Result<Vec<f64>> {
    let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(bad("missing SKL1 magic"));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let n = u64::from_le_bytes(len) as usize;
    let mut out = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes after the declared length"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let values = [1.0, -2.5, f64::MIN_POSITIVE, 1e300];
        let mut buf = Vec::new();
        write_dump(&mut buf, &values).unwrap();
        assert_eq!(&buf[..4], b"SKL1");
        assert_eq!(u64::from_le_bytes(buf[4..12].try_into().unwrap()), 4);
        assert_eq!(buf.len(), 12 + 32);
        assert_eq!(read_dump(&mut buf.as_slice()).unwrap(), values);
        buf.push(0);
        assert!(read_dump(&mut buf.as_slice()).is_err());
        assert!(read_dump(&mut &b"SKL2\0\0\0\0\0\0\0\0"[..]).is_err());
    }

    #[test]
    fn summary_schema() {
        let s = Summary {
            config_hash: "ab".into(),
            criteria: vec![Criterion::at_most(1, "x", 0.5, 1.0)],
            errors: Vec::new(),
        };
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        let c = &v["criteria"][0];
        let mut keys: Vec<&str> = c.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort();
        assert_eq!(keys, ["bound", "name", "pass", "value"]);
        assert!(v["config_hash"].is_string());
    }

    #[test]
    fn plots_render() {
        let p = Plot::new("t", "x", "y")
            .log_log()
            .with("a", vec![(0.1, 1.0), (0.2, 3.0), (0.0, 1.0)], Style::Points)
            .with("b", vec![(0.1, 2.0), (0.4, 2.0)], Style::Line);
        let s = p.render().unwrap();
        assert!(s.starts_with("<svg"));
        let empty = Plot::new("e", "x", "y").render().unwrap();
        assert!(empty.contains("</svg>"));
    }
}
