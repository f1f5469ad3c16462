use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use csv::{ReaderBuilder, Terminator, WriterBuilder};

use super::summary::{column, SummaryTable, Value};
use super::ResultRecord;
use crate::error::{Error, Result};

/// Column order of record CSV files.
pub const RECORD_COLUMNS: [&str; 17] = [
    "experiment", "ensemble", "trial", "n", "m", "s", "eta", "noise", "recovery_error", "sigma_min", "mu_hat",
    "xi_hat", "l2_error", "status", "iterations", "seed", "stream",
];

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.to_path_buf(), source }
}

/// Writes `records` with a header line. Missing values are empty cells and
/// floats carry 17 significant digits, so they read back exactly.
pub fn write_records<W: Write>(out: W, records: &[ResultRecord]) -> std::result::Result<(), csv::Error> {
    let mut w = WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record(RECORD_COLUMNS.map(|c| column(r, c).expect("fixed column set").to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(file, records).map_err(csv_err(path))
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRecord>> {
    let mut r = ReaderBuilder::new().from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(String::from).collect();
    if header != RECORD_COLUMNS {
        return Err(Error::Config(format!("{}: unexpected header {header:?}", path.display())));
    }
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err(path))
}

pub fn write_summary<W: Write>(out: W, table: &SummaryTable) -> std::result::Result<(), csv::Error> {
    let mut w = WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_writer(out);
    let mut header = table.group_by.clone();
    header.push(format!("{}_{}", table.metric, table.stat.label()));
    header.push("count".into());
    w.write_record(&header)?;
    for row in &table.rows {
        let mut cells: Vec<String> = row.key.iter().map(|k| k.to_string()).collect();
        cells.push(format!("{:.16e}", row.value));
        cells.push(row.count.to_string());
        w.write_record(&cells)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, table: &SummaryTable) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_summary(file, table).map_err(csv_err(path))
}

fn numeric(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(f) => Some(*f),
        _ => None,
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Renders a summary as a line chart. The last grouping column is the
/// horizontal axis and the remaining ones select the series. An axis whose
/// values are all positive and span more than two decades is logarithmic.
pub fn render_svg(table: &SummaryTable) -> Result<String> {
    let Some(x_name) = table.group_by.last() else {
        return Err(Error::InvalidArgument("a chart needs at least one grouping column".into()));
    };
    let mut series: BTreeMap<Vec<Value>, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &table.rows {
        let (label, x) = row.key.split_at(row.key.len() - 1);
        let Some(x) = numeric(&x[0]) else {
            return Err(Error::InvalidArgument(format!("column '{x_name}' is not numeric")));
        };
        series.entry(label.to_vec()).or_default().push((x, row.value));
    }
    let xs: Vec<f64> = series.values().flatten().map(|p| p.0).collect();
    let ys: Vec<f64> = series.values().flatten().map(|p| p.1).filter(|v| v.is_finite()).collect();
    let x_axis = Axis::fit(&xs);
    let y_axis = Axis::fit(&ys);

    let (w, h, left, right, top, bottom) = (640.0, 420.0, 70.0, 170.0, 20.0, 50.0);
    let px = |x: f64| left + x_axis.unit(x) * (w - left - right);
    let py = |y: f64| h - bottom - y_axis.unit(y) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    for (v, label) in x_axis.ticks() {
        let x = px(v);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#, h - bottom + 15.0);
    }
    for (v, label) in y_axis.ticks() {
        let y = py(v);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#, left - 5.0, y + 4.0);
        let _ = writeln!(s, r##"<line x1="{left}" x2="{:.1}" y1="{y:.1}" y2="{y:.1}" stroke="#ddd"/>"##, w - right);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x_name}</text>"#, (left + w - right) / 2.0, h - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">{} {}</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0,
        table.stat.label(),
        table.metric
    );
    for (i, (label, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = points
            .iter()
            .filter(|p| p.1.is_finite() && (!y_axis.log || p.1 > 0.0))
            .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        let name: Vec<String> = table.group_by.iter().zip(label).map(|(k, v)| format!("{k}={v}")).collect();
        let ly = top + 15.0 * (i as f64 + 1.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}" fill="{color}">{}</text>"#, w - right + 10.0, name.join(" "));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn write_svg(path: &Path, table: &SummaryTable) -> Result<()> {
    std::fs::write(path, render_svg(table)?).map_err(|e| Error::io(path, e))
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: &[f64]) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            return Self { lo: 0.0, hi: 1.0, log: false };
        }
        let log = lo > 0.0 && hi / lo > 100.0;
        let (lo, hi) = if log { (lo.log10().floor(), hi.log10().ceil()) } else { (lo, hi) };
        let hi = if hi > lo { hi } else { lo + 1.0 };
        Self { lo, hi, log }
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0) as i32;
            (self.lo as i32..=self.hi as i32)
                .step_by(step as usize)
                .map(|k| (10f64.powi(k), format!("1e{k}")))
                .collect()
        } else {
            (0..=4)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                    (v, format!("{v:.3}"))
                })
                .collect()
        }
    }
}
