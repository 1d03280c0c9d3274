//! CSV input and output, metadata sidecars.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::data::TimeSeries;
use crate::embed::Embedding;
use crate::error::{invalid_data, Result};
use crate::eval::{RobustnessGrid, SummaryRow, SweepRecord};

/// Columns that carry no coordinates.
const INDEX_COLUMNS: [&str; 2] = ["t", "index"];
const LABEL_COLUMN: &str = "label";

/// Reads a numeric CSV. A header row is detected when any of its fields is
/// not a number; a `label` column becomes the labels, and `t` or `index`
/// columns are dropped. Rows are taken in file order.
pub fn parse_timeseries(text: &str) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut records = reader.records().peekable();
    let first = match records.peek() {
        Some(Ok(r)) => r.clone(),
        Some(Err(e)) => return Err(invalid_data(format!("line 1: {e}"))),
        None => return Err(invalid_data("empty CSV input")),
    };
    let has_header = first.iter().any(|f| f.parse::<f64>().is_err());
    let width = first.len();
    let names: Vec<String> = if has_header {
        records.next();
        first.iter().map(|s| s.to_ascii_lowercase()).collect()
    } else {
        (1..=width).map(|k| format!("x{k}")).collect()
    };
    let label_col = names.iter().position(|n| n == LABEL_COLUMN);
    let value_cols: Vec<usize> =
        (0..width).filter(|&c| Some(c) != label_col && !INDEX_COLUMNS.contains(&names[c].as_str())).collect();
    if value_cols.is_empty() {
        return Err(invalid_data("CSV input has no numeric columns"));
    }
    let header_lines = usize::from(has_header);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for (k, rec) in records.enumerate() {
        let row = k + 1;
        let line = row + header_lines;
        let rec = rec.map_err(|e| invalid_data(format!("row {row} (line {line}): {e}")))?;
        if rec.len() != width {
            return Err(invalid_data(format!(
                "row {row} (line {line}): expected {width} fields, found {}",
                rec.len()
            )));
        }
        for &c in &value_cols {
            let field = &rec[c];
            let v: f64 = field
                .parse()
                .map_err(|_| invalid_data(format!("row {row} (line {line}): '{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(invalid_data(format!("row {row} (line {line}): non-finite value '{field}'")));
            }
            values.push(v);
        }
        if let Some(c) = label_col {
            labels.push(rec[c].to_string());
        }
        n += 1;
    }
    if n == 0 {
        return Err(invalid_data("CSV input has no data rows"));
    }
    let data = DMatrix::from_row_slice(n, value_cols.len(), &values);
    TimeSeries::with_labels(data, label_col.map(|_| labels))
}

pub fn load_timeseries(path: &Path) -> Result<TimeSeries> {
    let text = fs::read_to_string(path).map_err(|e| invalid_data(format!("cannot read {}: {e}", path.display())))?;
    parse_timeseries(&text).map_err(|e| match e {
        crate::FigError::InvalidData(m) => invalid_data(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// `t,x1..xd[,label]`
pub fn timeseries_csv(x: &TimeSeries) -> String {
    let d = x.dim();
    let mut out = String::from("t");
    for c in 1..=d {
        write!(out, ",x{c}").unwrap();
    }
    if x.labels().is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for t in 0..x.len() {
        write!(out, "{t}").unwrap();
        for c in 0..d {
            write!(out, ",{}", x.data()[(t, c)]).unwrap();
        }
        if let Some(l) = x.labels() {
            write!(out, ",{}", quote(&l[t])).unwrap();
        }
        out.push('\n');
    }
    out
}

/// `t,theta1,theta2`
pub fn theta_csv(theta: &DMatrix<f64>) -> String {
    let mut out = String::from("t");
    for c in 1..=theta.ncols() {
        write!(out, ",theta{c}").unwrap();
    }
    out.push('\n');
    for t in 0..theta.nrows() {
        write!(out, "{t}").unwrap();
        for c in 0..theta.ncols() {
            write!(out, ",{}", theta[(t, c)]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// `index,label,y1..yr`; the label field is empty without labels.
pub fn embedding_csv(e: &Embedding, labels: Option<&[String]>) -> String {
    let r = e.r();
    let mut out = String::from("index,label");
    for c in 1..=r {
        write!(out, ",y{c}").unwrap();
    }
    out.push('\n');
    for i in 0..e.n() {
        let label = labels.map(|l| quote(&l[i])).unwrap_or_default();
        write!(out, "{i},{label}").unwrap();
        for c in 0..r {
            write!(out, ",{}", e.coords[(i, c)]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// `key = value` lines in key order.
pub fn sidecar_text(entries: &BTreeMap<String, String>) -> String {
    entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub fn parse_sidecar(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| invalid_data(format!("sidecar line {}: expected key = value", k + 1)))?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

/// `method,sigma_or_window,seed,mantel_r`
pub fn records_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("method,sigma_or_window,seed,mantel_r\n");
    for r in records {
        writeln!(out, "{},{},{},{}", r.method, r.setting, r.seed, r.mantel_r).unwrap();
    }
    out
}

/// `method,sigma_or_window,seed,runtime_s`
pub fn timings_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("method,sigma_or_window,seed,runtime_s\n");
    for r in records {
        writeln!(out, "{},{},{},{}", r.method, r.setting, r.seed, r.runtime_s).unwrap();
    }
    out
}

/// `method,sigma_or_window,mean,std,count`
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("method,sigma_or_window,mean,std,count\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.method, r.setting, r.mean, r.std, r.count).unwrap();
    }
    out
}

/// One row per seed and window pair:
/// `method,window_a,window_b,seed,mantel_r`, with mean and std rows under
/// the seed values `mean` and `std`.
pub fn grid_csv(grids: &[RobustnessGrid]) -> String {
    let mut out = String::from("method,window_a,window_b,seed,mantel_r\n");
    for g in grids {
        let w = &g.window_values;
        for (seed, m) in g.seeds.iter().zip(&g.per_seed) {
            for a in 0..w.len() {
                for b in 0..w.len() {
                    writeln!(out, "{},{},{},{seed},{}", g.method, w[a], w[b], m[(a, b)]).unwrap();
                }
            }
        }
        for (tag, m) in [("mean", &g.m), ("std", &g.std)] {
            for a in 0..w.len() {
                for b in 0..w.len() {
                    writeln!(out, "{},{},{},{tag},{}", g.method, w[a], w[b], m[(a, b)]).unwrap();
                }
            }
        }
    }
    out
}

/// `method,summary_mean,summary_std`
pub fn grid_summary_csv(grids: &[RobustnessGrid]) -> String {
    let mut out = String::from("method,summary_mean,summary_std\n");
    for g in grids {
        writeln!(out, "{},{},{}", g.method, g.summary_mean, g.summary_std).unwrap();
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}
