//! CSV datasets and JSON/CSV exports.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use olap_core::coupling::{MeetingRecord, TvCurve};
use olap_core::{Dataset, GlmFamily, Support};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub data: Dataset,
    /// Covariate names in column order (response removed).
    pub columns: Vec<String>,
}

fn parse_cell(raw: &str, line: u64, column: usize, name: &str) -> Result<f64> {
    let cell = raw.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
        return Err(Error::Parse { line, column, name: name.into(), message: "missing value".into() });
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| Error::Parse { line, column, name: name.into(), message: format!("not a number: {cell:?}") })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, column, name: name.into(), message: format!("non-finite value {cell}") });
    }
    Ok(v)
}

/// Header row, then one numeric row per observation.
fn read_table<R: Read>(reader: R) -> Result<(Vec<String>, Vec<(u64, Vec<f64>)>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let vals = rec
            .iter()
            .enumerate()
            .map(|(c, cell)| parse_cell(cell, line, c + 1, &header[c]))
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, vals));
    }
    Ok((header, rows))
}

pub fn read_dataset<R: Read>(reader: R, family: GlmFamily, response_column: &str) -> Result<LoadedDataset> {
    let (header, rows) = read_table(reader)?;
    let resp = header
        .iter()
        .position(|h| h == response_column)
        .ok_or_else(|| Error::Validation(format!("response column {response_column:?} not in header")))?;
    if rows.is_empty() {
        return Err(Error::Validation("no data rows".into()));
    }
    if header.len() < 2 {
        return Err(Error::Validation("need at least one covariate column".into()));
    }
    let n = rows.len();
    let p = header.len() - 1;
    let mut x = DMatrix::zeros(n, p);
    let mut y = Vec::with_capacity(n);
    for (i, (line, vals)) in rows.iter().enumerate() {
        let v = vals[resp];
        match family {
            GlmFamily::Logistic if v != 0.0 && v != 1.0 => {
                return Err(Error::Parse { line: *line, column: resp + 1, name: response_column.into(), message: format!("logistic response must be 0 or 1, got {v}") });
            }
            GlmFamily::Poisson if v < 0.0 || v.fract() != 0.0 => {
                return Err(Error::Parse { line: *line, column: resp + 1, name: response_column.into(), message: format!("Poisson response must be a count, got {v}") });
            }
            _ => {}
        }
        y.push(v);
        for (j, &c) in vals.iter().enumerate().filter(|(j, _)| *j != resp).map(|(_, c)| c).enumerate() {
            x[(i, j)] = c;
        }
    }
    let columns = header.into_iter().enumerate().filter(|(j, _)| *j != resp).map(|(_, h)| h).collect();
    Ok(LoadedDataset { data: Dataset::new(x, y, family)?, columns })
}

pub fn load_dataset(path: &Path, family: GlmFamily, response_column: &str) -> Result<LoadedDataset> {
    read_dataset(File::open(path)?, family, response_column)
}

/// Numeric matrix from a CSV with header; `drop` names a column to ignore.
pub fn load_matrix(path: &Path, drop: Option<&str>) -> Result<(DMatrix<f64>, Vec<String>)> {
    let (header, rows) = read_table(File::open(path)?)?;
    let keep: Vec<usize> = (0..header.len()).filter(|&j| Some(header[j].as_str()) != drop).collect();
    let x = DMatrix::from_fn(rows.len(), keep.len(), |i, k| rows[i].1[keep[k]]);
    Ok((x, keep.into_iter().map(|j| header[j].clone()).collect()))
}

/// Covariates `x1..xp` (or `columns`) followed by the response column `y`.
///
/// Values are written in shortest round-trip form, so a reload is bit-exact.
pub fn write_dataset<W: Write>(writer: W, data: &Dataset, columns: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = match columns {
        Some(c) if c.len() == data.p() => c.to_vec(),
        Some(c) => return Err(Error::Validation(format!("{} column names for {} covariates", c.len(), data.p()))),
        None => (1..=data.p()).map(|j| format!("x{j}")).collect(),
    };
    header.push("y".into());
    w.write_record(&header)?;
    let x = data.x();
    for i in 0..data.n() {
        let mut rec: Vec<String> = (0..data.p()).map(|j| format!("{}", x[(i, j)])).collect();
        rec.push(format!("{}", data.y()[i]));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(path: &Path, data: &Dataset, columns: Option<&[String]>) -> Result<()> {
    write_dataset(BufWriter::new(File::create(path)?), data, columns)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, rows: &[T]) -> Result<()> {
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// One-based active indices, the external form of a model.
pub fn support_indices(d: &Support) -> Vec<usize> {
    d.active_indices_one_based()
}

pub fn support_from_indices(p: usize, one_based: &[usize]) -> Result<Support> {
    let zero: Vec<usize> = one_based
        .iter()
        .map(|&j| j.checked_sub(1).ok_or_else(|| Error::Validation("model indices are 1-based".into())))
        .collect::<Result<_>>()?;
    Ok(Support::from_indices(p, &zero).map_err(olap_core::Error::from)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeetingRow {
    pub seed: u64,
    #[serde(rename = "L")]
    pub lag: u64,
    pub tau: u64,
    pub censored: bool,
    pub init_kind: String,
    pub delta0_x: Vec<usize>,
    pub delta0_y: Vec<usize>,
}

impl From<&MeetingRecord> for MeetingRow {
    fn from(r: &MeetingRecord) -> Self {
        MeetingRow {
            seed: r.seed,
            lag: r.lag,
            tau: r.tau,
            censored: r.censored,
            init_kind: r.init_kind.clone(),
            delta0_x: support_indices(&r.delta0_x),
            delta0_y: support_indices(&r.delta0_y),
        }
    }
}

/// `t,d_hat` rows.
pub fn write_curve_csv<W: Write>(writer: W, curve: &TvCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "d_hat"])?;
    for (t, d) in curve.d_hat.iter().enumerate() {
        w.write_record([t.to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `t,tv` rows, `tv` on the [0, 1] scale.
pub fn write_tv_csv<W: Write>(writer: W, tv: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "tv"])?;
    for (t, d) in tv.iter().enumerate() {
        w.write_record([t.to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
