//! CSV ingestion and emission, label mappings and truth files.
//!
//! Input tables have a header row of variable names. Labels come either
//! from a named column of the same table or from a separate one-column CSV
//! (with header) holding one label per data row. Raw label strings are
//! mapped to classes by a [`LabelMap`] such as `mutant=+1,wildtype=-1`.
//!
//! Variable indices written to or read from files are 1-based column
//! positions among the numeric columns.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::data::{Class, LabeledMatrix};
use crate::error::{Error, Result};
use crate::simdata::GroundTruth;

/// Mapping from raw label strings to classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    entries: Vec<(String, Class)>,
}

impl Default for LabelMap {
    /// Accepts `1`, `+1` and `-1`.
    fn default() -> Self {
        LabelMap {
            entries: vec![
                ("1".into(), Class::Positive),
                ("+1".into(), Class::Positive),
                ("-1".into(), Class::Negative),
            ],
        }
    }
}

impl FromStr for LabelMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<LabelMap> {
        let mut entries: Vec<(String, Class)> = Vec::new();
        for item in s.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, class) = item
                .rsplit_once('=')
                .ok_or_else(|| Error::LabelMap(format!("{item:?} is not of the form value=+1 or value=-1")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::LabelMap(format!("empty label value in {item:?}")));
            }
            let class = match class.trim() {
                "+1" | "1" => Class::Positive,
                "-1" | "\u{2212}1" => Class::Negative,
                other => return Err(Error::LabelMap(format!("class {other:?} must be +1 or -1"))),
            };
            if let Some((_, prev)) = entries.iter().find(|(k, _)| k == key) {
                if *prev != class {
                    return Err(Error::LabelMap(format!("{key:?} mapped to both classes")));
                }
                continue;
            }
            entries.push((key.to_string(), class));
        }
        if entries.is_empty() {
            return Err(Error::LabelMap("mapping is empty".into()));
        }
        Ok(LabelMap { entries })
    }
}

impl LabelMap {
    pub fn class_of(&self, raw: &str) -> Result<Class> {
        let raw = raw.trim();
        self.entries
            .iter()
            .find(|(k, _)| k == raw)
            .map(|&(_, c)| c)
            .ok_or_else(|| Error::UnknownLabel(raw.to_string()))
    }
}

/// A parsed numeric table with optional raw label strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    /// Row-major values.
    pub rows: Vec<Vec<f64>>,
    pub labels: Option<Vec<String>>,
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

/// Parses a numeric CSV. When `label_column` is given that column is kept
/// as raw strings and every other column must be numeric.
pub fn parse_table<R: Read>(input: R, label_column: Option<&str>) -> Result<Table> {
    let mut rdr = reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx = match label_column {
        Some(name) => Some(header.iter().position(|h| h == name).ok_or_else(|| {
            Error::InvalidArgument(format!("label column {name:?} not found in header"))
        })?),
        None => None,
    };
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(k, _)| Some(k) != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if names.is_empty() {
        return Err(Error::IllPosed("no numeric columns in header".into()));
    }

    let mut rows = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        // header is line 1
        let line = r + 2;
        if record.len() != header.len() {
            return Err(Error::Ragged {
                row: line,
                expected: header.len(),
                found: record.len(),
            });
        }
        let mut row = Vec::with_capacity(names.len());
        for (k, field) in record.iter().enumerate() {
            if Some(k) == label_idx {
                labels.as_mut().expect("label column").push(field.to_string());
                continue;
            }
            match f64::from_str(field) {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(Error::ParseNumber {
                        row: line,
                        col: k + 1,
                        value: field.to_string(),
                    })
                }
            }
        }
        rows.push(row);
    }
    Ok(Table { names, rows, labels })
}

/// Reads a one-column label CSV with header.
pub fn parse_label_file<R: Read>(input: R) -> Result<Vec<String>> {
    let mut rdr = reader(input);
    rdr.headers()?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        out.push(record.get(0).unwrap_or("").to_string());
    }
    Ok(out)
}

impl Table {
    /// Builds the labeled matrix, taking labels from the table or from `labels`.
    pub fn into_labeled(self, labels: Option<Vec<String>>, map: &LabelMap) -> Result<LabeledMatrix> {
        let raw = match (self.labels, labels) {
            (Some(l), None) | (None, Some(l)) => l,
            (Some(_), Some(_)) => {
                return Err(Error::InvalidArgument(
                    "labels given both as a column and as a file".into(),
                ))
            }
            (None, None) => return Err(Error::InvalidArgument("no labels given".into())),
        };
        if raw.len() != self.rows.len() {
            return Err(Error::InvalidArgument(format!(
                "{} data rows but {} labels",
                self.rows.len(),
                raw.len()
            )));
        }
        let classes = raw.iter().map(|l| map.class_of(l)).collect::<Result<Vec<_>>>()?;
        let (n, d) = (self.rows.len(), self.names.len());
        let values = DMatrix::from_fn(n, d, |r, c| self.rows[r][c]);
        LabeledMatrix::with_names(values, classes, self.names)
    }
}

/// Parses a labeled CSV held in memory, labels taken from `label_column`.
pub fn parse_labeled_csv(bytes: &[u8], label_column: &str, map: &LabelMap) -> Result<LabeledMatrix> {
    parse_table(bytes, Some(label_column))?.into_labeled(None, map)
}

/// Where the labels of a data file come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelSource<'a> {
    Column(&'a str),
    File(&'a Path),
}

pub fn load_csv(path: &Path, labels: LabelSource<'_>, map: &LabelMap) -> Result<LabeledMatrix> {
    match labels {
        LabelSource::Column(name) => parse_table(File::open(path)?, Some(name))?.into_labeled(None, map),
        LabelSource::File(file) => {
            let raw = parse_label_file(File::open(file)?)?;
            parse_table(File::open(path)?, None)?.into_labeled(Some(raw), map)
        }
    }
}

/// Writes `data` as CSV with a trailing `label` column holding `1` / `-1`.
pub fn write_csv<W: Write>(data: &LabeledMatrix, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header: Vec<&str> = data.names().iter().map(String::as_str).collect();
    header.push("label");
    w.write_record(&header)?;
    let values = data.values();
    for (r, class) in data.labels().iter().enumerate() {
        let mut rec: Vec<String> = (0..data.d()).map(|c| values[(r, c)].to_string()).collect();
        rec.push(class.sign().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Truth file: JSON array of 1-based non-null variable indices.
pub fn truth_to_json(truth: &GroundTruth) -> String {
    let one_based: Vec<usize> = truth.indices().iter().map(|k| k + 1).collect();
    serde_json::to_string(&one_based).expect("serializing integers")
}

pub fn truth_from_json(text: &str, d: usize) -> Result<GroundTruth> {
    let one_based: Vec<usize> = serde_json::from_str(text)?;
    let zero_based = one_based
        .iter()
        .map(|&k| {
            k.checked_sub(1)
                .ok_or_else(|| Error::InvalidArgument("truth indices are 1-based".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    GroundTruth::from_indices(d, &zero_based)
}
