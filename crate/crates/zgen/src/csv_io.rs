//! CSV ingestion and emission (RFC 4180, UTF-8, header row).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use zgen_core::linalg::Mat;
use zgen_core::table::{Column, ColumnKind, ColumnSpec, Role, Schema, Table};

use crate::error::{IoError, Result};

/// Parses an ISO-8601 timestamp into Unix seconds. Accepts RFC 3339,
/// zone-less `YYYY-MM-DDTHH:MM:SS` (read as UTC) and bare dates.
pub fn parse_datetime(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().map(|d| d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp())
}

pub fn format_datetime(secs: i64) -> String {
    DateTime::<Utc>::from_timestamp(secs, 0)
        .map(|t| t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| secs.to_string())
}

fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn infer_kind(values: &[&str]) -> ColumnKind {
    let present: Vec<&str> = values.iter().copied().filter(|v| !v.is_empty()).collect();
    if present.is_empty() {
        return ColumnKind::Categorical;
    }
    if present.iter().all(|v| parse_number(v).is_some()) {
        ColumnKind::Numeric
    } else if present.iter().all(|v| parse_datetime(v).is_some()) {
        ColumnKind::Datetime
    } else {
        ColumnKind::Categorical
    }
}

pub fn load_csv(path: &Path, schema: Option<&Schema>) -> Result<Table> {
    let file = File::open(path).map_err(|source| IoError::Read { path: path.to_path_buf(), source })?;
    read_csv(file, schema)
}

/// Reads a table. With a schema, only the declared columns are kept (in
/// schema order); without one, every column is kept with an inferred kind
/// and the `Feature` role. Empty cells are missing.
pub fn read_csv<R: Read>(reader: R, schema: Option<&Schema>) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(IoError::Arity { line, expected: header.len(), found: rec.len() });
        }
        records.push((line, rec));
    }
    let schema = match schema {
        Some(s) => s.clone(),
        None => {
            let specs = header
                .iter()
                .enumerate()
                .map(|(j, name)| {
                    let vals: Vec<&str> = records.iter().map(|(_, r)| r.get(j).unwrap_or("")).collect();
                    ColumnSpec::new(name.clone(), infer_kind(&vals), Role::Feature)
                })
                .collect();
            Schema::new(specs)?
        }
    };
    let mut columns = Vec::with_capacity(schema.len());
    for spec in schema.columns() {
        let j = header.iter().position(|h| *h == spec.name).ok_or_else(|| IoError::MissingColumn(spec.name.clone()))?;
        let mut missing = Vec::with_capacity(records.len());
        let parse_err = |line: u64, value: &str, kind| IoError::Parse { line, column: spec.name.clone(), value: value.to_string(), kind };
        let col = match spec.kind {
            ColumnKind::Numeric => {
                let mut vals = Vec::with_capacity(records.len());
                for (line, r) in &records {
                    let cell = r.get(j).unwrap_or("");
                    if cell.trim().is_empty() {
                        vals.push(0.0);
                        missing.push(true);
                    } else {
                        vals.push(parse_number(cell).ok_or_else(|| parse_err(*line, cell, "number"))?);
                        missing.push(false);
                    }
                }
                Column::numeric(vals, missing)
            }
            ColumnKind::Datetime => {
                let mut vals = Vec::with_capacity(records.len());
                for (line, r) in &records {
                    let cell = r.get(j).unwrap_or("");
                    if cell.trim().is_empty() {
                        vals.push(0);
                        missing.push(true);
                    } else {
                        vals.push(parse_datetime(cell).ok_or_else(|| parse_err(*line, cell, "ISO-8601 datetime"))?);
                        missing.push(false);
                    }
                }
                Column::datetime(vals, missing)
            }
            ColumnKind::Categorical => {
                let vals = records
                    .iter()
                    .map(|(_, r)| {
                        let cell = r.get(j).unwrap_or("");
                        missing.push(cell.is_empty());
                        cell.to_string()
                    })
                    .collect();
                Column::categorical(vals, missing)
            }
        };
        columns.push(col);
    }
    Ok(Table::new(schema, columns)?)
}

fn cell_text(col: &Column, r: usize) -> String {
    if col.missing[r] {
        return String::new();
    }
    match &col.data {
        zgen_core::table::ColumnData::Numeric(v) => format!("{}", v[r]),
        zgen_core::table::ColumnData::Categorical(v) => v[r].clone(),
        zgen_core::table::ColumnData::Datetime(v) => format_datetime(v[r]),
    }
}

/// Writes a table; `mask` appends a `0/1` column with the given name.
pub fn write_csv<W: Write>(writer: W, table: &Table, mask: Option<(&str, &[bool])>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = table.schema().names().into_iter().map(String::from).collect();
    if let Some((name, _)) = mask {
        header.push(name.to_string());
    }
    w.write_record(&header)?;
    for r in 0..table.n_rows() {
        let mut rec: Vec<String> = table.columns().iter().map(|c| cell_text(c, r)).collect();
        if let Some((_, m)) = mask {
            rec.push(if m[r] { "1".into() } else { "0".into() });
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| IoError::Csv(e.into()))?;
    Ok(())
}

pub fn save_csv(path: &Path, table: &Table, mask: Option<(&str, &[bool])>) -> Result<()> {
    let file = File::create(path).map_err(|source| IoError::Write { path: path.to_path_buf(), source })?;
    write_csv(std::io::BufWriter::new(file), table, mask)
}

/// Square matrix with row and column labels.
pub fn write_matrix_csv<W: Write>(writer: W, names: &[String], m: &Mat) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![String::new()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (i, name) in names.iter().enumerate() {
        let mut rec = vec![name.clone()];
        rec.extend(m.row(i).iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| IoError::Csv(e.into()))?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(reader: R) -> Result<(Vec<String>, Mat)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().skip(1).map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .skip(1)
            .map(|v| parse_number(v).or_else(|| v.parse().ok()).ok_or_else(|| IoError::Parse {
                line,
                column: String::new(),
                value: v.to_string(),
                kind: "number",
            }))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((names, Mat::from_rows(&rows)?))
}
