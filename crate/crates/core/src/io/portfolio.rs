//! Delimited-text portfolio files.
//!
//! Header: `item_id`, `value`, optionally `age_months`, and one column per
//! hierarchy dimension (every other column, in header order). UTF-8,
//! comma-delimited, `\n` line endings.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{PortfolioSnapshot, SnapshotBuilder};
use crate::money::{Money, MoneyParseError};

pub const ID_COLUMN: &str = "item_id";
pub const VALUE_COLUMN: &str = "value";
pub const AGE_COLUMN: &str = "age_months";

pub fn load_portfolio(path: impl AsRef<Path>) -> Result<PortfolioSnapshot> {
    let file = File::open(path.as_ref())?;
    read_portfolio(BufReader::new(file))
}

/// Parses a portfolio record by record into a snapshot.
pub fn read_portfolio<R: Read>(reader: R) -> Result<PortfolioSnapshot> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv.headers().map_err(csv_error)?.clone();
    let layout = Layout::from_headers(headers.iter())?;

    let mut builder = SnapshotBuilder::with_dimensions(layout.dimension_names.clone());
    let mut record = csv::StringRecord::new();
    loop {
        match csv.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(csv_error(e)),
        }
        let line = record.position().map_or(0, |p| p.line());
        let id = &record[layout.id];
        let value = match record[layout.value].parse::<Money>() {
            Ok(v) => v,
            Err(MoneyParseError::Negative) => {
                return Err(Error::NegativeValue {
                    id: id.to_string(),
                    line: Some(line),
                })
            }
            Err(e) => {
                return Err(Error::Parse {
                    line,
                    message: format!("column `{VALUE_COLUMN}`: {e}"),
                })
            }
        };
        let age = match layout.age.map(|i| &record[i]) {
            None | Some("") => None,
            Some(raw) => Some(raw.parse::<u32>().map_err(|_| Error::Parse {
                line,
                message: format!("column `{AGE_COLUMN}`: `{raw}` is not a nonnegative integer"),
            })?),
        };
        let members: Vec<&str> = layout
            .dimension_columns
            .iter()
            .map(|&i| &record[i])
            .collect();
        builder
            .push_row(id, value, &members, age)
            .map_err(|e| e.with_line(line))?;
    }
    builder.build()
}

struct Layout {
    id: usize,
    value: usize,
    age: Option<usize>,
    dimension_columns: Vec<usize>,
    dimension_names: Vec<String>,
}

impl Layout {
    fn from_headers<'a>(headers: impl Iterator<Item = &'a str>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut id = None;
        let mut value = None;
        let mut age = None;
        let mut dimension_columns = Vec::new();
        let mut dimension_names = Vec::new();
        for (i, name) in headers.enumerate() {
            if name.is_empty() {
                return Err(Error::Schema(format!("column {} has an empty name", i + 1)));
            }
            if !seen.insert(name.to_string()) {
                return Err(Error::Schema(format!("duplicate column `{name}`")));
            }
            match name {
                ID_COLUMN => id = Some(i),
                VALUE_COLUMN => value = Some(i),
                AGE_COLUMN => age = Some(i),
                _ => {
                    dimension_columns.push(i);
                    dimension_names.push(name.to_string());
                }
            }
        }
        let missing = |c: &str| Error::Schema(format!("missing required column `{c}`"));
        Ok(Layout {
            id: id.ok_or_else(|| missing(ID_COLUMN))?,
            value: value.ok_or_else(|| missing(VALUE_COLUMN))?,
            age,
            dimension_columns,
            dimension_names,
        })
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        },
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::Parse {
            line,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        csv::ErrorKind::Utf8 { .. } => Error::Parse {
            line,
            message: "invalid UTF-8".into(),
        },
        _ => Error::Parse {
            line,
            message: e.to_string(),
        },
    }
}

/// Writes a snapshot back in the portfolio file format, in sorted order.
pub fn write_portfolio<W: Write>(snapshot: &PortfolioSnapshot, writer: W) -> Result<()> {
    let with_age = snapshot.iter().any(|it| it.age_months().is_some());
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header = vec![ID_COLUMN, VALUE_COLUMN];
    header.extend(snapshot.dimensions().iter().map(String::as_str));
    if with_age {
        header.push(AGE_COLUMN);
    }
    out.write_record(&header).map_err(csv_error)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for it in snapshot.iter() {
        row.clear();
        row.push(it.id().to_string());
        row.push(it.value().to_string());
        row.extend(it.hierarchy().map(|(_, m)| m.to_string()));
        if with_age {
            row.push(it.age_months().map(|a| a.to_string()).unwrap_or_default());
        }
        out.write_record(&row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}
