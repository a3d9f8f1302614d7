//! CSV ingest and export for record populations.
//!
//! Two layouts are recognized by header:
//!   nodes  `id,fo,fr,ac`
//!   links  `u1,u2,fo1,fo2`   (id becomes `u1->u2`, ffan = fo2/fo1 derived)

use std::path::Path;

use crate::model::{Population, Record, RecordKind};
use crate::{Error, Result};

fn parse_error(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn file_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::File {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

fn parse_field(path: &Path, line: u64, name: &str, raw: &str) -> Result<f64> {
    let value: f64 = raw
        .trim()
        .parse()
        .map_err(|_| parse_error(path, line, format!("bad {name} value `{raw}`")))?;
    if !value.is_finite() || value < 0.0 {
        return Err(parse_error(
            path,
            line,
            format!("{name} must be finite and >= 0, got `{raw}`"),
        ));
    }
    Ok(value)
}

/// Reads a population from CSV, choosing the record kind from the header.
pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Population> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| file_error(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .iter()
        .map(|h| h.to_string())
        .collect();

    let kind = match headers.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["id", "fo", "fr", "ac"] => RecordKind::Node,
        ["u1", "u2", "fo1", "fo2"] => RecordKind::Link,
        _ => {
            return Err(parse_error(
                path,
                1,
                format!(
                    "unrecognized header `{}`; expected `id,fo,fr,ac` or `u1,u2,fo1,fo2`",
                    headers.join(",")
                ),
            ))
        }
    };

    let mut records = Vec::new();
    for result in reader.records() {
        let row = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 4 {
            return Err(parse_error(
                path,
                line,
                format!("expected 4 fields, got {}", row.len()),
            ));
        }
        let record = match kind {
            RecordKind::Node => {
                let id = row[0].to_string();
                if id.is_empty() {
                    return Err(parse_error(path, line, "empty id"));
                }
                let fo = parse_field(path, line, "fo", &row[1])?;
                let fr = parse_field(path, line, "fr", &row[2])?;
                let ac = parse_field(path, line, "ac", &row[3])?;
                Record::node(id, fo, fr, ac)?
            }
            RecordKind::Link => {
                let (u1, u2) = (row[0].to_string(), row[1].to_string());
                if u1.is_empty() || u2.is_empty() {
                    return Err(parse_error(path, line, "empty endpoint id"));
                }
                let fo1 = parse_field(path, line, "fo1", &row[2])?;
                let fo2 = parse_field(path, line, "fo2", &row[3])?;
                if fo1 == 0.0 {
                    return Err(parse_error(
                        path,
                        line,
                        format!("link {u1}->{u2} has fo1 = 0, fanout undefined"),
                    ));
                }
                Record::link(format!("{u1}->{u2}"), fo1, fo2)?
            }
        };
        records.push(record);
    }
    Population::new(records)
}

/// Writes node records as `id,fo,fr,ac`.
pub fn write_nodes_csv(path: impl AsRef<Path>, population: &Population) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path.as_ref()).map_err(|e| file_error(path.as_ref(), e))?;
    writer.write_record(["id", "fo", "fr", "ac"])?;
    for record in population.iter() {
        writer.write_record([
            record.id.as_str(),
            &record.feature("fo")?.to_string(),
            &record.feature("fr")?.to_string(),
            &record.feature("ac")?.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes link records as `u1,u2,fo1,fo2`, splitting ids back at `->`.
pub fn write_links_csv(path: impl AsRef<Path>, population: &Population) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path.as_ref()).map_err(|e| file_error(path.as_ref(), e))?;
    writer.write_record(["u1", "u2", "fo1", "fo2"])?;
    for record in population.iter() {
        let (u1, u2) = record.id.split_once("->").ok_or_else(|| {
            Error::InvalidArgument(format!("link id `{}` lacks a `->` separator", record.id))
        })?;
        writer.write_record([
            u1,
            u2,
            &record.feature("fo1")?.to_string(),
            &record.feature("fo2")?.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
