//! Plain-text matrix exchange.
//!
//! ```text
//! # key=value key=value      (optional metadata comment)
//! n
//! a11 a12 ... a1n
//! ...
//! an1 an2 ... ann
//! ```
//!
//! Vectors use the same layout with one value per line after `n`.
//! Writers emit 17 significant digits so every `f64` round-trips exactly.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::SymMatrix;
use crate::error::{Error, Result};

pub type Metadata = BTreeMap<String, String>;

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_header<W: Write>(w: &mut W, meta: &Metadata) -> Result<()> {
    if !meta.is_empty() {
        let fields: Vec<String> = meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(w, "# {}", fields.join(" "))?;
    }
    Ok(())
}

pub fn write_matrix<W: Write>(w: &mut W, m: &SymMatrix, meta: &Metadata) -> Result<()> {
    write_header(w, meta)?;
    writeln!(w, "{}", m.n())?;
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_vector<W: Write>(w: &mut W, v: &[f64], meta: &Metadata) -> Result<()> {
    write_header(w, meta)?;
    writeln!(w, "{}", v.len())?;
    for &x in v {
        writeln!(w, "{}", format_value(x))?;
    }
    Ok(())
}

pub fn parse_metadata(comment: &str) -> Metadata {
    comment
        .trim_start_matches('#')
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Numbered data lines with comments collected separately.
struct Lines {
    meta: Metadata,
    data: Vec<(usize, String)>,
}

fn read_lines<R: BufRead>(r: R) -> Result<Lines> {
    let mut meta = Metadata::new();
    let mut data = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if t.starts_with('#') {
            if data.is_empty() {
                meta.extend(parse_metadata(t));
            }
            continue;
        }
        data.push((i + 1, t.to_string()));
    }
    Ok(Lines { meta, data })
}

fn parse_order(lines: &Lines) -> Result<usize> {
    let (line, first) = lines.data.first().ok_or_else(|| Error::Parse {
        line: 1,
        column: 1,
        message: "missing order line".into(),
    })?;
    first.parse().map_err(|_| Error::Parse {
        line: *line,
        column: 1,
        message: format!("expected matrix order, found {first:?}"),
    })
}

fn parse_row(line: usize, text: &str) -> Result<Vec<f64>> {
    text.split_whitespace()
        .enumerate()
        .map(|(c, tok)| {
            tok.parse::<f64>().map_err(|_| Error::Parse {
                line,
                column: c + 1,
                message: format!("not a number: {tok:?}"),
            })
        })
        .collect()
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<(SymMatrix, Metadata)> {
    let lines = read_lines(r)?;
    let n = parse_order(&lines)?;
    let body = &lines.data[1..];
    if body.len() != n {
        let line = body.last().map_or(lines.data[0].0, |l| l.0);
        return Err(Error::Parse {
            line,
            column: 1,
            message: format!("expected {n} rows, found {}", body.len()),
        });
    }
    let mut rows = Vec::with_capacity(n);
    for (line, text) in body {
        let row = parse_row(*line, text)?;
        if row.len() != n {
            return Err(Error::Parse {
                line: *line,
                column: row.len().min(n) + 1,
                message: format!("expected {n} values, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    Ok((SymMatrix::from_rows(&rows)?, lines.meta))
}

pub fn read_vector<R: BufRead>(r: R) -> Result<(Vec<f64>, Metadata)> {
    let lines = read_lines(r)?;
    let n = parse_order(&lines)?;
    let values: Vec<f64> = lines.data[1..]
        .iter()
        .map(|(line, text)| parse_row(*line, text))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if values.len() != n {
        return Err(Error::Parse {
            line: lines.data.last().map_or(1, |l| l.0),
            column: 1,
            message: format!("expected {n} values, found {}", values.len()),
        });
    }
    Ok((values, lines.meta))
}
