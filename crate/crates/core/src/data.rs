//! Built-in reference data, CSV ingestion and histogram export.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::consensus::{ConsensusKind, ConsensusMatrix};
use crate::ensemble::{ClusteringResult, DataMatrix};
use crate::error::{Error, Result};
use crate::matrix::{Dense, SymMatrix};

pub const PLAYERS: [&str; 6] = ["Rose", "Cobb", "Fisk", "Ott", "Ruth", "Mays"];
pub const BASEBALL_STATS: [&str; 9] = ["G", "R", "H", "2B", "3B", "HR", "RBI", "SB", "BB"];

const BASEBALL_A: [[f64; 6]; 9] = [
    [3562., 3034., 2499., 2730., 2503., 2992.],
    [2165., 2246., 1276., 1859., 2174., 2062.],
    [4256., 4189., 2356., 2876., 2873., 3283.],
    [746., 724., 421., 488., 506., 523.],
    [135., 295., 47., 72., 136., 140.],
    [160., 117., 376., 511., 714., 660.],
    [1314., 1938., 1330., 1860., 2213., 1903.],
    [198., 897., 128., 89., 123., 338.],
    [1566., 1249., 849., 1708., 2062., 1464.],
];

const BASEBALL_S: [[f64; 6]; 6] = [
    [100., 67., 73., 2., 0., 2.],
    [67., 100., 50., 1., 2., 7.],
    [73., 50., 100., 15., 9., 24.],
    [2., 1., 15., 100., 92., 82.],
    [0., 2., 9., 92., 100., 77.],
    [2., 7., 24., 82., 77., 100.],
];

/// The balanced baseball matrix as published, to four decimals. Entry
/// (Ruth, Cobb) reads 0.01082, which disagrees with its mirror 0.0082.
pub const REFERENCE_BASEBALL_P: [[f64; 6]; 6] = [
    [0.4131, 0.2935, 0.2786, 0.0075, 0.0, 0.0075],
    [0.2935, 0.4644, 0.2023, 0.0040, 0.0082, 0.0277],
    [0.2786, 0.2023, 0.3525, 0.0517, 0.0323, 0.0826],
    [0.0075, 0.0040, 0.0517, 0.3374, 0.3233, 0.2761],
    [0.0, 0.01082, 0.0323, 0.3233, 0.3660, 0.2701],
    [0.0075, 0.0277, 0.0826, 0.2761, 0.2701, 0.3361],
];

pub const REFERENCE_BASEBALL_EIGENVALUES: [f64; 6] = [1.0000, 0.8670, 0.2078, 0.1095, 0.0598, 0.0254];

/// Published starting vector for the baseball evolution. Its entries sum
/// to 1.0001 and are renormalised on use.
pub const REFERENCE_X0: [f64; 6] = [0.2334, 0.2595, 0.0364, 0.2617, 0.1812, 0.0279];

/// Published iterates `x_t` for `t = 1..=7`.
pub const REFERENCE_ITERATES: [[f64; 6]; 7] = [
    [0.1848, 0.1997, 0.1520, 0.1592, 0.1618, 0.1425],
    [0.1795, 0.1836, 0.1707, 0.1554, 0.1557, 0.1550],
    [0.1779, 0.1787, 0.1732, 0.1565, 0.1561, 0.1576],
    [0.1765, 0.1765, 0.1729, 0.1578, 0.1574, 0.1589],
    [0.1752, 0.1751, 0.1722, 0.1590, 0.1586, 0.1600],
    [0.1741, 0.1739, 0.1715, 0.1600, 0.1597, 0.1609],
    [0.1731, 0.1729, 0.1709, 0.1609, 0.1606, 0.1616],
];

/// Career statistics (rows) of six players (columns).
pub fn baseball_data() -> DataMatrix {
    let values = Dense::from_fn(9, 6, |i, j| BASEBALL_A[i][j]);
    DataMatrix::new(values).expect("static data")
}

/// Ensemble-sum consensus of 50 NMF(k=2) and 50 NMF(k=3) runs on the
/// baseball data, as published.
pub fn baseball_consensus() -> ConsensusMatrix {
    let rows: Vec<Vec<f64>> = BASEBALL_S.iter().map(|r| r.to_vec()).collect();
    let s = SymMatrix::from_rows(&rows).expect("static data");
    ConsensusMatrix::from_counts(s, 100, ConsensusKind::EnsembleSum).expect("static data")
}

/// The split every correct baseball run should find.
pub fn baseball_truth() -> ClusteringResult {
    ClusteringResult::from_labels(vec![0, 0, 0, 1, 1, 1], "reference").expect("static data")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// Each CSV row is one element (the usual layout for iris-like files).
    #[default]
    Rows,
    /// Each CSV column is one element and rows are attributes.
    Columns,
}

impl std::str::FromStr for Orientation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rows" => Ok(Orientation::Rows),
            "columns" => Ok(Orientation::Columns),
            other => Err(Error::domain(format!("unknown orientation {other:?} (rows|columns)"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub orientation: Orientation,
    pub has_header: bool,
    /// Column (header name or 0-based index) holding truth labels.
    pub label_column: Option<String>,
}

#[derive(Clone, Debug)]
pub struct LoadedData {
    pub data: DataMatrix,
    pub labels: Option<ClusteringResult>,
    /// Distinct label strings, indexed by label id.
    pub label_names: Vec<String>,
    pub header: Option<Vec<String>>,
}

pub fn load_data(path: &Path, opts: &LoadOptions) -> Result<LoadedData> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_data(&text, opts)
}

pub fn parse_data(text: &str, opts: &LoadOptions) -> Result<LoadedData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            column: 1,
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push((line, rec.iter().map(str::to_string).collect::<Vec<_>>()));
    }
    let header = if opts.has_header && !records.is_empty() {
        Some(records.remove(0).1)
    } else {
        None
    };
    let width = match (&header, records.first()) {
        (Some(h), _) => h.len(),
        (None, Some((_, r))) => r.len(),
        (None, None) => return Err(Error::domain("no data rows")),
    };
    let label_idx = match &opts.label_column {
        None => None,
        Some(name) => Some(resolve_column(name, header.as_deref(), width)?),
    };
    if label_idx.is_some() && opts.orientation == Orientation::Columns {
        return Err(Error::domain("label columns are only supported with row orientation"));
    }

    let mut rows = Vec::with_capacity(records.len());
    let mut raw_labels = Vec::new();
    for (line, rec) in &records {
        if rec.len() != width {
            return Err(Error::Parse {
                line: *line,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let mut row = Vec::with_capacity(width);
        for (c, cell) in rec.iter().enumerate() {
            if Some(c) == label_idx {
                raw_labels.push(cell.clone());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line: *line,
                column: c + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: *line, column: c + 1, message: "non-finite value".into() });
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::domain("no data rows"));
    }
    let data = match opts.orientation {
        Orientation::Rows => DataMatrix::from_elements(&rows)?,
        Orientation::Columns => {
            let (m, n) = (rows.len(), rows[0].len());
            DataMatrix::new(Dense::from_fn(m, n, |i, j| rows[i][j]))?
        }
    };

    let (labels, label_names) = if label_idx.is_some() {
        let mut names: Vec<String> = Vec::new();
        let ids: Vec<usize> = raw_labels
            .iter()
            .map(|l| match names.iter().position(|n| n == l) {
                Some(i) => i,
                None => {
                    names.push(l.clone());
                    names.len() - 1
                }
            })
            .collect();
        (Some(ClusteringResult::from_labels(ids, "truth")?), names)
    } else {
        (None, Vec::new())
    };
    Ok(LoadedData { data, labels, label_names, header })
}

fn resolve_column(name: &str, header: Option<&[String]>, width: usize) -> Result<usize> {
    if let Some(i) = header.and_then(|h| h.iter().position(|c| c == name)) {
        return Ok(i);
    }
    match name.parse::<usize>() {
        Ok(i) if i < width => Ok(i),
        _ => Err(Error::domain(format!("label column {name:?} not found"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges; the last bin is closed on the right.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width bins over the value range. A constant sample is centred in
/// a unit-width range so it lands in a single bin.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::domain("histogram of empty input"));
    }
    if bins == 0 {
        return Err(Error::domain("histogram needs at least one bin"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("histogram input must be finite"));
    }
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let b = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}

impl Histogram {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "lower,upper,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{},{}", self.edges[i], self.edges[i + 1], c)?;
        }
        Ok(())
    }
}

pub fn export_histogram(values: &[f64], bins: usize, path: &Path) -> Result<Histogram> {
    let h = histogram(values, bins)?;
    let mut w = BufWriter::new(File::create(path)?);
    h.write_csv(&mut w)?;
    w.flush()?;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseball_shapes() {
        let a = baseball_data();
        assert_eq!((a.attributes(), a.elements()), (9, 6));
        assert_eq!(a.values().get(5, 4), 714.0);
        let s = baseball_consensus();
        assert_eq!(s.r, 100);
        assert_eq!(s.s.diagonal(), vec![100.0; 6]);
    }

    #[test]
    fn parses_labels_and_orientation() {
        let text = "a,b,name\n1,2,x\n3,4,y\n5,6,x\n";
        let opts = LoadOptions { has_header: true, label_column: Some("name".into()), ..Default::default() };
        let d = parse_data(text, &opts).unwrap();
        assert_eq!((d.data.attributes(), d.data.elements()), (2, 3));
        assert_eq!(d.data.element(1), vec![3.0, 4.0]);
        assert_eq!(d.labels.unwrap().labels, vec![0, 1, 0]);
        assert_eq!(d.label_names, vec!["x", "y"]);

        let cols = LoadOptions { orientation: Orientation::Columns, ..Default::default() };
        let d = parse_data("1,2,3\n4,5,6\n", &cols).unwrap();
        assert_eq!(d.data.element(2), vec![3.0, 6.0]);
    }

    #[test]
    fn parse_errors_name_the_cell() {
        let opts = LoadOptions { has_header: true, ..Default::default() };
        let err = parse_data("a,b\n1,2\n3,oops\n", &opts).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, column: 2, .. }), "{err:?}");
        let err = parse_data("a,b\n1,2\n3\n", &opts).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn histogram_examples() {
        let h = histogram(&[2.5; 7], 10).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts.iter().sum::<usize>(), 7);
        let grid: Vec<f64> = (0..100).map(|i| i as f64 + 0.5).collect();
        let h = histogram(&grid, 10).unwrap();
        assert_eq!(h.counts, vec![10; 10]);
        assert!(histogram(&[], 3).is_err());
        let ones = SymMatrix::from_fn(38, |_, _| 1.0).unwrap();
        assert_eq!(histogram(&ones.upper_triangle(), 5).unwrap().counts.iter().sum::<usize>(), 703);
    }
}
