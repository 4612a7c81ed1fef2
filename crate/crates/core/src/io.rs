//! File formats: numeric CSV (row = vertex, column = sample), graph JSON
//! and JSON reports.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{laplacian_from_weights, Matrix, ShiftKind, ShiftOperator};

fn csv_err(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::Parse(e.to_string()),
    }
}

/// Writes one row per matrix row with 17 significant digits, which
/// round-trips every finite `f64` exactly.
pub fn write_matrix_csv<W: Write>(out: W, m: &Matrix, header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    if header {
        w.write_record((0..m.ncols()).map(|j| format!("c{j}"))).map_err(csv_err)?;
    }
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:.16e}"))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(input: R, header: bool) -> Result<Matrix> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::Parse(format!("row {}: '{f}' is not a number", line + 1))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!("row {} has {} fields, expected {}", line + 1, row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Parse("empty matrix".into()));
    }
    Ok(Matrix::from_row_iterator(nrows, ncols, rows.into_iter().flatten()))
}

pub fn write_matrix(path: &Path, m: &Matrix, header: bool) -> Result<()> {
    write_matrix_csv(BufWriter::new(File::create(path)?), m, header)
}

pub fn read_matrix(path: &Path, header: bool) -> Result<Matrix> {
    read_matrix_csv(BufReader::new(File::open(path)?), header)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Graph JSON: `{"n", "kind", "edges": [{"i", "j", "w"}]}` with zero-based
/// indices. Undirected graphs list each pair once with `i <= j`; directed
/// graphs list entry `(i, j)`, the weight of `j -> i`. Laplacians store
/// edge weights, not matrix entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub kind: ShiftKind,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub directed: bool,
    pub edges: Vec<EdgeRecord>,
}

impl GraphFile {
    pub fn from_shift(s: &ShiftOperator) -> Self {
        let n = s.n();
        let m = s.matrix();
        let mut edges = Vec::new();
        for i in 0..n {
            let cols: Box<dyn Iterator<Item = usize>> = if s.is_directed() { Box::new(0..n) } else { Box::new(i..n) };
            for j in cols {
                let v = m[(i, j)];
                match s.kind() {
                    ShiftKind::Laplacian if i != j && v != 0.0 => edges.push(EdgeRecord { i, j, w: -v }),
                    ShiftKind::Laplacian => {}
                    _ if v != 0.0 => edges.push(EdgeRecord { i, j, w: v }),
                    _ => {}
                }
            }
        }
        Self { n, kind: s.kind(), directed: s.is_directed(), edges }
    }

    pub fn to_shift(&self) -> Result<ShiftOperator> {
        let mut m = Matrix::zeros(self.n, self.n);
        for e in &self.edges {
            if e.i >= self.n || e.j >= self.n {
                return Err(Error::BadIndex { index: e.i.max(e.j), n: self.n });
            }
            m[(e.i, e.j)] = e.w;
            if !self.directed {
                m[(e.j, e.i)] = e.w;
            }
        }
        if self.kind == ShiftKind::Laplacian {
            m = laplacian_from_weights(&m);
        }
        ShiftOperator::new(m, self.kind, self.directed)
    }
}

pub fn write_graph(path: &Path, s: &ShiftOperator) -> Result<()> {
    write_json(path, &GraphFile::from_shift(s))
}

pub fn read_graph(path: &Path) -> Result<ShiftOperator> {
    read_json::<GraphFile>(path)?.to_shift()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
