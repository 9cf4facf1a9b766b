//! Plot-ready CSV tables and JSON records.
//!
//! Numbers are written with 17 significant digits so that output is lossless and
//! byte-identical across runs. Files use LF line endings and UTF-8.

use std::fs;
use std::path::Path as FsPath;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::schedule::Path;

/// `v` with 17 significant digits in scientific notation; non-finite values as `nan`/`inf`/`-inf`.
pub fn fmt17(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// A numeric table with a header row and optional `#` comment lines above it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable { comments: Vec::new(), header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        self.comments.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::InvalidInput(format!("row has {} values, header has {}", row.len(), self.header.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt17(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &FsPath) -> Result<()> {
        write_text(path, &self.render())
    }

    /// Parse text written by [`render`](Self::render) (comments are kept).
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = CsvTable::default();
        let mut header_seen = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if let Some(c) = line.strip_prefix('#') {
                table.comments.push(c.trim_start().to_string());
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if !header_seen {
                table.header = line.split(',').map(|h| h.trim().to_string()).collect();
                header_seen = true;
                continue;
            }
            let row = line
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidInput(format!("line {}: '{}' is not a number", lineno + 1, v.trim())))
                })
                .collect::<Result<Vec<f64>>>()?;
            table.push(row).map_err(|e| Error::InvalidInput(format!("line {}: {e}", lineno + 1)))?;
        }
        if !header_seen {
            return Err(Error::InvalidInput("CSV has no header row".into()));
        }
        Ok(table)
    }

    pub fn read(path: &FsPath) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// Path table with columns `s, x1..xM, xdot1..xdotM`, followed by any `extra` columns.
pub fn path_table(path: &Path, extra: &[(&str, &[f64])]) -> Result<CsvTable> {
    let m = path.start().len();
    let mut header: Vec<String> = vec!["s".into()];
    header.extend((1..=m).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("xdot{i}")));
    header.extend(extra.iter().map(|(name, _)| name.to_string()));
    let mut table = CsvTable::new(header);
    for k in 0..path.len() {
        let mut row = vec![path.s[k]];
        row.extend_from_slice(&path.x[k]);
        row.extend_from_slice(&path.xdot[k]);
        for (name, col) in extra {
            let v = col
                .get(k)
                .ok_or_else(|| Error::InvalidInput(format!("column '{name}' is shorter than the path")))?;
            row.push(*v);
        }
        table.push(row)?;
    }
    Ok(table)
}

/// Rebuild a [`Path`] from a table with `s`, `x1..` and optionally `xdot1..` columns.
///
/// Missing velocities are reconstructed by finite differences of the positions.
pub fn path_from_table(table: &CsvTable) -> Result<Path> {
    let s = table.column("s").ok_or_else(|| Error::InvalidInput("path table has no 's' column".into()))?;
    let mut xs = Vec::new();
    while let Some(col) = table.column(&format!("x{}", xs.len() + 1)) {
        xs.push(col);
    }
    if xs.is_empty() {
        return Err(Error::InvalidInput("path table has no 'x1' column".into()));
    }
    let m = xs.len();
    let mut vs = Vec::new();
    while let Some(col) = table.column(&format!("xdot{}", vs.len() + 1)) {
        vs.push(col);
    }
    let n = s.len();
    if n < 2 {
        return Err(Error::InvalidInput("path table needs at least two rows".into()));
    }
    let x: Vec<Vec<f64>> = (0..n).map(|k| (0..m).map(|i| xs[i][k]).collect()).collect();
    let xdot: Vec<Vec<f64>> = if vs.len() == m {
        (0..n).map(|k| (0..m).map(|i| vs[i][k]).collect()).collect()
    } else {
        (0..n)
            .map(|k| {
                let (a, b) = if k == 0 { (0, 1) } else if k == n - 1 { (n - 2, n - 1) } else { (k - 1, k + 1) };
                (0..m).map(|i| (xs[i][b] - xs[i][a]) / (s[b] - s[a])).collect()
            })
            .collect()
    };
    Path::new(s, x, xdot)
}

pub fn write_text(path: &FsPath, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &FsPath, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// A complex matrix as `[[re, im], ...]` rows, for JSON records.
pub fn complex_rows(m: &crate::linalg::CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}
