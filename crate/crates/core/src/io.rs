//! File output helpers: atomic writes and plain/gzip matrix CSV.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Writes `bytes` to a temp file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Shortest round-trip formatting of an `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Renders a matrix as CSV. Lines in `comments` are prefixed with `# `.
pub fn matrix_csv(m: &DMatrix<f64>, header: Option<&[String]>, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    if let Some(h) = header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// File bytes for `text`: gzip-compressed when the path ends in `.gz`.
pub fn encode_text(path: &Path, text: &str) -> Result<Vec<u8>> {
    if is_gz(path) {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))
    } else {
        Ok(text.as_bytes().to_vec())
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, &encode_text(path, text)?)
}

/// Writes every file to a temp sibling first and renames only once all
/// temp files are complete, so a failure leaves no target touched.
pub fn write_all_atomic(files: &[(PathBuf, String)]) -> Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, text) in files {
        let bytes = encode_text(path, text)?;
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
        tmp.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        staged.push((tmp, path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    }
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut s = String::new();
    if is_gz(path) {
        GzDecoder::new(file).read_to_string(&mut s).map_err(|e| Error::io(path, e))?;
    } else {
        BufReader::new(file).read_to_string(&mut s).map_err(|e| Error::io(path, e))?;
    }
    Ok(s)
}

/// Parses a numeric CSV matrix, skipping `#` comment lines. A first line
/// that does not parse as numbers is taken as a header.
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.as_bytes().lines().enumerate() {
        let line = line.map_err(|e| Error::parse(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(r) => {
                if let Some(first) = rows.first() {
                    if first.len() != r.len() {
                        return Err(Error::parse(format!("row {} has {} fields, expected {}", ln + 1, r.len(), first.len())));
                    }
                }
                rows.push(r);
            }
            Err(_) if rows.is_empty() => continue,
            Err(e) => return Err(Error::parse(format!("line {}: {e}", ln + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::parse("matrix file has no rows"));
    }
    let (n, d) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix_csv(&read_text(path)?)
}
