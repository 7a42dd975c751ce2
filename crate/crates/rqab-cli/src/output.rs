//! CSV emission with schema headers and deterministic number formatting.
//!
//! Every file starts with a `# schema: rqab.<kind>.v<n>` line followed by
//! a column header. Floats print through `Display`, the shortest
//! round-trip form, so identical inputs yield byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rqab::{Error, Result};

/// Shortest round-trip decimal form of `x`; non-finite values spell out
/// as `nan`, `inf`, `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

/// `fmt_f64` for optional values; `None` prints as an empty field.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Free-text field sanitizer: commas become semicolons, line breaks
/// become spaces, so notes never disturb the column structure.
pub fn sanitize_note(s: &str) -> String {
    s.replace(',', ";").replace(['\n', '\r'], " ")
}

/// Writes a schema line, a header, and the rows to `path`.
pub fn write_csv(
    path: &Path,
    schema: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let file = File::create(path)
        .map_err(|e| Error::Io(std::io::Error::other(format!("cannot create {}: {e}", path.display()))))?;
    let mut out = BufWriter::new(file);
    let io_err =
        |e: std::io::Error| Error::Io(std::io::Error::other(format!("write to {}: {e}", path.display())));
    writeln!(out, "# schema: rqab.{schema}").map_err(io_err)?;
    writeln!(out, "{}", header.join(",")).map_err(io_err)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        writeln!(out, "{}", row.join(",")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(())
}

/// Parsed CSV produced by [`write_csv`]: schema tag, header, string rows.
pub struct CsvTable {
    pub schema: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Reads a file written by [`write_csv`] back into memory.
pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::other(format!("cannot read {}: {e}", path.display()))))?;
    let mut lines = text.lines();
    let schema_line = lines
        .next()
        .ok_or_else(|| Error::Io(std::io::Error::other(format!("{} is empty", path.display()))))?;
    let schema = schema_line
        .strip_prefix("# schema: rqab.")
        .ok_or_else(|| {
            Error::Io(std::io::Error::other(format!(
                "{} lacks a schema line, found {schema_line:?}",
                path.display()
            )))
        })?
        .to_string();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Io(std::io::Error::other(format!("{} has no header", path.display()))))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Vec<String> = line.split(',').map(str::to_string).collect();
        if row.len() != header.len() {
            return Err(Error::Io(std::io::Error::other(format!(
                "{} row {} has {} fields, header has {}",
                path.display(),
                i + 3,
                row.len(),
                header.len()
            ))));
        }
        rows.push(row);
    }
    Ok(CsvTable {
        schema,
        header,
        rows,
    })
}

impl CsvTable {
    /// Index of a named column.
    pub fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Io(std::io::Error::other(format!("missing column {name:?}"))))
    }
}
