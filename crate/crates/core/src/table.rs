//! Plain CSV tables: header row, comma separator, LF line endings.

use std::path::Path;

use crate::error::{LabError, Result};

pub use crate::profile::fmt_float;

/// Writes `header` and `rows`; every row must have the header's width.
pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => LabError::io(path, io),
            other => LabError::Config(format!("{other:?}")),
        })?;
    w.write_record(header)?;
    for row in rows {
        let row: Vec<String> = row.into_iter().collect();
        if row.len() != header.len() {
            return Err(LabError::precondition("write_table", format!("row width {} != header width {}", row.len(), header.len())));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

/// `fmt_float` for optional values; `None` becomes an empty field.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}
