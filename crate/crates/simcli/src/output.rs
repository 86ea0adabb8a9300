//! CSV serialization.
//!
//! Every table starts with a `schema=1` line followed by a header row.
//! Reals are written with 17 significant digits so they round-trip exactly.

use crate::error::SimResult;
use std::fs;
use std::io::Write;
use std::path::Path;

pub const SCHEMA_LINE: &str = "schema=1";

/// Shortest-free exact formatting: 17 significant digits in scientific form.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

pub fn fmt_opt_real(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

/// A row type with a fixed column layout.
pub trait CsvRecord {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

/// Serialize `rows` with the schema line and header.
pub fn render<R: CsvRecord>(rows: &[R]) -> SimResult<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_writer(Vec::new());
    w.write_record([SCHEMA_LINE])?;
    w.write_record(R::header())?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Replace `path` with `bytes` so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> SimResult<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// Write a table to `path`, or to stdout when `path` is `None`.
pub fn emit<R: CsvRecord>(rows: &[R], path: Option<&Path>) -> SimResult<()> {
    let bytes = render(rows)?;
    match path {
        Some(p) => write_atomic(p, &bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes)?;
            Ok(out.flush()?)
        }
    }
}
