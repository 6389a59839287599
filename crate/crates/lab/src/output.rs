//! CSV tables. Every table has a fixed header, taken from the field names of
//! its row type.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{LabError, Result};

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| LabError::Config(format!("flushing CSV buffer: {e}")))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    }
    fs::write(path, csv_bytes(rows)?).map_err(|e| LabError::io(path, e))
}
