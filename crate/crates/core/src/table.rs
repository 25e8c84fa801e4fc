//! CSV helpers shared by the file formats. Every table begins with one or
//! more `#` comment lines followed by a header row.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Reads all data rows of `path`, checking the header matches `columns`.
pub fn read_rows(path: &Path, columns: &[&str]) -> Result<Vec<Vec<String>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?
        .clone();
    let found: Vec<&str> = header.iter().collect();
    if found != columns {
        return Err(Error::config(format!(
            "{}: expected columns {:?}, found {:?}",
            path.display(),
            columns,
            found
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        rows.push(record.iter().map(str::to_owned).collect());
    }
    Ok(rows)
}

pub fn parse<T: FromStr>(path: &Path, field: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("{}: cannot parse field `{field}`", path.display())))
}
