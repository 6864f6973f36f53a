//! Loading a numeric column from a CSV file with a header row.

use std::path::Path;

use crate::error::{Error, Result};

pub fn load_csv_series(path: &Path, column: &str) -> Result<Vec<f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let csv_err = |msg: String| Error::Csv {
        path: path.to_path_buf(),
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| csv_err(e.to_string()))?
        .clone();
    let col = headers
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| {
            csv_err(format!(
                "no column `{column}` (found: {})",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })?;
    let mut out = Vec::new();
    let mut bad = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        // Line numbers count the header as line 1.
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(format!("line {line}: {e}")))?;
        match rec.get(col).map(|s| s.trim().parse::<f64>()) {
            Some(Ok(v)) if v.is_finite() => out.push(v),
            _ => bad.push(line),
        }
    }
    if !bad.is_empty() {
        let shown: Vec<String> = bad.iter().take(10).map(|l| l.to_string()).collect();
        return Err(csv_err(format!(
            "{} non-numeric value(s) in column `{column}` at line(s) {}{}",
            bad.len(),
            shown.join(", "),
            if bad.len() > 10 { ", ..." } else { "" }
        )));
    }
    if out.is_empty() {
        return Err(csv_err(format!("column `{column}` has no rows")));
    }
    Ok(out)
}
