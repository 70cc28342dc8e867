use std::path::Path;

use tvlogit::{Dataset, Signal};

use crate::{input_error, Failure};

/// Reads a CSV with a header row, a required `y` column of 0/1 values and an
/// optional `f0` column.
pub(crate) fn read_dataset(path: &Path) -> Result<Dataset, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| input_error(format!("{}: bad header: {e}", path.display())))?
        .clone();
    let y_col = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| input_error(format!("{}: line 1: missing column `y`", path.display())))?;
    let f0_col = headers.iter().position(|h| h == "f0");

    let mut y = Vec::new();
    let mut f0 = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            input_error(format!("{}: line {line}: {e}", path.display()))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let at = |msg: String| input_error(format!("{}: line {line}: {msg}", path.display()));
        match record.get(y_col) {
            Some("0") => y.push(0.0),
            Some("1") => y.push(1.0),
            other => return Err(at(format!("y must be 0 or 1, got {:?}", other.unwrap_or("")))),
        }
        if let Some(c) = f0_col {
            let field = record.get(c).unwrap_or("");
            let v: f64 = field
                .parse()
                .map_err(|_| at(format!("f0 is not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(at(format!("f0 must be finite, got {field:?}")));
            }
            f0.push(v);
        }
    }
    if y.len() < 2 {
        return Err(input_error(format!(
            "{}: need at least 2 observations, got {}",
            path.display(),
            y.len()
        )));
    }
    let data = Dataset::new(y)?;
    if f0_col.is_some() {
        Ok(data.with_truth(Signal::new(f0)?)?)
    } else {
        Ok(data)
    }
}
