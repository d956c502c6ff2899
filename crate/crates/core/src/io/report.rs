use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::EvalReport;

pub fn report_to_string(r: &EvalReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(r)?;
    s.push('\n');
    Ok(s)
}

pub fn export_report(r: &EvalReport, path: &Path) -> Result<()> {
    fs::write(path, report_to_string(r)?).map_err(|e| Error::io(path, e))
}

pub fn import_report(path: &Path) -> Result<EvalReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
