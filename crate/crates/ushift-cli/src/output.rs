//! CSV and summary emission. Floats print in shortest round-trip form and the
//! writers never touch wall-clock state, so identical reports produce
//! byte-identical files.

use std::io::Write;
use std::path::{Path, PathBuf};

use ushift_core::report::ExperimentReport;

use crate::AppError;

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

/// Write `<kind>.csv` (comment header, data, `#`-prefixed summary footer) and
/// `<kind>_summary.txt` (key=value document plus the config echo).
pub fn write_report(
    dir: &Path,
    report: &ExperimentReport,
    config_hash: &str,
    config_echo: &str,
) -> Result<(PathBuf, PathBuf), AppError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| AppError::Run(format!("cannot create output directory `{}`: {e}", dir.display())))?;
    let csv_path = dir.join(format!("{}.csv", report.kind));
    let summary_path = dir.join(format!("{}_summary.txt", report.kind));

    let mut csv = String::new();
    csv.push_str(&format!("# ushift {}\n", report.kind));
    csv.push_str(&format!("# config_hash={config_hash}\n"));
    csv.push_str(&format!("# seed={}\n", report.seed));
    csv.push_str(&report.columns.join(","));
    csv.push('\n');
    for row in &report.rows {
        let line: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
        csv.push_str(&line.join(","));
        csv.push('\n');
    }
    for (k, v) in &report.summary {
        csv.push_str(&format!("# {k}={v}\n"));
    }
    write_atomic(&csv_path, csv.as_bytes())?;

    let mut doc = String::new();
    doc.push_str(&format!("kind={}\n", report.kind));
    doc.push_str(&format!("config_hash={config_hash}\n"));
    doc.push_str(&format!("seed={}\n", report.seed));
    for (k, v) in &report.summary {
        doc.push_str(&format!("{k}={v}\n"));
    }
    doc.push_str("--- config ---\n");
    doc.push_str(config_echo);
    if !config_echo.ends_with('\n') {
        doc.push('\n');
    }
    write_atomic(&summary_path, doc.as_bytes())?;
    Ok((csv_path, summary_path))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    let mut f = std::fs::File::create(path)
        .map_err(|e| AppError::Run(format!("cannot write `{}`: {e}", path.display())))?;
    f.write_all(bytes)
        .map_err(|e| AppError::Run(format!("cannot write `{}`: {e}", path.display())))?;
    Ok(())
}
