//! Small shared helpers: frame-range parsing, signature files, CSV I/O.

use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};

/// Parse a frame set like `0..20`, `5`, or `0..20,100..120` into sorted,
/// deduplicated indices. Ranges are half-open.
pub fn parse_frame_set(spec: &str) -> Result<Vec<usize>> {
    let mut frames = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        if let Some((a, b)) = part.split_once("..") {
            let start: usize = a
                .trim()
                .parse()
                .map_err(|_| CliError::BadArgs(format!("bad frame range start {a:?}")))?;
            let end: usize = b
                .trim()
                .parse()
                .map_err(|_| CliError::BadArgs(format!("bad frame range end {b:?}")))?;
            if end <= start {
                return Err(CliError::BadArgs(format!(
                    "empty frame range {part:?} (end must exceed start)"
                )));
            }
            frames.extend(start..end);
        } else {
            let idx: usize = part
                .parse()
                .map_err(|_| CliError::BadArgs(format!("bad frame index {part:?}")))?;
            frames.push(idx);
        }
    }
    if frames.is_empty() {
        return Err(CliError::BadArgs("frame set is empty".into()));
    }
    frames.sort_unstable();
    frames.dedup();
    Ok(frames)
}

/// Load a signature file: plain text, one float per line. Blank lines and
/// `#` comments are skipped.
pub fn load_signature(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Format(format!("cannot read signature {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            CliError::Format(format!(
                "signature {}:{}: not a number: {line:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::Format(format!(
            "signature {} contains no values",
            path.display()
        )));
    }
    Ok(values)
}

pub fn save_signature(values: &[f64], path: &Path) -> Result<()> {
    let mut text = String::new();
    for v in values {
        text.push_str(&format!("{v}\n"));
    }
    fs::write(path, text)
        .map_err(|e| CliError::Format(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Write a counts CSV: header `frame,count`.
pub fn write_counts_csv(counts: &[usize], path: &Path) -> Result<()> {
    let mut text = String::from("frame,count\n");
    for (t, c) in counts.iter().enumerate() {
        text.push_str(&format!("{t},{c}\n"));
    }
    fs::write(path, text)
        .map_err(|e| CliError::Format(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Read a counts CSV written by [`write_counts_csv`].
pub fn read_counts_csv(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Format(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("frame,count") => {}
        other => {
            return Err(CliError::Format(format!(
                "{}: expected header 'frame,count', found {other:?}",
                path.display()
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = line.split_once(',').ok_or_else(|| {
            CliError::Format(format!("{}:{}: malformed row", path.display(), lineno + 2))
        })?;
        let frame: usize = a.parse().map_err(|_| {
            CliError::Format(format!("{}:{}: bad frame", path.display(), lineno + 2))
        })?;
        let count: usize = b.parse().map_err(|_| {
            CliError::Format(format!("{}:{}: bad count", path.display(), lineno + 2))
        })?;
        rows.push((frame, count));
    }
    if rows.is_empty() {
        return Err(CliError::Format(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(rows)
}

/// Write a gaps CSV: header `frame,gap`; one row per frame with a defined
/// gap.
pub fn write_gaps_csv(gaps: &[(usize, f64)], path: &Path) -> Result<()> {
    let mut text = String::from("frame,gap\n");
    for (t, g) in gaps {
        text.push_str(&format!("{t},{g}\n"));
    }
    fs::write(path, text)
        .map_err(|e| CliError::Format(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Read a gaps CSV written by [`write_gaps_csv`].
pub fn read_gaps_csv(path: &Path) -> Result<Vec<(usize, f64)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Format(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("frame,gap") => {}
        other => {
            return Err(CliError::Format(format!(
                "{}: expected header 'frame,gap', found {other:?}",
                path.display()
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = line.split_once(',').ok_or_else(|| {
            CliError::Format(format!("{}:{}: malformed row", path.display(), lineno + 2))
        })?;
        let frame: usize = a.parse().map_err(|_| {
            CliError::Format(format!("{}:{}: bad frame", path.display(), lineno + 2))
        })?;
        let gap: f64 = b.parse().map_err(|_| {
            CliError::Format(format!("{}:{}: bad gap", path.display(), lineno + 2))
        })?;
        rows.push((frame, gap));
    }
    Ok(rows)
}
