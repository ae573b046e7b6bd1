use std::io::{self, Write};
use std::path::{Path, PathBuf};

use gtruth_core::export::{CorpusStats, ValidationReport};
use serde_json::json;

pub fn xml_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "xml"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn validate_text(
    files: &[PathBuf],
    reports: &[ValidationReport],
    out: &mut dyn Write,
) -> io::Result<()> {
    for (path, report) in files.iter().zip(reports) {
        if report.is_valid() {
            writeln!(out, "{}: ok", path.display())?;
            continue;
        }
        writeln!(
            out,
            "{}: {} violation(s)",
            path.display(),
            report.violations.len()
        )?;
        for v in &report.violations {
            writeln!(out, "  {}: {}", v.code, v.message)?;
        }
    }
    Ok(())
}

pub fn validate_json(
    files: &[PathBuf],
    reports: &[ValidationReport],
    out: &mut dyn Write,
) -> io::Result<()> {
    let rows: Vec<_> = files
        .iter()
        .zip(reports)
        .map(|(p, r)| json!({"path": p, "valid": r.is_valid(), "violations": r.violations}))
        .collect();
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&rows).expect("serializable")
    )
}

pub fn stats_table(stats: &CorpusStats, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{} images", stats.images)?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
    let mut rows = vec![
        ("mean labels".to_string(), fmt(stats.mean_labels)),
        ("mean units".to_string(), fmt(stats.mean_units)),
        ("invalid files".to_string(), stats.invalid.len().to_string()),
    ];
    if !stats.label_pixels.is_empty() {
        rows.push((String::new(), String::new()));
        rows.push(("label".to_string(), "pixels".to_string()));
        rows.extend(
            stats
                .label_pixels
                .iter()
                .map(|(k, v)| (k.clone(), v.to_string())),
        );
    }
    let key_w = rows
        .iter()
        .map(|(k, _)| k.chars().count())
        .max()
        .unwrap_or(0);
    let val_w = rows.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    for (k, v) in &rows {
        if k.is_empty() {
            writeln!(out)?;
        } else {
            writeln!(out, "{k:<key_w$}  {v:>val_w$}")?;
        }
    }
    for f in &stats.invalid {
        writeln!(out, "invalid: {}", f.path.display())?;
        for v in &f.violations {
            writeln!(out, "  {}: {}", v.code, v.message)?;
        }
    }
    Ok(())
}
