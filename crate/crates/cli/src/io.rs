//! Tab-separated input parsing: a scores table and an optional per-workflow
//! covariate table, joined into [`ScorePairs`] slices for the fitting core.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use segccr_core::ScorePairs;
use sha2::{Digest, Sha256};

use crate::AppError;

/// Raw scores file: one row per candidate pair, in file order, plus the
/// SHA-256 of the file bytes for the provenance section.
pub struct ScoreFile {
    pub rows: Vec<(String, f64, f64)>,
    pub sha256: String,
}

/// Covariate table: column names (from the header) and one numeric vector
/// per workflow.
pub struct CovariateFile {
    pub names: Vec<String>,
    pub by_workflow: HashMap<String, Vec<f64>>,
    pub sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

fn read_text(path: &Path) -> Result<(String, String), AppError> {
    let bytes = fs::read(path)
        .map_err(|e| AppError::Input(format!("{}: {e}", path.display())))?;
    let sha256 = sha256_hex(&bytes);
    let text = String::from_utf8(bytes)
        .map_err(|_| AppError::Input(format!("{}: not valid UTF-8", path.display())))?;
    Ok((text, sha256))
}

fn check_header(path: &Path, found: &[&str], expected: &[&str]) -> Result<(), AppError> {
    for name in expected {
        if !found.contains(name) {
            return Err(AppError::Input(format!(
                "{}: missing column `{name}` (expected header `{}`, found `{}`)",
                path.display(),
                expected.join("<TAB>"),
                found.join("<TAB>"),
            )));
        }
    }
    if found != expected {
        return Err(AppError::Input(format!(
            "{}: expected header `{}`, found `{}`",
            path.display(),
            expected.join("<TAB>"),
            found.join("<TAB>"),
        )));
    }
    Ok(())
}

fn parse_field(path: &Path, line_no: usize, column: &str, raw: &str) -> Result<f64, AppError> {
    raw.trim().parse::<f64>().map_err(|_| {
        AppError::Input(format!(
            "{}: line {line_no}: cannot parse {column} value `{raw}` as a number",
            path.display()
        ))
    })
}

/// Reads a scores table with header `workflow<TAB>y1<TAB>y2`. Blank lines are
/// skipped; row order is preserved.
pub fn read_scores(path: &Path) -> Result<ScoreFile, AppError> {
    let (text, sha256) = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(AppError::Input(format!("{}: empty file", path.display())));
    };
    let columns: Vec<&str> = header.split('\t').collect();
    check_header(path, &columns, &["workflow", "y1", "y2"])?;

    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(AppError::Input(format!(
                "{}: line {line_no}: expected 3 tab-separated fields, found {}",
                path.display(),
                fields.len()
            )));
        }
        let y1 = parse_field(path, line_no, "y1", fields[1])?;
        let y2 = parse_field(path, line_no, "y2", fields[2])?;
        rows.push((fields[0].to_string(), y1, y2));
    }
    if rows.is_empty() {
        return Err(AppError::Input(format!("{}: no data rows", path.display())));
    }
    Ok(ScoreFile { rows, sha256 })
}

/// Reads a covariate table with header `workflow<TAB>x1<TAB>...`; one row per
/// workflow, all rows carrying the same number of columns.
pub fn read_covariates(path: &Path) -> Result<CovariateFile, AppError> {
    let (text, sha256) = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(AppError::Input(format!("{}: empty file", path.display())));
    };
    let columns: Vec<&str> = header.split('\t').collect();
    if columns.first() != Some(&"workflow") || columns.len() < 2 {
        return Err(AppError::Input(format!(
            "{}: expected header `workflow<TAB>x1<TAB>...`, found `{}`",
            path.display(),
            columns.join("<TAB>")
        )));
    }
    let names: Vec<String> = columns[1..].iter().map(|s| s.to_string()).collect();

    let mut by_workflow = HashMap::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != names.len() + 1 {
            return Err(AppError::Input(format!(
                "{}: line {line_no}: expected {} tab-separated fields, found {}",
                path.display(),
                names.len() + 1,
                fields.len()
            )));
        }
        let mut values = Vec::with_capacity(names.len());
        for (name, raw) in names.iter().zip(&fields[1..]) {
            values.push(parse_field(path, line_no, name, raw)?);
        }
        if by_workflow.insert(fields[0].to_string(), values).is_some() {
            return Err(AppError::Input(format!(
                "{}: line {line_no}: duplicate workflow `{}`",
                path.display(),
                fields[0]
            )));
        }
    }
    if by_workflow.is_empty() {
        return Err(AppError::Input(format!("{}: no data rows", path.display())));
    }
    Ok(CovariateFile {
        names,
        by_workflow,
        sha256,
    })
}

/// Groups score rows by workflow (order of first appearance) and joins the
/// covariate table when one is supplied. Every workflow in the scores must
/// appear in the covariate table.
pub fn assemble(
    scores: &ScoreFile,
    covariates: Option<&CovariateFile>,
) -> Result<Vec<ScorePairs>, AppError> {
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: HashMap<&str, (Vec<f64>, Vec<f64>)> = HashMap::new();
    for (id, y1, y2) in &scores.rows {
        let entry = grouped.entry(id).or_insert_with(|| {
            order.push(id);
            (Vec::new(), Vec::new())
        });
        entry.0.push(*y1);
        entry.1.push(*y2);
    }

    let mut pairs = Vec::with_capacity(order.len());
    for id in order {
        let (y1, y2) = grouped.remove(id).expect("grouped above");
        let covs = match covariates {
            Some(table) => table
                .by_workflow
                .get(id)
                .ok_or_else(|| {
                    AppError::Input(format!(
                        "workflow `{id}` has scores but no covariate row"
                    ))
                })?
                .clone(),
            None => Vec::new(),
        };
        pairs.push(ScorePairs::new(id, y1, y2, covs).map_err(AppError::from)?);
    }
    Ok(pairs)
}
