//! JSON and CSV result files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use decorr_core::metrics::study::StudyPoint;
use decorr_core::train::RunResult;
use serde::Serialize;

use crate::error::{CliError, Result};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("results serialize");
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(CliError::read(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(CliError::write(dir))?;
    }
    fs::write(path, text).map_err(CliError::write(path))
}

/// Empty for `None`, shortest round-trip decimal otherwise.
pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const EPOCH_HEADER: &str = "epoch,loss,l_class,l_d,l_m,acc_train,acc_val,acc_test,corr,smv";

pub fn epochs_csv(run: &RunResult) -> String {
    let mut out = String::from(EPOCH_HEADER);
    out.push('\n');
    for e in &run.epochs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            e.epoch,
            e.loss,
            e.l_class,
            e.l_d,
            e.l_m,
            e.acc_train,
            e.acc_val,
            e.acc_test,
            opt(e.corr),
            opt(e.smv)
        );
    }
    out
}

pub const STUDY_HEADER: &str = "K,corr_mean,corr_std,smv_mean,smv_std,variant,runs";

pub fn study_csv(points: &[StudyPoint]) -> String {
    let mut out = String::from(STUDY_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.k,
            opt(p.corr_mean),
            opt(p.corr_std),
            opt(p.smv_mean),
            opt(p.smv_std),
            p.variant,
            p.runs
        );
    }
    out
}

/// Parses a CSV written by [`study_csv`].
pub fn parse_study_csv(text: &str) -> Result<Vec<StudyPoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(STUDY_HEADER) {
        return Err(CliError::Data("not a study CSV".into()));
    }
    let num = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|e| CliError::Data(format!("study CSV value `{s}`: {e}")))
        }
    };
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 7 {
                return Err(CliError::Data(format!("study CSV row `{l}`")));
            }
            Ok(StudyPoint {
                k: f[0].parse().map_err(|e| CliError::Data(format!("study CSV K: {e}")))?,
                corr_mean: num(f[1])?,
                corr_std: num(f[2])?,
                smv_mean: num(f[3])?,
                smv_std: num(f[4])?,
                variant: f[5].to_string(),
                runs: f[6].parse().map_err(|e| CliError::Data(format!("study CSV runs: {e}")))?,
            })
        })
        .collect()
}

/// Reads a numeric matrix from CSV. A first line that does not parse as
/// numbers is taken as a header and skipped.
pub fn parse_matrix_csv(text: &str) -> Result<decorr_core::DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(CliError::Data(format!("CSV line {}: {e}", i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(CliError::Data("CSV has no numeric rows".into()));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != rows[0].len()) {
        return Err(CliError::Data(format!(
            "CSV row {} has {} values, expected {}",
            i + 1,
            r.len(),
            rows[0].len()
        )));
    }
    Ok(decorr_core::DenseMatrix::from_rows(&rows)?)
}
