//! Charts for the `plot` command and the study commands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use decorr_core::metrics::study::StudyPoint;
use decorr_core::train::RunResult;

use crate::error::{CliError, Result};
use crate::output::{parse_study_csv, read_json, STUDY_HEADER};
use crate::svg::{BarChart, LineChart, Series};
use crate::sweep::{best_cells, parse_summary_csv, CellSummary, SUMMARY_HEADER};

pub fn study_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[StudyPoint],
    value: impl Fn(&StudyPoint) -> Option<f64>,
) -> LineChart {
    let mut by_variant: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for p in points {
        let series = by_variant.entry(&p.variant).or_default();
        if let Some(v) = value(p) {
            series.push((p.k as f64, v));
        }
    }
    LineChart {
        title: title.into(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        series: by_variant
            .into_iter()
            .map(|(name, points)| Series { name: name.into(), points })
            .collect(),
    }
}

fn label(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match path.parent().and_then(Path::file_name) {
        Some(dir) => format!("{}/{stem}", dir.to_string_lossy()),
        None => stem,
    }
}

enum Input {
    Run(String, Box<RunResult>),
    Summary(Vec<CellSummary>),
    Study(String, Vec<StudyPoint>),
}

fn classify(path: &PathBuf) -> Result<Input> {
    if path.extension().is_some_and(|e| e == "json") {
        return Ok(Input::Run(label(path), read_json(path)?));
    }
    let text = fs::read_to_string(path).map_err(CliError::read(path))?;
    match text.lines().next() {
        Some(SUMMARY_HEADER) => Ok(Input::Summary(parse_summary_csv(&text)?)),
        Some(STUDY_HEADER) => Ok(Input::Study(label(path), parse_study_csv(&text)?)),
        _ => Err(CliError::Data(format!("{}: not a run, summary or study file", path.display()))),
    }
}

fn line(title: &str, x: &str, y: &str, series: Vec<Series>) -> String {
    LineChart {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        series,
    }
    .render()
}

/// Renders every chart the inputs support, as `(file name, svg)` pairs in a
/// fixed order.
pub fn render_inputs(paths: &[PathBuf]) -> Result<Vec<(String, String)>> {
    let mut runs = Vec::new();
    let mut summaries = Vec::new();
    let mut studies = Vec::new();
    for p in paths {
        match classify(p)? {
            Input::Run(name, r) => runs.push((name, r)),
            Input::Summary(s) => summaries.extend(s),
            Input::Study(name, s) => studies.push((name, s)),
        }
    }
    let mut out = Vec::new();
    if !runs.is_empty() {
        let per_run = |f: &dyn Fn(&decorr_core::train::EpochRecord) -> Option<f64>| -> Vec<Series> {
            runs.iter()
                .map(|(name, r)| Series {
                    name: name.clone(),
                    points: r.epochs.iter().filter_map(|e| f(e).map(|v| (e.epoch as f64, v))).collect(),
                })
                .collect()
        };
        out.push((
            "accuracy.svg".into(),
            line("Test accuracy", "epoch", "accuracy", per_run(&|e| Some(e.acc_test))),
        ));
        out.push((
            "corr.svg".into(),
            line("Corr of the final representation", "epoch", "Corr", per_run(&|e| e.corr)),
        ));
        out.push((
            "smv.svg".into(),
            line("SMV of the final representation", "epoch", "SMV", per_run(&|e| e.smv)),
        ));
    }
    if !summaries.is_empty() {
        let best = best_cells(&summaries);
        let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        let mut top: BTreeMap<String, f64> = BTreeMap::new();
        for ((model, method, layers), c) in &best {
            let name = format!("{model} {method}");
            series.entry(name.clone()).or_default().push((*layers as f64, c.test_mean));
            let t = top.entry(name).or_insert(f64::NEG_INFINITY);
            *t = t.max(c.test_mean);
        }
        let series = series.into_iter().map(|(name, points)| Series { name, points }).collect();
        out.push(("depth.svg".into(), line("Test accuracy by depth", "layers", "accuracy", series)));
        let bars = BarChart {
            title: "Best test accuracy by method".into(),
            y_label: "accuracy".into(),
            bars: top.into_iter().collect(),
        };
        out.push(("ablation.svg".into(), bars.render()));
    }
    if !studies.is_empty() {
        let several = studies.len() > 1;
        let mut series = Vec::new();
        for (name, points) in &studies {
            let chart = study_chart("", "", "", points, |p| p.corr_mean);
            for s in chart.series {
                let name = if several { format!("{name} {}", s.name) } else { s.name };
                series.push(Series { name, points: s.points });
            }
        }
        out.push(("study.svg".into(), line("Corr by depth", "K", "Corr", series)));
    }
    Ok(out)
}
