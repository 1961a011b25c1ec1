//! Grid sweeps over training settings, run on a thread pool, and their
//! aggregation into `summary.csv` and a depth-by-method `table.md`.
//!
//! Every run writes its own file; aggregation reads only those files, so it
//! can be repeated with `--aggregate-only` and reproduces the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use decorr_core::train::RunResult;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::{SweepCmd, TrainArgs};
use crate::commands::{load, run_file, timed_run};
use crate::error::{CliError, Result};
use crate::output::{read_json, write_json, write_text};

/// Sweep specification file.
///
/// ```json
/// {"base": {"epochs": 200}, "grid": {"layers": [2, 15], "preset": ["none", "decorr"]}, "repeats": 5}
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Settings shared by every cell, keyed like the `train` flags.
    pub base: BTreeMap<String, Value>,
    /// Values to combine; the last key varies fastest.
    pub grid: BTreeMap<String, Vec<Value>>,
    /// Seeds `seed..seed + repeats` per cell.
    pub repeats: u64,
    pub seed: u64,
}

/// One grid cell as stored in `cell_<i>/cell.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub settings: BTreeMap<String, Value>,
    pub args: TrainArgs,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub seed: u64,
    pub error: String,
}

impl SweepSpec {
    pub fn cells(&self) -> Result<Vec<Cell>> {
        if self.grid.values().any(Vec::is_empty) {
            return Err(CliError::Usage("sweep grid has an empty value list".into()));
        }
        let repeats = self.repeats.max(1);
        let mut base = TrainArgs::default();
        for (k, v) in &self.base {
            base.set(k, v)?;
        }
        let keys: Vec<&String> = self.grid.keys().collect();
        let total: usize = self.grid.values().map(Vec::len).product();
        let mut cells = Vec::with_capacity(total);
        for index in 0..total {
            let mut rest = index;
            let mut settings = BTreeMap::new();
            for key in keys.iter().rev() {
                let values = &self.grid[*key];
                settings.insert((*key).clone(), values[rest % values.len()].clone());
                rest /= values.len();
            }
            let mut args = base.clone();
            for (k, v) in &settings {
                args.set(k, v)?;
            }
            cells.push(Cell {
                index,
                settings,
                args,
                seeds: (self.seed..self.seed + repeats).collect(),
            });
        }
        Ok(cells)
    }
}

fn cell_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("cell_{index:03}"))
}

fn failure_file(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("run_{seed}.error.json"))
}

pub fn run(c: &SweepCmd) -> Result<()> {
    if !c.aggregate_only {
        let spec_path = c.spec.as_ref().expect("clap requires --spec");
        let spec: SweepSpec = read_json(spec_path).map_err(|e| CliError::Usage(e.to_string()))?;
        let cells = spec.cells()?;
        let (g, split) = load(&c.data)?;
        for cell in &cells {
            write_json(&cell_dir(&c.out, cell.index).join("cell.json"), cell)?;
        }
        let jobs: Vec<(usize, u64)> = cells
            .iter()
            .flat_map(|cell| cell.seeds.iter().map(move |&s| (cell.index, s)))
            .collect();
        let workers = c
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .clamp(1, jobs.len().max(1));
        log::info!("{} cells, {} runs, {workers} workers", cells.len(), jobs.len());
        let next = AtomicUsize::new(0);
        let first_error: Mutex<Option<CliError>> = Mutex::new(None);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&(cell, seed)) = jobs.get(i) else { break };
                    let dir = cell_dir(&c.out, cell);
                    let written = match timed_run(&g, &split, &cells[cell].args, seed, !c.no_timing) {
                        Ok(r) => write_json(&run_file(&dir, seed), &r),
                        Err((_, e)) => {
                            log::warn!("cell {cell} seed {seed} failed: {e}");
                            let failure = RunFailure {
                                seed,
                                error: e.to_string(),
                            };
                            write_json(&failure_file(&dir, seed), &failure)
                        }
                    };
                    if let Err(e) = written {
                        first_error.lock().expect("no poisoning").get_or_insert(e);
                    }
                });
            }
        });
        if let Some(e) = first_error.into_inner().expect("no poisoning") {
            return Err(e);
        }
    }
    let summary = aggregate(&c.out)?;
    write_text(&c.out.join("summary.csv"), &summary_csv(&summary))?;
    write_text(&c.out.join("table.md"), &table_md(&summary))?;
    println!("{}", c.out.join("table.md").display());
    Ok(())
}

/// Aggregate over the seeds of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub index: usize,
    pub model: String,
    pub layers: u64,
    pub method: String,
    pub settings: String,
    pub runs: usize,
    pub failed: usize,
    pub val_mean: f64,
    pub test_mean: f64,
    pub test_std: f64,
    pub corr_mean: Option<f64>,
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn settings_label(settings: &BTreeMap<String, Value>) -> String {
    settings
        .iter()
        .map(|(k, v)| match v {
            Value::String(s) => format!("{k}={s}"),
            other => format!("{k}={other}"),
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Reads every `cell_*/cell.json` under `out` with its run and failure files.
pub fn aggregate(out: &Path) -> Result<Vec<CellSummary>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(out)
        .map_err(CliError::read(out))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("cell.json").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::Data(format!("no sweep cells under {}", out.display())));
    }
    let mut summaries = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let cell: Cell = read_json(&dir.join("cell.json"))?;
        let mut runs: Vec<RunResult> = Vec::new();
        let mut failed = 0;
        for &seed in &cell.seeds {
            let path = run_file(&dir, seed);
            if path.is_file() {
                runs.push(read_json(&path)?);
            } else if failure_file(&dir, seed).is_file() {
                failed += 1;
            }
        }
        let (val_mean, _) = mean_std(&runs.iter().map(|r| r.val_acc).collect::<Vec<_>>());
        let (test_mean, test_std) = mean_std(&runs.iter().map(|r| r.test_acc).collect::<Vec<_>>());
        let corrs: Vec<f64> = runs.iter().filter_map(|r| r.best_corr).collect();
        summaries.push(CellSummary {
            index: cell.index,
            model: serde_json::to_value(cell.args.model)
                .expect("enum")
                .as_str()
                .unwrap_or_default()
                .to_string(),
            layers: cell.args.layers,
            method: cell.args.method().to_string(),
            settings: settings_label(&cell.settings),
            runs: runs.len(),
            failed,
            val_mean,
            test_mean,
            test_std,
            corr_mean: (!corrs.is_empty()).then(|| mean_std(&corrs).0),
        });
    }
    summaries.sort_by_key(|s| s.index);
    Ok(summaries)
}

pub const SUMMARY_HEADER: &str = "cell,model,layers,method,settings,runs,failed,val_mean,test_mean,test_std,corr_mean";

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

pub fn summary_csv(cells: &[CellSummary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},\"{}\",{},{},{},{},{},{}",
            c.index,
            c.model,
            c.layers,
            c.method,
            c.settings.replace('"', "\"\""),
            c.runs,
            c.failed,
            num(c.val_mean),
            num(c.test_mean),
            num(c.test_std),
            c.corr_mean.map(num).unwrap_or_default()
        );
    }
    out
}

/// Parses the fields of a `summary.csv` written by [`summary_csv`].
pub fn parse_summary_csv(text: &str) -> Result<Vec<CellSummary>> {
    let mut lines = text.lines();
    if lines.next() != Some(SUMMARY_HEADER) {
        return Err(CliError::Data("not a sweep summary".into()));
    }
    let bad = |l: &str| CliError::Data(format!("summary row `{l}`"));
    let mut out = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let open = line.find('"').ok_or_else(|| bad(line))?;
        let close = line.rfind('"').ok_or_else(|| bad(line))?;
        let head: Vec<&str> = line[..open].trim_end_matches(',').split(',').collect();
        let tail: Vec<&str> = line[close + 1..].trim_start_matches(',').split(',').collect();
        if head.len() != 4 || tail.len() != 6 {
            return Err(bad(line));
        }
        let f = |s: &str| -> Result<f64> {
            if s.is_empty() {
                Ok(f64::NAN)
            } else {
                s.parse().map_err(|_| bad(line))
            }
        };
        out.push(CellSummary {
            index: head[0].parse().map_err(|_| bad(line))?,
            model: head[1].to_string(),
            layers: head[2].parse().map_err(|_| bad(line))?,
            method: head[3].to_string(),
            settings: line[open + 1..close].replace("\"\"", "\""),
            runs: tail[0].parse().map_err(|_| bad(line))?,
            failed: tail[1].parse().map_err(|_| bad(line))?,
            val_mean: f(tail[2])?,
            test_mean: f(tail[3])?,
            test_std: f(tail[4])?,
            corr_mean: Some(f(tail[5])?).filter(|v| v.is_finite()),
        });
    }
    Ok(out)
}

const METHOD_ORDER: [&str; 4] = ["none", "decorr-alpha", "decorr-beta", "decorr"];

/// Best cell (highest mean validation accuracy, earliest on ties) per
/// `(model, method, layers)`.
pub fn best_cells(cells: &[CellSummary]) -> BTreeMap<(String, String, u64), &CellSummary> {
    let mut best: BTreeMap<(String, String, u64), &CellSummary> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.runs > 0) {
        let key = (c.model.clone(), c.method.clone(), c.layers);
        match best.get(&key) {
            Some(b) if c.val_mean.partial_cmp(&b.val_mean) != Some(std::cmp::Ordering::Greater) => {}
            _ => {
                best.insert(key, c);
            }
        }
    }
    best
}

fn pct(c: &CellSummary) -> String {
    format!("{:.1} ± {:.1}", 100.0 * c.test_mean, 100.0 * c.test_std)
}

pub fn table_md(cells: &[CellSummary]) -> String {
    let best = best_cells(cells);
    let mut out = String::new();
    let models: Vec<String> = {
        let mut m: Vec<String> = best.keys().map(|k| k.0.clone()).collect();
        m.dedup();
        m
    };
    for model in &models {
        let mut depths: Vec<u64> = best.keys().filter(|k| &k.0 == model).map(|k| k.2).collect();
        depths.sort_unstable();
        depths.dedup();
        let mut methods: Vec<&str> = METHOD_ORDER
            .iter()
            .copied()
            .filter(|m| best.keys().any(|k| &k.0 == model && k.1 == *m))
            .collect();
        methods.dedup();
        let _ = writeln!(out, "## {model}\n");
        let _ = write!(out, "| method |");
        for d in &depths {
            let _ = write!(out, " L{d} |");
        }
        out.push_str(" Acc | #K |\n|---|");
        for _ in &depths {
            out.push_str("---|");
        }
        out.push_str("---|---|\n");
        for m in methods {
            let _ = write!(out, "| {m} |");
            let mut top: Option<&CellSummary> = None;
            for d in &depths {
                match best.get(&(model.clone(), m.to_string(), *d)) {
                    Some(c) => {
                        let _ = write!(out, " {} |", pct(c));
                        if top.is_none_or(|t| c.val_mean > t.val_mean) {
                            top = Some(c);
                        }
                    }
                    None => out.push_str(" - |"),
                }
            }
            match top {
                Some(t) => {
                    let _ = writeln!(out, " {:.1} | {} |", 100.0 * t.test_mean, t.layers);
                }
                None => out.push_str(" - | - |\n"),
            }
        }
        out.push('\n');
    }
    out.push_str("Entries are mean ± std test accuracy (%) of the cell with the best mean validation accuracy. Acc and #K give the best depth by validation accuracy.\n");
    out
}
