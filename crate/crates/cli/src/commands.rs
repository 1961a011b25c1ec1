use std::path::{Path, PathBuf};
use std::time::Instant;

use decorr_core::graph::Graph;
use decorr_core::metrics::study::{propagation_study, transformation_study, PropagationParams, SmvMode, StudyPoint, TransformationParams};
use decorr_core::metrics::{self, EXACT_SMV_MAX_ROWS};
use decorr_core::rng;
use decorr_core::train::{train, RunResult};
use decorr_core::{Error, Split};

use crate::args::{Command, DataArgs, MetricsCmd, PlotCmd, PropCmd, TrainArgs, TrainCmd, TransCmd};
use crate::data::{prepare, Source};
use crate::error::{CliError, Result};
use crate::output::{epochs_csv, study_csv, write_json, write_text};
use crate::{plot, sweep};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(c) => train_cmd(&c).map(|_| ()),
        Command::Sweep(c) => sweep::run(&c),
        Command::PrelimProp(c) => prelim_prop(&c).map(|_| ()),
        Command::PrelimTrans(c) => prelim_trans(&c).map(|_| ()),
        Command::Metrics(c) => metrics_cmd(&c),
        Command::Plot(c) => plot_cmd(&c),
    }
}

pub(crate) fn source(data: &DataArgs) -> Result<Source> {
    Source::resolve(data.dataset.as_deref(), data.synthetic.as_deref(), data.data_dir.as_deref())
}

pub(crate) fn load(data: &DataArgs) -> Result<(Graph, Split)> {
    prepare(&source(data)?, data.data_seed, data.split_seed, data.missing_features)
}

/// Trains one run and fills in `wall_secs` unless timing is disabled. A
/// divergence still yields the partial record.
pub fn timed_run(
    g: &Graph,
    split: &Split,
    args: &TrainArgs,
    seed: u64,
    timing: bool,
) -> Result<RunResult, (Option<Box<RunResult>>, CliError)> {
    let cfg = args.to_config(g, seed).map_err(|e| (None, e))?;
    let start = Instant::now();
    let secs = |mut r: RunResult| {
        r.wall_secs = if timing { start.elapsed().as_secs_f64() } else { 0.0 };
        r
    };
    match train(g, split, &cfg) {
        Ok(r) => Ok(secs(r)),
        Err(Error::Divergence { epoch, term, partial }) => {
            let e = Error::Divergence {
                epoch,
                term,
                partial: partial.clone(),
            };
            Err((Some(Box::new(secs(*partial))), e.into()))
        }
        Err(e) => Err((None, e.into())),
    }
}

pub fn run_file(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("run_{seed}.json"))
}

fn train_cmd(c: &TrainCmd) -> Result<Vec<RunResult>> {
    let (g, split) = load(&c.data)?;
    let mut results = Vec::new();
    for seed in c.seed..c.seed + c.repeats {
        match timed_run(&g, &split, &c.train, seed, !c.no_timing) {
            Ok(r) => {
                write_json(&run_file(&c.out, seed), &r)?;
                if c.epoch_csv {
                    write_text(&c.out.join(format!("run_{seed}.csv")), &epochs_csv(&r))?;
                }
                println!(
                    "seed {seed}: test {:.4} val {:.4} at epoch {} (corr {})",
                    r.test_acc,
                    r.val_acc,
                    r.best_epoch,
                    r.best_corr.map_or("n/a".into(), |v| format!("{v:.3}"))
                );
                results.push(r);
            }
            Err((partial, e)) => {
                if let Some(p) = partial {
                    write_json(&run_file(&c.out, seed), &p)?;
                }
                return Err(e);
            }
        }
    }
    if results.len() > 1 {
        let accs: Vec<f64> = results.iter().map(|r| r.test_acc).collect();
        let (mean, std) = sweep::mean_std(&accs);
        println!("mean test {mean:.4} ± {std:.4} over {} seeds", accs.len());
    }
    Ok(results)
}

fn smv_mode(enabled: bool, n: usize) -> SmvMode {
    match (enabled, n <= EXACT_SMV_MAX_ROWS) {
        (false, _) => SmvMode::Skip,
        (true, true) => SmvMode::Exact,
        (true, false) => SmvMode::Sampled(100_000),
    }
}

fn study_charts(out: &Path, stem: &str, title: &str, x_label: &str, points: &[StudyPoint], with_smv: bool) -> Result<()> {
    write_text(&out.join(format!("{stem}.csv")), &study_csv(points))?;
    write_text(
        &out.join(format!("{stem}_corr.svg")),
        &plot::study_chart(title, x_label, "Corr", points, |p| p.corr_mean).render(),
    )?;
    if with_smv {
        write_text(
            &out.join(format!("{stem}_smv.svg")),
            &plot::study_chart(title, x_label, "SMV", points, |p| p.smv_mean).render(),
        )?;
    }
    Ok(())
}

pub fn prelim_prop(c: &PropCmd) -> Result<Vec<StudyPoint>> {
    let ds = source(&c.data)?.load(c.data.data_seed)?;
    let params = PropagationParams {
        dim: c.dim,
        k_max: c.k_max,
        runs: c.runs,
        include_lcc: !c.no_lcc,
        smv: smv_mode(c.smv, ds.graph.num_nodes()),
    };
    let points = propagation_study(&ds.graph, &params, &mut rng::seeded(c.seed))?;
    study_charts(&c.out, "prop", "Corr of propagated random features", "K", &points, c.smv)?;
    for p in points.iter().filter(|p| p.k == c.k_max) {
        println!(
            "{} K={}: corr {}",
            p.variant,
            p.k,
            p.corr_mean.map_or("undefined".into(), |v| format!("{v:.4}"))
        );
    }
    Ok(points)
}

pub fn prelim_trans(c: &TransCmd) -> Result<Vec<StudyPoint>> {
    if c.depths.is_empty() {
        return Err(CliError::Usage("--depths needs at least one depth".into()));
    }
    let k_max = *c.depths.iter().max().expect("nonempty");
    let variants: &[bool] = match (c.linear_only, c.relu_only) {
        (true, _) => &[false],
        (_, true) => &[true],
        _ => &[false, true],
    };
    let mut points = Vec::new();
    for &relu in variants {
        let params = TransformationParams {
            nodes: c.nodes,
            dim: c.dim,
            hidden: c.hidden,
            k_max,
            runs: c.runs,
            relu,
            smv: smv_mode(c.smv, c.nodes),
        };
        let all = transformation_study(&params, &mut rng::seeded(c.seed))?;
        points.extend(all.into_iter().filter(|p| c.depths.contains(&p.k)));
    }
    study_charts(&c.out, "trans", "Corr through an untrained MLP", "depth", &points, c.smv)?;
    for p in points.iter().filter(|p| p.k == k_max) {
        println!(
            "{} depth {}: corr {}",
            p.variant,
            p.k,
            p.corr_mean.map_or("undefined".into(), |v| format!("{v:.4}"))
        );
    }
    Ok(points)
}

fn metrics_cmd(c: &MetricsCmd) -> Result<()> {
    let text = std::fs::read_to_string(&c.input).map_err(CliError::read(&c.input))?;
    let x = crate::output::parse_matrix_csv(&text)?;
    let report = metrics::report(&x, &mut rng::seeded(c.seed));
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    Ok(())
}

fn plot_cmd(c: &PlotCmd) -> Result<()> {
    if c.inputs.is_empty() {
        return Err(CliError::Usage("plot needs at least one input file".into()));
    }
    for (name, svg) in plot::render_inputs(&c.inputs)? {
        let path = c.out.join(name);
        write_text(&path, &svg)?;
        println!("{}", path.display());
    }
    Ok(())
}
