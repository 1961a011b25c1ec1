//! Dataset resolution: GNNB files, synthetic recipes, default splits and the
//! missing-feature setting.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use decorr_core::graph::{apply_missing_features, erdos_renyi, planetoid_split, sbm, SbmParams};
use decorr_core::rng::{self, Stream};
use decorr_core::{Graph, Split};

use crate::error::{CliError, Result};
use crate::gnnb::{self, Dataset};

/// A parsed synthetic-graph recipe such as
/// `sbm:sizes=400/400,p_in=0.05,p_out=0.005,dim=32,sep=2.0` or
/// `er:n=1000,p=0.01`.
#[derive(Clone, Debug, PartialEq)]
pub enum Recipe {
    ErdosRenyi { n: usize, p: f64, dim: usize },
    Sbm(SbmParams),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl Recipe {
    pub fn parse(text: &str) -> Result<Self> {
        let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut kv = BTreeMap::new();
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| usage(format!("recipe entry `{part}` is not key=value")))?;
            kv.insert(k.trim(), v.trim());
        }
        let recipe = match kind {
            "er" => Recipe::ErdosRenyi {
                n: take(&mut kv, "n")?.ok_or_else(|| usage("er recipe needs n"))?,
                p: take(&mut kv, "p")?.ok_or_else(|| usage("er recipe needs p"))?,
                dim: take(&mut kv, "dim")?.unwrap_or(100),
            },
            "sbm" => {
                let sizes = kv.remove("sizes").ok_or_else(|| usage("sbm recipe needs sizes=a/b/..."))?;
                let sizes = sizes
                    .split('/')
                    .map(|s| s.parse::<usize>().map_err(|e| usage(format!("block size `{s}`: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                let mut p = SbmParams::new(
                    sizes,
                    take(&mut kv, "p_in")?.ok_or_else(|| usage("sbm recipe needs p_in"))?,
                    take(&mut kv, "p_out")?.ok_or_else(|| usage("sbm recipe needs p_out"))?,
                );
                if let Some(dim) = take(&mut kv, "dim")? {
                    p.dim = dim;
                }
                if let Some(sep) = take(&mut kv, "sep")? {
                    p.separation = sep;
                }
                if let Some(train) = take(&mut kv, "train")? {
                    p.train_per_class = train;
                }
                Recipe::Sbm(p)
            }
            other => return Err(usage(format!("unknown recipe kind `{other}` (expected er or sbm)"))),
        };
        if let Some(k) = kv.keys().next() {
            return Err(usage(format!("unknown recipe key `{k}`")));
        }
        Ok(recipe)
    }

    /// Samples the graph from the data stream of `seed`. SBM recipes also
    /// yield a split.
    pub fn build(&self, seed: u64) -> Result<Dataset> {
        let mut r = rng::stream(seed, Stream::Data);
        Ok(match self {
            Recipe::ErdosRenyi { n, p, dim } => Dataset {
                graph: erdos_renyi(*n, *p, *dim, &mut r)?,
                split: None,
            },
            Recipe::Sbm(params) => {
                let (graph, split) = sbm(params, &mut r)?;
                Dataset { graph, split: Some(split) }
            }
        })
    }
}

fn take<T: std::str::FromStr>(kv: &mut BTreeMap<&str, &str>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    kv.remove(key)
        .map(|v| v.parse::<T>().map_err(|e| usage(format!("recipe {key}=`{v}`: {e}"))))
        .transpose()
}

/// Where a dataset comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    File(PathBuf),
    Synthetic(Recipe),
}

impl Source {
    /// Resolves `--dataset` / `--synthetic`. Relative dataset paths that do
    /// not exist are looked up in `data_dir`, with `.gnnb` appended when the
    /// name has no extension.
    pub fn resolve(dataset: Option<&Path>, synthetic: Option<&str>, data_dir: Option<&Path>) -> Result<Self> {
        match (dataset, synthetic) {
            (Some(_), Some(_)) => Err(usage("pass either --dataset or --synthetic, not both")),
            (None, None) => Err(usage("one of --dataset or --synthetic is required")),
            (None, Some(recipe)) => Ok(Source::Synthetic(Recipe::parse(recipe)?)),
            (Some(path), None) => Ok(Source::File(locate(path, data_dir))),
        }
    }

    pub fn load(&self, data_seed: u64) -> Result<Dataset> {
        match self {
            Source::File(path) => gnnb::read(path),
            Source::Synthetic(recipe) => recipe.build(data_seed),
        }
    }
}

fn locate(path: &Path, data_dir: Option<&Path>) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    let Some(dir) = data_dir else {
        return path.to_path_buf();
    };
    let joined = dir.join(path);
    if joined.extension().is_none() && !joined.exists() {
        joined.with_extension("gnnb")
    } else {
        joined
    }
}

/// The dataset's own split when it has one, otherwise a Planetoid-style
/// split drawn from the split stream of `split_seed`.
pub fn split_for(ds: &Dataset, split_seed: u64) -> Result<Split> {
    match &ds.split {
        Some(s) => Ok(s.clone()),
        None => {
            let mut r = rng::stream(split_seed, Stream::Split);
            planetoid_split(&ds.graph, &mut r).map_err(|e| CliError::Data(format!("cannot split dataset: {e}")))
        }
    }
}

/// Graph and split ready for training.
pub fn prepare(source: &Source, data_seed: u64, split_seed: u64, missing_features: bool) -> Result<(Graph, Split)> {
    let ds = source.load(data_seed)?;
    let split = split_for(&ds, split_seed)?;
    let graph = if missing_features {
        apply_missing_features(&ds.graph, &split)?
    } else {
        ds.graph
    };
    Ok((graph, split))
}
