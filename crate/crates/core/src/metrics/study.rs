//! Untrained studies of how propagation and transformation alone drive
//! representations towards overcorrelation.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{corr_metric, smv, smv_sampled};
use crate::error::{Error, Result};
use crate::graph::{largest_connected_component, normalize_adjacency, Graph};
use crate::model::glorot_uniform;
use crate::rng::{gaussian_matrix, Rng};
use crate::tensor::DenseMatrix;

/// Mean and standard deviation of the metrics at one depth. Runs where a
/// metric is undefined are left out of its statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyPoint {
    pub variant: String,
    pub k: usize,
    pub corr_mean: Option<f64>,
    pub corr_std: Option<f64>,
    pub smv_mean: Option<f64>,
    pub smv_std: Option<f64>,
    /// Runs in which `Corr` was defined.
    pub runs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SmvMode {
    Skip,
    Exact,
    /// Estimate from this many random pairs.
    Sampled(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationParams {
    pub dim: usize,
    pub k_max: usize,
    pub runs: usize,
    pub include_lcc: bool,
    pub smv: SmvMode,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            dim: 100,
            k_max: 50,
            runs: 100,
            include_lcc: true,
            smv: SmvMode::Skip,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformationParams {
    pub nodes: usize,
    pub dim: usize,
    pub hidden: usize,
    pub k_max: usize,
    pub runs: usize,
    pub relu: bool,
    pub smv: SmvMode,
}

impl Default for TransformationParams {
    fn default() -> Self {
        Self {
            nodes: 1000,
            dim: 100,
            hidden: 16,
            k_max: 20,
            runs: 100,
            relu: true,
            smv: SmvMode::Skip,
        }
    }
}

#[derive(Default)]
struct Accumulator {
    corr: Vec<Vec<f64>>,
    smv: Vec<Vec<f64>>,
}

impl Accumulator {
    fn new(depths: usize) -> Self {
        Self {
            corr: (0..depths).map(|_| Vec::new()).collect(),
            smv: (0..depths).map(|_| Vec::new()).collect(),
        }
    }

    fn record(&mut self, k: usize, x: &DenseMatrix, mode: SmvMode, rng: &mut Rng) {
        if let Ok(m) = corr_metric(x) {
            self.corr[k].push(m.value);
        }
        let s = match mode {
            SmvMode::Skip => return,
            SmvMode::Exact => smv(x),
            SmvMode::Sampled(pairs) => smv_sampled(x, pairs, rng),
        };
        if let Ok(m) = s {
            self.smv[k].push(m.value);
        }
    }

    fn finish(self, variant: &str) -> Vec<StudyPoint> {
        self.corr
            .into_iter()
            .zip(self.smv)
            .enumerate()
            .map(|(k, (c, s))| {
                let (corr_mean, corr_std) = mean_std(&c);
                let (smv_mean, smv_std) = mean_std(&s);
                StudyPoint {
                    variant: variant.into(),
                    k,
                    corr_mean,
                    corr_std,
                    smv_mean,
                    smv_std,
                    runs: c.len(),
                }
            })
            .collect()
    }
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (Some(mean), Some(libm::sqrt(var)))
}

/// Repeatedly propagates Gaussian features with the normalised adjacency and
/// records the metrics after each step, `k = 0..=k_max`. Returns the `"full"`
/// series, followed by the `"lcc"` series when requested.
pub fn propagation_study(g: &Graph, params: &PropagationParams, rng: &mut Rng) -> Result<Vec<StudyPoint>> {
    if params.dim == 0 || params.runs == 0 {
        return Err(Error::invalid("propagation study needs dim and runs >= 1"));
    }
    let mut graphs = alloc::vec![("full", normalize_adjacency(g))];
    if params.include_lcc {
        let (lcc, _) = largest_connected_component(g);
        graphs.push(("lcc", normalize_adjacency(&lcc)));
    }
    let mut out = Vec::new();
    for (variant, adj) in graphs {
        let mut acc = Accumulator::new(params.k_max + 1);
        for _ in 0..params.runs {
            let mut x = gaussian_matrix(adj.rows(), params.dim, rng);
            acc.record(0, &x, params.smv, rng);
            for k in 1..=params.k_max {
                x = adj.spmm(&x)?;
                acc.record(k, &x, params.smv, rng);
            }
        }
        out.extend(acc.finish(variant));
    }
    Ok(out)
}

/// Passes Gaussian features through a randomly initialised, untrained MLP of
/// width `hidden` and records the metrics of each layer output. Depth 0 is
/// the raw input. The variant is `"relu"` or `"linear"`.
pub fn transformation_study(params: &TransformationParams, rng: &mut Rng) -> Result<Vec<StudyPoint>> {
    if params.dim == 0 || params.hidden == 0 || params.runs == 0 || params.nodes < 2 {
        return Err(Error::invalid("transformation study needs dim, hidden, runs >= 1 and nodes >= 2"));
    }
    let mut acc = Accumulator::new(params.k_max + 1);
    for _ in 0..params.runs {
        let mut x = gaussian_matrix(params.nodes, params.dim, rng);
        acc.record(0, &x, params.smv, rng);
        for k in 1..=params.k_max {
            let w = glorot_uniform(x.cols(), params.hidden, rng);
            x = x.matmul(&w)?;
            if params.relu {
                x = x.map(crate::autodiff::relu);
            }
            acc.record(k, &x, params.smv, rng);
        }
    }
    Ok(acc.finish(if params.relu { "relu" } else { "linear" }))
}
