//! Random graph generators for dataset-free experiments.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{random_class_split, Graph, Split};
use crate::rng::{self, Rng};

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

/// `G(n, p)` with standard-normal features of width `dim` and no labels.
pub fn erdos_renyi(n: usize, p: f64, dim: usize, rng: &mut Rng) -> Result<Graph> {
    check_probability("p", p)?;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng::uniform(rng) < p {
                edges.push((u, v));
            }
        }
    }
    let features = rng::gaussian_matrix(n, dim, rng);
    Graph::new(features, &edges, vec![None; n], 0)
}

/// Stochastic block model with one class per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub dim: usize,
    /// Distance of each class mean from the origin. Class `c` has mean
    /// `separation · e_{c mod dim}`; every feature gets unit-variance noise.
    pub separation: f64,
    pub train_per_class: usize,
}

impl SbmParams {
    pub fn new(block_sizes: Vec<usize>, p_in: f64, p_out: f64) -> Self {
        Self {
            block_sizes,
            p_in,
            p_out,
            dim: 16,
            separation: 1.0,
            train_per_class: 20,
        }
    }
}

/// Samples an SBM graph and a split: `train_per_class` nodes per block for
/// training, then up to 500 validation and 1000 test nodes from the rest
/// (a third / two thirds of the remainder when fewer are available).
pub fn sbm(params: &SbmParams, rng: &mut Rng) -> Result<(Graph, Split)> {
    check_probability("p_in", params.p_in)?;
    check_probability("p_out", params.p_out)?;
    if params.block_sizes.is_empty() || params.dim == 0 {
        return Err(Error::invalid("sbm needs at least one block and a positive feature width"));
    }
    let labels: Vec<usize> = params
        .block_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &size)| core::iter::repeat_n(c, size))
        .collect();
    let n = labels.len();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { params.p_in } else { params.p_out };
            if rng::uniform(rng) < p {
                edges.push((u, v));
            }
        }
    }
    let mut features = rng::gaussian_matrix(n, params.dim, rng);
    for (i, &c) in labels.iter().enumerate() {
        let j = c % params.dim;
        let v = features.get(i, j) + params.separation;
        features.set(i, j, v);
    }
    let classes = params.block_sizes.len();
    let g = Graph::new(features, &edges, labels.into_iter().map(Some).collect(), classes)?;
    let rest = n.saturating_sub(params.train_per_class * classes);
    let (val, test) = if rest >= 1500 { (500, 1000) } else { (rest / 3, rest - rest / 3) };
    let split = random_class_split(&g, params.train_per_class, val, test, rng)?;
    Ok((g, split))
}
