use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{self, Rng};

/// Disjoint train / validation / test node sets.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::Split("empty training set".into()));
        }
        let mut owner = vec![false; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n {
                return Err(Error::Split(format!("node {i} out of range for {n} nodes")));
            }
            if owner[i] {
                return Err(Error::Split(format!("node {i} appears twice")));
            }
            owner[i] = true;
        }
        Ok(())
    }
}

/// `per_class` random training nodes from every class, then `val` and `test`
/// nodes drawn uniformly from the remaining labeled nodes.
pub fn random_class_split(g: &Graph, per_class: usize, val: usize, test: usize, rng: &mut Rng) -> Result<Split> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); g.num_classes()];
    for (i, label) in g.labels().iter().enumerate() {
        if let Some(c) = label {
            by_class[*c].push(i);
        }
    }
    let mut train = Vec::with_capacity(per_class * by_class.len());
    let mut rest = Vec::new();
    for (c, mut nodes) in by_class.into_iter().enumerate() {
        if nodes.len() < per_class {
            return Err(Error::Split(format!(
                "class {c} has {} labeled nodes, need {per_class}",
                nodes.len()
            )));
        }
        rng::shuffle(&mut nodes, rng);
        train.extend_from_slice(&nodes[..per_class]);
        rest.extend_from_slice(&nodes[per_class..]);
    }
    if rest.len() < val + test {
        return Err(Error::Split(format!(
            "{} labeled nodes left after training selection, need {}",
            rest.len(),
            val + test
        )));
    }
    rest.sort_unstable();
    rng::shuffle(&mut rest, rng);
    Ok(Split {
        train,
        val: rest[..val].to_vec(),
        test: rest[val..val + test].to_vec(),
    })
}

/// 20 training nodes per class, 500 validation and 1000 test nodes.
pub fn planetoid_split(g: &Graph, rng: &mut Rng) -> Result<Split> {
    random_class_split(g, 20, 500, 1000, rng)
}
