//! Graphs, propagation operators and structural edits.

mod split;
mod synthetic;

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::tensor::{DenseMatrix, SparseCsr};

pub use split::{planetoid_split, random_class_split, Split};
pub use synthetic::{erdos_renyi, sbm, SbmParams};

/// Undirected simple graph with node features and optional labels.
///
/// The adjacency is stored symmetrically with unit weights and no
/// self-loops.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    adjacency: SparseCsr,
    features: DenseMatrix,
    labels: Vec<Option<usize>>,
    num_classes: usize,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Edges are symmetrized and
    /// deduplicated; self-loops are dropped since propagation adds its own.
    pub fn new(features: DenseMatrix, edges: &[(usize, usize)], labels: Vec<Option<usize>>, num_classes: usize) -> Result<Self> {
        let n = features.rows();
        if labels.len() != n {
            return Err(Error::Graph(format!("{} labels for {n} nodes", labels.len())));
        }
        if let Some(c) = labels.iter().flatten().find(|&&c| c >= num_classes) {
            return Err(Error::Graph(format!("label {c} outside {num_classes} classes")));
        }
        let mut pairs = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Graph(format!("edge ({u}, {v}) out of range for {n} nodes")));
            }
            if u != v {
                pairs.push((u, v));
                pairs.push((v, u));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let entries = pairs.into_iter().map(|(u, v)| (u, v, 1.0)).collect();
        let adjacency = SparseCsr::from_triplets(n, n, entries)?;
        Ok(Self {
            adjacency,
            features,
            labels,
            num_classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn adjacency(&self) -> &SparseCsr {
        &self.adjacency
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn degree(&self, i: usize) -> usize {
        let p = self.adjacency.row_ptr();
        p[i + 1] - p[i]
    }

    /// Undirected edges `(u, v)` with `u < v`, in CSR order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.num_nodes())
            .flat_map(|u| self.adjacency.row(u).filter(move |&(v, _)| u < v).map(move |(v, _)| (u, v)))
            .collect()
    }

    pub fn with_features(&self, features: DenseMatrix) -> Result<Self> {
        if features.rows() != self.num_nodes() {
            return Err(Error::Graph(format!(
                "{} feature rows for {} nodes",
                features.rows(),
                self.num_nodes()
            )));
        }
        Ok(Self { features, ..self.clone() })
    }

    fn with_edges(&self, edges: &[(usize, usize)]) -> Self {
        Self::new(self.features.clone(), edges, self.labels.clone(), self.num_classes).expect("edges come from a valid graph")
    }
}

/// `D̃^{-1/2}(A + I)D̃^{-1/2}` with `D̃_ii = 1 + deg(i)`.
pub fn normalize_adjacency(g: &Graph) -> SparseCsr {
    let n = g.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / libm::sqrt(1.0 + g.degree(i) as f64)).collect();
    let mut entries = Vec::with_capacity(g.adjacency.nnz() + n);
    for i in 0..n {
        entries.push((i, i, inv_sqrt[i] * inv_sqrt[i]));
        entries.extend(g.adjacency.row(i).map(|(j, _)| (i, j, inv_sqrt[i] * inv_sqrt[j])));
    }
    SparseCsr::from_triplets(n, n, entries).expect("adjacency has no self-loops")
}

/// The rescaled Laplacian `2 L_sym / λ_max − I` with `λ_max = 2`.
///
/// `L_sym = I − D^{-1/2} A D^{-1/2}` with the diagonal entry of an isolated
/// node taken as zero, so an isolated node maps to `−1` on the diagonal and an
/// edgeless graph gives `−I`.
pub fn cheby_operator(g: &Graph) -> SparseCsr {
    let n = g.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| match g.degree(i) {
            0 => 0.0,
            d => 1.0 / libm::sqrt(d as f64),
        })
        .collect();
    let mut entries = Vec::with_capacity(g.adjacency.nnz() + n);
    for i in 0..n {
        if g.degree(i) == 0 {
            entries.push((i, i, -1.0));
        }
        entries.extend(g.adjacency.row(i).map(|(j, _)| (i, j, -inv_sqrt[i] * inv_sqrt[j])));
    }
    SparseCsr::from_triplets(n, n, entries).expect("adjacency has no self-loops")
}

/// Zeroes the feature rows of validation and test nodes.
pub fn apply_missing_features(g: &Graph, split: &Split) -> Result<Graph> {
    split.validate(g.num_nodes())?;
    let mut features = g.features.clone();
    for &i in split.val.iter().chain(&split.test) {
        features.row_mut(i).iter_mut().for_each(|v| *v = 0.0);
    }
    g.with_features(features)
}

/// Keeps each undirected edge independently with probability `1 − rate`.
pub fn drop_edge(g: &Graph, rate: f64, rng: &mut Rng) -> Result<Graph> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::invalid(format!("drop rate {rate} outside [0, 1]")));
    }
    let kept: Vec<_> = g.edges().into_iter().filter(|_| rng::uniform(rng) >= rate).collect();
    Ok(g.with_edges(&kept))
}

/// Connected components as lists of node ids, each sorted ascending, ordered
/// by their smallest node id.
pub fn connected_components(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.num_nodes();
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(u) = queue.pop_front() {
            comp.push(u);
            for (v, _) in g.adjacency.row(u) {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// Induced subgraph on the largest connected component, with node ids
/// compacted in ascending original order. Ties go to the component holding
/// the smallest original id. Also returns the original id of every kept node.
pub fn largest_connected_component(g: &Graph) -> (Graph, Vec<usize>) {
    let components = connected_components(g);
    let mut best: &[usize] = &[];
    for comp in &components {
        // components arrive ordered by minimum id, so strict > keeps the tie-break
        if comp.len() > best.len() {
            best = comp;
        }
    }
    let keep = best.to_vec();
    let mut new_id = vec![usize::MAX; g.num_nodes()];
    for (k, &i) in keep.iter().enumerate() {
        new_id[i] = k;
    }
    let edges: Vec<_> = g
        .edges()
        .into_iter()
        .filter(|&(u, v)| new_id[u] != usize::MAX && new_id[v] != usize::MAX)
        .map(|(u, v)| (new_id[u], new_id[v]))
        .collect();
    let features = g.features.gather_rows(&keep).expect("ids in range");
    let labels = keep.iter().map(|&i| g.labels[i]).collect();
    let sub = Graph::new(features, &edges, labels, g.num_classes).expect("subgraph of a valid graph");
    (sub, keep)
}
