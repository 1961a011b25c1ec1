//! Decorrelation and mutual-information regularisers.
//!
//! `ℓ_D` pushes the normalised covariance of a representation towards a
//! scaled identity. `ℓ_M` is a Donsker-Varadhan style lower bound on the
//! mutual information between input features and a hidden representation,
//! scored by a bilinear discriminator `σ(xᵀ W h)`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid, Tape, Var};
use crate::error::{Error, Result};
use crate::model::glorot_uniform;
use crate::rng::{self, Rng};
use crate::tensor::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecorrConfig {
    /// Weight of the decorrelation loss.
    pub alpha: f64,
    /// Weight of the mutual-information loss.
    pub beta: f64,
    /// The MI loss is applied to hidden layers `t, 2t, 3t, …`.
    pub t: usize,
    /// Monte-Carlo node count; `None` means `⌈√N⌉`.
    pub sample_size: Option<usize>,
    /// Nodes per MI batch; `None` means `min(N, 1024)`.
    pub mi_batch: Option<usize>,
}

impl Default for DecorrConfig {
    fn default() -> Self {
        Self::disabled()
    }
}

pub const DEFAULT_MI_BATCH: usize = 1024;

impl DecorrConfig {
    pub fn disabled() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            t: 5,
            sample_size: None,
            mi_batch: None,
        }
    }

    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            ..Self::disabled()
        }
    }

    pub fn is_active(&self) -> bool {
        self.alpha > 0.0 || self.beta > 0.0
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0) || !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::invalid("alpha and beta must be finite and non-negative"));
        }
        if self.t == 0 {
            return Err(Error::invalid("MI stride t must be >= 1"));
        }
        let m = self.sample_size(n);
        if m == 0 || m > n {
            return Err(Error::invalid(alloc::format!("sample size {m} outside 1..={n}")));
        }
        if self.mi_batch == Some(0) {
            return Err(Error::invalid("MI batch must be positive"));
        }
        Ok(())
    }

    pub fn sample_size(&self, n: usize) -> usize {
        self.sample_size.unwrap_or_else(|| default_sample_size(n))
    }

    pub fn mi_batch(&self, n: usize) -> usize {
        self.mi_batch.unwrap_or(DEFAULT_MI_BATCH).min(n)
    }
}

/// `⌈√n⌉`.
pub fn default_sample_size(n: usize) -> usize {
    let mut r = libm::sqrt(n as f64) as usize;
    while r * r > n {
        r -= 1;
    }
    if r * r < n {
        r += 1;
    }
    r
}

/// Bilinear discriminator weight, `d0 × d` for input width `d0` and hidden
/// width `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub w: DenseMatrix,
}

impl Discriminator {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        Self {
            w: glorot_uniform(input, hidden, rng),
        }
    }
}

/// Sorted uniform sample of `size` distinct indices from `0..n`.
pub fn monte_carlo_sample(n: usize, size: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if size > n {
        return Err(Error::invalid(alloc::format!("cannot sample {size} of {n} nodes")));
    }
    let mut idx = rand::seq::index::sample(rng, n, size).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// `‖C/‖C‖_F − I/√d‖_F` with `C` the covariance of the rows of `h`.
///
/// Fails with [`Error::Degenerate`] when every column of `h` is constant.
pub fn decorr_loss(tape: &mut Tape, h: Var) -> Result<Var> {
    let (m, d) = tape.value(h).shape();
    if m < 2 {
        return Err(Error::invalid("decorrelation loss needs at least two rows"));
    }
    let raw = tape.value(h).frobenius();
    let centered = tape.center_cols(h)?;
    if tape.value(centered).frobenius() <= crate::metrics::EPS * raw || raw == 0.0 {
        return Err(Error::Degenerate);
    }
    let ct = tape.transpose(centered)?;
    let gram = tape.matmul(ct, centered)?;
    let cov = tape.scale(gram, 1.0 / (m - 1) as f64)?;
    let norm = tape.frobenius(cov)?;
    let unit = tape.div_scalar(cov, norm)?;
    let target = DenseMatrix::identity(d).scale(-1.0 / libm::sqrt(d as f64));
    let diff = tape.shift(unit, &target)?;
    tape.frobenius(diff)
}

/// Sum of [`decorr_loss`] over the rows of each hidden layer picked by one
/// shared Monte-Carlo sample. Degenerate layers contribute zero.
pub fn total_decorr_loss(tape: &mut Tape, hidden: &[Var], cfg: &DecorrConfig, rng: &mut Rng) -> Result<Var> {
    let Some(&first) = hidden.first() else {
        return Err(Error::invalid("decorrelation loss needs at least one hidden layer"));
    };
    let n = tape.value(first).rows();
    let sample = monte_carlo_sample(n, cfg.sample_size(n), rng)?;
    let mut total = tape.constant(DenseMatrix::scalar(0.0));
    for (l, &h) in hidden.iter().enumerate() {
        let rows = tape.gather_rows(h, &sample)?;
        match decorr_loss(tape, rows) {
            Ok(term) => total = tape.add(total, term)?,
            Err(Error::Degenerate) => log::warn!("hidden layer {} is degenerate; skipping its decorrelation term", l + 1),
            Err(e) => return Err(e),
        }
    }
    Ok(total)
}

/// `σ(xᵀ W h)` for one feature row and one hidden row.
pub fn discriminator_score(x: &[f64], h: &[f64], w: &DenseMatrix) -> Result<f64> {
    if x.len() != w.rows() || h.len() != w.cols() {
        return Err(Error::shape("discriminator", (x.len(), h.len()), w.shape()));
    }
    let mut s = 0.0;
    for (i, xi) in x.iter().enumerate() {
        if *xi != 0.0 {
            s += xi * crate::tensor::dense_dot(w.row(i), h);
        }
    }
    Ok(sigmoid(s))
}

/// `−mean(D(x_i, h_i)) + log mean exp(D(x_π(i), h_i))` over `batch`, with `π`
/// a uniform random permutation of the batch.
pub fn mi_loss(tape: &mut Tape, h: Var, x: Var, w: Var, batch: &[usize], rng: &mut Rng) -> Result<Var> {
    if batch.len() < 2 {
        return Err(Error::invalid("MI loss needs a batch of at least two nodes"));
    }
    let mut shuffled = batch.to_vec();
    rng::shuffle(&mut shuffled, rng);
    let hb = tape.gather_rows(h, batch)?;
    let pos = score_rows(tape, x, w, hb, batch)?;
    let neg = score_rows(tape, x, w, hb, &shuffled)?;
    let pos_mean = tape.mean(pos)?;
    let neg_term = tape.log_mean_exp(neg)?;
    tape.sub(neg_term, pos_mean)
}

fn score_rows(tape: &mut Tape, x: Var, w: Var, hb: Var, rows: &[usize]) -> Result<Var> {
    let xb = tape.gather_rows(x, rows)?;
    let xw = tape.matmul(xb, w)?;
    let dots = tape.row_dot(xw, hb)?;
    tape.sigmoid(dots)
}

/// 1-based hidden-layer indices `t, 2t, … ≤ hidden_layers` that receive the MI loss.
pub fn mi_layers(hidden_layers: usize, t: usize) -> Vec<usize> {
    if t == 0 {
        return Vec::new();
    }
    (1..=hidden_layers / t).map(|j| j * t).collect()
}

/// Sum of [`mi_loss`] over [`mi_layers`]. One batch is drawn per call; each
/// layer gets its own permutation.
pub fn total_mi_loss(tape: &mut Tape, hidden: &[Var], x: Var, w: Var, cfg: &DecorrConfig, rng: &mut Rng) -> Result<Var> {
    let mut total = tape.constant(DenseMatrix::scalar(0.0));
    let layers = mi_layers(hidden.len(), cfg.t);
    if layers.is_empty() {
        return Ok(total);
    }
    let n = tape.value(x).rows();
    let batch = monte_carlo_sample(n, cfg.mi_batch(n), rng)?;
    for l in layers {
        let term = mi_loss(tape, hidden[l - 1], x, w, &batch, rng)?;
        total = tape.add(total, term)?;
    }
    Ok(total)
}

/// The training objective and its separately logged terms.
#[derive(Clone, Copy, Debug)]
pub struct Objective {
    pub loss: Var,
    pub class: f64,
    pub decorr: f64,
    pub mi: f64,
}

/// `L_class + α L_D + β L_M`. Terms with zero weight are not evaluated and
/// report 0. `x` and `w` are only read when `β > 0`.
#[allow(clippy::too_many_arguments)]
pub fn overall_objective(
    tape: &mut Tape,
    logits: Var,
    labels: &[Option<usize>],
    train: &[usize],
    hidden: &[Var],
    x: Var,
    w: Option<Var>,
    cfg: &DecorrConfig,
    rng: &mut Rng,
) -> Result<Objective> {
    let mut loss = tape.softmax_cross_entropy(logits, labels, train)?;
    let class = tape.scalar(loss);
    let (mut decorr, mut mi) = (0.0, 0.0);
    if cfg.alpha > 0.0 && !hidden.is_empty() {
        let ld = total_decorr_loss(tape, hidden, cfg, rng)?;
        decorr = tape.scalar(ld);
        let weighted = tape.scale(ld, cfg.alpha)?;
        loss = tape.add(loss, weighted)?;
    }
    if cfg.beta > 0.0 {
        let w = w.ok_or_else(|| Error::invalid("MI loss needs a discriminator"))?;
        let lm = total_mi_loss(tape, hidden, x, w, cfg, rng)?;
        mi = tape.scalar(lm);
        let weighted = tape.scale(lm, cfg.beta)?;
        loss = tape.add(loss, weighted)?;
    }
    Ok(Objective { loss, class, decorr, mi })
}
