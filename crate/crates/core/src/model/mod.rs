//! GCN, ChebyNet and MLP layer stacks.
//!
//! Every layer runs `dropout → propagate → linear (+ bias)`; non-final layers
//! then add the residual (when widths match), normalise, and apply the
//! activation. The final layer emits raw logits.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{cheby_operator, normalize_adjacency, Graph};
use crate::rng::{self, Rng};
use crate::tensor::{DenseMatrix, SparseCsr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gcn,
    Cheby,
    Mlp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    None,
    Batch,
    Pair,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub layers: usize,
    pub hidden: usize,
    pub input: usize,
    pub classes: usize,
    pub norm: Norm,
    pub residual: bool,
    pub dropout: f64,
    /// Highest Chebyshev polynomial degree; a layer holds `cheby_order + 1` weights.
    pub cheby_order: usize,
    pub bias: bool,
    pub activation: Activation,
    pub pairnorm_scale: f64,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, layers: usize, input: usize, classes: usize) -> Self {
        Self {
            kind,
            layers,
            hidden: 64,
            input,
            classes,
            norm: Norm::None,
            residual: false,
            dropout: 0.0,
            cheby_order: 2,
            bias: true,
            activation: Activation::Relu,
            pairnorm_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::invalid("a model needs at least one layer"));
        }
        if self.hidden == 0 || self.input == 0 || self.classes == 0 {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.pairnorm_scale.is_nan() || self.pairnorm_scale <= 0.0 {
            return Err(Error::invalid("pairnorm scale must be positive"));
        }
        Ok(())
    }

    /// `(input width, output width)` of layer `l`.
    pub fn layer_dims(&self, l: usize) -> (usize, usize) {
        let fan_in = if l == 0 { self.input } else { self.hidden };
        let fan_out = if l + 1 == self.layers { self.classes } else { self.hidden };
        (fan_in, fan_out)
    }

    fn weights_per_layer(&self) -> usize {
        match self.kind {
            ModelKind::Cheby => self.cheby_order + 1,
            ModelKind::Gcn | ModelKind::Mlp => 1,
        }
    }
}

/// BatchNorm affine terms and running statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: DenseMatrix,
    pub beta: DenseMatrix,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

/// Weight kept on the running statistics at each training step.
pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;

impl BatchNorm {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: DenseMatrix::filled(1, width, 1.0),
            beta: DenseMatrix::zeros(1, width),
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<DenseMatrix>,
    pub bias: Option<DenseMatrix>,
    pub batch_norm: Option<BatchNorm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub layers: Vec<LayerParams>,
}

impl Parameters {
    /// Trainable tensors in registration order.
    pub fn tensors(&self) -> Vec<&DenseMatrix> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
            if let Some(bn) = &l.batch_norm {
                out.push(&bn.gamma);
                out.push(&bn.beta);
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.extend(l.weights.iter_mut());
            out.extend(l.bias.iter_mut());
            if let Some(bn) = &mut l.batch_norm {
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
        }
        out
    }

    /// Parallel to [`tensors`](Self::tensors): `true` for weight matrices,
    /// which take weight decay, `false` for biases and BatchNorm affine terms.
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weights.iter().map(|_| true));
            out.extend(l.bias.iter().map(|_| false));
            if l.batch_norm.is_some() {
                out.extend([false, false]);
            }
        }
        out
    }
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut Rng) -> DenseMatrix {
    let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    let data = (0..fan_in * fan_out).map(|_| (2.0 * rng::uniform(rng) - 1.0) * limit).collect();
    DenseMatrix::from_vec(fan_in, fan_out, data).expect("length matches shape")
}

pub fn init_parameters(cfg: &ModelConfig, rng: &mut Rng) -> Result<Parameters> {
    cfg.validate()?;
    let layers = (0..cfg.layers)
        .map(|l| {
            let (fan_in, fan_out) = cfg.layer_dims(l);
            let last = l + 1 == cfg.layers;
            LayerParams {
                weights: (0..cfg.weights_per_layer()).map(|_| glorot_uniform(fan_in, fan_out, rng)).collect(),
                bias: cfg.bias.then(|| DenseMatrix::zeros(1, fan_out)),
                batch_norm: (cfg.norm == Norm::Batch && !last).then(|| BatchNorm::new(fan_out)),
            }
        })
        .collect();
    Ok(Parameters { layers })
}

/// The propagation step applied inside each layer.
#[derive(Clone, Debug)]
pub enum Propagation {
    /// Multiply by the normalised self-loop adjacency.
    Gcn(Arc<SparseCsr>),
    /// Chebyshev expansion in the rescaled Laplacian.
    Cheby(Arc<SparseCsr>),
    Identity,
}

impl Propagation {
    pub fn for_graph(kind: ModelKind, g: &Graph) -> Self {
        match kind {
            ModelKind::Gcn => Propagation::Gcn(Arc::new(normalize_adjacency(g))),
            ModelKind::Cheby => Propagation::Cheby(Arc::new(cheby_operator(g))),
            ModelKind::Mlp => Propagation::Identity,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// Outputs of layers `1..K-1` after normalisation and activation.
    pub hidden: Vec<Var>,
    /// Output of layer `K`, before softmax.
    pub logits: Var,
    /// Tape handles of [`Parameters::tensors`], in the same order.
    pub params: Vec<Var>,
}

struct LayerVars {
    weights: Vec<Var>,
    bias: Option<Var>,
    bn: Option<(Var, Var)>,
}

/// Runs the layer stack for `cfg.kind` on input features `x`.
///
/// In training mode dropout is active and BatchNorm uses (and updates) batch
/// statistics; otherwise BatchNorm reads its running statistics.
pub fn forward(
    cfg: &ModelConfig,
    params: &mut Parameters,
    tape: &mut Tape,
    prop: &Propagation,
    x: Var,
    rng: &mut Rng,
    training: bool,
) -> Result<ForwardOutput> {
    let vars: Vec<Var> = params.tensors().into_iter().map(|m| tape.param(m.clone())).collect();
    forward_with(cfg, params, tape, &vars, prop, x, rng, training)
}

/// [`forward`] with parameters already on the tape as `vars`, in
/// [`Parameters::tensors`] order. Their tape values are used; `params` only
/// supplies the layout and BatchNorm running statistics.
#[allow(clippy::too_many_arguments)]
pub fn forward_with(
    cfg: &ModelConfig,
    params: &mut Parameters,
    tape: &mut Tape,
    vars: &[Var],
    prop: &Propagation,
    x: Var,
    rng: &mut Rng,
    training: bool,
) -> Result<ForwardOutput> {
    cfg.validate()?;
    if params.layers.len() != cfg.layers {
        return Err(Error::invalid("parameters do not match the layer count"));
    }
    if vars.len() != params.tensors().len() {
        return Err(Error::invalid("parameter handles do not match the layout"));
    }
    let mut next = vars.iter().copied();
    let mut layer_vars = Vec::with_capacity(cfg.layers);
    for l in &params.layers {
        let mut take = || next.next().expect("length checked");
        let weights = l.weights.iter().map(|_| take()).collect();
        let bias = l.bias.as_ref().map(|_| take());
        let bn = l.batch_norm.as_ref().map(|_| (take(), take()));
        layer_vars.push(LayerVars { weights, bias, bn });
    }

    let mut h = x;
    let mut hidden = Vec::with_capacity(cfg.layers.saturating_sub(1));
    for (l, lv) in layer_vars.iter().enumerate() {
        let last = l + 1 == cfg.layers;
        let dropped = tape.dropout(h, cfg.dropout, rng, training)?;
        let mut z = match prop {
            Propagation::Gcn(adj) => {
                let p = tape.spmm(adj, dropped)?;
                tape.matmul(p, lv.weights[0])?
            }
            Propagation::Cheby(lap) => cheby_transform(tape, lap, dropped, &lv.weights)?,
            Propagation::Identity => tape.matmul(dropped, lv.weights[0])?,
        };
        if let Some(b) = lv.bias {
            z = tape.add_row(z, b)?;
        }
        if last {
            return Ok(ForwardOutput {
                hidden,
                logits: z,
                params: vars.to_vec(),
            });
        }
        if cfg.residual && tape.value(h).cols() == tape.value(z).cols() {
            z = tape.add(z, h)?;
        }
        z = match cfg.norm {
            Norm::None => z,
            Norm::Pair => tape.pairnorm(z, cfg.pairnorm_scale)?,
            Norm::Batch => {
                let state = params.layers[l].batch_norm.as_mut().expect("batch norm initialised");
                let (gamma, beta) = lv.bn.expect("batch norm registered");
                batch_norm(tape, z, state, gamma, beta, training)?
            }
        };
        h = match cfg.activation {
            Activation::Relu => tape.relu(z)?,
            Activation::Identity => z,
        };
        hidden.push(h);
    }
    unreachable!("the final layer returns")
}

/// `Σ_k T_k(L̂) · x · W_k` with `T_0 = I`, `T_1 = L̂`, `T_k = 2 L̂ T_{k-1} − T_{k-2}`.
fn cheby_transform(tape: &mut Tape, lap: &Arc<SparseCsr>, x: Var, weights: &[Var]) -> Result<Var> {
    let mut out = tape.matmul(x, weights[0])?;
    let (mut prev, mut cur) = (x, x);
    for (k, &w) in weights.iter().enumerate().skip(1) {
        let next = if k == 1 {
            tape.spmm(lap, x)?
        } else {
            let p = tape.spmm(lap, cur)?;
            let p = tape.scale(p, 2.0)?;
            tape.sub(p, prev)?
        };
        prev = cur;
        cur = next;
        let term = tape.matmul(cur, w)?;
        out = tape.add(out, term)?;
    }
    Ok(out)
}

fn batch_norm(tape: &mut Tape, z: Var, state: &mut BatchNorm, gamma: Var, beta: Var, training: bool) -> Result<Var> {
    let xhat = if training {
        let n = tape.value(z).rows();
        if n < 2 {
            return Err(Error::invalid("batch norm in training mode needs at least two rows"));
        }
        let (xhat, mean, var) = tape.standardize(z, BN_EPS)?;
        let unbias = n as f64 / (n - 1) as f64;
        for j in 0..mean.len() {
            state.running_mean[j] = BN_MOMENTUM * state.running_mean[j] + (1.0 - BN_MOMENTUM) * mean[j];
            state.running_var[j] = BN_MOMENTUM * state.running_var[j] + (1.0 - BN_MOMENTUM) * var[j] * unbias;
        }
        xhat
    } else {
        let scale: Vec<f64> = state.running_var.iter().map(|v| 1.0 / libm::sqrt(v + BN_EPS)).collect();
        let shift: Vec<f64> = state.running_mean.iter().zip(&scale).map(|(m, s)| -m * s).collect();
        tape.affine_cols(z, &scale, &shift)?
    };
    let y = tape.mul_row(xhat, gamma)?;
    tape.add_row(y, beta)
}

pub fn gcn_forward(
    cfg: &ModelConfig,
    params: &mut Parameters,
    tape: &mut Tape,
    adj: &Arc<SparseCsr>,
    x: Var,
    rng: &mut Rng,
    training: bool,
) -> Result<ForwardOutput> {
    forward(cfg, params, tape, &Propagation::Gcn(Arc::clone(adj)), x, rng, training)
}

pub fn cheby_forward(
    cfg: &ModelConfig,
    params: &mut Parameters,
    tape: &mut Tape,
    lap: &Arc<SparseCsr>,
    x: Var,
    rng: &mut Rng,
    training: bool,
) -> Result<ForwardOutput> {
    forward(cfg, params, tape, &Propagation::Cheby(Arc::clone(lap)), x, rng, training)
}

pub fn mlp_forward(
    cfg: &ModelConfig,
    params: &mut Parameters,
    tape: &mut Tape,
    x: Var,
    rng: &mut Rng,
    training: bool,
) -> Result<ForwardOutput> {
    forward(cfg, params, tape, &Propagation::Identity, x, rng, training)
}
