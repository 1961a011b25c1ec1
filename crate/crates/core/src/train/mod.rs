//! Full-batch training with validation-based model selection.

use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::decorr::{overall_objective, DecorrConfig, Discriminator};
use crate::error::{Error, Result};
use crate::graph::{drop_edge, Graph, Split};
use crate::metrics;
use crate::model::{forward, init_parameters, ModelConfig, ModelKind, Parameters, Propagation};
use crate::optim::Adam;
use crate::rng::{self, Stream};
use crate::tensor::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub decorr: DecorrConfig,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of edges dropped and resampled every epoch; 0 disables DropEdge.
    pub dropedge: f64,
    /// Epoch interval for recording `Corr` and `SMV` of the logits. They are
    /// also recorded at every new best validation accuracy.
    pub metrics_every: usize,
}

impl TrainConfig {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            decorr: DecorrConfig::disabled(),
            lr: 0.01,
            weight_decay: 5e-4,
            epochs: 1000,
            seed: 0,
            dropedge: 0.0,
            metrics_every: 10,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.model.validate()?;
        self.decorr.validate(n)?;
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::invalid("weight decay must be non-negative"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropedge) {
            return Err(Error::invalid("dropedge rate outside [0, 1)"));
        }
        if self.metrics_every == 0 {
            return Err(Error::invalid("metrics interval must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub loss: f64,
    pub l_class: f64,
    pub l_d: f64,
    pub l_m: f64,
    pub acc_train: f64,
    pub acc_val: f64,
    pub acc_test: f64,
    pub corr: Option<f64>,
    pub smv: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    /// Epoch with the highest validation accuracy, earliest on ties; 0 if
    /// no epoch finished.
    pub best_epoch: usize,
    pub val_acc: f64,
    /// Test accuracy at `best_epoch`.
    pub test_acc: f64,
    /// `Corr` of the logits at `best_epoch`.
    pub best_corr: Option<f64>,
    pub best_smv: Option<f64>,
    /// Filled in by callers that have a clock.
    pub wall_secs: f64,
    pub seed: u64,
}

/// A finished run and the parameters selected at its best epoch.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub result: RunResult,
    pub params: Parameters,
}

pub fn train(g: &Graph, split: &Split, cfg: &TrainConfig) -> Result<RunResult> {
    train_model(g, split, cfg).map(|t| t.result)
}

pub fn train_model(g: &Graph, split: &Split, cfg: &TrainConfig) -> Result<TrainedModel> {
    let n = g.num_nodes();
    cfg.validate(n)?;
    split.validate(n)?;
    if cfg.model.input != g.features().cols() || cfg.model.classes < g.num_classes() {
        return Err(Error::invalid("model widths do not match the graph"));
    }
    if split.train.is_empty() || split.val.is_empty() || split.test.is_empty() {
        return Err(Error::invalid("train, validation and test sets must be nonempty"));
    }

    let mut init_rng = rng::stream(cfg.seed, Stream::Init);
    let mut dropout_rng = rng::stream(cfg.seed, Stream::Dropout);
    let mut sampling_rng = rng::stream(cfg.seed, Stream::Sampling);
    let mut dropedge_rng = rng::stream(cfg.seed, Stream::DropEdge);

    let mut params = init_parameters(&cfg.model, &mut init_rng)?;
    let mut disc = (cfg.decorr.beta > 0.0).then(|| Discriminator::new(cfg.model.input, cfg.model.hidden, &mut init_rng));
    let mut decay = params.decay_mask();
    if disc.is_some() {
        decay.push(true);
    }
    let mut adam = Adam::new(cfg.lr, cfg.weight_decay);
    let full_prop = Propagation::for_graph(cfg.model.kind, g);
    let labels = g.labels();

    let mut result = RunResult {
        config: cfg.clone(),
        epochs: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        val_acc: 0.0,
        test_acc: 0.0,
        best_corr: None,
        best_smv: None,
        wall_secs: 0.0,
        seed: cfg.seed,
    };
    let mut best_params = params.clone();

    for epoch in 1..=cfg.epochs {
        let prop = if cfg.dropedge > 0.0 && cfg.model.kind != ModelKind::Mlp {
            Propagation::for_graph(cfg.model.kind, &drop_edge(g, cfg.dropedge, &mut dropedge_rng)?)
        } else {
            full_prop.clone()
        };

        let mut tape = Tape::new();
        let x = tape.constant(g.features().clone());
        let out = forward(&cfg.model, &mut params, &mut tape, &prop, x, &mut dropout_rng, true)?;
        let w = disc.as_ref().map(|d| tape.param(d.w.clone()));
        let obj = overall_objective(
            &mut tape,
            out.logits,
            labels,
            &split.train,
            &out.hidden,
            x,
            w,
            &cfg.decorr,
            &mut sampling_rng,
        )?;
        let loss = tape.scalar(obj.loss);
        if !loss.is_finite() {
            let term = if !obj.class.is_finite() {
                "classification loss"
            } else if !obj.decorr.is_finite() {
                "decorrelation loss"
            } else if !obj.mi.is_finite() {
                "mutual-information loss"
            } else {
                "total loss"
            };
            log::error!("{term} became non-finite at epoch {epoch}");
            return Err(Error::Divergence {
                epoch,
                term,
                partial: Box::new(result),
            });
        }

        let mut grads = tape.backward(obj.loss)?;
        let mut grad_list: Vec<DenseMatrix> = out.params.iter().map(|&v| grads.take(v)).collect();
        if let Some(w) = w {
            grad_list.push(grads.take(w));
        }
        drop(tape);
        {
            let mut tensors = params.tensors_mut();
            if let Some(d) = disc.as_mut() {
                tensors.push(&mut d.w);
            }
            adam.step(&mut tensors, &grad_list, &decay)?;
        }

        let logits = eval_logits(&cfg.model, &mut params, &full_prop, g)?;
        let acc_train = accuracy(&logits, labels, &split.train)?;
        let acc_val = accuracy(&logits, labels, &split.val)?;
        let acc_test = accuracy(&logits, labels, &split.test)?;
        let improved = result.best_epoch == 0 || acc_val > result.val_acc;
        let (corr, smv) = if improved || epoch % cfg.metrics_every == 0 || epoch == cfg.epochs {
            let mut metrics_rng = rng::stream(cfg.seed, Stream::Data);
            let report = metrics::report(&logits, &mut metrics_rng);
            (report.corr, report.smv)
        } else {
            (None, None)
        };
        if improved {
            result.best_epoch = epoch;
            result.val_acc = acc_val;
            result.test_acc = acc_test;
            result.best_corr = corr;
            result.best_smv = smv;
            best_params.clone_from(&params);
        }
        log::debug!("epoch {epoch}: loss {loss:.4} val {acc_val:.4} test {acc_test:.4}");
        result.epochs.push(EpochRecord {
            epoch,
            loss,
            l_class: obj.class,
            l_d: obj.decorr,
            l_m: obj.mi,
            acc_train,
            acc_val,
            acc_test,
            corr,
            smv,
        });
    }
    Ok(TrainedModel {
        result,
        params: best_params,
    })
}

fn eval_logits(cfg: &ModelConfig, params: &mut Parameters, prop: &Propagation, g: &Graph) -> Result<DenseMatrix> {
    let mut tape = Tape::new();
    let x = tape.constant(g.features().clone());
    // Dropout is inactive in eval mode, so this generator is never drawn from.
    let mut unused = rng::seeded(0);
    let out = forward(cfg, params, &mut tape, prop, x, &mut unused, false)?;
    Ok(tape.value(out.logits).clone())
}

/// Eval-mode accuracy of `params` on the nodes in `mask`.
pub fn evaluate(g: &Graph, params: &Parameters, cfg: &ModelConfig, mask: &[usize]) -> Result<f64> {
    let mut params = params.clone();
    let logits = eval_logits(cfg, &mut params, &Propagation::for_graph(cfg.kind, g), g)?;
    accuracy(&logits, g.labels(), mask)
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Fraction of `mask` whose argmax logit equals the label. Unlabeled nodes
/// count as wrong.
pub fn accuracy(logits: &DenseMatrix, labels: &[Option<usize>], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::invalid("accuracy over an empty mask"));
    }
    if labels.len() != logits.rows() {
        return Err(Error::invalid("labels and logits differ in length"));
    }
    let mut correct = 0usize;
    for &i in mask {
        if i >= logits.rows() {
            return Err(Error::invalid("mask index out of range"));
        }
        if labels[i] == Some(argmax(logits.row(i))) {
            correct += 1;
        }
    }
    Ok(correct as f64 / mask.len() as f64)
}
