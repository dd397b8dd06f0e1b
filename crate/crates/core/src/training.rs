//! Joint cross-entropy loss, ADAM optimizer, and the epoch loop.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{embed_and_pad, EmbeddingTable};
use crate::models::{ForwardPass, Model};
use crate::params::ParamSet;
use crate::rng::Rng;
use crate::tensor::NodeId;

/// Optimizer and loop hyperparameters. ADAM defaults follow its reference
/// implementation: lr 1e-3, β1 0.9, β2 0.999, ε 1e-8.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Joint-loss weights; both tasks carry equal priority by default.
    pub w_sen: f64,
    pub w_sar: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 30,
            batch_size: 16,
            seed: 0,
            w_sen: 1.0,
            w_sar: 1.0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.epsilon <= 0.0
        {
            return Err(Error::Config("invalid optimizer hyperparameters".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Per-parameter first and second gradient moments plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn for_params(params: &ParamSet) -> Self {
        let m = params.iter().map(|(_, p)| vec![0.0; p.values.len()]).collect();
        let v = params.iter().map(|(_, p)| vec![0.0; p.values.len()]).collect();
        AdamState { m, v, t: 0 }
    }

    pub fn moments(&self, param_idx: usize) -> (&[f64], &[f64]) {
        (&self.m[param_idx], &self.v[param_idx])
    }
}

/// One ADAM update over all parameters. `grads` is indexed like the set.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &[Vec<f64>],
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::Contract(format!(
            "adam_step: {} gradient arrays for {} parameters",
            grads.len(),
            params.len()
        )));
    }
    state.t += 1;
    let bc1 = 1.0 - pow(cfg.beta1, state.t);
    let bc2 = 1.0 - pow(cfg.beta2, state.t);
    let ids: Vec<_> = params.iter().map(|(id, _)| id).collect();
    for (i, id) in ids.into_iter().enumerate() {
        let g = &grads[i];
        for (j, &gj) in g.iter().enumerate() {
            if !gj.is_finite() {
                return Err(Error::NonFinite {
                    op: "adam_step",
                    detail: format!(
                        "gradient of parameter '{}' coordinate {j} is {gj}",
                        params.get(id).name
                    ),
                });
            }
            let m = &mut state.m[i][j];
            let v = &mut state.v[i][j];
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gj;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gj * gj;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            params.get_mut(id).values[j] -= cfg.learning_rate * m_hat / (libm::sqrt(v_hat) + cfg.epsilon);
        }
    }
    Ok(())
}

fn pow(base: f64, exp: u64) -> f64 {
    let mut out = 1.0;
    let mut base = base;
    let mut exp = exp;
    while exp > 0 {
        if exp & 1 == 1 {
            out *= base;
        }
        base *= base;
        exp >>= 1;
    }
    out
}

/// Attach the joint loss w_sen·J_sen + w_sar·J_sar to a forward pass.
/// Terms are dropped for heads the variant does not have.
pub fn joint_loss(
    pass: &mut ForwardPass,
    sentiment: Option<usize>,
    sarcasm: Option<usize>,
    cfg: &TrainConfig,
) -> Result<JointLoss> {
    let mut terms: Vec<NodeId> = Vec::new();
    let mut j_sen = None;
    let mut j_sar = None;
    if let (Some(c), Some(label)) = (&pass.sen, sentiment) {
        let loss = pass.tape.cross_entropy(c.logits, &[label])?;
        j_sen = Some(pass.tape.values(loss)[0]);
        let weighted = pass.tape.scale(loss, cfg.w_sen)?;
        terms.push(weighted);
    }
    if let (Some(c), Some(label)) = (&pass.sar, sarcasm) {
        let loss = pass.tape.cross_entropy(c.logits, &[label])?;
        j_sar = Some(pass.tape.values(loss)[0]);
        let weighted = pass.tape.scale(loss, cfg.w_sar)?;
        terms.push(weighted);
    }
    let total = match terms.as_slice() {
        [] => return Err(Error::Contract("joint_loss: no task labels supplied".into())),
        [single] => *single,
        [first, rest @ ..] => {
            let mut acc = *first;
            for &t in rest {
                acc = pass.tape.add(acc, t)?;
            }
            acc
        }
    };
    Ok(JointLoss { node: total, joint: pass.tape.values(total)[0], j_sen, j_sar })
}

pub struct JointLoss {
    pub node: NodeId,
    pub joint: f64,
    pub j_sen: Option<f64>,
    pub j_sar: Option<f64>,
}

/// One training sample: padded token list plus task labels. Labels are
/// `None` only for tasks the variant does not train.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub tokens: Vec<alloc::string::String>,
    pub sentiment: Option<usize>,
    pub sarcasm: Option<usize>,
}

/// Per-epoch mean losses, in the order they were logged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub j_sen: Option<f64>,
    pub j_sar: Option<f64>,
    pub joint: f64,
}

/// Train a model in place: seeded shuffle each epoch, mini-batch gradient
/// accumulation, one ADAM step per batch. Embeddings are not part of θ and
/// therefore stay frozen. Returns the per-epoch loss trace.
pub fn train(
    model: &mut Model,
    samples: &[TrainSample],
    table: &EmbeddingTable,
    cfg: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Input("train: empty training split".into()));
    }
    let v = model.config.variant;
    for (i, s) in samples.iter().enumerate() {
        if v.has_sentiment_head() && s.sentiment.is_none() {
            return Err(Error::Input(format!("train: sample {i} lacks a sentiment label")));
        }
        if v.has_sarcasm_head() && s.sarcasm.is_none() {
            return Err(Error::Input(format!("train: sample {i} lacks a sarcasm label")));
        }
    }

    // pre-embed once: embeddings are frozen, so inputs are constants
    let embedded: Vec<_> = samples
        .iter()
        .map(|s| embed_and_pad(&s.tokens, table, model.config.l))
        .collect::<Result<_>>()?;

    let mut state = AdamState::for_params(&model.params);
    let mut rng = Rng::seed_from(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut sum_sen = 0.0;
        let mut sum_sar = 0.0;
        let mut sum_joint = 0.0;
        let mut n_sen = 0usize;
        let mut n_sar = 0usize;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grads: Vec<Vec<f64>> = model
                .params
                .iter()
                .map(|(_, p)| vec![0.0; p.values.len()])
                .collect();
            for &si in batch {
                let (x, mask) = &embedded[si];
                let mut pass = model.forward_pass(x, mask)?;
                let loss =
                    joint_loss(&mut pass, samples[si].sentiment, samples[si].sarcasm, cfg)?;
                if !loss.joint.is_finite() {
                    return Err(Error::NonFinite {
                        op: "train",
                        detail: format!(
                            "loss diverged at epoch {epoch}, batch {batch_idx}, sample {si}"
                        ),
                    });
                }
                if let Some(j) = loss.j_sen {
                    sum_sen += j;
                    n_sen += 1;
                }
                if let Some(j) = loss.j_sar {
                    sum_sar += j;
                    n_sar += 1;
                }
                sum_joint += loss.joint;
                pass.tape.backward(loss.node)?;
                for (param_idx, grad) in pass.tape.param_grads() {
                    for (g, c) in grads[param_idx].iter_mut().zip(grad) {
                        *g += c;
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for g in &mut grads {
                for v in g.iter_mut() {
                    *v *= scale;
                }
            }
            adam_step(&mut model.params, &grads, &mut state, cfg)?;
        }
        trace.push(EpochRecord {
            epoch,
            j_sen: (n_sen > 0).then(|| sum_sen / n_sen as f64),
            j_sar: (n_sar > 0).then(|| sum_sar / n_sar as f64),
            joint: sum_joint / samples.len() as f64,
        });
    }
    Ok(trace)
}
