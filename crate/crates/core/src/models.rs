//! Model variants: standalone single-task classifiers, the coercion rule,
//! and the multi-task architectures with NTN fusion and shared attention.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{
    attention, classify, embed_and_pad, gru_forward, ntn_fuse, task_projection, AttentionParams,
    Classification, EmbeddingTable, GruParams, HeadParams, NtnParams,
};
use crate::params::{ParamId, ParamSet};
use crate::rng::Rng;
use crate::tensor::{NodeId, Tape, Tensor};

/// The Table-1 model variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    StandaloneSentiment,
    StandaloneSarcasm,
    /// Two standalone classifiers composed post hoc: a sarcastic verdict
    /// forces the sentiment label negative. Not a trainable network itself.
    Coerced,
    MultiTaskSimple,
    MultiTaskFusion,
    MultiTaskFusionSeparateGru,
    MultiTaskFusionSharedAttention,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::StandaloneSentiment,
        Variant::StandaloneSarcasm,
        Variant::Coerced,
        Variant::MultiTaskSimple,
        Variant::MultiTaskFusion,
        Variant::MultiTaskFusionSeparateGru,
        Variant::MultiTaskFusionSharedAttention,
    ];

    pub fn has_sentiment_head(&self) -> bool {
        !matches!(self, Variant::StandaloneSarcasm)
    }

    pub fn has_sarcasm_head(&self) -> bool {
        !matches!(self, Variant::StandaloneSentiment)
    }

    pub fn has_fusion(&self) -> bool {
        matches!(
            self,
            Variant::MultiTaskFusion
                | Variant::MultiTaskFusionSeparateGru
                | Variant::MultiTaskFusionSharedAttention
        )
    }

    pub fn has_attention(&self) -> bool {
        matches!(self, Variant::MultiTaskFusionSharedAttention)
    }

    pub fn separate_grus(&self) -> bool {
        matches!(self, Variant::MultiTaskFusionSeparateGru)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::StandaloneSentiment => "standalone-sentiment",
            Variant::StandaloneSarcasm => "standalone-sarcasm",
            Variant::Coerced => "coerced",
            Variant::MultiTaskSimple => "multitask-simple",
            Variant::MultiTaskFusion => "multitask-fusion",
            Variant::MultiTaskFusionSeparateGru => "multitask-fusion-separate-gru",
            Variant::MultiTaskFusionSharedAttention => "multitask-fusion-shared-attention",
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant '{s}'")))
    }
}

impl core::fmt::Display for Variant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Variant selector plus all dimension and initialization hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Word-embedding width (300 for GloVe).
    pub d_g: usize,
    /// GRU hidden size.
    pub d_gru: usize,
    /// Task-projection width.
    pub d_t: usize,
    /// NTN fusion width.
    pub d_ntn: usize,
    /// Number of classes per task.
    pub c: usize,
    /// Padded sentence length (longest sentence in the corpus).
    pub l: usize,
    /// Parameter-initialization seed.
    pub seed: u64,
}

impl ModelConfig {
    /// Dimensions used in the experiments: D_g=300, D_gru=500, D_t=300, D_ntn=100, C=2.
    pub fn reference(variant: Variant, l: usize, seed: u64) -> Self {
        ModelConfig { variant, d_g: 300, d_gru: 500, d_t: 300, d_ntn: 100, c: 2, l, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.d_g == 0 || self.d_gru == 0 || self.d_t == 0 || self.d_ntn == 0 || self.l == 0 {
            return Err(Error::Config("all dimensions must be positive".into()));
        }
        if self.c < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        Ok(())
    }
}

struct Architecture {
    gru: GruParams,
    gru_sar: Option<GruParams>,
    proj_sen: Option<(ParamId, ParamId)>,
    proj_sar: Option<(ParamId, ParamId)>,
    att: Option<AttentionParams>,
    ntn: Option<NtnParams>,
    head_sen: Option<HeadParams>,
    head_sar: Option<HeadParams>,
}

/// One built model variant: its configuration and trainable parameters θ.
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamSet,
    arch: Architecture,
}

/// Result of one forward pass, including the tape for backprop.
pub struct ForwardPass {
    pub tape: Tape,
    pub sen: Option<Classification>,
    pub sar: Option<Classification>,
    pub alpha_sen: Option<NodeId>,
    pub alpha_sar: Option<NodeId>,
}

/// Detached per-sample prediction.
#[derive(Debug, Clone)]
pub struct ModelOutput {
    pub probs_sen: Option<Vec<f64>>,
    pub probs_sar: Option<Vec<f64>>,
    pub label_sen: Option<usize>,
    pub label_sar: Option<usize>,
    pub alpha_sen: Option<Vec<f64>>,
    pub alpha_sar: Option<Vec<f64>>,
}

impl Model {
    /// Create the parameter set θ for the configured variant, Xavier-uniform
    /// weights and zero biases from the config seed.
    pub fn build(config: ModelConfig) -> Result<Model> {
        config.validate()?;
        if config.variant == Variant::Coerced {
            return Err(Error::Config(
                "the coerced variant composes two standalone models; build them separately".into(),
            ));
        }
        let v = config.variant;
        let mut set = ParamSet::new();
        let mut rng = Rng::seed_from(config.seed);
        let (d_g, d_gru, d_t, d_ntn, c, l) =
            (config.d_g, config.d_gru, config.d_t, config.d_ntn, config.c, config.l);

        let gru = GruParams::init(&mut set, "gru", d_g, d_gru, &mut rng);
        let gru_sar = v
            .separate_grus()
            .then(|| GruParams::init(&mut set, "gru_sar", d_g, d_gru, &mut rng));
        let proj = |set: &mut ParamSet, rng: &mut Rng, name: &str| {
            let w = set.register(
                format!("proj_{name}.w"),
                vec![d_gru, d_t],
                rng.xavier(d_gru, d_t, d_gru * d_t),
            );
            let b = set.register(format!("proj_{name}.b"), vec![d_t], vec![0.0; d_t]);
            (w, b)
        };
        let proj_sen =
            v.has_sentiment_head().then(|| proj(&mut set, &mut rng, "sen"));
        let proj_sar = v.has_sarcasm_head().then(|| proj(&mut set, &mut rng, "sar"));
        let att = v
            .has_attention()
            .then(|| AttentionParams::init(&mut set, "att", d_t, l, &mut rng));
        let ntn = v
            .has_fusion()
            .then(|| NtnParams::init(&mut set, "ntn", d_t, d_ntn, &mut rng));
        let head_sen = v
            .has_sentiment_head()
            .then(|| HeadParams::init(&mut set, "head_sen", d_t, c, &mut rng));
        let sar_in = if v.has_fusion() { d_t + d_ntn } else { d_t };
        let head_sar = v
            .has_sarcasm_head()
            .then(|| HeadParams::init(&mut set, "head_sar", sar_in, c, &mut rng));

        Ok(Model {
            config,
            params: set,
            arch: Architecture { gru, gru_sar, proj_sen, proj_sar, att, ntn, head_sen, head_sar },
        })
    }

    /// Forward pass over a pre-embedded, padded input. Returns the tape so a
    /// loss can be attached and backpropagated.
    pub fn forward_pass(&self, x: &Tensor, mask: &[bool]) -> Result<ForwardPass> {
        let v = self.config.variant;
        let mut tape = Tape::new();
        let a = &self.arch;
        let set = &self.params;

        let leaf = |tape: &mut Tape, id: ParamId| set.leaf(tape, id);

        let gru_nodes = a.gru.leaves(set, &mut tape)?;
        let mut alpha_sen = None;
        let mut alpha_sar = None;

        // per-task sentence representations s_sen / s_sar (1×D_t each)
        let (s_sen, s_sar) = if v.has_attention() {
            let gru_out = gru_forward(&mut tape, x, mask, &gru_nodes)?;
            let h = tape.stack_rows(&gru_out.rows)?;
            let att = a.att.as_ref().unwrap();
            let w_att = leaf(&mut tape, att.w_att)?;
            let w_alpha = leaf(&mut tape, att.w_alpha)?;
            let task = |tape: &mut Tape, p: &(ParamId, ParamId)| -> Result<(NodeId, NodeId)> {
                let w = set.leaf(tape, p.0)?;
                let b = set.leaf(tape, p.1)?;
                let h_task = task_projection(tape, h, w, b)?;
                let out = attention(tape, h_task, mask, w_att, w_alpha)?;
                Ok((out.s, out.alpha))
            };
            let (s_sen, al_sen) = task(&mut tape, a.proj_sen.as_ref().unwrap())?;
            let (s_sar, al_sar) = task(&mut tape, a.proj_sar.as_ref().unwrap())?;
            alpha_sen = Some(al_sen);
            alpha_sar = Some(al_sar);
            (Some(s_sen), Some(s_sar))
        } else {
            // final output of the (task) GRU -> task projection
            let project =
                |tape: &mut Tape, last: NodeId, p: &(ParamId, ParamId)| -> Result<NodeId> {
                    let w = set.leaf(tape, p.0)?;
                    let b = set.leaf(tape, p.1)?;
                    task_projection(tape, last, w, b)
                };
            let shared_last = gru_forward(&mut tape, x, mask, &gru_nodes)?.last;
            let s_sen = match &a.proj_sen {
                Some(p) => Some(project(&mut tape, shared_last, p)?),
                None => None,
            };
            let s_sar = match &a.proj_sar {
                Some(p) => {
                    let last = match &a.gru_sar {
                        Some(g2) => {
                            let nodes = g2.leaves(set, &mut tape)?;
                            gru_forward(&mut tape, x, mask, &nodes)?.last
                        }
                        None => shared_last,
                    };
                    Some(project(&mut tape, last, p)?)
                }
                None => None,
            };
            (s_sen, s_sar)
        };

        let sen = match (&a.head_sen, s_sen) {
            (Some(hp), Some(s)) => {
                let w = leaf(&mut tape, hp.w)?;
                let b = leaf(&mut tape, hp.b)?;
                Some(classify(&mut tape, s, w, b)?)
            }
            _ => None,
        };

        let sar = match (&a.head_sar, s_sar) {
            (Some(hp), Some(s)) => {
                let input = if let Some(ntn) = &a.ntn {
                    let t = leaf(&mut tape, ntn.t)?;
                    let wn = leaf(&mut tape, ntn.w)?;
                    let bn = leaf(&mut tape, ntn.b)?;
                    let fused = ntn_fuse(&mut tape, s, s_sen.expect("fusion needs both tasks"), t, wn, bn)?;
                    let d_t = self.config.d_t;
                    let d_ntn = self.config.d_ntn;
                    let sv = tape.reshape(s, vec![d_t])?;
                    let fv = tape.reshape(fused, vec![d_ntn])?;
                    let cat = tape.concat(sv, fv)?;
                    tape.reshape(cat, vec![1, d_t + d_ntn])?
                } else {
                    s
                };
                let w = leaf(&mut tape, hp.w)?;
                let b = leaf(&mut tape, hp.b)?;
                Some(classify(&mut tape, input, w, b)?)
            }
            _ => None,
        };

        Ok(ForwardPass { tape, sen, sar, alpha_sen, alpha_sar })
    }

    /// Tokenize-free prediction: embed, pad, run forward, detach outputs.
    pub fn forward(&self, tokens: &[String], table: &EmbeddingTable) -> Result<ModelOutput> {
        if table.dim() != self.config.d_g {
            return Err(Error::DimMismatch {
                op: "forward",
                lhs: vec![table.dim()],
                rhs: vec![self.config.d_g],
            });
        }
        let (x, mask) = embed_and_pad(tokens, table, self.config.l)?;
        let pass = self.forward_pass(&x, &mask)?;
        let tape = &pass.tape;
        let take = |c: &Option<Classification>| {
            c.as_ref().map(|c| (tape.values(c.probs).to_vec(), c.label))
        };
        let (probs_sen, label_sen) = match take(&pass.sen) {
            Some((p, l)) => (Some(p), Some(l)),
            None => (None, None),
        };
        let (probs_sar, label_sar) = match take(&pass.sar) {
            Some((p, l)) => (Some(p), Some(l)),
            None => (None, None),
        };
        Ok(ModelOutput {
            probs_sen,
            probs_sar,
            label_sen,
            label_sar,
            alpha_sen: pass.alpha_sen.map(|id| tape.values(id).to_vec()),
            alpha_sar: pass.alpha_sar.map(|id| tape.values(id).to_vec()),
        })
    }
}

/// Force the sentiment label negative whenever the sarcasm classifier fires.
/// Labels: sentiment 0=negative 1=positive; sarcasm 1=sarcastic.
pub fn coerce(sentiment_label: usize, sarcasm_label: usize) -> usize {
    if sarcasm_label == 1 {
        0
    } else {
        sentiment_label
    }
}
