//! Neural building blocks: embedding lookup with padding, GRU encoder,
//! task projections, attention network, neural tensor network fusion, and
//! softmax classification heads.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamSet};
use crate::rng::Rng;
use crate::tensor::{argmax, NodeId, Tape, Tensor};

/// Frozen pretrained word-embedding table. Rows are never part of θ, so the
/// optimizer cannot touch them.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    vocab: BTreeMap<String, usize>,
    matrix: Vec<f64>,
    dim: usize,
}

impl EmbeddingTable {
    pub fn new(entries: Vec<(String, Vec<f64>)>, dim: usize) -> Result<Self> {
        let mut vocab = BTreeMap::new();
        let mut matrix = Vec::with_capacity(entries.len() * dim);
        for (i, (token, row)) in entries.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimMismatch {
                    op: "EmbeddingTable::new",
                    lhs: vec![row.len()],
                    rhs: vec![dim],
                });
            }
            if vocab.insert(token, i).is_some() {
                return Err(Error::Input(format!("duplicate token at row {i}")));
            }
            matrix.extend_from_slice(&row);
        }
        Ok(EmbeddingTable { vocab, matrix, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn row(&self, token: &str) -> Option<&[f64]> {
        self.vocab.get(token).map(|&i| &self.matrix[i * self.dim..(i + 1) * self.dim])
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vocab.contains_key(token)
    }

    /// Tokens in sorted order, with their rows. Used for vocabulary hashing.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vocab
            .iter()
            .map(move |(t, &i)| (t.as_str(), &self.matrix[i * self.dim..(i + 1) * self.dim]))
    }
}

/// Look up and pad a sentence to L rows. OOV tokens map to the zero vector;
/// padded rows are null vectors and the mask is true exactly on real tokens.
pub fn embed_and_pad(
    tokens: &[String],
    table: &EmbeddingTable,
    l: usize,
) -> Result<(Tensor, Vec<bool>)> {
    if tokens.is_empty() {
        return Err(Error::Input("embed_and_pad: empty token list".into()));
    }
    if tokens.len() > l {
        return Err(Error::Input(format!(
            "embed_and_pad: sentence length {} exceeds padded length {l}",
            tokens.len()
        )));
    }
    let d = table.dim();
    let mut values = vec![0.0; l * d];
    let mut mask = vec![false; l];
    for (i, token) in tokens.iter().enumerate() {
        if let Some(row) = table.row(token) {
            values[i * d..(i + 1) * d].copy_from_slice(row);
        }
        mask[i] = true;
    }
    Ok((Tensor::new(vec![l, d], values)?, mask))
}

// ── GRU encoder ──────────────────────────────────────────────────────

/// Parameter handles of one GRU: input weights W, recurrent weights U, and
/// per-gate biases for the update (z), reset (r), and candidate (h) gates.
#[derive(Debug, Clone)]
pub struct GruParams {
    pub wz: ParamId,
    pub wr: ParamId,
    pub wh: ParamId,
    pub uz: ParamId,
    pub ur: ParamId,
    pub uh: ParamId,
    pub bz: ParamId,
    pub br: ParamId,
    pub bh: ParamId,
}

impl GruParams {
    pub fn init(set: &mut ParamSet, prefix: &str, d_g: usize, d_gru: usize, rng: &mut Rng) -> Self {
        let w = |set: &mut ParamSet, rng: &mut Rng, n: &str| {
            let v = rng.xavier(d_g, d_gru, d_g * d_gru);
            set.register(format!("{prefix}.{n}"), vec![d_g, d_gru], v)
        };
        let u = |set: &mut ParamSet, rng: &mut Rng, n: &str| {
            let v = rng.xavier(d_gru, d_gru, d_gru * d_gru);
            set.register(format!("{prefix}.{n}"), vec![d_gru, d_gru], v)
        };
        let b = |set: &mut ParamSet, n: &str| {
            set.register(format!("{prefix}.{n}"), vec![d_gru], vec![0.0; d_gru])
        };
        GruParams {
            wz: w(set, rng, "wz"),
            wr: w(set, rng, "wr"),
            wh: w(set, rng, "wh"),
            uz: u(set, rng, "uz"),
            ur: u(set, rng, "ur"),
            uh: u(set, rng, "uh"),
            bz: b(set, "bz"),
            br: b(set, "br"),
            bh: b(set, "bh"),
        }
    }

    pub fn leaves(&self, set: &ParamSet, tape: &mut Tape) -> Result<GruNodes> {
        Ok(GruNodes {
            wz: set.leaf(tape, self.wz)?,
            wr: set.leaf(tape, self.wr)?,
            wh: set.leaf(tape, self.wh)?,
            uz: set.leaf(tape, self.uz)?,
            ur: set.leaf(tape, self.ur)?,
            uh: set.leaf(tape, self.uh)?,
            bz: set.leaf(tape, self.bz)?,
            br: set.leaf(tape, self.br)?,
            bh: set.leaf(tape, self.bh)?,
        })
    }
}

/// Tape nodes of one GRU's parameters within a single forward pass.
pub struct GruNodes {
    pub wz: NodeId,
    pub wr: NodeId,
    pub wh: NodeId,
    pub uz: NodeId,
    pub ur: NodeId,
    pub uh: NodeId,
    pub bz: NodeId,
    pub br: NodeId,
    pub bh: NodeId,
}

pub struct GruOutput {
    /// One 1×D_gru node per timestep; padded steps are zero rows.
    pub rows: Vec<NodeId>,
    /// Hidden state at the last unmasked timestep.
    pub last: NodeId,
}

/// Run the GRU recurrence over a padded L×D_g input. Padded steps carry the
/// previous hidden state forward unchanged and emit zero rows.
pub fn gru_forward(tape: &mut Tape, x: &Tensor, mask: &[bool], g: &GruNodes) -> Result<GruOutput> {
    if x.shape.len() != 2 || mask.len() != x.shape[0] {
        return Err(Error::DimMismatch {
            op: "gru_forward",
            lhs: x.shape.clone(),
            rhs: vec![mask.len()],
        });
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::Input("gru_forward: fully masked input".into()));
    }
    let (l, d_g) = (x.shape[0], x.shape[1]);
    let d_gru = tape.shape(g.uz)[0];
    let zero_row = tape.constant(Tensor::zeros(vec![1, d_gru]))?;
    let mut h = zero_row;
    let mut rows = Vec::with_capacity(l);
    let mut last = zero_row;
    for (t, &live) in mask.iter().enumerate().take(l) {
        if !live {
            rows.push(zero_row);
            continue;
        }
        let x_t = tape.constant(Tensor::new(
            vec![1, d_g],
            x.values[t * d_g..(t + 1) * d_g].to_vec(),
        )?)?;
        let z = gate(tape, x_t, g.wz, h, g.uz, g.bz)?;
        let z = tape.sigmoid(z)?;
        let r = gate(tape, x_t, g.wr, h, g.ur, g.br)?;
        let r = tape.sigmoid(r)?;
        let rh = tape.mul(r, h)?;
        let xw = tape.matmul(x_t, g.wh)?;
        let hu = tape.matmul(rh, g.uh)?;
        let pre = tape.add(xw, hu)?;
        let pre = tape.add_row(pre, g.bh)?;
        let h_tilde = tape.tanh(pre)?;
        // h_t = (1 - z) ⊙ h_{t-1} + z ⊙ h̃ = h_{t-1} + z ⊙ (h̃ - h_{t-1})
        let neg_h = tape.scale(h, -1.0)?;
        let delta = tape.add(h_tilde, neg_h)?;
        let step = tape.mul(z, delta)?;
        h = tape.add(h, step)?;
        rows.push(h);
        last = h;
    }
    Ok(GruOutput { rows, last })
}

fn gate(
    tape: &mut Tape,
    x_t: NodeId,
    w: NodeId,
    h: NodeId,
    u: NodeId,
    b: NodeId,
) -> Result<NodeId> {
    let xw = tape.matmul(x_t, w)?;
    let hu = tape.matmul(h, u)?;
    let s = tape.add(xw, hu)?;
    tape.add_row(s, b)
}

// ── task projection ──────────────────────────────────────────────────

/// H_task = ReLU(H·W_task + b_task), bias broadcast across rows.
pub fn task_projection(tape: &mut Tape, h: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
    let hw = tape.matmul(h, w)?;
    let pre = tape.add_row(hw, b)?;
    tape.relu(pre)
}

// ── attention network ────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct AttentionParams {
    pub w_att: ParamId,
    pub w_alpha: ParamId,
}

impl AttentionParams {
    pub fn init(set: &mut ParamSet, prefix: &str, d_t: usize, l: usize, rng: &mut Rng) -> Self {
        let w_att = set.register(
            format!("{prefix}.w_att"),
            vec![d_t, 1],
            rng.xavier(d_t, 1, d_t),
        );
        let w_alpha =
            set.register(format!("{prefix}.w_alpha"), vec![l, l], rng.xavier(l, l, l * l));
        AttentionParams { w_att, w_alpha }
    }
}

pub struct AttentionOutput {
    /// 1×D_t sentence representation.
    pub s: NodeId,
    /// 1×L attention weights; exactly zero on padded positions.
    pub alpha: NodeId,
}

/// P = tanh(H_task·W_att); α = masked softmax(Pᵀ·W_alpha); s = α·H_task.
///
/// Padded rows of H_task are zeroed first. W_alpha mixes P across positions,
/// so without this the bias picked up by padded rows (ReLU of the projection
/// bias over a null vector) would shift the logits of real tokens.
pub fn attention(
    tape: &mut Tape,
    h_task: NodeId,
    mask: &[bool],
    w_att: NodeId,
    w_alpha: NodeId,
) -> Result<AttentionOutput> {
    let shape = tape.shape(h_task).to_vec();
    if shape.len() != 2 || shape[0] != mask.len() {
        return Err(Error::DimMismatch {
            op: "attention",
            lhs: shape,
            rhs: vec![mask.len()],
        });
    }
    let d_t = shape[1];
    let h_task = if mask.iter().all(|&m| m) {
        h_task
    } else {
        let mut keep = vec![0.0; mask.len() * d_t];
        for (i, &m) in mask.iter().enumerate() {
            if m {
                keep[i * d_t..(i + 1) * d_t].fill(1.0);
            }
        }
        let keep = tape.constant(Tensor::new(shape, keep)?)?;
        tape.mul(h_task, keep)?
    };
    let p = tape.matmul(h_task, w_att)?;
    let p = tape.tanh(p)?;
    let pt = tape.transpose(p)?;
    let logits = tape.matmul(pt, w_alpha)?;
    let alpha = tape.masked_softmax(logits, mask)?;
    let s = tape.matmul(alpha, h_task)?;
    Ok(AttentionOutput { s, alpha })
}

// ── neural tensor network ────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct NtnParams {
    pub t: ParamId,
    pub w: ParamId,
    pub b: ParamId,
}

impl NtnParams {
    pub fn init(set: &mut ParamSet, prefix: &str, d_t: usize, d_ntn: usize, rng: &mut Rng) -> Self {
        let t = set.register(
            format!("{prefix}.t"),
            vec![d_ntn, d_t, d_t],
            rng.xavier(d_t, d_t, d_ntn * d_t * d_t),
        );
        let w = set.register(
            format!("{prefix}.w"),
            vec![2 * d_t, d_ntn],
            rng.xavier(2 * d_t, d_ntn, 2 * d_t * d_ntn),
        );
        let b = set.register(format!("{prefix}.b"), vec![d_ntn], vec![0.0; d_ntn]);
        NtnParams { t, w, b }
    }
}

/// s_+ = tanh(s_sar·T·s_senᵀ + (s_sar ⊕ s_sen)·W + b), producing 1×D_ntn.
pub fn ntn_fuse(
    tape: &mut Tape,
    s_sar: NodeId,
    s_sen: NodeId,
    t: NodeId,
    w: NodeId,
    b: NodeId,
) -> Result<NodeId> {
    let d = tape.values(s_sar).len();
    let k = tape.shape(t)[0];
    let u = tape.reshape(s_sar, vec![d])?;
    let v = tape.reshape(s_sen, vec![d])?;
    let bi = tape.bilinear(u, t, v)?;
    let bi = tape.reshape(bi, vec![1, k])?;
    let cat = tape.concat(u, v)?;
    let cat = tape.reshape(cat, vec![1, 2 * d])?;
    let lin = tape.matmul(cat, w)?;
    let pre = tape.add(bi, lin)?;
    let pre = tape.add_row(pre, b)?;
    tape.tanh(pre)
}

// ── classification heads ─────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct HeadParams {
    pub w: ParamId,
    pub b: ParamId,
}

impl HeadParams {
    pub fn init(set: &mut ParamSet, prefix: &str, d_in: usize, c: usize, rng: &mut Rng) -> Self {
        let w = set.register(format!("{prefix}.w"), vec![d_in, c], rng.xavier(d_in, c, d_in * c));
        let b = set.register(format!("{prefix}.b"), vec![c], vec![0.0; c]);
        HeadParams { w, b }
    }
}

pub struct Classification {
    /// 1×C pre-softmax scores; the loss is computed from these.
    pub logits: NodeId,
    /// 1×C probabilities.
    pub probs: NodeId,
    /// Argmax class, ties broken toward index 0.
    pub label: usize,
}

/// probs = softmax(s·W + b); label = argmax with lowest-index tie-breaking.
pub fn classify(tape: &mut Tape, s: NodeId, w: NodeId, b: NodeId) -> Result<Classification> {
    let sw = tape.matmul(s, w)?;
    let logits = tape.add_row(sw, b)?;
    let probs = tape.softmax(logits)?;
    let label = argmax(tape.values(probs));
    Ok(Classification { logits, probs, label })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn toy_table() -> EmbeddingTable {
        EmbeddingTable::new(
            vec![
                ("w1".to_string(), vec![1.0, 2.0]),
                ("w2".to_string(), vec![-1.0, 0.5]),
            ],
            2,
        )
        .unwrap()
    }

    fn toks(ts: &[&str]) -> Vec<String> {
        ts.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn embed_and_pad_basic() {
        let table = toy_table();
        let (x, mask) = embed_and_pad(&toks(&["w1"]), &table, 3).unwrap();
        assert_eq!(x.shape, vec![3, 2]);
        assert_eq!(&x.values[..2], &[1.0, 2.0]);
        assert_eq!(&x.values[2..], &[0.0; 4]);
        assert_eq!(mask, vec![true, false, false]);
    }

    #[test]
    fn embed_and_pad_oov_is_zero_row_with_mask() {
        let table = toy_table();
        let (x, mask) = embed_and_pad(&toks(&["unknown", "alsounknown"]), &table, 2).unwrap();
        assert!(x.values.iter().all(|&v| v == 0.0));
        assert_eq!(mask, vec![true, true]);
    }

    #[test]
    fn embed_and_pad_rejects_empty_and_overlong() {
        let table = toy_table();
        assert!(matches!(embed_and_pad(&[], &table, 3), Err(Error::Input(_))));
        assert!(matches!(
            embed_and_pad(&toks(&["w1", "w2", "w1", "w2"]), &table, 3),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn gru_zero_parameters_give_zero_output() {
        let (d_g, d_gru, l) = (2, 3, 2);
        let mut set = ParamSet::new();
        let mut rng = Rng::seed_from(1);
        let gp = GruParams::init(&mut set, "gru", d_g, d_gru, &mut rng);
        let ids: Vec<ParamId> = set.iter().map(|(id, _)| id).collect();
        for id in ids {
            set.get_mut(id).values.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut tape = Tape::new();
        let nodes = gp.leaves(&set, &mut tape).unwrap();
        let x = Tensor::new(vec![l, d_g], vec![0.3, -0.4, 1.0, 0.2]).unwrap();
        let out = gru_forward(&mut tape, &x, &[true, true], &nodes).unwrap();
        for row in out.rows {
            assert!(tape.values(row).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn gru_single_token_matches_cell_oracle() {
        let (d_g, d_gru) = (2, 3);
        let mut set = ParamSet::new();
        let mut rng = Rng::seed_from(5);
        let gp = GruParams::init(&mut set, "gru", d_g, d_gru, &mut rng);
        let x = Tensor::new(vec![1, d_g], vec![0.4, -0.7]).unwrap();
        let mut tape = Tape::new();
        let nodes = gp.leaves(&set, &mut tape).unwrap();
        let out = gru_forward(&mut tape, &x, &[true], &nodes).unwrap();
        let expected = gru_cell_oracle(&set, &gp, &[&x.values], d_g, d_gru);
        for (a, b) in tape.values(out.last).iter().zip(&expected[0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gru_three_tokens_match_step_oracle() {
        let (d_g, d_gru) = (3, 4);
        let mut set = ParamSet::new();
        let mut rng = Rng::seed_from(9);
        let gp = GruParams::init(&mut set, "gru", d_g, d_gru, &mut rng);
        let xv: Vec<f64> = (0..9).map(|i| ((i * 7 % 11) as f64 / 11.0) - 0.5).collect();
        let x = Tensor::new(vec![3, d_g], xv.clone()).unwrap();
        let mut tape = Tape::new();
        let nodes = gp.leaves(&set, &mut tape).unwrap();
        let out = gru_forward(&mut tape, &x, &[true, true, true], &nodes).unwrap();
        let steps: Vec<&[f64]> = xv.chunks(d_g).collect();
        let expected = gru_cell_oracle(&set, &gp, &steps, d_g, d_gru);
        for (t, row) in out.rows.iter().enumerate() {
            for (a, b) in tape.values(*row).iter().zip(&expected[t]) {
                assert!((a - b).abs() < 1e-12, "step {t}");
            }
        }
    }

    #[test]
    fn gru_output_independent_of_padded_suffix() {
        let (d_g, d_gru) = (2, 3);
        let mut set = ParamSet::new();
        let mut rng = Rng::seed_from(11);
        let gp = GruParams::init(&mut set, "gru", d_g, d_gru, &mut rng);
        let mask = [true, true, false];
        let a = Tensor::new(vec![3, d_g], vec![0.1, 0.2, -0.3, 0.4, 0.0, 0.0]).unwrap();
        let b = Tensor::new(vec![3, d_g], vec![0.1, 0.2, -0.3, 0.4, 9.0, -9.0]).unwrap();
        let mut tape_a = Tape::new();
        let nodes_a = gp.leaves(&set, &mut tape_a).unwrap();
        let out_a = gru_forward(&mut tape_a, &a, &mask, &nodes_a).unwrap();
        let mut tape_b = Tape::new();
        let nodes_b = gp.leaves(&set, &mut tape_b).unwrap();
        let out_b = gru_forward(&mut tape_b, &b, &mask, &nodes_b).unwrap();
        assert_eq!(tape_a.values(out_a.last), tape_b.values(out_b.last));
        for t in 0..2 {
            assert_eq!(tape_a.values(out_a.rows[t]), tape_b.values(out_b.rows[t]));
        }
        // padded rows are zero regardless
        assert!(tape_b.values(out_b.rows[2]).iter().all(|&v| v == 0.0));
    }

    /// Independent step-by-step GRU cell, plain loops only.
    fn gru_cell_oracle(
        set: &ParamSet,
        gp: &GruParams,
        steps: &[&[f64]],
        d_g: usize,
        d_gru: usize,
    ) -> Vec<Vec<f64>> {
        let g = |id: ParamId| set.get(id).values.clone();
        let (wz, wr, wh) = (g(gp.wz), g(gp.wr), g(gp.wh));
        let (uz, ur, uh) = (g(gp.uz), g(gp.ur), g(gp.uh));
        let (bz, br, bh) = (g(gp.bz), g(gp.br), g(gp.bh));
        let mv = |x: &[f64], w: &[f64], rows: usize| -> Vec<f64> {
            let mut out = vec![0.0; d_gru];
            for j in 0..d_gru {
                for i in 0..rows {
                    out[j] += x[i] * w[i * d_gru + j];
                }
            }
            out
        };
        let sigm = |x: f64| 1.0 / (1.0 + libm::exp(-x));
        let mut h = vec![0.0; d_gru];
        let mut out = Vec::new();
        for x_t in steps {
            let xz = mv(x_t, &wz, d_g);
            let hz = mv(&h, &uz, d_gru);
            let z: Vec<f64> = (0..d_gru).map(|j| sigm(xz[j] + hz[j] + bz[j])).collect();
            let xr = mv(x_t, &wr, d_g);
            let hr = mv(&h, &ur, d_gru);
            let r: Vec<f64> = (0..d_gru).map(|j| sigm(xr[j] + hr[j] + br[j])).collect();
            let rh: Vec<f64> = (0..d_gru).map(|j| r[j] * h[j]).collect();
            let xh = mv(x_t, &wh, d_g);
            let hh = mv(&rh, &uh, d_gru);
            let cand: Vec<f64> =
                (0..d_gru).map(|j| libm::tanh(xh[j] + hh[j] + bh[j])).collect();
            h = (0..d_gru).map(|j| (1.0 - z[j]) * h[j] + z[j] * cand[j]).collect();
            out.push(h.clone());
        }
        out
    }

    #[test]
    fn projection_zero_weights_give_zero() {
        let mut set = ParamSet::new();
        let w = set.register("w", vec![3, 2], vec![0.0; 6]);
        let b = set.register("b", vec![2], vec![0.0; 2]);
        let mut tape = Tape::new();
        let wn = set.leaf(&mut tape, w).unwrap();
        let bn = set.leaf(&mut tape, b).unwrap();
        let h = tape
            .constant(Tensor::new(vec![2, 3], vec![0.5, 1.0, -0.5, 2.0, 0.1, 0.2]).unwrap())
            .unwrap();
        let out = task_projection(&mut tape, h, wn, bn).unwrap();
        assert!(tape.values(out).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn projection_identity_on_nonnegative_input() {
        let mut set = ParamSet::new();
        let w = set.register("w", vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let b = set.register("b", vec![2], vec![0.0; 2]);
        let mut tape = Tape::new();
        let wn = set.leaf(&mut tape, w).unwrap();
        let bn = set.leaf(&mut tape, b).unwrap();
        let h = tape
            .constant(Tensor::new(vec![2, 2], vec![0.5, 0.0, 2.0, 0.1]).unwrap())
            .unwrap();
        let out = task_projection(&mut tape, h, wn, bn).unwrap();
        assert_eq!(tape.values(out), &[0.5, 0.0, 2.0, 0.1]);
    }

    #[test]
    fn attention_degenerate_single_token() {
        let (d_t, l) = (3, 4);
        let mut set = ParamSet::new();
        let mut rng = Rng::seed_from(3);
        let ap = AttentionParams::init(&mut set, "att", d_t, l, &mut rng);
        let mut tape = Tape::new();
        let w_att = set.leaf(&mut tape, ap.w_att).unwrap();
        let w_alpha = set.leaf(&mut tape, ap.w_alpha).unwrap();
        let mut hv = vec![0.0; l * d_t];
        hv[..d_t].copy_from_slice(&[0.7, -0.2, 0.4]);
        let h = tape.constant(Tensor::new(vec![l, d_t], hv).unwrap()).unwrap();
        let mask = [true, false, false, false];
        let out = attention(&mut tape, h, &mask, w_att, w_alpha).unwrap();
        let alpha = tape.values(out.alpha);
        assert!((alpha[0] - 1.0).abs() < 1e-12);
        assert_eq!(&alpha[1..], &[0.0, 0.0, 0.0]);
        for (s, expected) in tape.values(out.s).iter().zip(&[0.7, -0.2, 0.4]) {
            assert!((s - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_uniform_when_rows_identical_and_w_alpha_identity() {
        let (d_t, l) = (2, 3);
        let mut set = ParamSet::new();
        let mut rng = Rng::seed_from(4);
        let ap = AttentionParams::init(&mut set, "att", d_t, l, &mut rng);
        let eye: Vec<f64> =
            (0..l * l).map(|i| if i / l == i % l { 1.0 } else { 0.0 }).collect();
        set.get_mut(ap.w_alpha).values = eye;
        let mut tape = Tape::new();
        let w_att = set.leaf(&mut tape, ap.w_att).unwrap();
        let w_alpha = set.leaf(&mut tape, ap.w_alpha).unwrap();
        let h = tape
            .constant(Tensor::new(vec![l, d_t], vec![0.3, -0.5, 0.3, -0.5, 0.3, -0.5]).unwrap())
            .unwrap();
        let out = attention(&mut tape, h, &[true, true, true], w_att, w_alpha).unwrap();
        for &a in tape.values(out.alpha) {
            assert!((a - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_weighted_sum_matches_explicit_loop() {
        let (d_t, l) = (3, 4);
        let mut set = ParamSet::new();
        let mut rng = Rng::seed_from(6);
        let ap = AttentionParams::init(&mut set, "att", d_t, l, &mut rng);
        let mut tape = Tape::new();
        let w_att = set.leaf(&mut tape, ap.w_att).unwrap();
        let w_alpha = set.leaf(&mut tape, ap.w_alpha).unwrap();
        let hv: Vec<f64> = (0..l * d_t).map(|i| ((i * 13 % 17) as f64 / 17.0) - 0.5).collect();
        let h = tape.constant(Tensor::new(vec![l, d_t], hv.clone()).unwrap()).unwrap();
        let mask = [true, true, true, false];
        let out = attention(&mut tape, h, &mask, w_att, w_alpha).unwrap();
        let alpha = tape.values(out.alpha).to_vec();
        let mut expected = vec![0.0; d_t];
        for i in 0..l {
            for j in 0..d_t {
                expected[j] += alpha[i] * hv[i * d_t + j];
            }
        }
        for (s, e) in tape.values(out.s).iter().zip(&expected) {
            assert!((s - e).abs() < 1e-12);
        }
        let total: f64 = alpha.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ntn_zero_params_give_zero() {
        let (d_t, d_ntn) = (3, 2);
        let mut set = ParamSet::new();
        let t = set.register("t", vec![d_ntn, d_t, d_t], vec![0.0; d_ntn * d_t * d_t]);
        let w = set.register("w", vec![2 * d_t, d_ntn], vec![0.0; 2 * d_t * d_ntn]);
        let b = set.register("b", vec![d_ntn], vec![0.0; d_ntn]);
        let mut tape = Tape::new();
        let (tn, wn, bn) = (
            set.leaf(&mut tape, t).unwrap(),
            set.leaf(&mut tape, w).unwrap(),
            set.leaf(&mut tape, b).unwrap(),
        );
        let s_sar = tape
            .constant(Tensor::new(vec![1, d_t], vec![0.5, -0.5, 1.0]).unwrap())
            .unwrap();
        let s_sen = tape
            .constant(Tensor::new(vec![1, d_t], vec![0.1, 0.9, -0.3]).unwrap())
            .unwrap();
        let out = ntn_fuse(&mut tape, s_sar, s_sen, tn, wn, bn).unwrap();
        assert_eq!(tape.values(out), &[0.0, 0.0]);
    }

    #[test]
    fn ntn_with_zero_tensor_is_tanh_dense_layer() {
        let (d_t, d_ntn) = (4, 2);
        let mut set = ParamSet::new();
        let mut rng = Rng::seed_from(8);
        let np = NtnParams::init(&mut set, "ntn", d_t, d_ntn, &mut rng);
        set.get_mut(np.t).values.iter_mut().for_each(|v| *v = 0.0);
        set.get_mut(np.b).values.copy_from_slice(&[0.2, -0.1]);
        let sar = [0.5, -0.5, 1.0, 0.25];
        let sen = [0.1, 0.9, -0.3, 0.0];
        let mut tape = Tape::new();
        let (tn, wn, bn) = (
            set.leaf(&mut tape, np.t).unwrap(),
            set.leaf(&mut tape, np.w).unwrap(),
            set.leaf(&mut tape, np.b).unwrap(),
        );
        let s_sar = tape.constant(Tensor::new(vec![1, d_t], sar.to_vec()).unwrap()).unwrap();
        let s_sen = tape.constant(Tensor::new(vec![1, d_t], sen.to_vec()).unwrap()).unwrap();
        let out = ntn_fuse(&mut tape, s_sar, s_sen, tn, wn, bn).unwrap();

        // dense-layer oracle over the concatenation
        let wv = &set.get(np.w).values;
        let bv = &set.get(np.b).values;
        let cat: Vec<f64> = sar.iter().chain(&sen).cloned().collect();
        for i in 0..d_ntn {
            let mut acc = bv[i];
            for (j, c) in cat.iter().enumerate() {
                acc += c * wv[j * d_ntn + i];
            }
            let expected = libm::tanh(acc);
            assert!((tape.values(out)[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn ntn_full_small_case_matches_brute_force() {
        let (d_t, d_ntn) = (4, 2);
        let mut set = ParamSet::new();
        let mut rng = Rng::seed_from(13);
        let np = NtnParams::init(&mut set, "ntn", d_t, d_ntn, &mut rng);
        let sar: Vec<f64> = (0..d_t).map(|i| (i as f64 * 0.31) - 0.4).collect();
        let sen: Vec<f64> = (0..d_t).map(|i| 0.7 - (i as f64 * 0.22)).collect();
        let mut tape = Tape::new();
        let (tn, wn, bn) = (
            set.leaf(&mut tape, np.t).unwrap(),
            set.leaf(&mut tape, np.w).unwrap(),
            set.leaf(&mut tape, np.b).unwrap(),
        );
        let s_sar = tape.constant(Tensor::new(vec![1, d_t], sar.clone()).unwrap()).unwrap();
        let s_sen = tape.constant(Tensor::new(vec![1, d_t], sen.clone()).unwrap()).unwrap();
        let out = ntn_fuse(&mut tape, s_sar, s_sen, tn, wn, bn).unwrap();

        let tv = &set.get(np.t).values;
        let wv = &set.get(np.w).values;
        let bv = &set.get(np.b).values;
        for i in 0..d_ntn {
            let mut acc = bv[i];
            for a in 0..d_t {
                for b2 in 0..d_t {
                    acc += sar[a] * tv[i * d_t * d_t + a * d_t + b2] * sen[b2];
                }
            }
            for (j, c) in sar.iter().chain(&sen).enumerate() {
                acc += c * wv[j * d_ntn + i];
            }
            assert!((tape.values(out)[i] - libm::tanh(acc)).abs() < 1e-12);
        }
    }

    #[test]
    fn classify_zero_weights_tie_to_class_zero() {
        let mut set = ParamSet::new();
        let w = set.register("w", vec![3, 2], vec![0.0; 6]);
        let b = set.register("b", vec![2], vec![0.0; 2]);
        let mut tape = Tape::new();
        let (wn, bn) = (set.leaf(&mut tape, w).unwrap(), set.leaf(&mut tape, b).unwrap());
        let s = tape
            .constant(Tensor::new(vec![1, 3], vec![0.1, 0.2, 0.3]).unwrap())
            .unwrap();
        let c = classify(&mut tape, s, wn, bn).unwrap();
        assert_eq!(tape.values(c.probs), &[0.5, 0.5]);
        assert_eq!(c.label, 0);
    }

    #[test]
    fn classify_bias_ten_is_near_certain() {
        let mut set = ParamSet::new();
        let w = set.register("w", vec![3, 2], vec![0.0; 6]);
        let b = set.register("b", vec![2], vec![0.0, 10.0]);
        let mut tape = Tape::new();
        let (wn, bn) = (set.leaf(&mut tape, w).unwrap(), set.leaf(&mut tape, b).unwrap());
        let s = tape
            .constant(Tensor::new(vec![1, 3], vec![0.1, 0.2, 0.3]).unwrap())
            .unwrap();
        let c = classify(&mut tape, s, wn, bn).unwrap();
        assert_eq!(c.label, 1);
        assert!((tape.values(c.probs)[1] - 0.9999546021312976).abs() < 1e-9);
    }
}
