use super::params::{EncoderBlockParams, EncoderStackParams};
use crate::error::{Error, Result};
use crate::graph::PairIndex;
use crate::numerics::{NodeId, ParamSet, Tape, Tensor};

const NORM_EPS: f64 = 1e-6;

/// Relation encodings already recorded on the tape, with the pair layout
/// that maps each ordered character pair to a row of `encodings`.
#[derive(Debug, Clone, Copy)]
pub struct RelationInput<'a> {
    pub encodings: NodeId,
    pub pairs: &'a PairIndex,
}

/// Score and weight matrices (`n x n`) of one head.
#[derive(Debug, Clone, Copy)]
pub struct HeadTrace {
    pub scores: NodeId,
    pub weights: NodeId,
}

/// Output of [`encoder_forward`]: final embeddings and, per block, the
/// traces of each head.
#[derive(Debug, Clone)]
pub struct EncoderOutput {
    pub output: NodeId,
    pub attention: Vec<Vec<HeadTrace>>,
}

/// Sinusoidal absolute position signal, `n x d`.
pub fn position_signal(n: usize, d: usize) -> Tensor {
    let mut data = Vec::with_capacity(n * d);
    for pos in 0..n {
        for k in 0..d {
            let freq = 10000f64.powf((2 * (k / 2)) as f64 / d as f64);
            let angle = pos as f64 / freq;
            data.push(if k % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    Tensor::from_parts(vec![n, d], data)
}

/// Multi-head attention sublayer. With `relations` the score of pair
/// `(i, j)` is `(x_i + r_fwd) W_qᵀ W_k (x_j + r_bwd)`; without, it is the
/// plain content score `x_i W_qᵀ W_k x_j`. Values never see relations.
///
/// Relation terms are projected once per distinct path: since
/// `W_q (x_i + r) = W_q x_i + W_q r`, the per-pair query is the projected
/// character plus the projected relation row gathered by pair index.
pub fn graph_attention_layer(
    tape: &mut Tape,
    set: &ParamSet,
    x: NodeId,
    relations: Option<&RelationInput<'_>>,
    block: &EncoderBlockParams,
) -> Result<(NodeId, Vec<HeadTrace>)> {
    let n = tape.value(x).rows();
    let d_model = tape.value(x).cols();
    let (rows_i, rows_j) = if let Some(rel) = relations {
        if rel.pairs.nodes != n || rel.pairs.index.len() != n * n {
            return Err(Error::Argument(format!(
                "relations cover {} nodes, sequence has {n}",
                rel.pairs.nodes
            )));
        }
        let rows_i: Vec<usize> = (0..n * n).map(|p| p / n).collect();
        let rows_j: Vec<usize> = (0..n * n).map(|p| p % n).collect();
        (rows_i, rows_j)
    } else {
        (Vec::new(), Vec::new())
    };

    let mut head_outputs = Vec::with_capacity(block.heads.len());
    let mut traces = Vec::with_capacity(block.heads.len());
    for head in &block.heads {
        let w_q = tape.param(set, head.w_q);
        let w_k = tape.param(set, head.w_k);
        let w_v = tape.param(set, head.w_v);
        let d_head = tape.value(w_q).rows();

        let xq = tape.matmul_t(x, w_q)?;
        let xk = tape.matmul_t(x, w_k)?;
        let xv = tape.matmul_t(x, w_v)?;

        let scores = match relations {
            None => tape.matmul_t(xq, xk)?,
            Some(rel) => {
                let w_r = tape.param(set, head.w_r);
                let split = tape.matmul_t(rel.encodings, w_r)?;
                let r_fwd = tape.slice_cols(split, 0, d_model)?;
                let r_bwd = tape.slice_cols(split, d_model, 2 * d_model)?;
                let rq = tape.matmul_t(r_fwd, w_q)?;
                let rk = tape.matmul_t(r_bwd, w_k)?;

                let qi = tape.gather_rows(xq, rows_i.clone())?;
                let qr = tape.gather_rows(rq, rel.pairs.index.clone())?;
                let q = tape.add(qi, qr)?;
                let kj = tape.gather_rows(xk, rows_j.clone())?;
                let kr = tape.gather_rows(rk, rel.pairs.index.clone())?;
                let k = tape.add(kj, kr)?;
                let prod = tape.mul(q, k)?;
                let flat = tape.sum_cols(prod);
                tape.reshape(flat, &[n, n])?
            }
        };
        let scaled = tape.scale(scores, 1.0 / (d_head as f64).sqrt());
        let weights = tape.softmax_rows(scaled);
        head_outputs.push(tape.matmul(weights, xv)?);
        traces.push(HeadTrace { scores, weights });
    }
    let concat = tape.concat_cols(head_outputs)?;
    let w_o = tape.param(set, block.w_o);
    Ok((tape.matmul_t(concat, w_o)?, traces))
}

fn norm(tape: &mut Tape, set: &ParamSet, x: NodeId, gain: crate::numerics::ParamId, bias: crate::numerics::ParamId) -> Result<NodeId> {
    let normed = tape.layer_norm_rows(x, NORM_EPS);
    let g = tape.param(set, gain);
    let b = tape.param(set, bias);
    let scaled = tape.mul_row(normed, g)?;
    tape.add_row(scaled, b)
}

/// Attention sublayer then feed-forward sublayer, each followed by a
/// residual add and layer normalisation (post-norm).
pub fn encoder_block(
    tape: &mut Tape,
    set: &ParamSet,
    x: NodeId,
    relations: Option<&RelationInput<'_>>,
    block: &EncoderBlockParams,
) -> Result<(NodeId, Vec<HeadTrace>)> {
    let (attn, traces) = graph_attention_layer(tape, set, x, relations, block)?;
    let res1 = tape.add(x, attn)?;
    let h = norm(tape, set, res1, block.norm1_gain, block.norm1_bias)?;

    let w1 = tape.param(set, block.ffn_w1);
    let b1 = tape.param(set, block.ffn_b1);
    let w2 = tape.param(set, block.ffn_w2);
    let b2 = tape.param(set, block.ffn_b2);
    let inner = tape.matmul_t(h, w1)?;
    let inner = tape.add_row(inner, b1)?;
    let inner = tape.relu(inner);
    let ff = tape.matmul_t(inner, w2)?;
    let ff = tape.add_row(ff, b2)?;

    let res2 = tape.add(h, ff)?;
    Ok((norm(tape, set, res2, block.norm2_gain, block.norm2_bias)?, traces))
}

/// Character embeddings (plus the optional position signal) passed through
/// every block. `relations = None` runs the plain self-attention encoder on
/// the same parameters.
pub fn encoder_forward(
    tape: &mut Tape,
    set: &ParamSet,
    char_ids: &[usize],
    relations: Option<&RelationInput<'_>>,
    stack: &EncoderStackParams,
) -> Result<EncoderOutput> {
    let vocab = stack.dims.vocab;
    if let Some(&bad) = char_ids.iter().find(|&&c| c >= vocab) {
        return Err(Error::Vocabulary(format!("character id {bad} (vocabulary size {vocab})")));
    }
    if char_ids.is_empty() {
        return Err(Error::Argument("empty character sequence".into()));
    }
    let table = tape.param(set, stack.char_embedding);
    let mut x = tape.gather_rows(table, char_ids.to_vec())?;
    if stack.position_signal {
        let pe = tape.constant(position_signal(char_ids.len(), stack.dims.d_model));
        x = tape.add(x, pe)?;
    }
    let mut attention = Vec::with_capacity(stack.blocks.len());
    for block in &stack.blocks {
        let (next, traces) = encoder_block(tape, set, x, relations, block)?;
        x = next;
        attention.push(traces);
    }
    Ok(EncoderOutput { output: x, attention })
}
