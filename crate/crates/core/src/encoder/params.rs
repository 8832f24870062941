use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamSet};

/// Dimensions of the character encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderDims {
    pub d_model: usize,
    pub heads: usize,
    pub blocks: usize,
    pub d_ff: usize,
    /// Length of a relation encoding fed to `W_r` (twice the GRU width).
    pub relation_dim: usize,
    pub vocab: usize,
}

impl EncoderDims {
    pub fn d_head(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_model", self.d_model),
            ("heads", self.heads),
            ("d_ff", self.d_ff),
            ("relation_dim", self.relation_dim),
            ("vocab", self.vocab),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.d_model % self.heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        Ok(())
    }
}

/// Per-head projections. `w_q`, `w_k`, `w_v` are `d_head x d_model`; `w_r`
/// maps a relation encoding to `[r_fwd; r_bwd]` and is `2·d_model x relation_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHeadParams {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub w_r: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBlockParams {
    pub heads: Vec<AttentionHeadParams>,
    /// `d_model x d_model` projection applied to the concatenated heads.
    pub w_o: ParamId,
    pub ffn_w1: ParamId,
    pub ffn_b1: ParamId,
    pub ffn_w2: ParamId,
    pub ffn_b2: ParamId,
    pub norm1_gain: ParamId,
    pub norm1_bias: ParamId,
    pub norm2_gain: ParamId,
    pub norm2_bias: ParamId,
}

impl EncoderBlockParams {
    pub fn register<R: Rng + ?Sized>(set: &mut ParamSet, prefix: &str, dims: &EncoderDims, rng: &mut R) -> Result<Self> {
        let (d, dh) = (dims.d_model, dims.d_head());
        let mut heads = Vec::with_capacity(dims.heads);
        for h in 0..dims.heads {
            let p = format!("{prefix}.head{h}");
            heads.push(AttentionHeadParams {
                w_q: set.add_uniform(format!("{p}.w_q"), &[dh, d], rng)?,
                w_k: set.add_uniform(format!("{p}.w_k"), &[dh, d], rng)?,
                w_v: set.add_uniform(format!("{p}.w_v"), &[dh, d], rng)?,
                w_r: set.add_uniform(format!("{p}.w_r"), &[2 * d, dims.relation_dim], rng)?,
            });
        }
        Ok(Self {
            heads,
            w_o: set.add_uniform(format!("{prefix}.attn_out"), &[d, d], rng)?,
            ffn_w1: set.add_uniform(format!("{prefix}.ffn.w1"), &[dims.d_ff, d], rng)?,
            ffn_b1: set.add_zeros(format!("{prefix}.ffn.b1"), &[dims.d_ff])?,
            ffn_w2: set.add_uniform(format!("{prefix}.ffn.w2"), &[d, dims.d_ff], rng)?,
            ffn_b2: set.add_zeros(format!("{prefix}.ffn.b2"), &[d])?,
            norm1_gain: set.add_ones(format!("{prefix}.norm1.gain"), &[d])?,
            norm1_bias: set.add_zeros(format!("{prefix}.norm1.bias"), &[d])?,
            norm2_gain: set.add_ones(format!("{prefix}.norm2.gain"), &[d])?,
            norm2_bias: set.add_zeros(format!("{prefix}.norm2.bias"), &[d])?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStackParams {
    pub dims: EncoderDims,
    /// `vocab x d_model`
    pub char_embedding: ParamId,
    pub blocks: Vec<EncoderBlockParams>,
    pub position_signal: bool,
}

impl EncoderStackParams {
    pub fn register<R: Rng + ?Sized>(
        set: &mut ParamSet,
        dims: EncoderDims,
        position_signal: bool,
        rng: &mut R,
    ) -> Result<Self> {
        dims.validate()?;
        let char_embedding = set.add_uniform("char_embedding", &[dims.vocab, dims.d_model], rng)?;
        let blocks = (0..dims.blocks)
            .map(|b| EncoderBlockParams::register(set, &format!("block{b:02}"), &dims, rng))
            .collect::<Result<_>>()?;
        Ok(Self {
            dims,
            char_embedding,
            blocks,
            position_signal,
        })
    }
}
