//! Relation-aware multi-head attention and the stacked character encoder.
//!
//! The score between characters `i` and `j` adds a forward relation vector
//! to the query side and a backward relation vector to the key side:
//!
//! ```text
//! s_ij = (x_i + r_fwd) W_qᵀ W_k (x_j + r_bwd)
//!      = x_i W_qᵀ W_k x_j          content
//!      + x_i W_qᵀ W_k r_bwd        forward relation bias
//!      + r_fwd W_qᵀ W_k x_j        backward relation bias
//!      + r_fwd W_qᵀ W_k r_bwd      universal relation bias
//! ```
//!
//! With all relation vectors zero this is ordinary scaled dot-product
//! attention, and the batched layer reproduces the plain encoder bit for bit.

mod dump;
mod layer;
mod params;
mod score;

pub use dump::attention_csv;
pub use layer::{
    encoder_block, encoder_forward, graph_attention_layer, position_signal, EncoderOutput, HeadTrace, RelationInput,
};
pub use params::{AttentionHeadParams, EncoderBlockParams, EncoderDims, EncoderStackParams};
pub use score::{attention_weights, baseline_score, score_terms, syntax_score, ScoreTerms};
