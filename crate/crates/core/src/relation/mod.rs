//! Relation encoder: label embeddings run through bi-directional GRUs to
//! turn each relation path into a dense vector.

mod encoder;
mod vocab;

pub use encoder::{
    encode_distinct_batch, encode_pairs_naive, encode_path, encode_paths_on_tape, split_directional,
    RelationEncoderParams, RelationTensor,
};
pub use vocab::{build_label_vocab, LabelVocab, SELF_INDEX, UD_RELATIONS, UNK_INDEX};
