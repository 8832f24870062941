//! Syntax-aware graph attention for character encoders.
//!
//! The crate turns dependency parses into character representations whose
//! self-attention is biased by syntactic relations:
//!
//! 1. [`parse`] reads CoNLL-U and aligns characters to words.
//! 2. [`graph`] extends each tree with reverse arcs and self-loops, finds the
//!    relation path between every pair of words and expands it to
//!    character pairs.
//! 3. [`relation`] embeds path labels and runs bi-directional GRUs over them.
//! 4. [`encoder`] mixes the resulting vectors into attention scores inside a
//!    stack of transformer blocks.
//!
//! [`numerics`] underpins all of it with a small reverse-mode tape, so every
//! parameter can be trained and its gradient checked against finite
//! differences.

pub mod config;
pub mod encoder;
pub mod error;
pub mod graph;
pub mod numerics;
pub mod parse;
pub mod pipeline;
pub mod relation;
pub mod synth;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
