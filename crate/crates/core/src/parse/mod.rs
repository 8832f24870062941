//! CoNLL-U ingestion and character-to-word alignment.

mod align;
mod conllu;

pub use align::{align_characters, align_characters_with_limit, CharAlignment, DEFAULT_MAX_CHARS};
pub use conllu::{read_conllu, write_conllu, DependencyTree, Edge, Word};
