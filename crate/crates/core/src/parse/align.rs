use super::conllu::DependencyTree;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_CHARS: usize = 400;

/// Characters of a rendered sentence and the word each belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharAlignment {
    pub chars: Vec<char>,
    /// 1-based word index per character, `None` for separator characters.
    pub char_to_word: Vec<Option<usize>>,
}

impl CharAlignment {
    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn rendered(&self) -> String {
        self.chars.iter().collect()
    }

    /// Positions (into `chars`) of the characters that belong to a word.
    /// These are the attention nodes; separators are left out.
    pub fn node_positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.char_to_word[i].is_some()).collect()
    }

    /// Word characters in order.
    pub fn node_chars(&self) -> Vec<char> {
        self.chars
            .iter()
            .zip(&self.char_to_word)
            .filter(|(_, w)| w.is_some())
            .map(|(c, _)| *c)
            .collect()
    }

    /// Word index of each attention node.
    pub fn node_words(&self) -> Vec<usize> {
        self.char_to_word.iter().flatten().copied().collect()
    }

    /// Number of distinct words covered.
    pub fn word_count(&self) -> usize {
        self.char_to_word.iter().flatten().max().copied().unwrap_or(0)
    }
}

/// Renders the sentence as words joined by `separator` and records which
/// word each character came from.
pub fn align_characters(tree: &DependencyTree, separator: &str) -> Result<CharAlignment> {
    align_characters_with_limit(tree, separator, DEFAULT_MAX_CHARS)
}

pub fn align_characters_with_limit(tree: &DependencyTree, separator: &str, max_chars: usize) -> Result<CharAlignment> {
    if tree.is_empty() {
        return Err(Error::Argument("cannot align an empty tree".into()));
    }
    let mut chars = Vec::new();
    let mut char_to_word = Vec::new();
    for (k, w) in tree.words.iter().enumerate() {
        if k > 0 {
            for c in separator.chars() {
                chars.push(c);
                char_to_word.push(None);
            }
        }
        if w.form.is_empty() {
            return Err(Error::Argument(format!("word {} has an empty form", w.index)));
        }
        for c in w.form.chars() {
            chars.push(c);
            char_to_word.push(Some(w.index));
        }
    }
    if chars.len() > max_chars {
        return Err(Error::Argument(format!(
            "sentence renders to {} characters, above the limit of {max_chars}",
            chars.len()
        )));
    }
    Ok(CharAlignment { chars, char_to_word })
}
