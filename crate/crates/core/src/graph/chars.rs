use std::collections::HashMap;

use super::paths::{all_word_paths, RelationPath};
use super::{DirectedLabel, SyntaxGraph};
use crate::error::{Error, Result};
use crate::parse::CharAlignment;

/// Character-level relation lookup.
///
/// Nodes are the word characters of the sentence (separators excluded).
/// The pair `(a, b)` resolves to the path between the words owning `a` and
/// `b`; two characters of the same word resolve to that word's self path.
/// Paths are stored once per word pair, never per character pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CharRelationMap {
    node_words: Vec<usize>,
    word_count: usize,
    word_paths: Vec<RelationPath>,
}

impl CharRelationMap {
    /// Number of character nodes `m`.
    pub fn node_count(&self) -> usize {
        self.node_words.len()
    }

    /// Total number of ordered character pairs, `m²`.
    pub fn len(&self) -> usize {
        self.node_count() * self.node_count()
    }

    pub fn is_empty(&self) -> bool {
        self.node_words.is_empty()
    }

    pub fn word_count(&self) -> usize {
        self.word_count
    }

    pub fn node_words(&self) -> &[usize] {
        &self.node_words
    }

    /// Stored word-pair paths, row-major over words.
    pub fn word_paths(&self) -> &[RelationPath] {
        &self.word_paths
    }

    pub fn word_path(&self, wi: usize, wj: usize) -> &RelationPath {
        &self.word_paths[(wi - 1) * self.word_count + (wj - 1)]
    }

    /// Path for character nodes `a`, `b` (0-based node positions).
    pub fn get(&self, a: usize, b: usize) -> &RelationPath {
        self.word_path(self.node_words[a], self.node_words[b])
    }
}

/// Expands word-pair paths to every ordered pair of word characters.
pub fn expand_to_characters(graph: &SyntaxGraph, alignment: &CharAlignment) -> Result<CharRelationMap> {
    let node_words = alignment.node_words();
    let n = graph.node_count();
    if node_words.iter().any(|&w| w == 0 || w > n) {
        return Err(Error::Argument(format!(
            "alignment refers to word {} but the graph has {n} nodes",
            node_words.iter().max().copied().unwrap_or(0)
        )));
    }
    if alignment.word_count() != n {
        return Err(Error::Argument(format!(
            "alignment covers {} words, graph has {n}",
            alignment.word_count()
        )));
    }
    Ok(CharRelationMap {
        node_words,
        word_count: n,
        word_paths: all_word_paths(graph),
    })
}

/// Deduplicated label sequences plus, per sentence, an `m x m` row-major
/// table of indices into them.
#[derive(Debug, Clone, PartialEq)]
pub struct DistinctPaths {
    pub paths: Vec<Vec<DirectedLabel>>,
    pub tables: Vec<PairIndex>,
}

/// `index[a * m + b]` is the distinct-path index of character pair `(a, b)`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct PairIndex {
    pub nodes: usize,
    pub index: Vec<usize>,
}

impl PairIndex {
    pub fn get(&self, a: usize, b: usize) -> usize {
        self.index[a * self.nodes + b]
    }
}

impl DistinctPaths {
    /// Rebuilds the label sequence of every character pair of sentence `s`.
    pub fn reconstruct(&self, s: usize) -> Vec<&[DirectedLabel]> {
        self.tables[s].index.iter().map(|&k| self.paths[k].as_slice()).collect()
    }
}

/// Deduplicates the paths of one sentence.
pub fn distinct_paths(map: &CharRelationMap) -> DistinctPaths {
    distinct_paths_batch(std::slice::from_ref(map))
}

/// Deduplicates the paths of a whole batch of sentences so each distinct
/// label sequence is encoded once. Indices are assigned in first-seen order
/// scanning sentences, then character pairs row-major.
pub fn distinct_paths_batch(maps: &[CharRelationMap]) -> DistinctPaths {
    let mut seen: HashMap<&[DirectedLabel], usize> = HashMap::new();
    let mut paths: Vec<Vec<DirectedLabel>> = Vec::new();
    let mut tables = Vec::with_capacity(maps.len());
    for map in maps {
        let w = map.word_count();
        // resolve per word pair first, then fan out to characters
        let word_index: Vec<usize> = map
            .word_paths()
            .iter()
            .map(|p| {
                *seen.entry(p.labels.as_slice()).or_insert_with(|| {
                    paths.push(p.labels.clone());
                    paths.len() - 1
                })
            })
            .collect();
        let m = map.node_count();
        let nw = map.node_words();
        let mut index = Vec::with_capacity(m * m);
        for a in 0..m {
            for b in 0..m {
                index.push(word_index[(nw[a] - 1) * w + (nw[b] - 1)]);
            }
        }
        tables.push(PairIndex { nodes: m, index });
    }
    DistinctPaths { paths, tables }
}
