//! Syntax graphs built from dependency trees, shortest relation paths between
//! words, and their expansion to character pairs.
//!
//! A tree arc `h -> d` labelled `L` becomes two directed edges, `h -> d`
//! labelled `L:fwd` and `d -> h` labelled `L:rev`. Every word also gets a
//! self-loop labelled `self`. The relation between two words is the label
//! sequence along the unique tree path joining them.

mod chars;
mod export;
mod paths;

pub use chars::{distinct_paths, distinct_paths_batch, expand_to_characters, CharRelationMap, DistinctPaths, PairIndex};
pub use export::{to_dot, to_json, GraphJson};
pub use paths::{all_word_paths, shortest_relation_path, RelationPath};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::parse::DependencyTree;

/// Base label reserved for self-loops.
pub const SELF_LABEL: &str = "self";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Fwd,
    Rev,
    #[serde(rename = "self")]
    SelfLoop,
}

/// Edge label with its traversal direction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectedLabel {
    pub base: String,
    pub direction: Direction,
}

impl DirectedLabel {
    pub fn fwd(base: impl Into<String>) -> Self {
        Self {
            base: base.into(),
            direction: Direction::Fwd,
        }
    }

    pub fn rev(base: impl Into<String>) -> Self {
        Self {
            base: base.into(),
            direction: Direction::Rev,
        }
    }

    pub fn self_loop() -> Self {
        Self {
            base: SELF_LABEL.into(),
            direction: Direction::SelfLoop,
        }
    }

    /// The label seen when walking the same edge the other way.
    pub fn flipped(&self) -> Self {
        let direction = match self.direction {
            Direction::Fwd => Direction::Rev,
            Direction::Rev => Direction::Fwd,
            Direction::SelfLoop => Direction::SelfLoop,
        };
        Self {
            base: self.base.clone(),
            direction,
        }
    }

    pub fn is_self(&self) -> bool {
        self.direction == Direction::SelfLoop
    }
}

impl fmt::Display for DirectedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.direction {
            Direction::Fwd => write!(f, "{}:fwd", self.base),
            Direction::Rev => write!(f, "{}:rev", self.base),
            Direction::SelfLoop => f.write_str(&self.base),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedEdge {
    pub from: usize,
    pub to: usize,
    pub label: DirectedLabel,
}

/// Two-way, self-looped extension of a dependency tree. Nodes are the
/// 1-based word indices; the virtual ROOT is not a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxGraph {
    forms: Vec<String>,
    edges: Vec<DirectedEdge>,
    /// `neighbors[v - 1]` lists `(w, label of v -> w)` over non-self edges.
    neighbors: Vec<Vec<(usize, DirectedLabel)>>,
}

impl SyntaxGraph {
    pub fn node_count(&self) -> usize {
        self.forms.len()
    }

    pub fn form(&self, node: usize) -> &str {
        &self.forms[node - 1]
    }

    pub fn edges(&self) -> &[DirectedEdge] {
        &self.edges
    }

    pub fn self_loops(&self) -> impl Iterator<Item = &DirectedEdge> {
        self.edges.iter().filter(|e| e.label.is_self())
    }

    pub(crate) fn neighbors(&self, node: usize) -> &[(usize, DirectedLabel)] {
        &self.neighbors[node - 1]
    }

    /// Every distinct directed label used by the graph, including `self`.
    pub fn labels(&self) -> impl Iterator<Item = &DirectedLabel> {
        self.edges.iter().map(|e| &e.label)
    }
}

/// Adds the reverse of every arc and one self-loop per word. The ROOT
/// pseudo-arc (HEAD = 0) is dropped.
pub fn build_syntax_graph(tree: &DependencyTree) -> Result<SyntaxGraph> {
    tree.validate(1)?;
    let n = tree.len();
    let mut edges = Vec::with_capacity(3 * n);
    let mut neighbors = vec![Vec::new(); n];
    for e in tree.edges() {
        let fwd = DirectedLabel::fwd(e.label.as_str());
        let rev = DirectedLabel::rev(e.label.as_str());
        neighbors[e.head - 1].push((e.dependent, fwd.clone()));
        neighbors[e.dependent - 1].push((e.head, rev.clone()));
        edges.push(DirectedEdge {
            from: e.head,
            to: e.dependent,
            label: fwd,
        });
        edges.push(DirectedEdge {
            from: e.dependent,
            to: e.head,
            label: rev,
        });
    }
    for v in 1..=n {
        edges.push(DirectedEdge {
            from: v,
            to: v,
            label: DirectedLabel::self_loop(),
        });
    }
    Ok(SyntaxGraph {
        forms: tree.forms().map(str::to_owned).collect(),
        edges,
        neighbors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_word_has_only_its_self_loop() {
        let t = DependencyTree::from_words([("hi", 0, "root")]).unwrap();
        let g = build_syntax_graph(&t).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert!(g.edges()[0].label.is_self());
    }

    #[test]
    fn two_words() {
        let t = DependencyTree::from_words([("Dogs", 2, "nsubj"), ("bark", 0, "root")]).unwrap();
        let g = build_syntax_graph(&t).unwrap();
        let labels: Vec<String> = g.labels().map(|l| l.to_string()).collect();
        assert_eq!(labels, vec!["nsubj:fwd", "nsubj:rev", "self", "self"]);
        assert_eq!(g.edges()[0].from, 2);
        assert_eq!(g.edges()[0].to, 1);
    }

    #[test]
    fn flip_is_involution() {
        for l in [DirectedLabel::fwd("obj"), DirectedLabel::rev("obj"), DirectedLabel::self_loop()] {
            assert_eq!(l.flipped().flipped(), l);
        }
        assert_eq!(DirectedLabel::fwd("obj").flipped(), DirectedLabel::rev("obj"));
    }
}
