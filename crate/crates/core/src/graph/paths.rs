use std::collections::VecDeque;

use serde::Serialize;

use super::{DirectedLabel, SyntaxGraph};
use crate::error::{Error, Result};

/// Label sequence along the tree path from `from` to `to`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct RelationPath {
    pub from: usize,
    pub to: usize,
    pub labels: Vec<DirectedLabel>,
}

impl RelationPath {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of tree hops (0 for a self path).
    pub fn hops(&self) -> usize {
        if self.from == self.to {
            0
        } else {
            self.labels.len()
        }
    }
}

/// Breadth-first search over the non-self edges. `i == j` yields the single
/// self-loop label.
pub fn shortest_relation_path(graph: &SyntaxGraph, i: usize, j: usize) -> Result<RelationPath> {
    let n = graph.node_count();
    for v in [i, j] {
        if v == 0 || v > n {
            return Err(Error::Argument(format!("node {v} out of range 1..={n}")));
        }
    }
    if i == j {
        return Ok(RelationPath {
            from: i,
            to: j,
            labels: vec![DirectedLabel::self_loop()],
        });
    }
    let parents = bfs_parents(graph, i);
    let mut labels = Vec::new();
    let mut cur = j;
    while cur != i {
        let (prev, label) = parents[cur - 1]
            .clone()
            .ok_or_else(|| Error::Argument(format!("node {j} unreachable from {i}")))?;
        labels.push(label);
        cur = prev;
    }
    labels.reverse();
    Ok(RelationPath { from: i, to: j, labels })
}

/// `parents[v - 1] = (u, label of u -> v)` for the BFS tree rooted at `src`.
fn bfs_parents(graph: &SyntaxGraph, src: usize) -> Vec<Option<(usize, DirectedLabel)>> {
    let n = graph.node_count();
    let mut parents = vec![None; n];
    let mut seen = vec![false; n];
    seen[src - 1] = true;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for (v, label) in graph.neighbors(u) {
            if !seen[v - 1] {
                seen[v - 1] = true;
                parents[v - 1] = Some((u, label.clone()));
                queue.push_back(*v);
            }
        }
    }
    parents
}

/// All `n²` word-pair paths, row-major: entry `(i - 1) * n + (j - 1)` is the
/// path from word `i` to word `j`.
pub fn all_word_paths(graph: &SyntaxGraph) -> Vec<RelationPath> {
    let n = graph.node_count();
    let mut out = Vec::with_capacity(n * n);
    for i in 1..=n {
        for j in 1..=n {
            out.push(shortest_relation_path(graph, i, j).expect("indices in range and graph connected"));
        }
    }
    out
}
