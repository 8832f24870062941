use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::{DirectedLabel, SyntaxGraph};

/// Universal Dependencies v2 relation labels.
pub const UD_RELATIONS: [&str; 37] = [
    "acl", "advcl", "advmod", "amod", "appos", "aux", "case", "cc", "ccomp", "clf", "compound", "conj", "cop",
    "csubj", "dep", "det", "discourse", "dislocated", "expl", "fixed", "flat", "goeswith", "iobj", "list", "mark",
    "nmod", "nsubj", "nummod", "obj", "obl", "orphan", "parataxis", "punct", "reparandum", "root", "vocative",
    "xcomp",
];

pub const SELF_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;

/// Dense, frozen index over directed edge labels. Index 0 is the self-loop
/// label and index 1 is the unknown-label bucket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVocab {
    labels: Vec<Option<DirectedLabel>>,
    index: BTreeMap<DirectedLabel, usize>,
}

impl LabelVocab {
    /// Vocabulary with `base:fwd` and `base:rev` entries for each base label,
    /// in sorted base-label order.
    pub fn from_base_labels<I, S>(bases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let bases: BTreeSet<String> = bases.into_iter().map(Into::into).collect();
        let mut labels = vec![Some(DirectedLabel::self_loop()), None];
        for b in bases {
            labels.push(Some(DirectedLabel::fwd(b.as_str())));
            labels.push(Some(DirectedLabel::rev(b)));
        }
        let index = labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.clone().map(|l| (l, i)))
            .collect();
        Self { labels, index }
    }

    /// The 37 universal relations; independent of any corpus, so parameter
    /// files stay compatible across inputs.
    pub fn universal() -> Self {
        Self::from_base_labels(UD_RELATIONS)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `label`. A subtyped label such as `nmod:poss` falls back to
    /// its universal part `nmod`; anything else unseen maps to [`UNK_INDEX`].
    pub fn lookup(&self, label: &DirectedLabel) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        match label.base.split_once(':') {
            Some((universal, _)) => {
                let fallback = DirectedLabel {
                    base: universal.to_owned(),
                    direction: label.direction,
                };
                self.index.get(&fallback).copied().unwrap_or(UNK_INDEX)
            }
            None => UNK_INDEX,
        }
    }

    pub fn contains(&self, label: &DirectedLabel) -> bool {
        self.index.contains_key(label)
    }

    /// Display name of entry `i` (`<unk>` for the unknown bucket).
    pub fn name(&self, i: usize) -> String {
        match &self.labels[i] {
            Some(l) => l.to_string(),
            None => "<unk>".into(),
        }
    }
}

/// Collects every label used by `graphs`.
pub fn build_label_vocab(graphs: &[SyntaxGraph]) -> Result<LabelVocab> {
    if graphs.is_empty() {
        return Err(Error::Argument("cannot build a label vocabulary from no graphs".into()));
    }
    let bases = graphs
        .iter()
        .flat_map(|g| g.labels())
        .filter(|l| !l.is_self())
        .map(|l| l.base.clone());
    Ok(LabelVocab::from_base_labels(bases))
}
