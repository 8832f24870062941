use std::fmt::Write as _;

use crate::error::{Error, Result};

/// One syntactic word of a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    /// Index of the governing word, `0` for the root.
    pub head: usize,
    pub deprel: String,
}

/// Labelled `head -> dependent` arc.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub head: usize,
    pub dependent: usize,
    pub label: String,
}

/// Dependency parse of a single sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyTree {
    pub sent_id: Option<String>,
    pub words: Vec<Word>,
    pub root_index: usize,
}

impl DependencyTree {
    /// Builds and validates a tree from `(form, head, deprel)` triples given in
    /// word order.
    pub fn from_words<S: Into<String>>(words: impl IntoIterator<Item = (S, usize, S)>) -> Result<Self> {
        let words: Vec<Word> = words
            .into_iter()
            .enumerate()
            .map(|(i, (form, head, deprel))| Word {
                index: i + 1,
                form: form.into(),
                head,
                deprel: deprel.into(),
            })
            .collect();
        let root_index = words.iter().find(|w| w.head == 0).map_or(0, |w| w.index);
        let tree = Self {
            sent_id: None,
            words,
            root_index,
        };
        tree.validate(1)?;
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, index: usize) -> &Word {
        &self.words[index - 1]
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(|w| w.form.as_str())
    }

    /// Every non-root word contributes one `head -> dependent` edge.
    pub fn edges(&self) -> Vec<Edge> {
        self.words
            .iter()
            .filter(|w| w.head != 0)
            .map(|w| Edge {
                head: w.head,
                dependent: w.index,
                label: w.deprel.clone(),
            })
            .collect()
    }

    /// Checks the tree invariants. `sentence` is the 1-based number used in
    /// error messages.
    pub fn validate(&self, sentence: usize) -> Result<()> {
        let err = |message: String| Error::Structure { sentence, message };
        let n = self.words.len();
        if n == 0 {
            return Err(err("sentence has no words".into()));
        }
        for (i, w) in self.words.iter().enumerate() {
            if w.index != i + 1 {
                return Err(err(format!("word ids must run 1..{n}, found {} at position {}", w.index, i + 1)));
            }
            if w.head > n {
                return Err(err(format!("word {} has head {} beyond sentence length {n}", w.index, w.head)));
            }
            if w.head == w.index {
                return Err(err(format!("word {} is its own head", w.index)));
            }
            if w.deprel.is_empty() {
                return Err(err(format!("word {} has an empty relation label", w.index)));
            }
        }
        let roots: Vec<usize> = self.words.iter().filter(|w| w.head == 0).map(|w| w.index).collect();
        match roots.as_slice() {
            [] => return Err(err("no root word (HEAD = 0)".into())),
            [r] if *r == self.root_index => {}
            [r] => {
                return Err(err(format!("root_index {} does not match root word {r}", self.root_index)));
            }
            many => return Err(err(format!("multiple roots: words {many:?}"))),
        }
        // every word must reach the root within n steps
        for w in &self.words {
            let mut cur = w.index;
            let mut steps = 0;
            while cur != 0 {
                cur = self.words[cur - 1].head;
                steps += 1;
                if steps > n {
                    return Err(err(format!("cycle through word {}", w.index)));
                }
            }
        }
        Ok(())
    }
}

/// Reads every sentence of a CoNLL-U document.
///
/// Only the ID, FORM, HEAD and DEPREL columns are used. Multiword-token
/// ranges (`3-4`) and empty nodes (`5.1`) are skipped.
pub fn read_conllu(text: &str) -> Result<Vec<DependencyTree>> {
    let mut trees = Vec::new();
    let mut words: Vec<Word> = Vec::new();
    let mut sent_id: Option<String> = None;
    let mut start_line = 1;

    let finish = |words: &mut Vec<Word>, sent_id: &mut Option<String>, trees: &mut Vec<DependencyTree>| -> Result<()> {
        if words.is_empty() {
            *sent_id = None;
            return Ok(());
        }
        let sentence = trees.len() + 1;
        let root_index = words.iter().find(|w| w.head == 0).map_or(0, |w| w.index);
        let tree = DependencyTree {
            sent_id: sent_id.take(),
            words: std::mem::take(words),
            root_index,
        };
        tree.validate(sentence).map_err(|e| match (e, &tree.sent_id) {
            (Error::Structure { sentence, message }, Some(id)) => Error::Structure {
                sentence,
                message: format!("{message} (sent_id {id})"),
            },
            (e, _) => e,
        })?;
        trees.push(tree);
        Ok(())
    };

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(&mut words, &mut sent_id, &mut trees)?;
            start_line = lineno + 1;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(id) = comment.trim().strip_prefix("sent_id") {
                let id = id.trim_start().trim_start_matches('=').trim();
                sent_id = Some(id.to_owned());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let index: usize = id.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("invalid token id `{id}`"),
        })?;
        if index != words.len() + 1 {
            return Err(Error::Parse {
                line: lineno,
                message: format!(
                    "token id {index} out of sequence (sentence starting at line {start_line} expects {})",
                    words.len() + 1
                ),
            });
        }
        let head = match cols[6] {
            "" | "_" => {
                return Err(Error::Parse {
                    line: lineno,
                    message: "missing HEAD".into(),
                })
            }
            h => h.parse::<usize>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid HEAD `{h}`"),
            })?,
        };
        let deprel = match cols[7] {
            "" | "_" => {
                return Err(Error::Parse {
                    line: lineno,
                    message: "missing DEPREL".into(),
                })
            }
            d => d.to_owned(),
        };
        words.push(Word {
            index,
            form: cols[1].to_owned(),
            head,
            deprel,
        });
    }
    finish(&mut words, &mut sent_id, &mut trees)?;
    Ok(trees)
}

/// Serialises trees back to CoNLL-U. Only ID, FORM, HEAD and DEPREL carry
/// information; the remaining columns are written as `_`.
pub fn write_conllu(trees: &[DependencyTree]) -> String {
    let mut out = String::new();
    for tree in trees {
        if let Some(id) = &tree.sent_id {
            let _ = writeln!(out, "# sent_id = {id}");
        }
        for w in &tree.words {
            let _ = writeln!(out, "{}\t{}\t_\t_\t_\t_\t{}\t{}\t_\t_", w.index, w.form, w.head, w.deprel);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOGS: &str = "# sent_id = dogs\n\
1\tDogs\tdog\tNOUN\t_\t_\t2\tnsubj\t_\t_\n\
2\tbark\tbark\tVERB\t_\t_\t0\troot\t_\t_\n\n";

    #[test]
    fn minimal_tree() {
        let trees = read_conllu(DOGS).unwrap();
        assert_eq!(trees.len(), 1);
        let t = &trees[0];
        assert_eq!(t.root_index, 2);
        assert_eq!(t.sent_id.as_deref(), Some("dogs"));
        assert_eq!(
            t.edges(),
            vec![Edge {
                head: 2,
                dependent: 1,
                label: "nsubj".into()
            }]
        );
    }

    #[test]
    fn skips_ranges_and_empty_nodes() {
        let text = "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n\
1\tdo\t_\t_\t_\t_\t0\troot\t_\t_\n\
2\tn't\t_\t_\t_\t_\t1\tadvmod\t_\t_\n\
2.1\tghost\t_\t_\t_\t_\t_\t_\t_\t_\n";
        let trees = read_conllu(text).unwrap();
        assert_eq!(trees[0].len(), 2);
    }

    #[test]
    fn self_head_is_structural() {
        let text = "1\ta\t_\t_\t_\t_\t1\tdep\t_\t_\n2\tb\t_\t_\t_\t_\t0\troot\t_\t_\n";
        assert!(matches!(read_conllu(text), Err(Error::Structure { sentence: 1, .. })));
    }

    #[test]
    fn cycle_and_multiple_roots() {
        let cycle = "1\ta\t_\t_\t_\t_\t2\tdep\t_\t_\n2\tb\t_\t_\t_\t_\t1\tdep\t_\t_\n3\tc\t_\t_\t_\t_\t0\troot\t_\t_\n";
        let err = read_conllu(&format!("{DOGS}{cycle}")).unwrap_err();
        assert!(matches!(err, Error::Structure { sentence: 2, .. }), "{err}");
        let two = "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n2\tb\t_\t_\t_\t_\t0\troot\t_\t_\n";
        let err = read_conllu(two).unwrap_err();
        assert!(err.to_string().contains("multiple roots"));
    }

    #[test]
    fn missing_head_reports_line() {
        let text = "# c\n1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n2\tb\t_\t_\t_\t_\t_\tdep\t_\t_\n";
        match read_conllu(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("HEAD"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = "1\ta\t_\t_\t_\t_\t0\t_\t_\t_\n";
        assert!(matches!(read_conllu(text), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_conllu("1\ta\t_\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn write_then_read_is_identity() {
        let trees = read_conllu(DOGS).unwrap();
        assert_eq!(read_conllu(&write_conllu(&trees)).unwrap(), trees);
    }
}
