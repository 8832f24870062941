//! Self-contained invariant suites behind `sga verify`. Each check records
//! what it measured and the tolerance it was held to, so the JSON report
//! can be read without rerunning anything.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::encoder::{attention_weights, graph_attention_layer, score_terms, syntax_score, EncoderBlockParams, RelationInput};
use crate::error::{Error, Result};
use crate::graph::{build_syntax_graph, distinct_paths_batch, shortest_relation_path, DirectedLabel};
use crate::numerics::{check_gradient_steps, relative_error, softmax, NodeId, ParamSet, Tape, Tensor};
use crate::parse::DependencyTree;
use crate::pipeline::{forward_batch, Model, ModelConfig, RelationMode, Sentence};
use crate::relation::{build_label_vocab, encode_distinct_batch, encode_pairs_naive, split_directional, LabelVocab, RelationTensor};
use crate::synth::random_tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Algebra,
    Graph,
    Gradcheck,
    Dedup,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 5] = ["algebra", "graph", "gradcheck", "dedup", "all"];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "algebra" => Ok(Suite::Algebra),
            "graph" => Ok(Suite::Graph),
            "gradcheck" => Ok(Suite::Gradcheck),
            "dedup" => Ok(Suite::Dedup),
            "all" => Ok(Suite::All),
            other => Err(Error::Argument(format!(
                "unknown suite `{other}` (expected one of {})",
                Suite::NAMES.join(", ")
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Suite::Algebra => "algebra",
            Suite::Graph => "graph",
            Suite::Gradcheck => "gradcheck",
            Suite::Dedup => "dedup",
            Suite::All => "all",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub pass: bool,
    /// Worst value observed (an error magnitude or a mismatch count).
    pub measured: f64,
    pub tolerance: f64,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn new(suite: Suite, name: &str, measured: f64, tolerance: f64, samples: usize) -> Self {
        Self {
            suite: suite.to_string(),
            name: name.to_owned(),
            pass: measured <= tolerance,
            measured,
            tolerance,
            samples,
            detail: None,
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<VerifyReport> {
    let checks = match suite {
        Suite::Algebra => algebra(seed)?,
        Suite::Graph => graph(seed)?,
        Suite::Gradcheck => gradcheck(seed)?,
        Suite::Dedup => dedup(seed)?,
        Suite::All => {
            let mut all = algebra(seed)?;
            all.extend(graph(seed)?);
            all.extend(gradcheck(seed)?);
            all.extend(dedup(seed)?);
            all
        }
    };
    Ok(VerifyReport {
        suite: suite.to_string(),
        seed,
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::from_parts(vec![rows, cols], random_vec(rng, rows * cols))
}

/// Random sentences of at most `max_words` words, prepared for encoding.
pub fn random_sentences(rng: &mut ChaCha8Rng, count: usize, max_words: usize) -> Result<Vec<Sentence>> {
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=max_words);
            Sentence::prepare(random_tree(rng, n))
        })
        .collect()
}

/// Attention sublayer computed pair by pair from [`syntax_score`], the
/// scalar softmax and explicit sums. Reference for the batched layer.
pub fn attention_layer_oracle(set: &ParamSet, block: &EncoderBlockParams, x: &Tensor, relations: Option<&RelationTensor>) -> Result<Tensor> {
    let n = x.rows();
    let d_model = x.cols();
    let mut concat = vec![Vec::new(); n];
    for head in &block.heads {
        let w_q = set.value(head.w_q);
        let w_k = set.value(head.w_k);
        let w_v = set.value(head.w_v);
        let d_head = w_q.rows();
        let mut scores = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (r_fwd, r_bwd) = match relations {
                    Some(r) => split_directional(r.pair(i, j), set.value(head.w_r))?,
                    None => (vec![0.0; d_model], vec![0.0; d_model]),
                };
                scores[i * n + j] = syntax_score(x.row_slice(i), x.row_slice(j), &r_fwd, &r_bwd, w_q, w_k)?;
            }
        }
        let weights = attention_weights(&Tensor::new(vec![n, n], scores)?, d_head)?;
        for (i, out) in concat.iter_mut().enumerate() {
            for c in 0..d_head {
                let mut acc = 0.0;
                for j in 0..n {
                    let v: f64 = (0..d_model).map(|k| w_v.get(c, k) * x.get(j, k)).sum();
                    acc += weights.get(i, j) * v;
                }
                out.push(acc);
            }
        }
    }
    let w_o = set.value(block.w_o);
    let mut data = Vec::with_capacity(n * d_model);
    for row in &concat {
        for o in 0..d_model {
            data.push((0..row.len()).map(|c| w_o.get(o, c) * row[c]).sum());
        }
    }
    Tensor::new(vec![n, d_model], data)
}

/// Path from `i` to `j` obtained by climbing both words to their lowest
/// common ancestor: arcs climbed from `i` read `:rev`, arcs descended
/// towards `j` read `:fwd`.
pub fn lca_path(tree: &DependencyTree, i: usize, j: usize) -> Vec<DirectedLabel> {
    if i == j {
        return vec![DirectedLabel::self_loop()];
    }
    let ancestors = |mut v: usize| {
        let mut chain = vec![v];
        while tree.word(v).head != 0 {
            v = tree.word(v).head;
            chain.push(v);
        }
        chain
    };
    let up = ancestors(i);
    let down = ancestors(j);
    let lca = *up.iter().find(|v| down.contains(v)).expect("tree words share the root");
    let mut labels: Vec<DirectedLabel> = up
        .iter()
        .take_while(|&&v| v != lca)
        .map(|&v| DirectedLabel::rev(tree.word(v).deprel.as_str()))
        .collect();
    let descent: Vec<DirectedLabel> = down
        .iter()
        .take_while(|&&v| v != lca)
        .map(|&v| DirectedLabel::fwd(tree.word(v).deprel.as_str()))
        .collect();
    labels.extend(descent.into_iter().rev());
    labels
}

fn algebra(seed: u64) -> Result<Vec<Check>> {
    let suite = Suite::Algebra;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let draws = 1000;
    let (d_model, d_head) = (8, 4);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let x_i = random_vec(&mut rng, d_model);
        let x_j = random_vec(&mut rng, d_model);
        let r_f = random_vec(&mut rng, d_model);
        let r_b = random_vec(&mut rng, d_model);
        let w_q = random_matrix(&mut rng, d_head, d_model);
        let w_k = random_matrix(&mut rng, d_head, d_model);
        let factored = syntax_score(&x_i, &x_j, &r_f, &r_b, &w_q, &w_k)?;
        let terms = score_terms(&x_i, &x_j, &r_f, &r_b, &w_q, &w_k)?;
        worst = worst.max((factored - terms.total()).abs());
    }
    checks.push(Check::new(suite, "four_term_identity", worst, 1e-10, draws));

    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(1..=12);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-30.0..30.0)).collect();
        let w = softmax(&scores)?;
        let sum: f64 = w.iter().sum();
        let out_of_range = w.iter().any(|v| !(0.0..=1.0).contains(v));
        worst = worst.max((sum - 1.0).abs()).max(if out_of_range { 1.0 } else { 0.0 });
    }
    checks.push(Check::new(suite, "softmax_row_stochastic", worst, 1e-12, 200));

    let labels = LabelVocab::universal();
    let model = Model::new(ModelConfig::toy(), labels, seed)?;
    let sentences = random_sentences(&mut rng, 50, 6)?;
    let mut mismatched = 0usize;
    for s in &sentences {
        let mut tape = Tape::new();
        let zero = forward_batch(&mut tape, &model, std::slice::from_ref(s), RelationMode::ZeroRelations)?;
        let base = forward_batch(&mut tape, &model, std::slice::from_ref(s), RelationMode::Baseline)?;
        if tape.value(zero.outputs[0].output).data() != tape.value(base.outputs[0].output).data() {
            mismatched += 1;
        }
    }
    checks.push(
        Check::new(suite, "zero_relation_reduction", mismatched as f64, 0.0, sentences.len())
            .with_detail("sentences whose encoder output differs bitwise from the baseline"),
    );

    let mut worst = 0.0f64;
    let mut samples = 0;
    for s in sentences.iter().take(20) {
        let mut tape = Tape::new();
        let fwd = forward_batch(&mut tape, &model, std::slice::from_ref(s), RelationMode::Syntax)?;
        let input_node = tape_input(&mut tape, &model, s)?;
        let x = tape.value(input_node).clone();
        let rel = fwd.relation_tensor(&tape, 0).expect("syntax mode encodes relations")?;
        let enc = tape.constant(rel.encodings.clone());
        let xin = tape.constant(x.clone());
        let input = RelationInput {
            encodings: enc,
            pairs: &rel.pairs,
        };
        let (batched, _) = graph_attention_layer(&mut tape, &model.params, xin, Some(&input), &model.stack.blocks[0])?;
        let oracle = attention_layer_oracle(&model.params, &model.stack.blocks[0], &x, Some(&rel))?;
        worst = worst.max(tape.value(batched).max_abs_diff(&oracle));
        samples += 1;
    }
    checks.push(Check::new(suite, "attention_layer_vs_loop_oracle", worst, 1e-10, samples));

    let mut worst = 0.0f64;
    let mut maps = 0;
    for s in &sentences {
        let mut tape = Tape::new();
        let fwd = forward_batch(&mut tape, &model, std::slice::from_ref(s), RelationMode::Syntax)?;
        for block in &fwd.outputs[0].attention {
            for head in block {
                let w = tape.value(head.weights);
                for r in 0..w.rows() {
                    let row = w.row_slice(r);
                    let sum: f64 = row.iter().sum();
                    worst = worst.max((sum - 1.0).abs());
                    if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                        worst = worst.max(1.0);
                    }
                }
                maps += 1;
            }
        }
    }
    checks.push(Check::new(suite, "attention_rows_stochastic", worst, 1e-12, maps));
    Ok(checks)
}

/// Embedded characters plus position signal: the input of the first block.
fn tape_input(tape: &mut Tape, model: &Model, s: &Sentence) -> Result<NodeId> {
    let table = tape.param(&model.params, model.stack.char_embedding);
    let x = tape.gather_rows(table, s.char_ids.clone())?;
    if model.stack.position_signal {
        let pe = tape.constant(crate::encoder::position_signal(s.len(), model.config.d_model));
        tape.add(x, pe)
    } else {
        Ok(x)
    }
}

/// The sentence drawn in the figure that motivates the syntax graph, with
/// its Universal Dependencies parse.
pub fn morning_flight() -> DependencyTree {
    let mut t = DependencyTree::from_words([
        ("I", 2, "nsubj"),
        ("prefer", 0, "root"),
        ("the", 5, "det"),
        ("morning", 5, "compound"),
        ("flight", 2, "obj"),
        ("through", 7, "case"),
        ("Denver", 5, "nmod"),
        (".", 2, "punct"),
    ])
    .expect("fixture tree is valid");
    t.sent_id = Some("morning-flight".into());
    t
}

fn graph(seed: u64) -> Result<Vec<Check>> {
    let suite = Suite::Graph;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trees: Vec<DependencyTree> = (0..100)
        .map(|_| {
            let n = rng.gen_range(1..=20);
            random_tree(&mut rng, n)
        })
        .collect();

    let (mut edge_bad, mut lca_bad, mut rev_bad, mut cat_bad, mut pairs) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for tree in &trees {
        let n = tree.len();
        let g = build_syntax_graph(tree)?;
        if g.edges().len() != 2 * (n - 1) + n || g.self_loops().count() != n {
            edge_bad += 1;
        }
        let mut paths = vec![Vec::new(); n * n];
        for i in 1..=n {
            for j in 1..=n {
                paths[(i - 1) * n + (j - 1)] = shortest_relation_path(&g, i, j)?.labels;
            }
        }
        let path = |i: usize, j: usize| &paths[(i - 1) * n + (j - 1)];
        for i in 1..=n {
            for j in 1..=n {
                pairs += 1;
                if *path(i, j) != lca_path(tree, i, j) {
                    lca_bad += 1;
                }
                let reversed: Vec<DirectedLabel> = path(j, i).iter().rev().map(DirectedLabel::flipped).collect();
                if i != j && *path(i, j) != reversed {
                    rev_bad += 1;
                }
                if i == j {
                    continue;
                }
                let hops = |a: usize, b: usize| if a == b { 0 } else { path(a, b).len() };
                for k in 1..=n {
                    if k == i || k == j || hops(i, k) + hops(k, j) != hops(i, j) {
                        continue;
                    }
                    let mut joined = path(i, k).clone();
                    joined.extend(path(k, j).iter().cloned());
                    if joined != *path(i, j) {
                        cat_bad += 1;
                    }
                }
            }
        }
    }
    let mut checks = vec![
        Check::new(suite, "edge_count_formula", edge_bad as f64, 0.0, trees.len()),
        Check::new(suite, "bfs_matches_lca_oracle", lca_bad as f64, 0.0, pairs),
        Check::new(suite, "path_reversal", rev_bad as f64, 0.0, pairs),
        Check::new(suite, "path_concatenation", cat_bad as f64, 0.0, pairs),
    ];

    let fig = morning_flight();
    let g = build_syntax_graph(&fig)?;
    let p = shortest_relation_path(&g, 1, 7)?;
    let expected = vec![DirectedLabel::rev("nsubj"), DirectedLabel::fwd("obj"), DirectedLabel::fwd("nmod")];
    let bad = usize::from(g.node_count() != 8)
        + usize::from(g.edges().len() != 22)
        + usize::from(g.self_loops().count() != 8)
        + usize::from(p.labels != expected);
    checks.push(
        Check::new(suite, "morning_flight_fixture", bad as f64, 0.0, 1)
            .with_detail(format!("{} nodes, {} edges, I->Denver {} hops", g.node_count(), g.edges().len(), p.hops())),
    );
    Ok(checks)
}

/// Builds a toy model and sentence and returns a loss closure whose
/// gradient exercises every parameter. The loss is a fixed random weighted
/// sum of the output: a plain sum is identically zero under post-norm with
/// unit gains and zero biases, which would leave most gradients at zero.
pub fn gradcheck_setup(seed: u64) -> Result<(Model, Sentence, Tensor)> {
    let tree = DependencyTree::from_words([
        ("a", 3, "det"),
        ("b", 3, "amod"),
        ("c", 4, "nsubj"),
        ("d", 0, "root"),
        ("e", 6, "case"),
        ("f", 4, "obl"),
    ])?;
    let sentence = Sentence::prepare(tree)?;
    let labels = build_label_vocab(std::slice::from_ref(&sentence.graph))?;
    let config = ModelConfig {
        d_model: 8,
        heads: 2,
        blocks: 2,
        d_ff: 16,
        label_dim: 4,
        gru_hidden: 4,
        position_signal: true,
    };
    let mut model = Model::new(config, labels, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    // move norm gains and biases off their initial values so their gradients are generic
    for p in model.params.iter_mut() {
        if p.name.contains("norm") || p.name.contains(".b") {
            for v in p.value.data_mut() {
                *v += rng.gen_range(-0.5..0.5);
            }
        }
    }
    let weights = random_matrix(&mut rng, sentence.len(), config.d_model);
    Ok((model, sentence, weights))
}

pub fn gradcheck_loss(tape: &mut Tape, model: &Model, set: &ParamSet, sentence: &Sentence, weights: &Tensor) -> Result<NodeId> {
    let view = Model {
        params: set.clone(),
        ..model.clone()
    };
    let fwd = forward_batch(tape, &view, std::slice::from_ref(sentence), RelationMode::Syntax)?;
    let w = tape.constant(weights.clone());
    let weighted = tape.mul(fwd.outputs[0].output, w)?;
    Ok(tape.sum_all(weighted))
}

/// Below this magnitude a gradient is compared by absolute error: central
/// differences cannot resolve it to a relative precision of 1e-5.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

/// Central-difference steps tried per coordinate.
pub const GRADCHECK_STEPS: [f64; 4] = [1e-4, 1e-3, 1e-5, 1e-6];

fn gradcheck(seed: u64) -> Result<Vec<Check>> {
    let suite = Suite::Gradcheck;
    let (mut model, sentence, weights) = gradcheck_setup(seed)?;
    let frozen = model.clone();
    let report = check_gradient_steps(
        |tape, set| gradcheck_loss(tape, &frozen, set, &sentence, &weights),
        &mut model.params,
        &GRADCHECK_STEPS,
    )?;
    let mut rel = 0.0f64;
    let mut tiny_abs = 0.0f64;
    let (mut tiny, mut coords) = (0usize, 0usize);
    let mut worst = String::new();
    for p in &report.params {
        for &(a, n) in &p.values {
            coords += 1;
            if a.abs().max(n.abs()) < GRADCHECK_FLOOR {
                tiny += 1;
                tiny_abs = tiny_abs.max((a - n).abs());
            } else {
                let e = relative_error(a, n);
                if e > rel {
                    rel = e;
                    worst = p.name.clone();
                }
            }
        }
    }
    Ok(vec![
        Check::new(suite, "end_to_end_gradient", rel, 1e-5, coords - tiny).with_detail(format!(
            "{} parameters, {} chars, worst `{worst}`",
            report.params.len(),
            sentence.len()
        )),
        Check::new(suite, "end_to_end_gradient_near_zero", tiny_abs, 1e-10, tiny)
            .with_detail(format!("absolute error where |gradient| < {GRADCHECK_FLOOR:e}")),
    ])
}

fn dedup(seed: u64) -> Result<Vec<Check>> {
    let suite = Suite::Dedup;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sentences = random_sentences(&mut rng, 50, 8)?;
    let model = Model::new(ModelConfig::toy(), LabelVocab::universal(), seed)?;

    let maps: Vec<_> = sentences.iter().map(|s| s.relations.clone()).collect();
    let distinct = distinct_paths_batch(&maps);
    let encoded = encode_distinct_batch(&distinct.paths, &model.params, &model.relation, &model.labels)?;

    let (mut scatter_bad, mut reconstruct_bad, mut pairs) = (0usize, 0usize, 0usize);
    for (s, (map, table)) in maps.iter().zip(&distinct.tables).enumerate() {
        let naive = encode_pairs_naive(map, &model.params, &model.relation, &model.labels)?;
        let rebuilt = distinct.reconstruct(s);
        let m = map.node_count();
        for a in 0..m {
            for b in 0..m {
                let p = a * m + b;
                pairs += 1;
                if encoded[table.get(a, b)] != naive[p] {
                    scatter_bad += 1;
                }
                if rebuilt[p] != map.get(a, b).labels.as_slice() {
                    reconstruct_bad += 1;
                }
            }
        }
    }
    let total_pairs: usize = maps.iter().map(|m| m.len()).sum();
    Ok(vec![
        Check::new(suite, "scatter_equals_naive", scatter_bad as f64, 0.0, pairs)
            .with_detail(format!("{} distinct paths for {total_pairs} character pairs", distinct.paths.len())),
        Check::new(suite, "reconstruct_is_lossless", reconstruct_bad as f64, 0.0, pairs),
    ])
}
