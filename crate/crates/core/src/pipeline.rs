//! End-to-end wiring: sentence preparation, model construction and the
//! batched forward pass from parse to character embeddings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoder::{encoder_forward, EncoderDims, EncoderOutput, EncoderStackParams, RelationInput};
use crate::error::{Error, Result};
use crate::graph::{build_syntax_graph, distinct_paths_batch, expand_to_characters, CharRelationMap, DistinctPaths, SyntaxGraph};
use crate::numerics::{NodeId, ParamId, ParamSet, Tape, Tensor};
use crate::parse::{align_characters_with_limit, CharAlignment, DependencyTree, DEFAULT_MAX_CHARS};
use crate::relation::{encode_paths_on_tape, LabelVocab, RelationEncoderParams, RelationTensor};

/// Fixed character inventory: id 0 is the unknown bucket, ids 1..=95 are
/// the printable ASCII characters `' '..='~'`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CharVocab;

impl CharVocab {
    pub const SIZE: usize = 96;
    pub const UNK: usize = 0;

    pub fn id(c: char) -> usize {
        match c {
            ' '..='~' => c as usize - ' ' as usize + 1,
            _ => Self::UNK,
        }
    }
}

/// Model hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub d_model: usize,
    pub heads: usize,
    pub blocks: usize,
    pub d_ff: usize,
    /// Edge-label embedding width.
    pub label_dim: usize,
    /// GRU width per direction.
    pub gru_hidden: usize,
    pub position_signal: bool,
}

impl Default for ModelConfig {
    /// 256-wide characters, 4 heads, 6 blocks, 200-wide label embeddings
    /// and GRUs.
    fn default() -> Self {
        Self {
            d_model: 256,
            heads: 4,
            blocks: 6,
            d_ff: 1024,
            label_dim: 200,
            gru_hidden: 200,
            position_signal: true,
        }
    }
}

impl ModelConfig {
    /// Small dimensions for tests, gradient checks and toy training.
    pub fn toy() -> Self {
        Self {
            d_model: 8,
            heads: 2,
            blocks: 2,
            d_ff: 16,
            label_dim: 4,
            gru_hidden: 4,
            position_signal: true,
        }
    }

    pub fn dims(&self) -> EncoderDims {
        EncoderDims {
            d_model: self.d_model,
            heads: self.heads,
            blocks: self.blocks,
            d_ff: self.d_ff,
            relation_dim: 2 * self.gru_hidden,
            vocab: CharVocab::SIZE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.label_dim == 0 || self.gru_hidden == 0 {
            return Err(Error::Config("label_dim and gru_hidden must be positive".into()));
        }
        self.dims().validate()
    }
}

/// Linear map from encoder output to per-character regression targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub weight: ParamId,
    pub bias: ParamId,
    pub out_dim: usize,
}

/// All trainable state plus the vocabularies it was built against.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamSet,
    pub labels: LabelVocab,
    pub relation: RelationEncoderParams,
    pub stack: EncoderStackParams,
    pub readout: Option<Readout>,
}

impl Model {
    /// Seeded random initialisation; the same seed always yields the same
    /// parameters.
    pub fn new(config: ModelConfig, labels: LabelVocab, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let relation = RelationEncoderParams::register(
            &mut params,
            "relation",
            &labels,
            config.label_dim,
            config.gru_hidden,
            &mut rng,
        )?;
        let stack = EncoderStackParams::register(&mut params, config.dims(), config.position_signal, &mut rng)?;
        Ok(Self {
            config,
            params,
            labels,
            relation,
            stack,
            readout: None,
        })
    }

    /// Adds a `out_dim x d_model` readout layer, drawn from its own seeded
    /// stream so existing parameters are unaffected.
    pub fn with_readout(mut self, out_dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_7ead);
        let weight = self.params.add_uniform("readout.weight", &[out_dim, self.config.d_model], &mut rng)?;
        let bias = self.params.add_zeros("readout.bias", &[out_dim])?;
        self.readout = Some(Readout { weight, bias, out_dim });
        Ok(self)
    }

    /// Replaces parameter values with those loaded from a file. Names and
    /// shapes must match the configured model.
    pub fn load_params(&mut self, loaded: &ParamSet) -> Result<()> {
        self.params.assign_from(loaded)
    }
}

/// One sentence with everything derived from its parse.
#[derive(Debug, Clone)]
pub struct Sentence {
    pub tree: DependencyTree,
    pub alignment: CharAlignment,
    pub graph: SyntaxGraph,
    pub relations: CharRelationMap,
    /// Word characters, in order (separators removed).
    pub chars: Vec<char>,
    pub char_ids: Vec<usize>,
}

impl Sentence {
    pub fn prepare(tree: DependencyTree) -> Result<Self> {
        Self::prepare_with_limit(tree, DEFAULT_MAX_CHARS)
    }

    pub fn prepare_with_limit(tree: DependencyTree, max_chars: usize) -> Result<Self> {
        let alignment = align_characters_with_limit(&tree, " ", max_chars)?;
        let graph = build_syntax_graph(&tree)?;
        let relations = expand_to_characters(&graph, &alignment)?;
        let chars = alignment.node_chars();
        let char_ids = chars.iter().map(|&c| CharVocab::id(c)).collect();
        Ok(Self {
            tree,
            alignment,
            graph,
            relations,
            chars,
            char_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }
}

/// How relation information enters attention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationMode {
    /// Encoded relation paths.
    Syntax,
    /// Relation inputs present but all zero.
    ZeroRelations,
    /// Plain self-attention; no relation path at all.
    Baseline,
}

/// Forward pass for a batch recorded on one tape.
pub struct BatchForward {
    pub distinct: DistinctPaths,
    /// `distinct paths x 2·gru_hidden`; absent in baseline mode.
    pub encodings: Option<NodeId>,
    pub outputs: Vec<EncoderOutput>,
}

impl BatchForward {
    pub fn relation_tensor(&self, tape: &Tape, sentence: usize) -> Option<Result<RelationTensor>> {
        self.encodings
            .map(|e| RelationTensor::new(self.distinct.tables[sentence].clone(), tape.value(e).clone()))
    }
}

/// Encodes the batch's distinct relation paths once, then runs the encoder
/// on every sentence.
pub fn forward_batch(tape: &mut Tape, model: &Model, sentences: &[Sentence], mode: RelationMode) -> Result<BatchForward> {
    let maps: Vec<CharRelationMap> = sentences.iter().map(|s| s.relations.clone()).collect();
    let distinct = distinct_paths_batch(&maps);
    let encodings = match mode {
        RelationMode::Syntax => Some(encode_paths_on_tape(
            tape,
            &model.params,
            &model.relation,
            &model.labels,
            &distinct.paths,
        )?),
        RelationMode::ZeroRelations => Some(tape.constant(Tensor::zeros(&[
            distinct.paths.len().max(1),
            model.relation.output_dim(),
        ]))),
        RelationMode::Baseline => None,
    };
    let mut outputs = Vec::with_capacity(sentences.len());
    for (s, table) in sentences.iter().zip(&distinct.tables) {
        let rel = encodings.map(|e| RelationInput {
            encodings: e,
            pairs: table,
        });
        outputs.push(encoder_forward(tape, &model.params, &s.char_ids, rel.as_ref(), &model.stack)?);
    }
    Ok(BatchForward {
        distinct,
        encodings,
        outputs,
    })
}

/// Forward pass for a single sentence with precomputed relation encodings.
pub fn forward_with_relations(tape: &mut Tape, model: &Model, char_ids: &[usize], relations: &RelationTensor) -> Result<EncoderOutput> {
    let enc = tape.constant(relations.encodings.clone());
    let rel = RelationInput {
        encodings: enc,
        pairs: &relations.pairs,
    };
    encoder_forward(tape, &model.params, char_ids, Some(&rel), &model.stack)
}
