use rand::Rng;
use serde::Serialize;

use super::vocab::LabelVocab;
use crate::error::{shape_err, Error, Result};
use crate::graph::{CharRelationMap, DirectedLabel, PairIndex};
use crate::numerics::{gru_cell_forward, GruCellParams, GruNodes, NodeId, ParamId, ParamSet, Tape, Tensor};

/// Label embeddings plus a forward and a backward GRU.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationEncoderParams {
    pub label_dim: usize,
    pub hidden_dim: usize,
    /// `vocab x label_dim`
    pub embedding: ParamId,
    pub gru_fwd: GruCellParams,
    pub gru_bwd: GruCellParams,
}

impl RelationEncoderParams {
    pub fn register<R: Rng + ?Sized>(
        set: &mut ParamSet,
        prefix: &str,
        vocab: &LabelVocab,
        label_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let embedding = set.add_uniform(format!("{prefix}.label_embedding"), &[vocab.len(), label_dim], rng)?;
        let gru_fwd = GruCellParams::register(set, &format!("{prefix}.gru_fwd"), label_dim, hidden_dim, rng)?;
        let gru_bwd = GruCellParams::register(set, &format!("{prefix}.gru_bwd"), label_dim, hidden_dim, rng)?;
        Ok(Self {
            label_dim,
            hidden_dim,
            embedding,
            gru_fwd,
            gru_bwd,
        })
    }

    /// Length of an encoding `r_ij`: both final states concatenated.
    pub fn output_dim(&self) -> usize {
        2 * self.hidden_dim
    }

    pub fn ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.embedding];
        ids.extend(self.gru_fwd.ids());
        ids.extend(self.gru_bwd.ids());
        ids
    }
}

fn label_ids(path: &[DirectedLabel], vocab: &LabelVocab) -> Result<Vec<usize>> {
    if path.is_empty() {
        return Err(Error::Argument("relation paths are never empty".into()));
    }
    Ok(path.iter().map(|l| vocab.lookup(l)).collect())
}

/// Encodes one label sequence: the forward GRU reads it left to right and
/// the backward GRU right to left, both from a zero state; the result is
/// `[forward final state; backward final state]`.
pub fn encode_path(
    path: &[DirectedLabel],
    set: &ParamSet,
    params: &RelationEncoderParams,
    vocab: &LabelVocab,
) -> Result<Vec<f64>> {
    let ids = label_ids(path, vocab)?;
    let table = set.value(params.embedding);
    let mut fwd = vec![0.0; params.hidden_dim];
    for &id in &ids {
        fwd = gru_cell_forward(set, &params.gru_fwd, &fwd, table.row_slice(id))?;
    }
    let mut bwd = vec![0.0; params.hidden_dim];
    for &id in ids.iter().rev() {
        bwd = gru_cell_forward(set, &params.gru_bwd, &bwd, table.row_slice(id))?;
    }
    fwd.extend(bwd);
    Ok(fwd)
}

/// Encodes each distinct path exactly once.
pub fn encode_distinct_batch(
    paths: &[Vec<DirectedLabel>],
    set: &ParamSet,
    params: &RelationEncoderParams,
    vocab: &LabelVocab,
) -> Result<Vec<Vec<f64>>> {
    paths.iter().map(|p| encode_path(p, set, params, vocab)).collect()
}

/// Reference encoding that calls [`encode_path`] once per character pair,
/// row-major over the `m x m` pairs.
pub fn encode_pairs_naive(
    map: &CharRelationMap,
    set: &ParamSet,
    params: &RelationEncoderParams,
    vocab: &LabelVocab,
) -> Result<Vec<Vec<f64>>> {
    let m = map.node_count();
    let mut out = Vec::with_capacity(m * m);
    for a in 0..m {
        for b in 0..m {
            out.push(encode_path(&map.get(a, b).labels, set, params, vocab)?);
        }
    }
    Ok(out)
}

/// Records the encoding of every path on `tape`, returning a
/// `paths x 2·hidden` matrix whose row `k` is `r` for `paths[k]`.
pub fn encode_paths_on_tape(
    tape: &mut Tape,
    set: &ParamSet,
    params: &RelationEncoderParams,
    vocab: &LabelVocab,
    paths: &[Vec<DirectedLabel>],
) -> Result<NodeId> {
    let emb = tape.param(set, params.embedding);
    let fwd = GruNodes::load(tape, set, &params.gru_fwd);
    let bwd = GruNodes::load(tape, set, &params.gru_bwd);
    let zero = tape.constant(Tensor::zeros(&[1, params.hidden_dim]));
    let mut rows = Vec::with_capacity(paths.len());
    for path in paths {
        let ids = label_ids(path, vocab)?;
        let inputs = ids
            .iter()
            .map(|&id| tape.gather_rows(emb, vec![id]))
            .collect::<Result<Vec<_>>>()?;
        let mut hf = zero;
        for &x in &inputs {
            hf = fwd.step(tape, hf, x)?;
        }
        let mut hb = zero;
        for &x in inputs.iter().rev() {
            hb = bwd.step(tape, hb, x)?;
        }
        rows.push(tape.concat_cols(vec![hf, hb])?);
    }
    tape.concat_rows(rows)
}

/// `[r_fwd; r_bwd] = W_r · r`: first half forward, second half backward.
pub fn split_directional(r: &[f64], w_r: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
    if w_r.cols() != r.len() || w_r.rows() % 2 != 0 {
        return shape_err("split_directional", w_r.shape(), &[r.len()]);
    }
    let y = w_r.matmul(&Tensor::new(vec![r.len(), 1], r.to_vec())?)?;
    let half = w_r.rows() / 2;
    let data = y.into_data();
    Ok((data[..half].to_vec(), data[half..].to_vec()))
}

/// Relation encodings of one sentence, stored once per distinct path and
/// addressed through a character-pair index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationTensor {
    pub pairs: PairIndex,
    /// `distinct paths x 2·hidden`
    #[serde(skip)]
    pub encodings: Tensor,
}

impl RelationTensor {
    pub fn new(pairs: PairIndex, encodings: Tensor) -> Result<Self> {
        if let Some(&bad) = pairs.index.iter().find(|&&k| k >= encodings.rows()) {
            return Err(Error::Argument(format!(
                "pair index refers to path {bad}, only {} encodings",
                encodings.rows()
            )));
        }
        if pairs.index.len() != pairs.nodes * pairs.nodes {
            return Err(Error::Argument("pair index must cover every ordered pair".into()));
        }
        Ok(Self { pairs, encodings })
    }

    /// All-zero encodings over the given pair layout.
    pub fn zeros(pairs: PairIndex, paths: usize, dim: usize) -> Result<Self> {
        Self::new(pairs, Tensor::zeros(&[paths.max(1), dim]))
    }

    pub fn nodes(&self) -> usize {
        self.pairs.nodes
    }

    pub fn pair(&self, a: usize, b: usize) -> &[f64] {
        self.encodings.row_slice(self.pairs.get(a, b))
    }

    /// Expands to a dense `m² x dim` tensor, row `a * m + b` for pair `(a, b)`.
    pub fn scatter(&self) -> Tensor {
        let dim = self.encodings.cols();
        let mut data = Vec::with_capacity(self.pairs.index.len() * dim);
        for &k in &self.pairs.index {
            data.extend_from_slice(self.encodings.row_slice(k));
        }
        Tensor::from_parts(vec![self.pairs.index.len(), dim], data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(label_dim: usize, hidden: usize, seed: u64) -> (ParamSet, RelationEncoderParams, LabelVocab) {
        let vocab = LabelVocab::from_base_labels(["a", "b"]);
        let mut set = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = RelationEncoderParams::register(&mut set, "rel", &vocab, label_dim, hidden, &mut rng).unwrap();
        (set, p, vocab)
    }

    #[test]
    fn zero_parameters_give_zero_encoding() {
        let (mut set, p, vocab) = setup(3, 4, 1);
        for param in set.iter_mut() {
            param.value.data_mut().fill(0.0);
        }
        let path = vec![DirectedLabel::fwd("a"), DirectedLabel::rev("b")];
        assert_eq!(encode_path(&path, &set, &p, &vocab).unwrap(), vec![0.0; 8]);
    }

    #[test]
    fn scalar_single_label_matches_hand_computation() {
        let (mut set, p, vocab) = setup(1, 1, 2);
        let self_emb = 0.8;
        set.get_mut(p.embedding).value.data_mut()[0] = self_emb;
        let weights = [0.4, -0.7, 0.05, 1.1, 0.3, -0.2, -0.9, 0.6, 0.15];
        for (cell, sign) in [(&p.gru_fwd, 1.0), (&p.gru_bwd, -1.0)] {
            for (id, w) in cell.ids().into_iter().zip(weights) {
                set.get_mut(id).value.data_mut()[0] = sign * w;
            }
        }
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let step = |sign: f64| {
            let [wz, _uz, bz, wr, _ur, br, wh, _uh, bh] = weights.map(|w| sign * w);
            let x = self_emb;
            let z = s(wz * x + bz);
            let _r = s(wr * x + br);
            let cand = (wh * x + bh).tanh();
            z * cand
        };
        let got = encode_path(&[DirectedLabel::self_loop()], &set, &p, &vocab).unwrap();
        assert!((got[0] - step(1.0)).abs() < 1e-15);
        assert!((got[1] - step(-1.0)).abs() < 1e-15);
    }

    #[test]
    fn order_matters() {
        for seed in 0..20 {
            let (set, p, vocab) = setup(4, 3, seed);
            let ab = encode_path(&[DirectedLabel::fwd("a"), DirectedLabel::fwd("b")], &set, &p, &vocab).unwrap();
            let ba = encode_path(&[DirectedLabel::fwd("b"), DirectedLabel::fwd("a")], &set, &p, &vocab).unwrap();
            assert_ne!(ab, ba, "seed {seed}");
        }
    }

    #[test]
    fn empty_path_rejected() {
        let (set, p, vocab) = setup(2, 2, 0);
        assert!(encode_path(&[], &set, &p, &vocab).is_err());
    }

    #[test]
    fn tape_matches_plain() {
        let (set, p, vocab) = setup(5, 4, 9);
        let paths = vec![
            vec![DirectedLabel::self_loop()],
            vec![DirectedLabel::fwd("a"), DirectedLabel::rev("b"), DirectedLabel::fwd("zzz")],
        ];
        let plain = encode_distinct_batch(&paths, &set, &p, &vocab).unwrap();
        let mut tape = Tape::new();
        let node = encode_paths_on_tape(&mut tape, &set, &p, &vocab, &paths).unwrap();
        let v = tape.value(node);
        assert_eq!(v.shape(), &[2, 8]);
        for (k, row) in plain.iter().enumerate() {
            let d = row.iter().zip(v.row_slice(k)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(d < 1e-15);
        }
    }

    #[test]
    fn split_examples() {
        let r = [0.5, -1.0, 2.0, 3.0];
        let (f, b) = split_directional(&r, &Tensor::zeros(&[4, 4])).unwrap();
        assert_eq!((f, b), (vec![0.0; 2], vec![0.0; 2]));
        let (f, b) = split_directional(&r, &Tensor::identity(4)).unwrap();
        assert_eq!(f, vec![0.5, -1.0]);
        assert_eq!(b, vec![2.0, 3.0]);
        assert!(split_directional(&r, &Tensor::zeros(&[4, 3])).is_err());
    }
}
