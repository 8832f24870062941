//! Adam and a toy per-character regression task that exercises the whole
//! encoder end to end.

use crate::error::{Error, Result};
use crate::numerics::{NodeId, ParamSet, Tape, Tensor};
use crate::pipeline::{forward_batch, Model, RelationMode, Sentence};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Fixed(f64),
    /// `factor · d_model^-0.5 · min(step^-0.5, step · warmup^-1.5)`
    Warmup { d_model: usize, warmup_steps: usize, factor: f64 },
}

impl LrSchedule {
    pub fn rate(&self, step: usize) -> f64 {
        match *self {
            LrSchedule::Fixed(lr) => lr,
            LrSchedule::Warmup {
                d_model,
                warmup_steps,
                factor,
            } => {
                let s = step.max(1) as f64;
                let w = warmup_steps.max(1) as f64;
                factor * (d_model as f64).powf(-0.5) * s.powf(-0.5).min(s * w.powf(-1.5))
            }
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub schedule: LrSchedule,
    step: usize,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    /// β₁ = 0.9, β₂ = 0.98, ε = 1e-9.
    pub fn new(params: &ParamSet, schedule: LrSchedule) -> Self {
        let zeros = |p: &crate::numerics::Parameter| Tensor::zeros(p.value.shape());
        Self {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
            schedule,
            step: 0,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
        }
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    /// Applies one update from the gradients currently held by `params`.
    pub fn step(&mut self, params: &mut ParamSet) {
        self.step += 1;
        let lr = self.schedule.rate(self.step);
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let g = p.gradient.data();
            let (md, vd) = (m.data_mut(), v.data_mut());
            for (k, value) in p.value.data_mut().iter_mut().enumerate() {
                md[k] = self.beta1 * md[k] + (1.0 - self.beta1) * g[k];
                vd[k] = self.beta2 * vd[k] + (1.0 - self.beta2) * g[k] * g[k];
                let m_hat = md[k] / c1;
                let v_hat = vd[k] / c2;
                *value -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic per-character targets in `[-1, 1]`, one row per character.
pub fn pseudo_targets(chars: &[char], dim: usize) -> Tensor {
    let mut data = Vec::with_capacity(chars.len() * dim);
    for &c in chars {
        for k in 0..dim {
            let mut key = (c as u32).to_le_bytes().to_vec();
            key.extend((k as u32).to_le_bytes());
            data.push((fnv1a(&key) % 2001) as f64 / 1000.0 - 1.0);
        }
    }
    Tensor::from_parts(vec![chars.len(), dim], data)
}

/// Mean squared error between the readout of the encoder output and the
/// pseudo-targets, recorded on `tape`.
pub fn toy_loss(tape: &mut Tape, model: &Model, sentence: &Sentence, mode: RelationMode) -> Result<NodeId> {
    let readout = model
        .readout
        .as_ref()
        .ok_or_else(|| Error::Config("toy training needs a readout layer".into()))?;
    let fwd = forward_batch(tape, model, std::slice::from_ref(sentence), mode)?;
    let out = fwd.outputs[0].output;
    let w = tape.param(&model.params, readout.weight);
    let b = tape.param(&model.params, readout.bias);
    let pred = tape.matmul_t(out, w)?;
    let pred = tape.add_row(pred, b)?;
    let target = tape.constant(pseudo_targets(&sentence.chars, readout.out_dim));
    let diff = tape.sub(pred, target)?;
    let sq = tape.mul(diff, diff)?;
    let total = tape.sum_all(sq);
    Ok(tape.scale(total, 1.0 / (sentence.len() * readout.out_dim) as f64))
}

/// Mean toy loss over the corpus at the current parameters.
pub fn corpus_loss(model: &Model, corpus: &[Sentence], mode: RelationMode) -> Result<f64> {
    let mut total = 0.0;
    for s in corpus {
        let mut tape = Tape::new();
        let loss = toy_loss(&mut tape, model, s, mode)?;
        total += tape.value(loss).data()[0];
    }
    Ok(total / corpus.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub schedule: LrSchedule,
    pub mode: RelationMode,
}

/// Trains with one Adam step per sentence, in corpus order. Returns the
/// corpus loss before training followed by the loss after each epoch.
pub fn toy_train(model: &mut Model, corpus: &[Sentence], options: TrainOptions) -> Result<Vec<f64>> {
    if corpus.is_empty() {
        return Err(Error::Argument("toy training needs at least one sentence".into()));
    }
    let mut adam = Adam::new(&model.params, options.schedule);
    let mut curve = Vec::with_capacity(options.epochs + 1);
    curve.push(corpus_loss(model, corpus, options.mode)?);
    for _ in 0..options.epochs {
        for s in corpus {
            model.params.zero_grad();
            let mut tape = Tape::new();
            let loss = toy_loss(&mut tape, model, s, options.mode)?;
            tape.backward(loss, &mut model.params)?;
            adam.step(&mut model.params);
        }
        let l = corpus_loss(model, corpus, options.mode)?;
        if !l.is_finite() {
            return Err(Error::Numeric {
                context: format!("toy loss after epoch {}", curve.len()),
            });
        }
        curve.push(l);
    }
    Ok(curve)
}
