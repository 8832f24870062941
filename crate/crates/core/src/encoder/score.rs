//! Attention scores for a single pair of positions and a single head, on
//! plain vectors. These are the reference forms; the batched layer in
//! [`super::layer`] must agree with them.

use serde::Serialize;

use crate::error::{shape_err, Result};
use crate::numerics::{dot, softmax, Tensor};

fn project(w: &Tensor, x: &[f64]) -> Result<Vec<f64>> {
    if w.cols() != x.len() {
        return shape_err("projection", w.shape(), &[x.len()]);
    }
    Ok((0..w.rows()).map(|k| dot(w.row_slice(k), x)).collect())
}

fn add(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return shape_err("add", &[a.len()], &[b.len()]);
    }
    Ok(a.iter().zip(b).map(|(x, y)| x + y).collect())
}

/// Content-only score `x_i W_qᵀ W_k x_j = (W_q x_i)·(W_k x_j)`.
pub fn baseline_score(x_i: &[f64], x_j: &[f64], w_q: &Tensor, w_k: &Tensor) -> Result<f64> {
    Ok(dot(&project(w_q, x_i)?, &project(w_k, x_j)?))
}

/// Relation-aware score `(x_i + r_fwd) W_qᵀ W_k (x_j + r_bwd)`, evaluated in
/// factored form.
pub fn syntax_score(x_i: &[f64], x_j: &[f64], r_fwd: &[f64], r_bwd: &[f64], w_q: &Tensor, w_k: &Tensor) -> Result<f64> {
    let q = project(w_q, &add(x_i, r_fwd)?)?;
    let k = project(w_k, &add(x_j, r_bwd)?)?;
    Ok(dot(&q, &k))
}

/// The four additive parts of the relation-aware score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreTerms {
    /// `x_i W_qᵀ W_k x_j`
    pub content: f64,
    /// `x_i W_qᵀ W_k r_bwd`
    pub forward_bias: f64,
    /// `r_fwd W_qᵀ W_k x_j`
    pub backward_bias: f64,
    /// `r_fwd W_qᵀ W_k r_bwd`
    pub universal_bias: f64,
}

impl ScoreTerms {
    pub fn total(&self) -> f64 {
        self.content + self.forward_bias + self.backward_bias + self.universal_bias
    }
}

/// Expanded form of [`syntax_score`], for diagnostics.
pub fn score_terms(x_i: &[f64], x_j: &[f64], r_fwd: &[f64], r_bwd: &[f64], w_q: &Tensor, w_k: &Tensor) -> Result<ScoreTerms> {
    let qx = project(w_q, x_i)?;
    let qr = project(w_q, r_fwd)?;
    let kx = project(w_k, x_j)?;
    let kr = project(w_k, r_bwd)?;
    Ok(ScoreTerms {
        content: dot(&qx, &kx),
        forward_bias: dot(&qx, &kr),
        backward_bias: dot(&qr, &kx),
        universal_bias: dot(&qr, &kr),
    })
}

/// Row-wise softmax of `scores / sqrt(d)`.
pub fn attention_weights(scores: &Tensor, d: usize) -> Result<Tensor> {
    let scale = 1.0 / (d as f64).sqrt();
    let c = scores.cols();
    let mut data = Vec::with_capacity(scores.len());
    for r in 0..scores.rows() {
        let row: Vec<f64> = scores.row_slice(r).iter().map(|s| s * scale).collect();
        data.extend(softmax(&row)?);
    }
    Tensor::new(vec![scores.rows(), c], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_projections() {
        let i = Tensor::identity(3);
        assert_eq!(baseline_score(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &i, &i).unwrap(), 0.0);
        assert_eq!(baseline_score(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &i, &i).unwrap(), 1.0);
    }

    #[test]
    fn zero_relations_reduce_to_baseline() {
        let wq = Tensor::from_rows(&[vec![0.3, -1.0, 2.0], vec![1.5, 0.2, -0.7]]).unwrap();
        let wk = Tensor::from_rows(&[vec![-0.4, 0.9, 0.1], vec![0.6, -1.3, 0.8]]).unwrap();
        let (xi, xj) = ([0.2, -0.5, 1.1], [1.0, 0.25, -2.0]);
        let z = [0.0; 3];
        assert_eq!(
            syntax_score(&xi, &xj, &z, &z, &wq, &wk).unwrap(),
            baseline_score(&xi, &xj, &wq, &wk).unwrap()
        );
        let r = [0.7, -0.1, 0.3];
        let only_d = syntax_score(&z, &z, &r, &xj, &wq, &wk).unwrap();
        let t = score_terms(&z, &z, &r, &xj, &wq, &wk).unwrap();
        assert_eq!(only_d, t.universal_bias);
        assert_eq!(t.content, 0.0);
    }

    #[test]
    fn uniform_and_singleton_weights() {
        let w = attention_weights(&Tensor::full(&[4, 4], 2.5), 16).unwrap();
        assert!(w.data().iter().all(|v| (v - 0.25).abs() < 1e-15));
        let one = attention_weights(&Tensor::full(&[1, 1], -3.0), 4).unwrap();
        assert_eq!(one.data(), &[1.0]);
    }

    #[test]
    fn shape_errors() {
        let w = Tensor::identity(2);
        assert!(baseline_score(&[1.0], &[1.0, 2.0], &w, &w).is_err());
        assert!(syntax_score(&[1.0, 2.0], &[1.0, 2.0], &[1.0], &[0.0, 0.0], &w, &w).is_err());
    }
}
