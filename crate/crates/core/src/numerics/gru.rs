use rand::Rng;

use super::params::{ParamId, ParamSet};
use super::tape::{NodeId, Tape};
use super::tensor::{dot, sigmoid, Tensor};
use crate::error::{shape_err, Error, Result};

/// Parameter handles for one GRU cell (update gate `z`, reset gate `r`,
/// candidate state). Input weights are `hidden x input`, recurrent weights
/// `hidden x hidden`, biases have length `hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCellParams {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_h: ParamId,
    pub u_h: ParamId,
    pub b_h: ParamId,
}

impl GruCellParams {
    /// Registers the nine tensors under `prefix.*`. Matrices are
    /// Glorot-uniform, biases zero.
    pub fn register<R: Rng + ?Sized>(
        set: &mut ParamSet,
        prefix: &str,
        input_size: usize,
        hidden_size: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input_size == 0 || hidden_size == 0 {
            return Err(Error::Argument("GRU sizes must be positive".into()));
        }
        let (i, h) = (input_size, hidden_size);
        Ok(Self {
            input_size,
            hidden_size,
            w_z: set.add_uniform(format!("{prefix}.w_z"), &[h, i], rng)?,
            u_z: set.add_uniform(format!("{prefix}.u_z"), &[h, h], rng)?,
            b_z: set.add_zeros(format!("{prefix}.b_z"), &[h])?,
            w_r: set.add_uniform(format!("{prefix}.w_r"), &[h, i], rng)?,
            u_r: set.add_uniform(format!("{prefix}.u_r"), &[h, h], rng)?,
            b_r: set.add_zeros(format!("{prefix}.b_r"), &[h])?,
            w_h: set.add_uniform(format!("{prefix}.w_h"), &[h, i], rng)?,
            u_h: set.add_uniform(format!("{prefix}.u_h"), &[h, h], rng)?,
            b_h: set.add_zeros(format!("{prefix}.b_h"), &[h])?,
        })
    }

    pub fn ids(&self) -> [ParamId; 9] {
        [
            self.w_z, self.u_z, self.b_z, self.w_r, self.u_r, self.b_r, self.w_h, self.u_h, self.b_h,
        ]
    }
}

/// `out[k] = W[k,:]·x + U[k,:]·h + b[k]`
fn gate_preactivation(set: &ParamSet, w: ParamId, u: ParamId, b: ParamId, x: &[f64], h: &[f64]) -> Vec<f64> {
    let (w, u, b) = (set.value(w), set.value(u), set.value(b));
    (0..b.len())
        .map(|k| dot(w.row_slice(k), x) + dot(u.row_slice(k), h) + b.data()[k])
        .collect()
}

/// One GRU step on plain vectors:
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
/// h' = (1 - z) ⊙ h + z ⊙ h̃
/// ```
pub fn gru_cell_forward(set: &ParamSet, cell: &GruCellParams, h_prev: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != cell.input_size {
        return shape_err("gru input", &[cell.input_size], &[x.len()]);
    }
    if h_prev.len() != cell.hidden_size {
        return shape_err("gru hidden", &[cell.hidden_size], &[h_prev.len()]);
    }
    let z: Vec<f64> = gate_preactivation(set, cell.w_z, cell.u_z, cell.b_z, x, h_prev)
        .into_iter()
        .map(sigmoid)
        .collect();
    let r: Vec<f64> = gate_preactivation(set, cell.w_r, cell.u_r, cell.b_r, x, h_prev)
        .into_iter()
        .map(sigmoid)
        .collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    let cand: Vec<f64> = gate_preactivation(set, cell.w_h, cell.u_h, cell.b_h, x, &rh)
        .into_iter()
        .map(f64::tanh)
        .collect();
    Ok((0..cell.hidden_size)
        .map(|k| (1.0 - z[k]) * h_prev[k] + z[k] * cand[k])
        .collect())
}

/// Handles to a GRU cell's parameters after they were loaded onto a tape.
#[derive(Debug, Clone, Copy)]
pub struct GruNodes {
    w_z: NodeId,
    u_z: NodeId,
    b_z: NodeId,
    w_r: NodeId,
    u_r: NodeId,
    b_r: NodeId,
    w_h: NodeId,
    u_h: NodeId,
    b_h: NodeId,
    ones: NodeId,
}

impl GruNodes {
    pub fn load(tape: &mut Tape, set: &ParamSet, cell: &GruCellParams) -> Self {
        Self {
            w_z: tape.param(set, cell.w_z),
            u_z: tape.param(set, cell.u_z),
            b_z: tape.param(set, cell.b_z),
            w_r: tape.param(set, cell.w_r),
            u_r: tape.param(set, cell.u_r),
            b_r: tape.param(set, cell.b_r),
            w_h: tape.param(set, cell.w_h),
            u_h: tape.param(set, cell.u_h),
            b_h: tape.param(set, cell.b_h),
            ones: tape.constant(Tensor::full(&[1, cell.hidden_size], 1.0)),
        }
    }

    /// Same update as [`gru_cell_forward`], recorded for differentiation.
    /// `h` and `x` are `1 x hidden` and `1 x input` rows.
    pub fn step(&self, tape: &mut Tape, h: NodeId, x: NodeId) -> Result<NodeId> {
        let gate = |tape: &mut Tape, w, u, b, hin| -> Result<NodeId> {
            let wx = tape.matmul_t(x, w)?;
            let uh = tape.matmul_t(hin, u)?;
            let s = tape.add(wx, uh)?;
            tape.add_row(s, b)
        };
        let z_pre = gate(tape, self.w_z, self.u_z, self.b_z, h)?;
        let z = tape.sigmoid(z_pre);
        let r_pre = gate(tape, self.w_r, self.u_r, self.b_r, h)?;
        let r = tape.sigmoid(r_pre);
        let rh = tape.mul(r, h)?;
        let c_pre = gate(tape, self.w_h, self.u_h, self.b_h, rh)?;
        let cand = tape.tanh(c_pre);
        let keep = tape.sub(self.ones, z)?;
        let kept = tape.mul(keep, h)?;
        let fresh = tape.mul(z, cand)?;
        tape.add(kept, fresh)
    }
}
