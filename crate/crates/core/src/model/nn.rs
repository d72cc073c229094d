use super::GruParams;
use crate::error::Result;
use crate::params::Session;
use crate::tensor::{NodeId, Tensor};

/// Bound GRU weights.
pub(crate) struct GruNodes {
    pub w_x: NodeId,
    pub w_h: NodeId,
    pub b_x: NodeId,
    pub b_h: NodeId,
}

impl GruNodes {
    pub fn bind(sess: &mut Session, p: &GruParams) -> Self {
        Self {
            w_x: sess.param(p.w_x),
            w_h: sess.param(p.w_h),
            b_x: sess.param(p.b_x),
            b_h: sess.param(p.b_h),
        }
    }

    /// `x W_x + b_x` for any number of rows.
    pub fn project_input(&self, sess: &mut Session, x: NodeId) -> Result<NodeId> {
        let g = &mut sess.graph;
        let xw = g.matmul(x, self.w_x)?;
        g.add_bias(xw, self.b_x)
    }

    /// One GRU update from a projected input `xp: [B, 3H]` and state `h: [B, H]`.
    ///
    /// Gate columns are ordered reset, update, candidate:
    /// `r = σ(x_r + h_r)`, `z = σ(x_z + h_z)`, `n = tanh(x_n + r ⊙ h_n)`,
    /// `h' = n + z ⊙ (h - n)`.
    pub fn step(&self, sess: &mut Session, xp: NodeId, h: NodeId, hidden: usize) -> Result<NodeId> {
        let g = &mut sess.graph;
        let hw = g.matmul(h, self.w_h)?;
        let hp = g.add_bias(hw, self.b_h)?;
        let x_rz = g.slice(xp, 1, 0, 2 * hidden)?;
        let h_rz = g.slice(hp, 1, 0, 2 * hidden)?;
        let pre = g.add(x_rz, h_rz)?;
        let rz = g.sigmoid(pre)?;
        let r = g.slice(rz, 1, 0, hidden)?;
        let z = g.slice(rz, 1, hidden, hidden)?;
        let x_n = g.slice(xp, 1, 2 * hidden, hidden)?;
        let h_n = g.slice(hp, 1, 2 * hidden, hidden)?;
        let gated = g.mul(r, h_n)?;
        let pre_n = g.add(x_n, gated)?;
        let n = g.tanh(pre_n)?;
        let diff = g.sub(h, n)?;
        let keep = g.mul(z, diff)?;
        g.add(n, keep)
    }
}

/// Row `b` of a `[B, width]` 0/1 mask is one when `t < lengths[b]`.
/// Returns `None` when every row is active.
pub(crate) fn step_mask(lengths: &[usize], t: usize, width: usize) -> Option<Tensor> {
    if lengths.iter().all(|&l| t < l) {
        return None;
    }
    let data = lengths
        .iter()
        .flat_map(|&l| std::iter::repeat(if t < l { 1.0 } else { 0.0 }).take(width))
        .collect();
    Some(Tensor::from_parts(vec![lengths.len(), width], data))
}

/// Stacks per-step `[B, D]` nodes into `[B, T, D]`.
pub(crate) fn stack_batch_major(sess: &mut Session, steps: &[NodeId]) -> Result<NodeId> {
    let g = &mut sess.graph;
    let (b, d) = {
        let s = g.shape(steps[0]);
        (s[0], s[1])
    };
    let rows = steps
        .iter()
        .map(|&s| g.reshape(s, &[b, 1, d]))
        .collect::<Result<Vec<_>>>()?;
    if rows.len() == 1 {
        return Ok(rows[0]);
    }
    g.concat(&rows, 1)
}

/// Index of the largest entry, first one on ties.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
