use super::nn::{stack_batch_major, step_mask, GruNodes};
use super::Model;
use crate::error::{Error, Result};
use crate::params::Session;
use crate::tensor::{NodeId, Tensor};
use crate::text::PAD;

/// Encoder output for a batch of sources.
#[derive(Clone, Debug)]
pub struct Encoded {
    /// `H`: `[B, n, 2·hidden]`; positions past a source's length are padding.
    pub states: NodeId,
    /// `[B, 1, n]`: 0 on real positions, a large negative number on padding.
    pub score_mask: NodeId,
    /// Per layer, the forward and backward final states joined: `[B, 2·hidden]`.
    pub finals: Vec<NodeId>,
    pub lengths: Vec<usize>,
}

impl Encoded {
    pub fn batch(&self) -> usize {
        self.lengths.len()
    }

    pub fn max_len(&self) -> usize {
        self.lengths.iter().copied().max().unwrap_or(0)
    }

    /// `h_1..h_n` of one source, each of dimension `2·hidden`.
    pub fn hidden_sequence(&self, sess: &Session, b: usize) -> Vec<Vec<f64>> {
        let v = sess.graph.value(self.states);
        let (n, d) = (v.shape()[1], v.shape()[2]);
        (0..self.lengths[b])
            .map(|i| v.data()[(b * n + i) * d..(b * n + i + 1) * d].to_vec())
            .collect()
    }
}

const MASKED: f64 = -1e9;

impl Model {
    /// Runs the stacked bidirectional GRU over `batch` (token ids, no
    /// boundary markers). Shorter sources are padded and their padding
    /// steps leave the recurrent state untouched.
    pub fn encode(&self, sess: &mut Session, batch: &[Vec<usize>]) -> Result<Encoded> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("encoder batch is empty".into()));
        }
        if batch.iter().any(Vec::is_empty) {
            return Err(Error::EmptyInput("cannot encode an empty sentence".into()));
        }
        let b = batch.len();
        let h = self.config.hidden;
        let lengths: Vec<usize> = batch.iter().map(Vec::len).collect();
        let n = *lengths.iter().max().unwrap();

        let time_major: Vec<usize> = (0..n)
            .flat_map(|t| batch.iter().map(move |s| s.get(t).copied().unwrap_or(PAD)))
            .collect();
        let table = sess.param(self.ids.embedding);
        let mut x = sess.graph.gather(table, &time_major)?;

        let masks: Vec<Option<NodeId>> = (0..n)
            .map(|t| step_mask(&lengths, t, h).map(|m| sess.graph.input(m)))
            .collect();
        let zero = sess.graph.input(Tensor::zeros(&[b, h]));

        let mut finals = Vec::with_capacity(self.ids.encoder.len());
        let mut states = None;
        for (layer, dirs) in self.ids.encoder.iter().enumerate() {
            let mut outputs: [Vec<NodeId>; 2] = [Vec::new(), Vec::new()];
            let mut last = [zero; 2];
            for (dir, params) in dirs.iter().enumerate() {
                let gru = GruNodes::bind(sess, params);
                let xp = gru.project_input(sess, x)?;
                let mut state = zero;
                let mut out = vec![zero; n];
                let order: Box<dyn Iterator<Item = usize>> =
                    if dir == 0 { Box::new(0..n) } else { Box::new((0..n).rev()) };
                for t in order {
                    let xt = sess.graph.slice(xp, 0, t * b, b)?;
                    let next = gru.step(sess, xt, state, h)?;
                    state = match masks[t] {
                        None => next,
                        Some(m) => {
                            let g = &mut sess.graph;
                            let delta = g.sub(next, state)?;
                            let kept = g.mul(m, delta)?;
                            g.add(state, kept)?
                        }
                    };
                    out[t] = state;
                }
                outputs[dir] = out;
                last[dir] = state;
            }
            finals.push(sess.graph.concat(&last, 1)?);
            let joined = (0..n)
                .map(|t| sess.graph.concat(&[outputs[0][t], outputs[1][t]], 1))
                .collect::<Result<Vec<_>>>()?;
            if layer + 1 < self.ids.encoder.len() {
                x = if n == 1 { joined[0] } else { sess.graph.concat(&joined, 0)? };
            } else {
                states = Some(stack_batch_major(sess, &joined)?);
            }
        }

        let mask: Vec<f64> = lengths
            .iter()
            .flat_map(|&l| (0..n).map(move |i| if i < l { 0.0 } else { MASKED }))
            .collect();
        let score_mask = sess.graph.input(Tensor::new(vec![b, 1, n], mask)?);
        Ok(Encoded {
            states: states.expect("at least one encoder layer"),
            score_mask,
            finals,
            lengths,
        })
    }
}
