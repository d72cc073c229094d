use super::nn::{argmax, GruNodes};
use super::{AttentionParams, Decoder, Encoded, Model};
use crate::error::{Error, Result};
use crate::params::Session;
use crate::tensor::{NodeId, Tensor};
use crate::text::{BOS, EOS, PAD};

/// Recurrent state carried between decoder steps.
#[derive(Clone, Debug)]
pub struct DecoderState {
    /// One `[B, hidden]` state per layer.
    pub layers: Vec<NodeId>,
    /// Context vector of the previous step, `[B, 2·hidden]`; zeros before
    /// the first step.
    pub context: NodeId,
}

/// Output of one decoder step.
#[derive(Clone, Debug)]
pub struct Step {
    /// `[B, V]` next-token distribution.
    pub probs: NodeId,
    /// `A_t`: `[B, 2·hidden]`.
    pub context: NodeId,
    /// `a_·t`: `[B, 1, n]`.
    pub weights: NodeId,
    pub state: DecoderState,
}

#[derive(Clone, Copy, Debug)]
pub enum DecodeMode<'a> {
    /// Feed the gold previous token; one step per target token.
    TeacherForced(&'a [Vec<usize>]),
    /// Feed the model's own argmax until it emits EOS or reaches the
    /// per-sentence cap.
    FreeRunning(&'a [usize]),
}

/// A decoded batch.
#[derive(Clone, Debug)]
pub struct Decoded {
    pub which: Decoder,
    pub steps: Vec<Step>,
    /// `m` for each sentence: the number of steps that belong to it.
    pub lengths: Vec<usize>,
    /// Argmax token at each of a sentence's steps. In free-running mode
    /// these are the emitted tokens, ending with EOS when one was produced.
    pub tokens: Vec<Vec<usize>>,
}

impl Decoded {
    /// Context vectors `A_1..A_m` of sentence `b`.
    pub fn contexts(&self, sess: &Session, b: usize) -> Vec<Vec<f64>> {
        self.steps[..self.lengths[b]]
            .iter()
            .map(|s| {
                let v = sess.graph.value(s.context);
                let d = v.shape()[1];
                v.data()[b * d..(b + 1) * d].to_vec()
            })
            .collect()
    }

    /// The `m × n` attention-weight matrix of sentence `b` (rows are steps,
    /// restricted to the real source positions).
    pub fn attention(&self, sess: &Session, b: usize, source_len: usize) -> Vec<Vec<f64>> {
        self.steps[..self.lengths[b]]
            .iter()
            .map(|s| {
                let v = sess.graph.value(s.weights);
                let n = v.shape()[2];
                v.data()[b * n..b * n + source_len].to_vec()
            })
            .collect()
    }

    /// Probability row of sentence `b` at step `t`.
    pub fn distribution<'s>(&self, sess: &'s Session, b: usize, t: usize) -> &'s [f64] {
        let v = sess.graph.value(self.steps[t].probs);
        let vocab = v.shape()[1];
        &v.data()[b * vocab..(b + 1) * vocab]
    }
}

impl Model {
    /// Per-decoder attention keys for `enc`: `H W` for bilinear scoring,
    /// `H W_k` for additive scoring, `[B, n, ·]` in both cases.
    pub fn attention_keys(&self, sess: &mut Session, which: Decoder, enc: &Encoded) -> Result<NodeId> {
        let w = match self.decoder_params(which).attention {
            AttentionParams::Bilinear { w } => w,
            AttentionParams::Additive { w_k, .. } => w_k,
        };
        let w = sess.param(w);
        let g = &mut sess.graph;
        let shape = g.shape(enc.states).to_vec();
        let (b, n, c) = (shape[0], shape[1], shape[2]);
        let flat = g.reshape(enc.states, &[b * n, c])?;
        let k = g.matmul(flat, w)?;
        let width = g.shape(k)[1];
        g.reshape(k, &[b, n, width])
    }

    /// Global attention of `query: [B, hidden]` over `enc`:
    /// `a_·t = softmax(scores)` over real positions, `A_t = Σ_i a_it h_i`.
    /// Returns `(A_t: [B, 2·hidden], a_·t: [B, 1, n])`.
    pub fn attend(
        &self,
        sess: &mut Session,
        which: Decoder,
        enc: &Encoded,
        keys: NodeId,
        query: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let (b, n) = {
            let s = sess.graph.shape(enc.states);
            (s[0], s[1])
        };
        let scores = match self.decoder_params(which).attention {
            AttentionParams::Bilinear { .. } => {
                let g = &mut sess.graph;
                let h = g.shape(query)[1];
                let q = g.reshape(query, &[b, h, 1])?;
                let s = g.batch_matmul(keys, q)?;
                g.reshape(s, &[b, 1, n])?
            }
            AttentionParams::Additive { w_q, v, .. } => {
                let (w_q, v) = (sess.param(w_q), sess.param(v));
                let g = &mut sess.graph;
                let a = g.shape(keys)[2];
                let q = g.matmul(query, w_q)?;
                let q = g.reshape(q, &[b, 1, a])?;
                let ones = g.input(Tensor::filled(&[b, n, 1], 1.0));
                let spread = g.batch_matmul(ones, q)?;
                let pre = g.add(keys, spread)?;
                let e = g.tanh(pre)?;
                let flat = g.reshape(e, &[b * n, a])?;
                let s = g.matmul(flat, v)?;
                g.reshape(s, &[b, 1, n])?
            }
        };
        let g = &mut sess.graph;
        let masked = g.add(scores, enc.score_mask)?;
        let weights = g.softmax(masked, 2)?;
        let ctx = g.batch_matmul(weights, enc.states)?;
        let c = g.shape(enc.states)[2];
        let ctx = g.reshape(ctx, &[b, c])?;
        Ok((ctx, weights))
    }

    /// Initial decoder state: each layer starts from an affine map of the
    /// matching encoder layer's final forward and backward states.
    pub fn initial_state(&self, sess: &mut Session, which: Decoder, enc: &Encoded) -> Result<DecoderState> {
        let p = self.decoder_params(which);
        let mut layers = Vec::with_capacity(p.layers.len());
        for (l, &(w, bias)) in p.init.iter().enumerate() {
            let src = enc.finals[l.min(enc.finals.len() - 1)];
            let (w, bias) = (sess.param(w), sess.param(bias));
            let g = &mut sess.graph;
            let proj = g.matmul(src, w)?;
            layers.push(g.add_bias(proj, bias)?);
        }
        let context = sess
            .graph
            .input(Tensor::zeros(&[enc.batch(), self.config.context_dim()]));
        Ok(DecoderState { layers, context })
    }

    /// One step: embed `prev`, feed it with the previous context through
    /// the GRU stack, attend with the top state, and predict the next token
    /// from the top state and the new context.
    pub fn decode_step(
        &self,
        sess: &mut Session,
        which: Decoder,
        enc: &Encoded,
        keys: NodeId,
        prev: &[usize],
        state: &DecoderState,
    ) -> Result<Step> {
        let p = self.decoder_params(which);
        let h = self.config.hidden;
        let table = sess.param(p.embedding);
        let emb = sess.graph.gather(table, prev)?;
        let mut input = sess.graph.concat(&[emb, state.context], 1)?;
        let mut layers = Vec::with_capacity(p.layers.len());
        for (params, &prev_state) in p.layers.iter().zip(&state.layers) {
            let gru = GruNodes::bind(sess, params);
            let xp = gru.project_input(sess, input)?;
            input = gru.step(sess, xp, prev_state, h)?;
            layers.push(input);
        }
        let top = input;
        let (context, weights) = self.attend(sess, which, enc, keys, top)?;
        let (w_out, b_out) = (sess.param(p.w_out), sess.param(p.b_out));
        let g = &mut sess.graph;
        let features = g.concat(&[top, context], 1)?;
        let logits = g.matmul(features, w_out)?;
        let logits = g.add_bias(logits, b_out)?;
        let probs = g.softmax(logits, 1)?;
        Ok(Step {
            probs,
            context,
            weights,
            state: DecoderState { layers, context },
        })
    }

    /// Decodes a whole batch through one decoder.
    pub fn decode(&self, sess: &mut Session, which: Decoder, enc: &Encoded, mode: DecodeMode) -> Result<Decoded> {
        let b = enc.batch();
        let keys = self.attention_keys(sess, which, enc)?;
        let mut state = self.initial_state(sess, which, enc)?;
        let mut prev = vec![BOS; b];
        let mut steps = Vec::new();
        let mut tokens = vec![Vec::new(); b];
        match mode {
            DecodeMode::TeacherForced(targets) => {
                if targets.len() != b {
                    return Err(Error::Contract(format!("{} targets for a batch of {b}", targets.len())));
                }
                if targets.iter().any(Vec::is_empty) {
                    return Err(Error::EmptyInput("teacher forcing needs a non-empty target".into()));
                }
                let lengths: Vec<usize> = targets.iter().map(Vec::len).collect();
                let steps_needed = *lengths.iter().max().unwrap();
                for t in 0..steps_needed {
                    let step = self.decode_step(sess, which, enc, keys, &prev, &state)?;
                    for (i, target) in targets.iter().enumerate() {
                        if t < target.len() {
                            tokens[i].push(argmax(step_row(sess, step.probs, i)));
                        }
                        prev[i] = target.get(t).copied().unwrap_or(PAD);
                    }
                    state = step.state.clone();
                    steps.push(step);
                }
                Ok(Decoded {
                    which,
                    steps,
                    lengths,
                    tokens,
                })
            }
            DecodeMode::FreeRunning(caps) => {
                if caps.len() != b {
                    return Err(Error::Contract(format!("{} length caps for a batch of {b}", caps.len())));
                }
                if caps.contains(&0) {
                    return Err(Error::Contract("free-running decode needs max_len >= 1".into()));
                }
                let mut done = vec![false; b];
                while done.iter().any(|d| !d) {
                    let step = self.decode_step(sess, which, enc, keys, &prev, &state)?;
                    for i in 0..b {
                        if done[i] {
                            prev[i] = PAD;
                            continue;
                        }
                        let tok = argmax(step_row(sess, step.probs, i));
                        tokens[i].push(tok);
                        prev[i] = tok;
                        done[i] = tok == EOS || tokens[i].len() >= caps[i];
                    }
                    state = step.state.clone();
                    steps.push(step);
                }
                let lengths = tokens.iter().map(Vec::len).collect();
                Ok(Decoded {
                    which,
                    steps,
                    lengths,
                    tokens,
                })
            }
        }
    }
}

fn step_row<'s>(sess: &'s Session, probs: NodeId, b: usize) -> &'s [f64] {
    let v = sess.graph.value(probs);
    let vocab = v.shape()[1];
    &v.data()[b * vocab..(b + 1) * vocab]
}
