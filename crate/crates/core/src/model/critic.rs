use super::nn::stack_batch_major;
use super::{Decoded, Model};
use crate::error::{Error, Result};
use crate::params::Session;
use crate::tensor::{NodeId, Tensor};

/// The two output layers over the shared convolution stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    /// `D`: simple-domain trace vs complex-input trace through `G_s`.
    Discriminator,
    /// `C`: `G_s` trace vs `G_d` trace.
    Classifier,
}

/// A batch of attention traces, zero-padded to a common length.
#[derive(Clone, Debug)]
pub struct Trace {
    /// `[B, T, 2·hidden]`.
    pub node: NodeId,
    pub lengths: Vec<usize>,
}

impl Trace {
    /// Builds a constant trace batch from raw context vectors.
    pub fn from_vectors(sess: &mut Session, traces: &[Vec<Vec<f64>>], min_len: usize) -> Result<Trace> {
        if traces.is_empty() || traces.iter().any(Vec::is_empty) {
            return Err(Error::EmptyInput("attention trace is empty".into()));
        }
        let d = traces[0][0].len();
        let lengths: Vec<usize> = traces.iter().map(Vec::len).collect();
        let t = lengths.iter().copied().max().unwrap().max(min_len);
        let mut data = vec![0.0; traces.len() * t * d];
        for (b, trace) in traces.iter().enumerate() {
            for (i, v) in trace.iter().enumerate() {
                if v.len() != d {
                    return Err(Error::Contract("context vectors differ in size".into()));
                }
                data[(b * t + i) * d..(b * t + i + 1) * d].copy_from_slice(v);
            }
        }
        let node = sess.graph.input(Tensor::new(vec![traces.len(), t, d], data)?);
        Ok(Trace { node, lengths })
    }
}

impl Model {
    /// Stacks a decode's context vectors into a trace. Positions past a
    /// sentence's own length are zeroed, and the time axis is padded with
    /// zeros up to the widest convolution.
    pub fn trace(&self, sess: &mut Session, decoded: &Decoded) -> Result<Trace> {
        if decoded.steps.is_empty() || decoded.lengths.contains(&0) {
            return Err(Error::EmptyInput("attention trace is empty".into()));
        }
        let contexts: Vec<NodeId> = decoded.steps.iter().map(|s| s.context).collect();
        let mut node = stack_batch_major(sess, &contexts)?;
        let (b, t, d) = {
            let s = sess.graph.shape(node);
            (s[0], s[1], s[2])
        };
        if decoded.lengths.iter().any(|&l| l < t) {
            let mask: Vec<f64> = decoded
                .lengths
                .iter()
                .flat_map(|&l| (0..t).flat_map(move |i| std::iter::repeat(if i < l { 1.0 } else { 0.0 }).take(d)))
                .collect();
            let mask = sess.graph.input(Tensor::new(vec![b, t, d], mask)?);
            node = sess.graph.mul(node, mask)?;
        }
        let width = self.config.max_width();
        if t < width {
            let pad = sess.graph.input(Tensor::zeros(&[b, width - t, d]));
            node = sess.graph.concat(&[node, pad], 1)?;
        }
        Ok(Trace {
            node,
            lengths: decoded.lengths.clone(),
        })
    }

    /// Shared convolution stack: for each width, a valid convolution over
    /// time, tanh, and max-over-time pooling within each trace's length.
    /// Returns `[B, filters · widths]`.
    pub fn critic_features(&self, sess: &mut Session, trace: &Trace) -> Result<NodeId> {
        if trace.lengths.is_empty() || trace.lengths.contains(&0) {
            return Err(Error::EmptyInput("attention trace is empty".into()));
        }
        let mut pooled = Vec::with_capacity(self.ids.critic.convs.len());
        for &(width, w, b) in &self.ids.critic.convs {
            let (w, b) = (sess.param(w), sess.param(b));
            let g = &mut sess.graph;
            let conv = g.conv1d(trace.node, w, b, width)?;
            let act = g.tanh(conv)?;
            let valid: Vec<usize> = trace
                .lengths
                .iter()
                .map(|&l| (l + 1).saturating_sub(width).max(1))
                .collect();
            pooled.push(g.max_over_time(act, &valid)?);
        }
        if pooled.len() == 1 {
            return Ok(pooled[0]);
        }
        sess.graph.concat(&pooled, 1)
    }

    /// `σ(features W + b)` for one head, as `[B]` probabilities.
    pub fn critic_head(&self, sess: &mut Session, head: Head, features: NodeId) -> Result<NodeId> {
        let (w, b) = self.head_params(head);
        let (w, b) = (sess.param(w), sess.param(b));
        let g = &mut sess.graph;
        let rows = g.shape(features)[0];
        let z = g.matmul(features, w)?;
        let z = g.add_bias(z, b)?;
        let p = g.sigmoid(z)?;
        g.reshape(p, &[rows])
    }

    /// `D(trace)`.
    pub fn discriminate(&self, sess: &mut Session, trace: &Trace) -> Result<NodeId> {
        let f = self.critic_features(sess, trace)?;
        self.critic_head(sess, Head::Discriminator, f)
    }

    /// `C(trace)`.
    pub fn classify(&self, sess: &mut Session, trace: &Trace) -> Result<NodeId> {
        let f = self.critic_features(sess, trace)?;
        self.critic_head(sess, Head::Classifier, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::toy_vocab;
    use crate::model::{DecodeMode, Decoder, ModelConfig};
    use crate::params::GroupSet;

    fn small() -> ModelConfig {
        ModelConfig {
            emb_dim: 4,
            hidden: 3,
            cnn_filters: 4,
            ..ModelConfig::desk()
        }
    }

    fn random_traces(seed: u64, b: usize, d: usize) -> Vec<Vec<Vec<f64>>> {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        (0..b)
            .map(|i| (0..(i % 7 + 1)).map(|_| (0..d).map(|_| next()).collect()).collect())
            .collect()
    }

    #[test]
    fn zeroed_convolutions_give_sigmoid_of_bias() {
        let mut m = Model::new(small(), toy_vocab(), None, 2).unwrap();
        for id in m.store.ids_in(GroupSet::of(&[crate::params::Group::CriticConv])) {
            m.store.value_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let (_, d_bias) = m.head_params(Head::Discriminator);
        let (_, c_bias) = m.head_params(Head::Classifier);
        m.store.value_mut(d_bias).data_mut()[0] = 0.8;
        m.store.value_mut(c_bias).data_mut()[0] = -1.3;
        let mut sess = Session::frozen(&m.store);
        let trace = Trace::from_vectors(&mut sess, &random_traces(3, 4, 6), 5).unwrap();
        let d = m.discriminate(&mut sess, &trace).unwrap();
        let c = m.classify(&mut sess, &trace).unwrap();
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        assert!(sess.graph.value(d).data().iter().all(|&p| (p - sig(0.8)).abs() < 1e-15));
        assert!(sess.graph.value(c).data().iter().all(|&p| (p - sig(-1.3)).abs() < 1e-15));
    }

    #[test]
    fn outputs_are_open_unit_interval() {
        let m = Model::new(small(), toy_vocab(), None, 2).unwrap();
        let mut sess = Session::frozen(&m.store);
        let trace = Trace::from_vectors(&mut sess, &random_traces(9, 6, 6), 5).unwrap();
        let d = m.discriminate(&mut sess, &trace).unwrap();
        assert!(sess.graph.value(d).data().iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn heads_share_convolution_outputs() {
        let m = Model::new(small(), toy_vocab(), None, 2).unwrap();
        let mut sess = Session::frozen(&m.store);
        let trace = Trace::from_vectors(&mut sess, &random_traces(4, 3, 6), 5).unwrap();
        let a = m.critic_features(&mut sess, &trace).unwrap();
        let b = m.critic_features(&mut sess, &trace).unwrap();
        let (a, b) = (sess.graph.value(a).clone(), sess.graph.value(b).clone());
        assert_eq!(a.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        // the two heads read the same parameter objects
        let conv = m.critic_conv_params();
        let names: Vec<&str> = conv.iter().map(|&id| m.store.get(id).name.as_str()).collect();
        assert_eq!(names.len(), 2 * m.config.cnn_widths.len());
    }

    #[test]
    fn filter_permutation_leaves_output_unchanged() {
        let m = Model::new(small(), toy_vocab(), None, 2).unwrap();
        let f = m.config.cnn_filters;
        let perm: Vec<usize> = (0..f).rev().collect();
        let mut p = m.clone();
        for (i, &(_, w, b)) in m.ids.critic.convs.iter().enumerate() {
            let wv = m.store.value(w);
            let rows = wv.shape()[0];
            let pw = p.store.value_mut(w).data_mut();
            for r in 0..rows {
                for (j, &src) in perm.iter().enumerate() {
                    pw[r * f + j] = wv.data()[r * f + src];
                }
            }
            let bv = m.store.value(b).data().to_vec();
            let pb = p.store.value_mut(b).data_mut();
            for (j, &src) in perm.iter().enumerate() {
                pb[j] = bv[src];
            }
            for head in [Head::Discriminator, Head::Classifier] {
                let (hw, _) = m.head_params(head);
                let hv = m.store.value(hw).data().to_vec();
                let ph = p.store.value_mut(hw).data_mut();
                for (j, &src) in perm.iter().enumerate() {
                    ph[i * f + j] = hv[i * f + src];
                }
            }
        }
        let traces = random_traces(5, 5, 6);
        let score = |model: &Model| {
            let mut sess = Session::frozen(&model.store);
            let t = Trace::from_vectors(&mut sess, &traces, 5).unwrap();
            let d = model.discriminate(&mut sess, &t).unwrap();
            sess.graph.value(d).data().to_vec()
        };
        for (x, y) in score(&m).iter().zip(score(&p)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn decode_trace_is_padded_and_masked() {
        let m = Model::new(small(), toy_vocab(), None, 2).unwrap();
        let mut sess = Session::frozen(&m.store);
        let enc = m.encode(&mut sess, &[vec![4, 5], vec![6]]).unwrap();
        let targets = vec![vec![4, 5, 2], vec![2]];
        let dec = m
            .decode(&mut sess, Decoder::Simple, &enc, DecodeMode::TeacherForced(&targets))
            .unwrap();
        let trace = m.trace(&mut sess, &dec).unwrap();
        let v = sess.graph.value(trace.node);
        assert_eq!(v.shape(), &[2, 5, 6]);
        // sentence 1 has one real step; everything after it is zero
        assert!(v.data()[5 * 6 + 6..].iter().all(|&x| x == 0.0));
        assert_eq!(&v.data()[..6], dec.contexts(&sess, 0)[0].as_slice());
    }

    #[test]
    fn empty_trace_is_an_error() {
        let store = crate::params::ParamStore::new();
        let mut sess = Session::frozen(&store);
        assert!(Trace::from_vectors(&mut sess, &[vec![]], 5).is_err());
    }
}
