//! Central-difference gradient checks for the operators and for every
//! training loss built end to end through the model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::losses::{self, Evaluated, EPSILON};
use crate::model::{AttentionKind, Model, ModelConfig};
use crate::params::{Gradients, GroupSet, Session};
use crate::tensor::{Graph, NodeId, Tensor};
use crate::text::{tokenize, Vocabulary};

/// Finite-difference step.
pub const STEP: f64 = 1e-5;

/// |analytic - numeric| relative to the larger magnitude, with a floor so
/// vanishing gradients are compared absolutely.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

/// Central difference of scalar `root` with respect to element `i` of
/// `leaf`. Leaves the graph evaluated at the original point.
pub fn numeric_partial(graph: &mut Graph, root: NodeId, leaf: NodeId, i: usize, step: f64) -> Result<f64> {
    let original = graph.value(leaf).clone();
    let at = |delta: f64, graph: &mut Graph| -> Result<f64> {
        let mut t = original.clone();
        t.data_mut()[i] += delta;
        graph.set_value(leaf, t)?;
        Ok(graph.evaluate(root)?.data()[0])
    };
    let up = at(step, graph)?;
    let down = at(-step, graph)?;
    graph.set_value(leaf, original)?;
    graph.evaluate(root)?;
    Ok((up - down) / (2.0 * step))
}

/// Worst [`rel_err`] between `backward` and central differences over every
/// element of every listed leaf, with the number of elements compared.
pub fn max_gradient_error(graph: &mut Graph, root: NodeId, leaves: &[NodeId]) -> Result<(f64, usize)> {
    graph.backward(root)?;
    let analytic: Vec<Tensor> = leaves
        .iter()
        .map(|&l| graph.grad(l).unwrap_or_else(|| Tensor::zeros(graph.shape(l))))
        .collect();
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for (k, &leaf) in leaves.iter().enumerate() {
        for i in 0..graph.value(leaf).len() {
            let numeric = numeric_partial(graph, root, leaf, i, STEP)?;
            worst = worst.max(rel_err(analytic[k].data()[i], numeric));
            n += 1;
        }
    }
    Ok((worst, n))
}

/// Outcome of one named gradient check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub worst: f64,
    /// Parameter or input elements compared.
    pub elements: usize,
}

/// Seeded random shapes and tensors for operator checks.
pub struct Sampler(ChaCha8Rng);

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.0.gen()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.0.gen_range(0..n)
    }

    /// A size in `1..=max`.
    pub fn dim(&mut self, max: usize) -> usize {
        1 + self.below(max)
    }

    /// A random `1..=rows` by `1..=cols` matrix.
    pub fn matrix(&mut self, rows: usize, cols: usize, scale: f64) -> Tensor {
        let shape = [self.dim(rows), self.dim(cols)];
        self.tensor(&shape, scale)
    }

    /// Entries uniform in `[-scale, scale]`.
    pub fn tensor(&mut self, shape: &[usize], scale: f64) -> Tensor {
        let len = shape.iter().product();
        let data = (0..len).map(|_| self.0.gen_range(-scale..=scale)).collect();
        Tensor::new(shape.to_vec(), data).expect("shape matches data")
    }
}

type OpBuild = Box<dyn Fn(&mut Graph, &mut Sampler) -> Result<(NodeId, Vec<NodeId>)>>;

fn op(name: &str, build: impl Fn(&mut Graph, &mut Sampler) -> Result<(NodeId, Vec<NodeId>)> + 'static) -> (String, OpBuild) {
    (name.to_string(), Box::new(build))
}

fn operator_cases() -> Vec<(String, OpBuild)> {
    let mut cases = vec![
        op("matmul", |g, r| {
            let (m, k, n) = (r.dim(4), r.dim(4), r.dim(4));
            let a = g.leaf(r.tensor(&[m, k], 1.0));
            let b = g.leaf(r.tensor(&[k, n], 1.0));
            Ok((g.matmul(a, b)?, vec![a, b]))
        }),
        op("batch_matmul", |g, r| {
            let (bs, m, k, n) = (r.dim(3), r.dim(3), r.dim(4), r.dim(3));
            let a = g.leaf(r.tensor(&[bs, m, k], 1.0));
            let b = g.leaf(r.tensor(&[bs, k, n], 1.0));
            Ok((g.batch_matmul(a, b)?, vec![a, b]))
        }),
        // x * x and x @ x accumulate both operand paths into one gradient
        op("shared operand", |g, r| {
            let x = g.leaf(r.tensor(&[3, 3], 1.0));
            let sq = g.mul(x, x)?;
            let mm = g.matmul(x, x)?;
            Ok((g.add(sq, mm)?, vec![x]))
        }),
        op("add_bias + affine + scale", |g, r| {
            let (rows, n) = (r.dim(4), r.dim(4));
            let x = g.leaf(r.tensor(&[rows, n], 1.0));
            let b = g.leaf(r.tensor(&[n], 1.0));
            let y = g.add_bias(x, b)?;
            let y = g.affine(y, -1.7, 0.3)?;
            Ok((g.scale(y, 0.6)?, vec![x, b]))
        }),
        op("sigmoid", |g, r| {
            let x = g.leaf(r.matrix(4, 4, 3.0));
            Ok((g.sigmoid(x)?, vec![x]))
        }),
        op("tanh", |g, r| {
            let x = g.leaf(r.matrix(4, 4, 3.0));
            Ok((g.tanh(x)?, vec![x]))
        }),
        op("ln_clamped", |g, r| {
            let shape = [r.dim(3), r.dim(3)];
            let data = (0..shape[0] * shape[1]).map(|_| 0.2 + r.unit()).collect();
            let x = g.leaf(Tensor::new(shape.to_vec(), data)?);
            Ok((g.ln_clamped(x, EPSILON)?, vec![x]))
        }),
        op("slice", |g, r| {
            let x = g.leaf(r.tensor(&[3, 5, 2], 1.0));
            let start = r.below(4);
            let len = 1 + r.below(5 - start);
            Ok((g.slice(x, 1, start, len)?, vec![x]))
        }),
        op("reshape + select", |g, r| {
            let x = g.leaf(r.tensor(&[2, 6], 1.0));
            let y = g.reshape(x, &[2, 3, 2])?;
            Ok((g.select(y, 1, r.below(3))?, vec![x]))
        }),
        op("gather", |g, r| {
            let (rows, d) = (r.dim(5), r.dim(3));
            let table = g.leaf(r.tensor(&[rows, d], 1.0));
            // repeated ids exercise scatter-add
            let ids: Vec<usize> = (0..4).map(|_| r.below(rows)).collect();
            Ok((g.gather(table, &ids)?, vec![table]))
        }),
        op("pick", |g, r| {
            let (b, v) = (r.dim(4), r.dim(5));
            let x = g.leaf(r.tensor(&[b, v], 1.0));
            let idx: Vec<usize> = (0..b).map(|_| r.below(v)).collect();
            Ok((g.pick(x, &idx)?, vec![x]))
        }),
        op("conv1d", |g, r| {
            let width = r.dim(3);
            let (bs, c, f) = (r.dim(2), r.dim(3), r.dim(3));
            let t = width + r.below(4);
            let x = g.leaf(r.tensor(&[bs, t, c], 1.0));
            let w = g.leaf(r.tensor(&[width * c, f], 1.0));
            let b = g.leaf(r.tensor(&[f], 1.0));
            Ok((g.conv1d(x, w, b, width)?, vec![x, w, b]))
        }),
        op("max_over_time", |g, r| {
            let (bs, t, f) = (r.dim(3), 1 + r.dim(4), r.dim(3));
            let x = g.leaf(r.tensor(&[bs, t, f], 1.0));
            let lengths: Vec<usize> = (0..bs).map(|_| 1 + r.below(t)).collect();
            Ok((g.max_over_time(x, &lengths)?, vec![x]))
        }),
        op("sum", |g, r| {
            let x = g.leaf(r.matrix(3, 3, 1.0));
            let t = g.tanh(x)?;
            Ok((g.sum(t)?, vec![x]))
        }),
        op("mean", |g, r| {
            let x = g.leaf(r.matrix(3, 3, 1.0));
            let t = g.sigmoid(x)?;
            Ok((g.mean(t)?, vec![x]))
        }),
    ];
    for (name, kind) in [("add", 0), ("sub", 1), ("mul", 2)] {
        cases.push(op(name, move |g, r| {
            let shape = [r.dim(3), r.dim(4)];
            let a = g.leaf(r.tensor(&shape, 1.0));
            let b = g.leaf(r.tensor(&shape, 1.0));
            let out = match kind {
                0 => g.add(a, b)?,
                1 => g.sub(a, b)?,
                _ => g.mul(a, b)?,
            };
            Ok((out, vec![a, b]))
        }));
    }
    for axis in 0..3 {
        cases.push(op(&format!("softmax axis {axis}"), move |g, r| {
            let shape = [r.dim(3), r.dim(4), r.dim(3)];
            let x = g.leaf(r.tensor(&shape, 2.0));
            Ok((g.softmax(x, axis)?, vec![x]))
        }));
    }
    for axis in 0..2 {
        cases.push(op(&format!("concat axis {axis}"), move |g, r| {
            let rows = r.dim(3);
            let (c1, c2) = (r.dim(3), r.dim(3));
            let (s1, s2) = if axis == 0 { ([c1, rows], [c2, rows]) } else { ([rows, c1], [rows, c2]) };
            let a = g.leaf(r.tensor(&s1, 1.0));
            let b = g.leaf(r.tensor(&s2, 1.0));
            Ok((g.concat(&[a, b, a], axis)?, vec![a, b]))
        }));
    }
    cases
}

/// Every operator over `trials` random shapes and values. The operator's
/// output is reduced through a random weighting so each output element
/// carries a distinct upstream gradient.
pub fn operator_checks(trials: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (name, build) in operator_cases() {
        let (mut worst, mut elements) = (0.0f64, 0);
        for trial in 0..trials {
            let mut r = Sampler::new(1000 + trial);
            let mut g = Graph::new();
            let (node, leaves) = build(&mut g, &mut r)?;
            let w = g.input(r.tensor(g.shape(node), 1.0));
            let prod = g.mul(node, w)?;
            let root = g.sum(prod)?;
            let (e, n) = max_gradient_error(&mut g, root, &leaves)?;
            worst = worst.max(e);
            elements += n;
        }
        out.push(Check { name, worst, elements });
    }
    Ok(out)
}

/// The toy model of the loss checks: vocabulary of 12 (eight words plus the
/// four markers), hidden size 8.
pub fn toy_model(attention: AttentionKind) -> Result<Model> {
    let vocab = Vocabulary::build([&tokenize("a b c d e f g h")?], 100);
    let cfg = ModelConfig {
        emb_dim: 5,
        hidden: 8,
        attention,
        attention_dim: 6,
        cnn_filters: 3,
        ..ModelConfig::desk()
    };
    Model::new(cfg, vocab, None, 41)
}

/// Toy simple and complex batches, at most five tokens per sentence.
pub fn toy_batches() -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    (vec![vec![4, 5, 6], vec![7, 8, 9, 10, 11]], vec![vec![11, 4, 9, 5], vec![6, 7]])
}

/// A loss evaluated at a model, with gradients.
pub type LossFn = Box<dyn Fn(&Model) -> Result<Evaluated>>;

/// Wraps a session-level loss builder with its trainable groups.
pub fn in_session(groups: GroupSet, build: impl Fn(&Model, &mut Session) -> Result<NodeId> + 'static) -> LossFn {
    Box::new(move |m: &Model| {
        let mut sess = Session::new(&m.store, groups);
        let root = build(m, &mut sess)?;
        let value = sess.scalar(root)?;
        let grads = sess.backward(root)?;
        Ok(Evaluated { value, grads })
    })
}

/// Every training loss on the toy batches: reconstruction, denoising, both
/// cross-entropy halves, and the critic and generator sides of the
/// adversarial and diversification losses.
pub fn training_losses() -> Vec<(&'static str, LossFn)> {
    let (s, d) = toy_batches();
    let pairs: Vec<(Vec<usize>, Vec<usize>)> = d.iter().cloned().zip(s.iter().cloned()).collect();
    let mut out: Vec<(&'static str, LossFn)> = Vec::new();
    let (s1, d1) = (s.clone(), d.clone());
    out.push((
        "reconstruction",
        in_session(GroupSet::generator(), move |m, sess| losses::reconstruction_loss(m, sess, &s1, &d1, EPSILON)),
    ));
    let (s1, d1) = (s.clone(), d.clone());
    out.push((
        "denoising",
        in_session(GroupSet::generator(), move |m, sess| {
            losses::denoising_loss(m, sess, &s1, &d1, 7, losses::SWAP_PROB, EPSILON)
        }),
    ));
    let p1 = pairs.clone();
    out.push((
        "cross-entropy to simple",
        in_session(GroupSet::generator(), move |m, sess| Ok(losses::cross_entropy_terms(m, sess, &p1, EPSILON)?.0)),
    ));
    out.push((
        "cross-entropy to complex",
        in_session(GroupSet::generator(), move |m, sess| Ok(losses::cross_entropy_terms(m, sess, &pairs, EPSILON)?.1)),
    ));
    let (s1, d1) = (s.clone(), d.clone());
    out.push(("adversarial critic", Box::new(move |m: &Model| Ok(losses::adversarial_losses(m, &s1, &d1, EPSILON)?.0))));
    let (s1, d1) = (s.clone(), d.clone());
    out.push(("adversarial generator", Box::new(move |m: &Model| Ok(losses::adversarial_losses(m, &s1, &d1, EPSILON)?.1))));
    let (s1, d1) = (s.clone(), d.clone());
    out.push(("diversification critic", Box::new(move |m: &Model| Ok(losses::diversification_losses(m, &s1, &d1, EPSILON)?.0))));
    out.push(("diversification generator", Box::new(move |m: &Model| Ok(losses::diversification_losses(m, &s, &d, EPSILON)?.1))));
    out
}

/// Perturbs every element of every parameter the loss differentiates and
/// compares against the analytic gradient.
pub fn loss_check(name: &str, model: &Model, loss: &LossFn) -> Result<Check> {
    let analytic: Gradients = loss(model)?.grads;
    let mut probe = model.clone();
    let (mut worst, mut elements) = (0.0f64, 0);
    for (id, g) in analytic.iter() {
        for i in 0..g.len() {
            let original = probe.store.value(id).data()[i];
            probe.store.value_mut(id).data_mut()[i] = original + STEP;
            let up = loss(&probe)?.value;
            probe.store.value_mut(id).data_mut()[i] = original - STEP;
            let down = loss(&probe)?.value;
            probe.store.value_mut(id).data_mut()[i] = original;
            worst = worst.max(rel_err(g[i], (up - down) / (2.0 * STEP)));
            elements += 1;
        }
    }
    Ok(Check {
        name: name.to_string(),
        worst,
        elements,
    })
}

/// [`loss_check`] for every training loss on the toy model.
pub fn loss_checks(attention: AttentionKind) -> Result<Vec<Check>> {
    let model = toy_model(attention)?;
    training_losses()
        .iter()
        .map(|(name, loss)| loss_check(name, &model, loss))
        .collect()
}
