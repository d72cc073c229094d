use super::ops::{self, Op};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`]. Only meaningful for the graph that issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

pub(crate) struct Node {
    pub(crate) op: Op,
    pub(crate) value: Tensor,
    pub(crate) requires_grad: bool,
    pub(crate) grad: Option<Vec<f64>>,
}

/// Topologically ordered tape of operator nodes.
///
/// Nodes are appended in creation order, so every node's inputs have
/// smaller indices and the tape order is a valid topological order.
#[derive(Default)]
pub struct Graph {
    pub(crate) nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A constant input; never receives a gradient.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Input, value, false)
    }

    /// A differentiable leaf.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value, true)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Gradient accumulated by the last [`Graph::backward`], if the node
    /// requires one and was reached from the root.
    pub fn grad(&self, id: NodeId) -> Option<Tensor> {
        let node = &self.nodes[id.0];
        node.grad
            .as_ref()
            .map(|g| Tensor::from_parts(node.value.shape().to_vec(), g.clone()))
    }

    pub(crate) fn grad_slice(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    /// Rebinds the value of an input or leaf. Dependent nodes keep stale
    /// values until [`Graph::evaluate`] runs.
    pub fn set_value(&mut self, id: NodeId, value: Tensor) -> Result<()> {
        let node = &mut self.nodes[id.0];
        if !matches!(node.op, Op::Input | Op::Leaf) {
            return Err(Error::Contract(format!(
                "node {} is computed ({}); only inputs and leaves can be rebound",
                id.0,
                node.op.name()
            )));
        }
        if node.value.shape() != value.shape() {
            return Err(Error::shape(
                id.0,
                "bind",
                format!("expected {:?}, got {:?}", node.value.shape(), value.shape()),
            ));
        }
        node.value = value;
        Ok(())
    }

    /// Recomputes every node from the current input and leaf values and
    /// returns the value of `root`.
    pub fn evaluate(&mut self, root: NodeId) -> Result<&Tensor> {
        for i in 0..self.nodes.len() {
            if matches!(self.nodes[i].op, Op::Input | Op::Leaf) {
                continue;
            }
            let (before, rest) = self.nodes.split_at_mut(i);
            let value = ops::forward(&rest[0].op, before).map_err(|(op, d)| Error::shape(i, op, d))?;
            rest[0].value = value;
        }
        Ok(&self.nodes[root.0].value)
    }

    /// Clears every accumulated gradient.
    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    /// Reverse-mode sweep from a scalar root. Gradients from earlier calls
    /// are discarded first.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        if self.nodes[root.0].value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, node {} has shape {:?}",
                root.0,
                self.nodes[root.0].value.shape()
            )));
        }
        self.zero_grad();
        if !self.nodes[root.0].requires_grad {
            return Ok(());
        }
        self.nodes[root.0].grad = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &mut rest[0];
            if !node.requires_grad || matches!(node.op, Op::Input | Op::Leaf) {
                continue;
            }
            let Some(grad) = node.grad.as_ref() else {
                continue;
            };
            ops::backward(&node.op, &node.value, grad, before);
        }
        Ok(())
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
            grad: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn apply(&mut self, op: Op) -> Result<NodeId> {
        let requires_grad = op.inputs().iter().any(|id| self.nodes[id.0].requires_grad);
        let value =
            ops::forward(&op, &self.nodes).map_err(|(name, d)| Error::shape(self.nodes.len(), name, d))?;
        Ok(self.push(op, value, requires_grad))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Op::MatMul(a, b))
    }

    /// `[B, m, k] x [B, k, n] -> [B, m, n]`.
    pub fn batch_matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Op::BatchMatMul(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Op::Add(a, b))
    }

    /// Adds a `[n]` bias to every row of a `[.., n]` tensor.
    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        self.apply(Op::AddBias(x, bias))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Op::Mul(a, b))
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(&mut self, x: NodeId, scale: f64, shift: f64) -> Result<NodeId> {
        self.apply(Op::Affine { x, scale, shift })
    }

    pub fn scale(&mut self, x: NodeId, scale: f64) -> Result<NodeId> {
        self.affine(x, scale, 0.0)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Op::Tanh(x))
    }

    pub fn softmax(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        self.apply(Op::Softmax { x, axis })
    }

    /// Natural log.
    pub fn ln(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Op::Log { x, floor: 0.0 })
    }

    /// `ln(max(x, floor))`; the gradient is zero where the clamp is active.
    pub fn ln_clamped(&mut self, x: NodeId, floor: f64) -> Result<NodeId> {
        self.apply(Op::Log { x, floor })
    }

    pub fn concat(&mut self, inputs: &[NodeId], axis: usize) -> Result<NodeId> {
        self.apply(Op::Concat {
            inputs: inputs.to_vec(),
            axis,
        })
    }

    pub fn slice(&mut self, x: NodeId, axis: usize, start: usize, len: usize) -> Result<NodeId> {
        self.apply(Op::Slice { x, axis, start, len })
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        self.apply(Op::Reshape {
            x,
            shape: shape.to_vec(),
        })
    }

    /// Picks index `index` along `axis`, dropping that axis.
    pub fn select(&mut self, x: NodeId, axis: usize, index: usize) -> Result<NodeId> {
        let sliced = self.slice(x, axis, index, 1)?;
        let mut shape = self.shape(sliced).to_vec();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        self.reshape(sliced, &shape)
    }

    /// Row lookup: `table[ids[i]]` for each `i`, giving `[ids.len(), d]`.
    pub fn gather(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        self.apply(Op::Gather {
            table,
            ids: ids.to_vec(),
        })
    }

    /// `x[b, indices[b]]` for a `[B, V]` input, giving `[B]`.
    pub fn pick(&mut self, x: NodeId, indices: &[usize]) -> Result<NodeId> {
        self.apply(Op::Pick {
            x,
            indices: indices.to_vec(),
        })
    }

    /// Valid 1-D convolution over the sequence axis of a `[B, T, C]` input
    /// with `weight: [width * C, F]` and `bias: [F]`, giving `[B, T - width + 1, F]`.
    pub fn conv1d(&mut self, x: NodeId, weight: NodeId, bias: NodeId, width: usize) -> Result<NodeId> {
        self.apply(Op::Conv1d {
            x,
            weight,
            bias,
            width,
        })
    }

    /// Max over the time axis of `[B, T, F]`, looking only at the first
    /// `lengths[b]` positions of row `b`.
    pub fn max_over_time(&mut self, x: NodeId, lengths: &[usize]) -> Result<NodeId> {
        self.apply(Op::MaxOverTime {
            x,
            lengths: lengths.to_vec(),
        })
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Op::Sum(x))
    }

    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Op::Mean(x))
    }
}
