//! Named parameter storage, parameter groups, and graph binding.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Graph, NodeId, Tensor};

/// Parameter groups that training updates independently.
///
/// The discriminator is `CriticConv + DiscriminatorHead` and the classifier
/// is `CriticConv + ClassifierHead`: the convolution stack is one set of
/// parameters owned by both.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    /// Encoder-side word embeddings. Never trainable.
    StaticEmbedding,
    Encoder,
    SimpleDecoder,
    ComplexDecoder,
    CriticConv,
    DiscriminatorHead,
    ClassifierHead,
}

impl Group {
    pub const ALL: [Group; 7] = [
        Group::StaticEmbedding,
        Group::Encoder,
        Group::SimpleDecoder,
        Group::ComplexDecoder,
        Group::CriticConv,
        Group::DiscriminatorHead,
        Group::ClassifierHead,
    ];

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn label(self) -> &'static str {
        match self {
            Group::StaticEmbedding => "embedding",
            Group::Encoder => "E",
            Group::SimpleDecoder => "Gs",
            Group::ComplexDecoder => "Gd",
            Group::CriticConv => "conv",
            Group::DiscriminatorHead => "D-head",
            Group::ClassifierHead => "C-head",
        }
    }
}

/// A set of [`Group`]s.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct GroupSet(u8);

impl GroupSet {
    pub const EMPTY: GroupSet = GroupSet(0);

    pub fn of(groups: &[Group]) -> Self {
        GroupSet(groups.iter().fold(0, |acc, g| acc | g.bit()))
    }

    /// θ_E, θ_Gs, θ_Gd.
    pub fn generator() -> Self {
        Self::of(&[Group::Encoder, Group::SimpleDecoder, Group::ComplexDecoder])
    }

    /// θ_E, θ_Gs: what the adversarial and diversification terms update.
    pub fn simple_path() -> Self {
        Self::of(&[Group::Encoder, Group::SimpleDecoder])
    }

    /// θ_D ∪ θ_C.
    pub fn critics() -> Self {
        Self::of(&[Group::CriticConv, Group::DiscriminatorHead, Group::ClassifierHead])
    }

    pub fn discriminator() -> Self {
        Self::of(&[Group::CriticConv, Group::DiscriminatorHead])
    }

    pub fn classifier() -> Self {
        Self::of(&[Group::CriticConv, Group::ClassifierHead])
    }

    pub fn contains(self, group: Group) -> bool {
        self.0 & group.bit() != 0
    }

    pub fn union(self, other: GroupSet) -> Self {
        GroupSet(self.0 | other.0)
    }

    pub fn with(self, group: Group) -> Self {
        GroupSet(self.0 | group.bit())
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Group> {
        Group::ALL.into_iter().filter(move |g| self.contains(*g))
    }
}

impl fmt::Debug for GroupSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(Group::label)).finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub group: Group,
    pub value: Tensor,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, group: Group, value: Tensor) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            group,
            value,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn ids_in(&self, groups: GroupSet) -> Vec<ParamId> {
        self.iter()
            .filter(|(_, p)| groups.contains(p.group))
            .map(|(id, _)| id)
            .collect()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Copies of every value in `group`, in storage order.
    pub fn snapshot(&self, group: Group) -> Vec<Tensor> {
        self.params
            .iter()
            .filter(|p| p.group == group)
            .map(|p| p.value.clone())
            .collect()
    }

    /// Groups whose values differ bitwise between `self` and `before`.
    pub fn changed_since(&self, before: &ParamStore) -> GroupSet {
        let mut changed = GroupSet::EMPTY;
        for (p, q) in self.params.iter().zip(&before.params) {
            let same = p.value.data().iter().zip(q.value.data()).all(|(a, b)| a.to_bits() == b.to_bits());
            if !same {
                changed = changed.with(p.group);
            }
        }
        changed
    }

    pub fn total_size(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// Gradients for a set of parameters, indexed by [`ParamId`].
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn new(param_count: usize) -> Self {
        Self {
            grads: vec![None; param_count],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    pub fn set(&mut self, id: ParamId, grad: Vec<f64>) {
        if self.grads.len() <= id.0 {
            self.grads.resize(id.0 + 1, None);
        }
        self.grads[id.0] = Some(grad);
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_deref().map(|g| (ParamId(i), g)))
    }

    pub fn global_norm(&self) -> f64 {
        self.iter()
            .flat_map(|(_, g)| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales all gradients so their global L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let factor = max_norm / norm;
            for g in self.grads.iter_mut().flatten() {
                g.iter_mut().for_each(|v| *v *= factor);
            }
        }
        norm
    }
}

/// A graph under construction together with the parameter store it reads.
///
/// Parameters in `trainable` groups become differentiable leaves; all other
/// parameters enter the graph as constants, so gradients never flow into
/// them. [`Group::StaticEmbedding`] is never trainable.
pub struct Session<'s> {
    pub graph: Graph,
    store: &'s ParamStore,
    trainable: GroupSet,
    bound: Vec<Option<NodeId>>,
}

impl<'s> Session<'s> {
    pub fn new(store: &'s ParamStore, trainable: GroupSet) -> Self {
        let trainable = GroupSet::of(
            &trainable
                .iter()
                .filter(|g| *g != Group::StaticEmbedding)
                .collect::<Vec<_>>(),
        );
        Self {
            graph: Graph::new(),
            store,
            trainable,
            bound: vec![None; store.len()],
        }
    }

    /// Forward-only session: every parameter is a constant.
    pub fn frozen(store: &'s ParamStore) -> Self {
        Self::new(store, GroupSet::EMPTY)
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn trainable(&self) -> GroupSet {
        self.trainable
    }

    /// The graph node for a parameter, bound on first use.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(node) = self.bound[id.0] {
            return node;
        }
        let p = self.store.get(id);
        let node = if self.trainable.contains(p.group) {
            self.graph.leaf(p.value.clone())
        } else {
            self.graph.input(p.value.clone())
        };
        self.bound[id.0] = Some(node);
        node
    }

    /// Parameters bound as differentiable leaves, with their nodes.
    pub fn bound_trainable(&self) -> Vec<(ParamId, NodeId)> {
        self.bound
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.map(|n| (ParamId(i), n)))
            .filter(|(_, n)| self.graph.requires_grad(*n))
            .collect()
    }

    /// Runs backward from `root` and collects gradients for every bound
    /// trainable parameter (zeros where the root does not depend on it).
    pub fn backward(&mut self, root: NodeId) -> Result<Gradients> {
        self.graph.backward(root)?;
        let mut grads = Gradients::new(self.store.len());
        for (id, node) in self.bound_trainable() {
            let g = match self.graph.grad_slice(node) {
                Some(g) => g.to_vec(),
                None => vec![0.0; self.store.value(id).len()],
            };
            grads.set(id, g);
        }
        Ok(grads)
    }

    pub fn scalar(&self, node: NodeId) -> Result<f64> {
        self.graph
            .value(node)
            .item()
            .ok_or_else(|| Error::Contract(format!("node {} is not a scalar", node.index())))
    }
}
