//! Gradient-descent updates over parameter groups.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{GroupSet, Gradients, ParamStore};

/// Plain stochastic gradient descent.
#[derive(Clone, Debug)]
pub struct Sgd {
    pub learning_rate: f64,
}

impl Sgd {
    pub fn new(learning_rate: f64) -> Self {
        Self { learning_rate }
    }

    /// Moves every parameter in `groups` against its gradient.
    pub fn step(&self, store: &mut ParamStore, grads: &Gradients, groups: GroupSet) -> Result<()> {
        for id in updatable(store, groups) {
            let g = grads
                .get(id)
                .ok_or_else(|| Error::MissingGrad(store.get(id).name.clone()))?;
            let lr = self.learning_rate;
            for (p, g) in store.value_mut(id).data_mut().iter_mut().zip(g) {
                *p -= lr * g;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Moments {
    pub steps: u64,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

/// Adam with bias correction; moments are kept per parameter and advance
/// only when that parameter is updated.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    moments: Vec<Moments>,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        Self {
            config,
            moments: vec![Moments::default(); store.len()],
        }
    }

    pub fn moments(&self) -> &[Moments] {
        &self.moments
    }

    pub fn from_moments(config: AdamConfig, moments: Vec<Moments>) -> Self {
        Self { config, moments }
    }

    pub fn step(
        &mut self,
        store: &mut ParamStore,
        grads: &Gradients,
        groups: GroupSet,
        learning_rate: f64,
    ) -> Result<()> {
        if self.moments.len() < store.len() {
            self.moments.resize(store.len(), Moments::default());
        }
        let AdamConfig { beta1, beta2, epsilon } = self.config;
        for id in updatable(store, groups) {
            let g = grads
                .get(id)
                .ok_or_else(|| Error::MissingGrad(store.get(id).name.clone()))?;
            let m = &mut self.moments[id.index()];
            if m.first.is_empty() {
                m.first = vec![0.0; g.len()];
                m.second = vec![0.0; g.len()];
            }
            m.steps += 1;
            let c1 = 1.0 - beta1.powi(m.steps as i32);
            let c2 = 1.0 - beta2.powi(m.steps as i32);
            let values = store.value_mut(id).data_mut();
            for i in 0..g.len() {
                m.first[i] = beta1 * m.first[i] + (1.0 - beta1) * g[i];
                m.second[i] = beta2 * m.second[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m.first[i] / c1;
                let v_hat = m.second[i] / c2;
                values[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

fn updatable(store: &ParamStore, groups: GroupSet) -> Vec<crate::params::ParamId> {
    // the static embedding never moves, whatever the caller asks for
    store
        .iter()
        .filter(|(_, p)| groups.contains(p.group) && p.group != crate::params::Group::StaticEmbedding)
        .map(|(id, _)| id)
        .collect()
}
