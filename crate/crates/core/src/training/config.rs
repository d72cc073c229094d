use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which training algorithm runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Initialization then adversarial phase on unpaired data.
    Unsupervised,
    /// As unsupervised, plus two cross-entropy updates on labeled pairs in
    /// every adversarial-phase iteration.
    Semisupervised,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unsupervised" => Ok(Mode::Unsupervised),
            "semisupervised" | "semi-supervised" => Ok(Mode::Semisupervised),
            _ => Err(Error::Config(format!("unknown mode `{s}` (unsupervised, semisupervised)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Unsupervised => "unsupervised",
            Mode::Semisupervised => "semisupervised",
        })
    }
}

/// Loss ablations. A dropped term leaves the generator update only; the
/// critics keep training on their own losses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "UNTS")]
    Full,
    /// Generator update without `L_adv,Gs`.
    #[serde(rename = "UNTS-adv")]
    NoAdversarial,
    /// Generator update without `L_div,Gs`.
    #[serde(rename = "UNTS-div")]
    NoDiversification,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::NoAdversarial, Variant::NoDiversification];

    pub fn uses_adversarial(self) -> bool {
        self != Variant::NoAdversarial
    }

    pub fn uses_diversification(self) -> bool {
        self != Variant::NoDiversification
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "UNTS" | "FULL" => Ok(Variant::Full),
            "UNTS-ADV" => Ok(Variant::NoAdversarial),
            "UNTS-DIV" => Ok(Variant::NoDiversification),
            _ => Err(Error::Config(format!("unknown variant `{s}` (UNTS, UNTS-adv, UNTS-div)"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "UNTS",
            Variant::NoAdversarial => "UNTS-adv",
            Variant::NoDiversification => "UNTS-div",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub mode: Mode,
    pub variant: Variant,
    pub init_steps: u64,
    pub adv_steps: u64,
    pub batch_size: usize,
    /// Learning rate for the encoder and both decoders.
    pub generator_lr: f64,
    /// Learning rate for the discriminator and classifier.
    pub critic_lr: f64,
    /// Probability floor inside every log.
    pub eps: f64,
    /// Global gradient-norm clip per update; 0 disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
    /// Dev evaluation cadence in iterations; 0 evaluates only at the start
    /// and the end.
    pub eval_every: u64,
    /// Only checkpoints whose dev word-diff exceeds this are eligible for
    /// selection.
    pub word_diff_threshold: f64,
    /// Bigram swap probability of the denoising noise.
    pub swap_prob: f64,
    /// Dev items scored at each evaluation; 0 scores all of them.
    pub dev_limit: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl TrainingConfig {
    /// Laptop-scale schedule.
    pub fn desk() -> Self {
        Self {
            mode: Mode::Unsupervised,
            variant: Variant::Full,
            init_steps: 600,
            adv_steps: 800,
            batch_size: 8,
            generator_lr: 2e-3,
            critic_lr: 1e-3,
            eps: crate::losses::EPSILON,
            clip_norm: 5.0,
            seed: 1,
            eval_every: 100,
            word_diff_threshold: 0.5,
            swap_prob: crate::losses::SWAP_PROB,
            dev_limit: 0,
        }
    }

    /// The full-size schedule and learning rates.
    pub fn paper() -> Self {
        Self {
            init_steps: 6000,
            adv_steps: 8000,
            batch_size: 36,
            generator_lr: 1.2e-4,
            critic_lr: 5e-4,
            eval_every: 500,
            ..Self::desk()
        }
    }

    pub fn total_steps(&self) -> u64 {
        self.init_steps + self.adv_steps
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.generator_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Config("eps must lie in (0, 1)".into()));
        }
        if self.clip_norm < 0.0 {
            return Err(Error::Config("clip_norm must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.swap_prob) {
            return Err(Error::Config("swap_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }
}
