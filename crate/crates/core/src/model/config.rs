use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Alignment score between a decoder state `d` and encoder state `h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    /// `dᵀ W h`.
    Bilinear,
    /// `vᵀ tanh(W_k h + W_q d)`.
    Additive,
}

impl std::str::FromStr for AttentionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilinear" | "general" => Ok(Self::Bilinear),
            "additive" | "concat" => Ok(Self::Additive),
            other => Err(Error::Config(format!("unknown attention kind `{other}`"))),
        }
    }
}

/// Architecture sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub emb_dim: usize,
    /// GRU state size; each encoder state is twice this (two directions).
    pub hidden: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub attention: AttentionKind,
    /// Size of the additive attention's hidden layer.
    pub attention_dim: usize,
    /// Filters per convolution width in the critic.
    pub cnn_filters: usize,
    pub cnn_widths: Vec<usize>,
    /// Decoders read the static encoder embedding instead of their own
    /// trainable copies.
    pub tie_decoder_embeddings: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ModelConfig {
    /// Small sizes that train on one CPU core in minutes.
    pub fn desk() -> Self {
        Self {
            emb_dim: 32,
            hidden: 64,
            encoder_layers: 2,
            decoder_layers: 2,
            attention: AttentionKind::Bilinear,
            attention_dim: 64,
            cnn_filters: 32,
            cnn_widths: vec![1, 2, 3, 4, 5],
            tie_decoder_embeddings: false,
        }
    }

    /// Full-size architecture: hidden 600, 300-dimensional embeddings,
    /// 128 filters of each width.
    pub fn paper() -> Self {
        Self {
            emb_dim: 300,
            hidden: 600,
            attention_dim: 600,
            cnn_filters: 128,
            ..Self::desk()
        }
    }

    pub fn context_dim(&self) -> usize {
        2 * self.hidden
    }

    pub fn max_width(&self) -> usize {
        self.cnn_widths.iter().copied().max().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("emb_dim", self.emb_dim),
            ("hidden", self.hidden),
            ("encoder_layers", self.encoder_layers),
            ("decoder_layers", self.decoder_layers),
            ("attention_dim", self.attention_dim),
            ("cnn_filters", self.cnn_filters),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.cnn_widths.is_empty() || self.cnn_widths.contains(&0) {
            return Err(Error::Config("cnn_widths must be non-empty and positive".into()));
        }
        Ok(())
    }
}
