//! Unsupervised neural text simplification.
//!
//! A shared bidirectional-GRU encoder feeds two attentional GRU decoders,
//! one for simple and one for complex text. A convolutional discriminator
//! and classifier judge the decoders' attention-context sequences, and
//! training alternates denoising, reconstruction, adversarial and
//! diversification updates. The crate also carries the text pipeline
//! (tokenization, readability scoring, corpus partitioning, a synthetic
//! corpus generator) and the evaluation metrics (SARI, BLEU, FE-diff,
//! word-diff).

pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod inference;
pub mod losses;
pub mod model;
pub mod params;
pub mod tensor;
pub mod text;
pub mod training;

pub use error::{Error, Result};
