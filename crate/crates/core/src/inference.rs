//! Test-time simplification through `E → G_s` and output post-processing.

use crate::error::{Error, Result};
use crate::model::{DecodeMode, Decoder, Model};
use crate::params::Session;
use crate::text::{Sentence, BOS, EOS, PAD, UNK};

/// Sentences decoded together in one graph.
const CHUNK: usize = 32;

/// One free-running decode before post-processing.
#[derive(Clone, Debug, PartialEq)]
pub struct Generation {
    /// Emitted token ids, end marker excluded.
    pub tokens: Vec<usize>,
    /// Attention weights over the source for each emitted token.
    pub attention: Vec<Vec<f64>>,
    /// Most-attended source position for each emitted token, the first on ties.
    pub source_index: Vec<usize>,
}

fn first_argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Greedy free-running decodes of `sentences` through `which`, in input order.
pub fn generate(model: &Model, which: Decoder, sentences: &[Sentence]) -> Result<Vec<Generation>> {
    if sentences.iter().any(Sentence::is_empty) {
        return Err(Error::EmptyInput("cannot simplify an empty sentence".into()));
    }
    let mut out = Vec::with_capacity(sentences.len());
    for chunk in sentences.chunks(CHUNK) {
        let ids: Vec<Vec<usize>> = chunk.iter().map(|s| model.vocab.encode(s)).collect();
        let caps: Vec<usize> = ids.iter().map(|s| Model::max_decode_len(s.len())).collect();
        let mut sess = Session::frozen(&model.store);
        let enc = model.encode(&mut sess, &ids)?;
        let dec = model.decode(&mut sess, which, &enc, DecodeMode::FreeRunning(&caps))?;
        for (b, source) in ids.iter().enumerate() {
            let mut tokens = dec.tokens[b].clone();
            if tokens.last() == Some(&EOS) {
                tokens.pop();
            }
            let mut attention = dec.attention(&sess, b, source.len());
            attention.truncate(tokens.len());
            let source_index = attention.iter().map(|row| first_argmax(row)).collect();
            out.push(Generation {
                tokens,
                attention,
                source_index,
            });
        }
    }
    Ok(out)
}

/// `E → G_s` on one sentence.
pub fn simplify(model: &Model, sentence: &Sentence) -> Result<Generation> {
    Ok(generate(model, Decoder::Simple, std::slice::from_ref(sentence))?.remove(0))
}

/// Token strings of a generation with every unknown-word marker replaced by
/// the source token it attended to most.
pub fn replace_oov(model: &Model, generation: &Generation, source: &Sentence) -> Vec<String> {
    generation
        .tokens
        .iter()
        .zip(&generation.source_index)
        .map(|(&id, &src)| {
            if id == UNK {
                source.tokens()[src].clone()
            } else {
                model.vocab.token(id).to_string()
            }
        })
        .collect()
}

/// Collapses every run of identical adjacent tokens to one.
pub fn merge_repeats<T: PartialEq + Clone>(tokens: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(tokens.len());
    for t in tokens {
        if out.last() != Some(t) {
            out.push(t.clone());
        }
    }
    out
}

/// Unknown-word replacement followed by repeat merging. Stray padding or
/// start markers, which a barely trained model can emit, are dropped.
pub fn postprocess(model: &Model, generation: &Generation, source: &Sentence) -> Sentence {
    let replaced: Vec<String> = replace_oov(model, generation, source)
        .into_iter()
        .zip(&generation.tokens)
        .filter(|(_, &id)| id != PAD && id != BOS)
        .map(|(t, _)| t)
        .collect();
    let tokens = merge_repeats(&replaced);
    Sentence::from_tokens(tokens).expect("vocabulary and source tokens are non-empty")
}

/// Simplifies a batch of sentences and post-processes each output.
pub fn simplify_all(model: &Model, sentences: &[Sentence]) -> Result<Vec<Sentence>> {
    let generations = generate(model, Decoder::Simple, sentences)?;
    Ok(generations
        .iter()
        .zip(sentences)
        .map(|(g, s)| postprocess(model, g, s))
        .collect())
}
