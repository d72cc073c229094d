//! The two-phase training loop, its semi-supervised extension and the
//! loss ablations.
//!
//! Every iteration is a fixed sequence of named updates. Each update builds
//! its losses in a fresh [`Session`] whose trainable groups are exactly the
//! groups that update may change, then takes one clipped Adam step on those
//! groups:
//!
//! | phase       | update          | groups        | losses                          |
//! |-------------|-----------------|---------------|---------------------------------|
//! | both        | `denoise`       | E, Gs, Gd     | `L_denoi`                       |
//! | init        | `reconstruct`   | E, Gs, Gd     | `L_rec`                         |
//! | adversarial | `generator`     | E, Gs, Gd     | `L_adv_Gs`, `L_div_Gs`, `L_rec` |
//! | both        | `critic`        | D, C          | `L_adv_D`, `L_div_C`            |
//! | adv, semi   | `cross_simple`  | E, Gs         | `L_cross_Gs`                    |
//! | adv, semi   | `cross_complex` | E, Gd         | `L_cross_Gd`                    |
//!
//! Iterations `1..=init_steps` form the initialization phase, the next
//! `adv_steps` the adversarial phase.

mod batch;
mod config;
mod log;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use self::batch::{step_seed, BatchStream, StreamPosition};
pub use self::config::{Mode, TrainingConfig, Variant};
pub use self::log::{LogRecord, TrainLog};

use crate::error::{Error, Result};
use crate::eval::{self, BleuOptions, EvalInstance, EvalReport};
use crate::inference::simplify_all;
use crate::losses::{self, CriticTraces};
use crate::model::{Checkpoint, NamedTensor};
use crate::model::{Decoder, Model};
use crate::params::{Group, GroupSet, ParamStore, Session};
use crate::tensor::optim::{Adam, AdamConfig, Moments};
use crate::tensor::{NodeId, Tensor};
use crate::text::EvalItem;
use crate::text::{Corpus, Vocabulary};

/// Training data as vocabulary ids.
#[derive(Clone, Debug, Default)]
pub struct TrainData {
    pub simple: Vec<Vec<usize>>,
    pub complex: Vec<Vec<usize>>,
    /// Labeled `(complex, simple)` pairs.
    pub pairs: Vec<(Vec<usize>, Vec<usize>)>,
    pub dev: Vec<EvalItem>,
}

impl TrainData {
    /// Encodes a corpus; empty sentences are dropped.
    pub fn new(vocab: &Vocabulary, corpus: &Corpus, dev: Vec<EvalItem>) -> Self {
        let encode = |side: &[crate::text::Sentence]| -> Vec<Vec<usize>> {
            side.iter().filter(|s| !s.is_empty()).map(|s| vocab.encode(s)).collect()
        };
        Self {
            simple: encode(&corpus.simple),
            complex: encode(&corpus.complex),
            pairs: corpus
                .parallel
                .iter()
                .filter(|p| !p.complex.is_empty() && !p.simple.is_empty())
                .map(|p| (vocab.encode(&p.complex), vocab.encode(&p.simple)))
                .collect(),
            dev,
        }
    }

    fn pick(side: &[Vec<usize>], idx: &[usize]) -> Vec<Vec<usize>> {
        idx.iter().map(|&i| side[i].clone()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Init,
    Adversarial,
}

/// What one update did, for instrumentation.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateRecord {
    pub name: &'static str,
    /// Groups the update was allowed to change.
    pub groups: GroupSet,
    /// Loss terms summed into the update, with their values.
    pub losses: Vec<(&'static str, f64)>,
    /// Groups whose values actually changed; filled only when the trainer
    /// is instrumented.
    pub changed: Option<GroupSet>,
}

impl UpdateRecord {
    pub fn has_loss(&self, name: &str) -> bool {
        self.losses.iter().any(|(n, _)| *n == name)
    }
}

/// Dev metrics of one evaluated checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub step: u64,
    pub sari: f64,
    pub bleu: f64,
    pub fe_diff: Option<f64>,
    pub word_diff: f64,
}

#[derive(Clone, Debug)]
struct Kept {
    candidate: Candidate,
    store: ParamStore,
}

/// Trainer state kept in a checkpoint's metadata next to the tensors.
#[derive(Serialize, Deserialize)]
struct TrainerState {
    config: TrainingConfig,
    adam: AdamConfig,
    step: u64,
    simple: StreamPosition,
    complex: StreamPosition,
    pairs: StreamPosition,
    log_len: usize,
    adam_steps: Vec<u64>,
    best_qualified: Option<Candidate>,
    best_any: Option<Candidate>,
}

const ADAM_M: &str = "adam.m/";
const ADAM_V: &str = "adam.v/";
const BEST_QUALIFIED: &str = "best.qualified/";
const BEST_ANY: &str = "best.any/";

fn stream_seed(seed: u64, which: u64) -> u64 {
    step_seed(seed, u64::MAX - which)
}

pub struct Trainer {
    pub model: Model,
    config: TrainingConfig,
    data: TrainData,
    adam: Adam,
    step: u64,
    simple: BatchStream,
    complex: BatchStream,
    pairs: BatchStream,
    log: TrainLog,
    best_qualified: Option<Kept>,
    best_any: Option<Kept>,
    instrument: bool,
    started: Instant,
}

impl Trainer {
    pub fn new(model: Model, config: TrainingConfig, data: TrainData) -> Result<Self> {
        let mut log = TrainLog::new();
        log.push(LogRecord::Start {
            seed: config.seed,
            config: config.clone(),
        })?;
        let adam = Adam::new(AdamConfig::default(), &model.store);
        Self::assemble(model, config, data, adam, 0, Default::default(), log)
    }

    fn assemble(
        model: Model,
        config: TrainingConfig,
        data: TrainData,
        adam: Adam,
        step: u64,
        positions: [StreamPosition; 3],
        log: TrainLog,
    ) -> Result<Self> {
        config.validate()?;
        if data.simple.is_empty() {
            return Err(Error::EmptyInput("no simple training sentences".into()));
        }
        if data.complex.is_empty() {
            return Err(Error::EmptyInput("no complex training sentences".into()));
        }
        if config.mode == Mode::Semisupervised && data.pairs.is_empty() {
            return Err(Error::EmptyInput("semi-supervised training needs labeled pairs".into()));
        }
        let lengths = |side: &[Vec<usize>]| side.iter().map(Vec::len).collect::<Vec<_>>();
        let (b, seed) = (config.batch_size, config.seed);
        let simple = BatchStream::at(lengths(&data.simple), b, stream_seed(seed, 0), positions[0]);
        let complex = BatchStream::at(lengths(&data.complex), b, stream_seed(seed, 1), positions[1]);
        let pair_lengths = data.pairs.iter().map(|(c, _)| c.len()).collect();
        let pairs = BatchStream::at(pair_lengths, b, stream_seed(seed, 2), positions[2]);
        Ok(Self {
            model,
            config,
            data,
            adam,
            step,
            simple,
            complex,
            pairs,
            log,
            best_qualified: None,
            best_any: None,
            instrument: false,
            started: Instant::now(),
        })
    }

    /// Records which groups each update changed (costs a parameter copy
    /// per update).
    pub fn instrument(&mut self, on: bool) {
        self.instrument = on;
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    /// Completed iterations.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.config.total_steps()
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    pub fn log_mut(&mut self) -> &mut TrainLog {
        &mut self.log
    }

    pub fn data(&self) -> &TrainData {
        &self.data
    }

    /// Phase of the next iteration.
    pub fn phase(&self) -> Phase {
        if self.step < self.config.init_steps {
            Phase::Init
        } else {
            Phase::Adversarial
        }
    }

    fn apply(
        &mut self,
        name: &'static str,
        groups: GroupSet,
        learning_rate: f64,
        build: impl FnOnce(&Model, &mut Session) -> Result<Vec<(&'static str, NodeId)>>,
    ) -> Result<UpdateRecord> {
        let before = self.instrument.then(|| self.model.store.clone());
        let (values, mut grads) = {
            let mut sess = Session::new(&self.model.store, groups);
            let terms = build(&self.model, &mut sess)?;
            let mut values = Vec::with_capacity(terms.len());
            for &(n, id) in &terms {
                values.push((n, sess.scalar(id)?));
            }
            let mut root = terms[0].1;
            for &(_, id) in &terms[1..] {
                root = sess.graph.add(root, id)?;
            }
            (values, sess.backward(root)?)
        };
        if let Some((n, v)) = values.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Contract(format!(
                "loss {n} became {v} in update `{name}` of step {}",
                self.step + 1
            )));
        }
        if self.config.clip_norm > 0.0 {
            grads.clip_global_norm(self.config.clip_norm);
        }
        self.adam.step(&mut self.model.store, &grads, groups, learning_rate)?;
        for &(n, v) in &values {
            self.log.push(LogRecord::Loss {
                step: self.step + 1,
                update: name.to_string(),
                name: n.to_string(),
                value: v,
            })?;
        }
        Ok(UpdateRecord {
            name,
            groups,
            losses: values,
            changed: before.map(|b| self.model.store.changed_since(&b)),
        })
    }

    /// Runs one iteration of the update sequence for the current phase.
    pub fn iteration(&mut self) -> Result<Vec<UpdateRecord>> {
        let cfg = self.config.clone();
        let phase = self.phase();
        let s = TrainData::pick(&self.data.simple, &self.simple.next_batch());
        let d = TrainData::pick(&self.data.complex, &self.complex.next_batch());
        let eps = cfg.eps;
        let noise_seed = step_seed(cfg.seed, self.step + 1);
        let (glr, clr) = (cfg.generator_lr, cfg.critic_lr);
        let mut records = Vec::with_capacity(5);

        records.push(self.apply("denoise", GroupSet::generator(), glr, |m, sess| {
            Ok(vec![("L_denoi", losses::denoising_loss(m, sess, &s, &d, noise_seed, cfg.swap_prob, eps)?)])
        })?);

        match phase {
            Phase::Init => records.push(self.apply("reconstruct", GroupSet::generator(), glr, |m, sess| {
                Ok(vec![("L_rec", losses::reconstruction_loss(m, sess, &s, &d, eps)?)])
            })?),
            Phase::Adversarial => records.push(self.apply("generator", GroupSet::generator(), glr, |m, sess| {
                let mut terms = Vec::with_capacity(3);
                let enc_d = m.encode(sess, &d)?;
                if cfg.variant.uses_adversarial() || cfg.variant.uses_diversification() {
                    let trace = losses::free_running_trace(m, sess, &enc_d, &d)?;
                    let (adv, div) = losses::generator_terms(m, sess, &trace, eps)?;
                    if cfg.variant.uses_adversarial() {
                        terms.push(("L_adv_Gs", adv));
                    }
                    if cfg.variant.uses_diversification() {
                        terms.push(("L_div_Gs", div));
                    }
                }
                let enc_s = m.encode(sess, &s)?;
                let ls = losses::decoder_nll(m, sess, Decoder::Simple, &enc_s, &s, eps)?;
                let ld = losses::decoder_nll(m, sess, Decoder::Complex, &enc_d, &d, eps)?;
                terms.push(("L_rec", sess.graph.add(ls, ld)?));
                Ok(terms)
            })?),
        }

        records.push(self.apply("critic", GroupSet::critics(), clr, |m, sess| {
            let traces = CriticTraces::build(m, sess, &s, &d)?;
            let (adv, div) = losses::critic_losses(m, sess, &traces, eps)?;
            Ok(vec![("L_adv_D", adv), ("L_div_C", div)])
        })?);

        if phase == Phase::Adversarial && cfg.mode == Mode::Semisupervised {
            let idx = self.pairs.next_batch();
            let complex: Vec<Vec<usize>> = idx.iter().map(|&i| self.data.pairs[i].0.clone()).collect();
            let simple: Vec<Vec<usize>> = idx.iter().map(|&i| self.data.pairs[i].1.clone()).collect();
            records.push(self.apply("cross_simple", GroupSet::simple_path(), glr, |m, sess| {
                let l = losses::transduction_nll(m, sess, Decoder::Simple, &complex, &simple, eps)?;
                Ok(vec![("L_cross_Gs", l)])
            })?);
            let to_complex = GroupSet::of(&[Group::Encoder, Group::ComplexDecoder]);
            records.push(self.apply("cross_complex", to_complex, glr, |m, sess| {
                let l = losses::transduction_nll(m, sess, Decoder::Complex, &simple, &complex, eps)?;
                Ok(vec![("L_cross_Gd", l)])
            })?);
        }

        self.step += 1;
        Ok(records)
    }

    /// Dev metrics of the current parameters, or `None` without dev data.
    pub fn evaluate_dev(&self) -> Result<Option<EvalReport>> {
        let n = match self.config.dev_limit {
            0 => self.data.dev.len(),
            k => k.min(self.data.dev.len()),
        };
        if n == 0 {
            return Ok(None);
        }
        evaluate_items(&self.model, &self.data.dev[..n]).map(Some)
    }

    /// Evaluates on dev, logs the row and updates the selection.
    pub fn checkpoint_eval(&mut self) -> Result<Option<Candidate>> {
        let Some(report) = self.evaluate_dev()? else {
            return Ok(None);
        };
        let candidate = Candidate {
            step: self.step,
            sari: report.sari,
            bleu: report.bleu,
            fe_diff: report.fe_diff.is_finite().then_some(report.fe_diff),
            word_diff: report.word_diff,
        };
        self.log.push(LogRecord::Eval {
            step: candidate.step,
            sari: candidate.sari,
            bleu: candidate.bleu,
            fe_diff: candidate.fe_diff,
            word_diff: candidate.word_diff,
            seconds: self.started.elapsed().as_secs_f64(),
        })?;
        ::log::info!(
            "step {}: dev SARI {:.2} BLEU {:.2} word-diff {:.3}",
            candidate.step,
            candidate.sari,
            candidate.bleu,
            candidate.word_diff
        );
        let better = |kept: &Option<Kept>| kept.as_ref().map_or(true, |k| candidate.sari > k.candidate.sari);
        if candidate.word_diff > self.config.word_diff_threshold && better(&self.best_qualified) {
            self.best_qualified = Some(Kept {
                candidate,
                store: self.model.store.clone(),
            });
        }
        if better(&self.best_any) {
            self.best_any = Some(Kept {
                candidate,
                store: self.model.store.clone(),
            });
        }
        Ok(Some(candidate))
    }

    fn due_for_eval(&self) -> bool {
        let every = self.config.eval_every;
        self.step == self.config.total_steps() || (every > 0 && self.step % every == 0)
    }

    /// Runs iterations until `limit` are complete (or training ends),
    /// evaluating at the configured cadence. The step-0 evaluation happens
    /// on the first call.
    pub fn run_until(&mut self, limit: u64) -> Result<()> {
        let limit = limit.min(self.config.total_steps());
        if self.step == 0 && self.log.evals().is_empty() {
            self.checkpoint_eval()?;
        }
        while self.step < limit {
            self.iteration()?;
            if self.due_for_eval() {
                self.checkpoint_eval()?;
            }
        }
        Ok(())
    }

    /// Trains to completion and logs the selection (once, however often
    /// this is called).
    pub fn run(&mut self) -> Result<Option<Candidate>> {
        self.run_until(self.config.total_steps())?;
        let selected = self.selection().map(|(c, q)| (*c, q));
        let logged = matches!(self.log.records().last(), Some(LogRecord::Selected { .. }));
        if let (Some((c, qualified)), false) = (selected, logged) {
            if !qualified {
                ::log::warn!(
                    "no checkpoint exceeded word-diff {}; selecting the best-SARI one",
                    self.config.word_diff_threshold
                );
            }
            self.log.push(LogRecord::Selected {
                step: c.step,
                sari: c.sari,
                word_diff: c.word_diff,
                qualified,
            })?;
        }
        Ok(selected.map(|(c, _)| c))
    }

    /// The selected checkpoint's metrics and whether it cleared the
    /// word-diff threshold: the best dev SARI among checkpoints above the
    /// threshold, else the best dev SARI overall.
    pub fn selection(&self) -> Option<(&Candidate, bool)> {
        match (&self.best_qualified, &self.best_any) {
            (Some(k), _) => Some((&k.candidate, true)),
            (None, Some(k)) => Some((&k.candidate, false)),
            (None, None) => None,
        }
    }

    /// The selected model, or the current one when nothing was evaluated.
    pub fn selected_model(&self) -> Model {
        let mut model = self.model.clone();
        if let Some(k) = self.best_qualified.as_ref().or(self.best_any.as_ref()) {
            model.store = k.store.clone();
        }
        model
    }

    /// Parameters, optimizer moments, stream positions, selection state and
    /// the log length, enough to resume bitwise.
    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ckpt = self.model.to_checkpoint()?;
        let names: Vec<String> = self.model.store.iter().map(|(_, p)| p.name.clone()).collect();
        let moments = self.adam.moments();
        for (i, name) in names.iter().enumerate() {
            let m = moments.get(i).cloned().unwrap_or_default();
            if m.first.is_empty() {
                continue;
            }
            ckpt.tensors.push(NamedTensor {
                name: format!("{ADAM_M}{name}"),
                tensor: Tensor::vector(m.first),
            });
            ckpt.tensors.push(NamedTensor {
                name: format!("{ADAM_V}{name}"),
                tensor: Tensor::vector(m.second),
            });
        }
        for (prefix, kept) in [(BEST_QUALIFIED, &self.best_qualified), (BEST_ANY, &self.best_any)] {
            if let Some(k) = kept {
                for (_, p) in k.store.iter() {
                    ckpt.tensors.push(NamedTensor {
                        name: format!("{prefix}{}", p.name),
                        tensor: p.value.clone(),
                    });
                }
            }
        }
        let state = TrainerState {
            config: self.config.clone(),
            adam: self.adam.config.clone(),
            step: self.step,
            simple: self.simple.position(),
            complex: self.complex.position(),
            pairs: self.pairs.position(),
            log_len: self.log.len(),
            adam_steps: (0..names.len()).map(|i| moments.get(i).map_or(0, |m| m.steps)).collect(),
            best_qualified: self.best_qualified.as_ref().map(|k| k.candidate),
            best_any: self.best_any.as_ref().map(|k| k.candidate),
        };
        let state = serde_json::to_value(state).map_err(|e| Error::Checkpoint(e.to_string()))?;
        ckpt.meta
            .as_object_mut()
            .ok_or_else(|| Error::Checkpoint("model metadata is not an object".into()))?
            .insert("trainer".into(), state);
        Ok(ckpt)
    }

    /// Resumes from [`Trainer::to_checkpoint`]. `log` is the log written so
    /// far; records past the checkpoint's offset are discarded.
    pub fn from_checkpoint(ckpt: &Checkpoint, data: TrainData, log: TrainLog) -> Result<Self> {
        let corrupt = |m: String| Error::Checkpoint(m);
        let state: TrainerState = serde_json::from_value(
            ckpt.meta
                .get("trainer")
                .cloned()
                .ok_or_else(|| corrupt("not a training checkpoint".into()))?,
        )
        .map_err(|e| corrupt(format!("trainer state: {e}")))?;
        let model = Model::from_checkpoint(ckpt)?;
        let names: Vec<String> = model.store.iter().map(|(_, p)| p.name.clone()).collect();
        if state.adam_steps.len() != names.len() {
            return Err(corrupt("optimizer state does not match the model".into()));
        }
        let mut moments = Vec::with_capacity(names.len());
        for (name, &steps) in names.iter().zip(&state.adam_steps) {
            let first = ckpt.tensor(&format!("{ADAM_M}{name}"));
            let second = ckpt.tensor(&format!("{ADAM_V}{name}"));
            moments.push(match (first, second) {
                (Some(m), Some(v)) => Moments {
                    steps,
                    first: m.data().to_vec(),
                    second: v.data().to_vec(),
                },
                _ => Moments::default(),
            });
        }
        let adam = Adam::from_moments(state.adam.clone(), moments);
        let records = log.records();
        if records.len() < state.log_len {
            return Err(corrupt(format!(
                "log has {} records, checkpoint expects {}",
                records.len(),
                state.log_len
            )));
        }
        let log = TrainLog::from_records(records[..state.log_len].to_vec());
        let restore = |prefix: &str, candidate: Option<Candidate>| -> Result<Option<Kept>> {
            let Some(candidate) = candidate else { return Ok(None) };
            let mut store = model.store.clone();
            let ids: Vec<_> = store.iter().map(|(id, p)| (id, p.name.clone())).collect();
            for (id, name) in ids {
                let t = ckpt
                    .tensor(&format!("{prefix}{name}"))
                    .ok_or_else(|| corrupt(format!("missing selected parameter `{name}`")))?;
                *store.value_mut(id) = t.clone();
            }
            Ok(Some(Kept { candidate, store }))
        };
        let best_qualified = restore(BEST_QUALIFIED, state.best_qualified)?;
        let best_any = restore(BEST_ANY, state.best_any)?;
        let mut trainer = Self::assemble(
            model,
            state.config,
            data,
            adam,
            state.step,
            [state.simple, state.complex, state.pairs],
            log,
        )?;
        trainer.best_qualified = best_qualified;
        trainer.best_any = best_any;
        Ok(trainer)
    }
}

/// Simplifies every item's source and scores the outputs against its
/// references.
pub fn evaluate_items(model: &Model, items: &[EvalItem]) -> Result<EvalReport> {
    let sources: Vec<_> = items.iter().map(|i| i.source.clone()).collect();
    let predictions = simplify_all(model, &sources)?;
    let instances = items
        .iter()
        .zip(predictions)
        .map(|(item, p)| EvalInstance::new(item.source.clone(), p, item.references.clone()))
        .collect::<Result<Vec<_>>>()?;
    eval::evaluate(&instances, BleuOptions::default())
}

/// Fraction of sentences a frozen discriminator puts on the right side of
/// 0.5: `A_s(X_s)` traces of `simple` should score above it, free-running
/// `A_s(X_d)` traces of `complex` at or below.
pub fn discriminator_accuracy(model: &Model, simple: &[Vec<usize>], complex: &[Vec<usize>]) -> Result<f64> {
    if simple.is_empty() || complex.is_empty() {
        return Err(Error::EmptyInput("probe needs sentences from both sides".into()));
    }
    let mut correct = 0usize;
    for (batch, real) in simple.chunks(32).map(|b| (b, true)).chain(complex.chunks(32).map(|b| (b, false))) {
        let mut sess = Session::frozen(&model.store);
        let enc = model.encode(&mut sess, batch)?;
        let trace = if real {
            losses::self_trace(model, &mut sess, Decoder::Simple, &enc, batch)?
        } else {
            losses::free_running_trace(model, &mut sess, &enc, batch)?
        };
        let p = model.discriminate(&mut sess, &trace)?;
        correct += sess.graph.value(p).data().iter().filter(|&&p| (p > 0.5) == real).count();
    }
    Ok(correct as f64 / (simple.len() + complex.len()) as f64)
}

/// Builds a model and trains it to completion, returning the trainer (for
/// its log and selection).
pub fn train(model: Model, config: TrainingConfig, data: TrainData) -> Result<Trainer> {
    let mut trainer = Trainer::new(model, config, data)?;
    trainer.run()?;
    Ok(trainer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::text::{tokenize, ParallelPair, Sentence};

    fn sentences(lines: &[&str]) -> Vec<Sentence> {
        lines.iter().map(|l| tokenize(l).unwrap()).collect()
    }

    fn setup(mode: Mode, variant: Variant, init_steps: u64, adv_steps: u64) -> (Model, TrainingConfig, TrainData) {
        let simple = sentences(&["the cat sat .", "a dog ran .", "the dog sat .", "a cat ran ."]);
        let complex = sentences(&[
            "moreover , the feline reclined .",
            "the canine sprinted , however the feline reclined .",
            "thus , a canine sprinted .",
        ]);
        let parallel = vec![ParallelPair {
            complex: tokenize("the feline reclined .").unwrap(),
            simple: tokenize("the cat sat .").unwrap(),
        }];
        let corpus = Corpus::new(simple, complex).with_parallel(parallel);
        let vocab = Vocabulary::build(corpus.all_sentences(), 100);
        let dev = vec![EvalItem {
            source: tokenize("the feline sprinted .").unwrap(),
            references: vec![tokenize("the cat ran .").unwrap()],
        }];
        let data = TrainData::new(&vocab, &corpus, dev);
        let cfg = ModelConfig {
            emb_dim: 6,
            hidden: 5,
            attention_dim: 4,
            cnn_filters: 3,
            ..ModelConfig::desk()
        };
        let model = Model::new(cfg, vocab, None, 3).unwrap();
        let config = TrainingConfig {
            mode,
            variant,
            init_steps,
            adv_steps,
            batch_size: 2,
            eval_every: 0,
            ..TrainingConfig::desk()
        };
        (model, config, data)
    }

    fn one_iteration(mode: Mode, variant: Variant, init: bool) -> Vec<UpdateRecord> {
        let (model, config, data) = setup(mode, variant, u64::from(init), u64::from(!init));
        let mut t = Trainer::new(model, config, data).unwrap();
        t.instrument(true);
        t.iteration().unwrap()
    }

    fn names(records: &[UpdateRecord]) -> Vec<&'static str> {
        records.iter().map(|r| r.name).collect()
    }

    fn assert_discipline(records: &[UpdateRecord]) {
        for r in records {
            assert_eq!(r.changed, Some(r.groups), "update {} changed other groups", r.name);
        }
    }

    #[test]
    fn zero_steps_leave_parameters_unchanged() {
        let (model, config, data) = setup(Mode::Unsupervised, Variant::Full, 0, 0);
        let before = model.store.clone();
        let t = train(model, config, data).unwrap();
        assert_eq!(t.model.store.changed_since(&before), GroupSet::EMPTY);
        assert_eq!(t.step(), 0);
    }

    #[test]
    fn init_phase_update_sequence() {
        let r = one_iteration(Mode::Unsupervised, Variant::Full, true);
        assert_eq!(names(&r), ["denoise", "reconstruct", "critic"]);
        assert_eq!(r[0].groups, GroupSet::generator());
        assert_eq!(r[1].groups, GroupSet::generator());
        assert_eq!(r[2].groups, GroupSet::critics());
        assert!(r[2].has_loss("L_adv_D") && r[2].has_loss("L_div_C"));
        assert_discipline(&r);
    }

    #[test]
    fn adversarial_phase_update_sequence() {
        let r = one_iteration(Mode::Unsupervised, Variant::Full, false);
        assert_eq!(names(&r), ["denoise", "generator", "critic"]);
        let terms: Vec<_> = r[1].losses.iter().map(|(n, _)| *n).collect();
        assert_eq!(terms, ["L_adv_Gs", "L_div_Gs", "L_rec"]);
        assert_discipline(&r);
    }

    #[test]
    fn semisupervised_appends_cross_entropy_updates() {
        let r = one_iteration(Mode::Semisupervised, Variant::Full, false);
        assert_eq!(names(&r), ["denoise", "generator", "critic", "cross_simple", "cross_complex"]);
        assert_eq!(r[3].groups, GroupSet::simple_path());
        assert_eq!(r[4].groups, GroupSet::of(&[Group::Encoder, Group::ComplexDecoder]));
        assert_discipline(&r);
        // no cross-entropy during initialization
        let r = one_iteration(Mode::Semisupervised, Variant::Full, true);
        assert_eq!(names(&r), ["denoise", "reconstruct", "critic"]);
    }

    #[test]
    fn ablations_drop_only_the_generator_term() {
        let r = one_iteration(Mode::Unsupervised, Variant::NoAdversarial, false);
        assert!(!r[1].has_loss("L_adv_Gs") && r[1].has_loss("L_div_Gs"));
        assert!(r[2].has_loss("L_adv_D") && r[2].has_loss("L_div_C"));
        let r = one_iteration(Mode::Unsupervised, Variant::NoDiversification, false);
        assert!(r[1].has_loss("L_adv_Gs") && !r[1].has_loss("L_div_Gs"));
        assert!(r[2].has_loss("L_adv_D") && r[2].has_loss("L_div_C"));
    }

    #[test]
    fn missing_data_is_rejected() {
        let (model, config, mut data) = setup(Mode::Semisupervised, Variant::Full, 1, 1);
        data.pairs.clear();
        assert!(matches!(Trainer::new(model.clone(), config, data.clone()), Err(Error::EmptyInput(_))));
        let (_, config, _) = setup(Mode::Unsupervised, Variant::Full, 1, 1);
        data.simple.clear();
        assert!(Trainer::new(model, config, data).is_err());
    }

    #[test]
    fn seeded_runs_repeat_and_resume_bitwise() {
        let (model, config, data) = setup(Mode::Semisupervised, Variant::Full, 2, 4);
        let config = TrainingConfig { eval_every: 2, ..config };
        let full = train(model.clone(), config.clone(), data.clone()).unwrap();
        let again = train(model.clone(), config.clone(), data.clone()).unwrap();
        assert_eq!(full.log().loss_trace(), again.log().loss_trace());

        let mut first = Trainer::new(model, config, data.clone()).unwrap();
        first.run_until(3).unwrap();
        let bytes = first.to_checkpoint().unwrap().to_bytes().unwrap();
        let ckpt = Checkpoint::from_bytes(&bytes).unwrap();
        let mut resumed = Trainer::from_checkpoint(&ckpt, data, first.log().clone()).unwrap();
        resumed.run().unwrap();
        assert_eq!(resumed.log().loss_trace(), full.log().loss_trace());
        assert_eq!(resumed.model.store.changed_since(&full.model.store), GroupSet::EMPTY);
        assert_eq!(resumed.selection(), full.selection());
        assert_eq!(resumed.selected_model().store, full.selected_model().store);
    }

    #[test]
    fn selection_falls_back_to_best_sari() {
        let (model, config, data) = setup(Mode::Unsupervised, Variant::Full, 1, 1);
        let config = TrainingConfig {
            eval_every: 1,
            word_diff_threshold: 1e9,
            ..config
        };
        let t = train(model, config, data).unwrap();
        let (chosen, qualified) = t.selection().unwrap();
        assert!(!qualified);
        let evals = t.log().evals().len();
        assert_eq!(evals, 3);
        let best = t
            .log()
            .records()
            .iter()
            .filter_map(|r| match r {
                LogRecord::Eval { sari, .. } => Some(*sari),
                _ => None,
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(chosen.sari, best);
        assert!(matches!(t.log().records().last(), Some(LogRecord::Selected { qualified: false, .. })));
    }

    #[test]
    fn probe_accuracy_is_a_fraction() {
        let (model, _, data) = setup(Mode::Unsupervised, Variant::Full, 0, 0);
        let acc = discriminator_accuracy(&model, &data.simple, &data.complex).unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert!(discriminator_accuracy(&model, &[], &data.complex).is_err());
    }
}
