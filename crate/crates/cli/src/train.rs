use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use simplify_core::eval::{load_eval_items, EvalReport};
use simplify_core::model::{Checkpoint, Model, ModelConfig};
use simplify_core::text::{load_embeddings, load_parallel, load_sentences, Corpus, Embeddings, EvalItem, Vocabulary};
use simplify_core::training::{evaluate_items, Mode, TrainData, TrainLog, Trainer, TrainingConfig};

use crate::kv::{self, KeyValues};
use crate::tools::{create_dir, echo_config};
use crate::{io_error, CliError, ConfigArgs};

const STATE: &str = "state.ckpt";
const LOG: &str = "train_log.jsonl";

/// Everything `train` reads from its configuration.
#[derive(Clone, Debug)]
struct Setup {
    training: TrainingConfig,
    model: ModelConfig,
    max_vocab: usize,
    /// Stop (resumably) once this many iterations are complete.
    stop_after: Option<u64>,
    /// Labeled pairs file, `None` when absent or disabled.
    parallel: Option<PathBuf>,
    embeddings: Option<PathBuf>,
}

fn optional_path(kv: &mut KeyValues, key: &str, default: PathBuf) -> Option<PathBuf> {
    match kv.take_raw(key) {
        Some(v) if v == "none" || v.is_empty() => None,
        Some(v) => Some(PathBuf::from(v)),
        None => default.exists().then_some(default),
    }
}

impl Setup {
    fn from_args(data: &Path, seed: Option<u64>, args: &ConfigArgs) -> Result<(Self, KeyValues), CliError> {
        let mut kv = KeyValues::load(args.config.as_deref(), &args.overrides)?;
        if let Some(s) = seed {
            kv.set("seed", s);
        }
        let (training, model) = match kv.take_raw("preset").as_deref() {
            None | Some("desk") => (TrainingConfig::desk(), ModelConfig::desk()),
            Some("paper") => (TrainingConfig::paper(), ModelConfig::paper()),
            Some(other) => return Err(CliError::Usage(format!("unknown preset `{other}` (desk, paper)"))),
        };
        let training = kv.take(&training)?;
        let model = kv.take(&model)?;
        training.validate()?;
        model.validate()?;
        let max_vocab = kv.take_parsed("max_vocab")?.unwrap_or(512);
        if max_vocab <= 4 {
            return Err(CliError::Usage("max_vocab must exceed the 4 special tokens".into()));
        }
        let stop_after = kv.take_parsed("stop_after")?;
        let parallel = optional_path(&mut kv, "parallel", data.join("parallel.tsv"));
        let embeddings = optional_path(&mut kv, "embeddings", data.join("embeddings.txt"));
        Ok((
            Self {
                training,
                model,
                max_vocab,
                stop_after,
                parallel,
                embeddings,
            },
            kv,
        ))
    }

    fn sections(&self) -> Vec<serde_json::Value> {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or("none".to_string(), |p| p.display().to_string());
        vec![
            serde_json::to_value(&self.training).expect("serializable"),
            serde_json::to_value(&self.model).expect("serializable"),
            kv::section(&[
                ("max_vocab", self.max_vocab.to_string()),
                ("parallel", path(&self.parallel)),
                ("embeddings", path(&self.embeddings)),
            ]),
        ]
    }
}

/// A corpus directory loaded from disk.
struct Loaded {
    corpus: Corpus,
    dev: Vec<EvalItem>,
    test: Vec<EvalItem>,
    embeddings: Option<Embeddings>,
}

/// `prefix.src` with every `prefix.ref.{k}` present, in order of `k`.
fn eval_split(data: &Path, prefix: &str) -> Result<Vec<EvalItem>, CliError> {
    let src = data.join(format!("{prefix}.src"));
    if !src.exists() {
        return Ok(Vec::new());
    }
    let refs: Vec<PathBuf> = (0..)
        .map(|k| data.join(format!("{prefix}.ref.{k}")))
        .take_while(|p| p.exists())
        .collect();
    if refs.is_empty() {
        return Err(CliError::Usage(format!("{} has no {prefix}.ref.0", data.display())));
    }
    Ok(load_eval_items(&src, &refs)?)
}

fn load(data: &Path, setup: &Setup) -> Result<Loaded, CliError> {
    let simple = load_sentences(&data.join("simple.txt"))?;
    let complex = load_sentences(&data.join("complex.txt"))?;
    let parallel = match &setup.parallel {
        Some(p) => load_parallel(p)?,
        None => Vec::new(),
    };
    if setup.training.mode == Mode::Semisupervised && parallel.is_empty() {
        return Err(CliError::Usage(
            "mode=semisupervised needs labeled pairs: a non-empty parallel.tsv or parallel=<path>".into(),
        ));
    }
    let embeddings = setup.embeddings.as_deref().map(load_embeddings).transpose()?;
    Ok(Loaded {
        corpus: Corpus::new(simple, complex).with_parallel(parallel),
        dev: eval_split(data, "dev")?,
        test: eval_split(data, "test")?,
        embeddings,
    })
}

/// Outcome of one training run.
struct RunSummary {
    pub dev: Option<EvalReport>,
    pub test: Option<EvalReport>,
}

fn write_report(out: &Path, name: &str, report: &Option<EvalReport>) -> Result<(), CliError> {
    if let Some(r) = report {
        r.write(&out.join(name))?;
    }
    Ok(())
}

fn run_training(
    loaded: &Loaded,
    setup: &Setup,
    out: &Path,
    header: &str,
    resume: bool,
) -> Result<RunSummary, CliError> {
    create_dir(out)?;
    let trainer = if resume {
        let (state_path, log_path) = (out.join(STATE), out.join(LOG));
        let ckpt = Checkpoint::read(&state_path)?;
        let log = TrainLog::read(&log_path)?;
        let vocab = Model::from_checkpoint(&ckpt)?.vocab;
        let data = TrainData::new(&vocab, &loaded.corpus, loaded.dev.clone());
        let t = Trainer::from_checkpoint(&ckpt, data, log)?;
        log::info!("resuming at step {} of {}", t.step(), t.config().total_steps());
        t
    } else {
        echo_config(out, header, &setup.sections())?;
        let vocab = Vocabulary::build(loaded.corpus.all_sentences(), setup.max_vocab);
        let model = Model::new(setup.model.clone(), vocab.clone(), loaded.embeddings.as_ref(), setup.training.seed)?;
        let data = TrainData::new(&vocab, &loaded.corpus, loaded.dev.clone());
        Trainer::new(model, setup.training.clone(), data)?
    };
    finish_run(trainer, loaded, out, setup.stop_after)
}

/// Trains to completion with periodic resumable state, then writes the
/// selected model, its marker and its reports.
fn finish_run(mut trainer: Trainer, loaded: &Loaded, out: &Path, stop_after: Option<u64>) -> Result<RunSummary, CliError> {
    let (state_path, log_path) = (out.join(STATE), out.join(LOG));
    trainer.log_mut().persist(&log_path)?;
    let total = trainer.config().total_steps();
    let chunk = match trainer.config().eval_every {
        0 => total.max(1),
        k => k,
    };
    let stop = stop_after.unwrap_or(u64::MAX);
    while !trainer.is_done() {
        if trainer.step() >= stop {
            println!("stopped after step {}; continue with --resume", trainer.step());
            return Ok(RunSummary { dev: None, test: None });
        }
        let next = ((trainer.step() / chunk + 1) * chunk).min(stop);
        trainer.run_until(next)?;
        trainer.to_checkpoint()?.write(&state_path)?;
    }
    trainer.run()?;
    trainer.to_checkpoint()?.write(&state_path)?;
    let model = trainer.selected_model();
    model.save(&out.join("model.ckpt"))?;

    let mut marker = String::new();
    match trainer.selection() {
        Some((c, qualified)) => {
            let _ = writeln!(marker, "step = {}", c.step);
            let _ = writeln!(marker, "sari = {}", c.sari);
            let _ = writeln!(marker, "bleu = {}", c.bleu);
            let _ = writeln!(marker, "word_diff = {}", c.word_diff);
            let _ = writeln!(marker, "qualified = {qualified}");
        }
        None => {
            let _ = writeln!(marker, "step = {}", trainer.step());
            marker.push_str("# no dev set: final parameters\n");
        }
    }
    let path = out.join("selected.txt");
    fs::write(&path, marker).map_err(|e| io_error(&path, e))?;

    let report = |items: &[EvalItem]| -> Result<Option<EvalReport>, CliError> {
        if items.is_empty() {
            return Ok(None);
        }
        Ok(Some(evaluate_items(&model, items)?))
    };
    let summary = RunSummary {
        dev: report(&loaded.dev)?,
        test: report(&loaded.test)?,
    };
    write_report(out, "report.dev.txt", &summary.dev)?;
    write_report(out, "report.test.txt", &summary.test)?;
    if let Some(r) = summary.test.as_ref().or(summary.dev.as_ref()) {
        println!(
            "{}: SARI {:.2}  BLEU {:.2}  FE-diff {:.2}  word-diff {:.2}",
            out.display(),
            r.sari,
            r.bleu,
            r.fe_diff,
            r.word_diff
        );
    }
    Ok(summary)
}

pub(crate) fn train_command(
    data: &Path,
    out: &Path,
    seed: Option<u64>,
    resume: bool,
    args: &ConfigArgs,
) -> Result<(), CliError> {
    let (setup, kv) = Setup::from_args(data, seed, args)?;
    kv.finish()?;
    let loaded = load(data, &setup)?;
    let header = format!("simplify train --data {} --out {}", data.display(), out.display());
    run_training(&loaded, &setup, out, &header, resume)?;
    Ok(())
}

/// Mean test (or dev) metrics over the seeds of one labeled-set size.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub pairs: usize,
    pub runs: usize,
    pub sari: f64,
    pub bleu: f64,
    pub fe_diff: f64,
    pub word_diff: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Trains once per (size, seed): unsupervised for size 0, otherwise
/// semi-supervised on the first `size` labeled pairs. Writes each run under
/// `out/pairs-{size}/seed-{seed}` and the table to `out/sweep.tsv`.
pub fn sweep(data: &Path, out: &Path, sizes: &[usize], seeds: &[u64], args: &ConfigArgs) -> Result<Vec<SweepRow>, CliError> {
    if sizes.is_empty() || seeds.is_empty() {
        return Err(CliError::Usage("sweep needs at least one size and one seed".into()));
    }
    let (mut setup, kv) = Setup::from_args(data, None, args)?;
    kv.finish()?;
    setup.training.mode = Mode::Unsupervised;
    let loaded = load(data, &setup)?;
    let available = loaded.corpus.parallel.len();
    if let Some(&too_many) = sizes.iter().find(|&&n| n > available) {
        return Err(CliError::Usage(format!("size {too_many} exceeds the {available} labeled pairs")));
    }
    if loaded.test.is_empty() && loaded.dev.is_empty() {
        return Err(CliError::Usage("sweep needs a dev or test set to score".into()));
    }
    create_dir(out)?;
    let mut rows = Vec::new();
    for &size in sizes {
        let mut subset = Loaded {
            corpus: loaded.corpus.clone(),
            dev: loaded.dev.clone(),
            test: loaded.test.clone(),
            embeddings: loaded.embeddings.clone(),
        };
        subset.corpus.parallel.truncate(size);
        let mut reports = Vec::new();
        for &seed in seeds {
            let mut run = setup.clone();
            run.training.seed = seed;
            run.training.mode = if size == 0 { Mode::Unsupervised } else { Mode::Semisupervised };
            let dir = out.join(format!("pairs-{size}")).join(format!("seed-{seed}"));
            let header = format!("simplify sweep --data {} (pairs {size}, seed {seed})", data.display());
            // the vocabulary always covers the full pair file, so every size shares it
            let summary = run_training_with_vocab(&loaded, &subset, &run, &dir, &header)?;
            reports.push(summary.test.or(summary.dev).expect("an evaluation split exists"));
        }
        rows.push(SweepRow {
            pairs: size,
            runs: reports.len(),
            sari: mean(reports.iter().map(|r| r.sari)),
            bleu: mean(reports.iter().map(|r| r.bleu)),
            fe_diff: mean(reports.iter().map(|r| r.fe_diff)),
            word_diff: mean(reports.iter().map(|r| r.word_diff)),
        });
    }
    let mut table = String::from("pairs\truns\tSARI\tBLEU\tFE-diff\tword-diff\n");
    for r in &rows {
        let _ = writeln!(
            table,
            "{}\t{}\t{:.2}\t{:.2}\t{:.2}\t{:.2}",
            r.pairs, r.runs, r.sari, r.bleu, r.fe_diff, r.word_diff
        );
    }
    let path = out.join("sweep.tsv");
    fs::write(&path, &table).map_err(|e| io_error(&path, e))?;
    print!("{table}");
    Ok(rows)
}

fn run_training_with_vocab(
    full: &Loaded,
    subset: &Loaded,
    setup: &Setup,
    out: &Path,
    header: &str,
) -> Result<RunSummary, CliError> {
    create_dir(out)?;
    echo_config(out, header, &setup.sections())?;
    let vocab = Vocabulary::build(full.corpus.all_sentences(), setup.max_vocab);
    let model = Model::new(setup.model.clone(), vocab.clone(), subset.embeddings.as_ref(), setup.training.seed)?;
    let data = TrainData::new(&vocab, &subset.corpus, subset.dev.clone());
    let trainer = Trainer::new(model, setup.training.clone(), data)?;
    finish_run(trainer, subset, out, setup.stop_after)
}

pub(crate) fn sweep_command(
    data: &Path,
    out: &Path,
    sizes: &[usize],
    seeds: &[u64],
    args: &ConfigArgs,
) -> Result<(), CliError> {
    sweep(data, out, sizes, seeds, args).map(|_| ())
}
