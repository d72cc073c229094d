use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use simplify_core::eval::{self, BleuOptions};
use simplify_core::inference::simplify_all;
use simplify_core::model::Model;
use simplify_core::text::{
    generate_synthetic_corpus, load_sentences, partition_corpus, read_lines, tokenize, write_lines, write_sentences,
    BucketStats, PartitionBounds, SynthConfig,
};

use crate::kv::{self, KeyValues};
use crate::{io_error, CliError, ConfigArgs};

pub(crate) fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

/// Writes the effective configuration into `dir/config.txt` and the log.
pub(crate) fn echo_config(dir: &Path, header: &str, sections: &[serde_json::Value]) -> Result<(), CliError> {
    let text = format!("# {header}\n{}", kv::render(sections));
    log::info!("effective configuration:\n{text}");
    let path = dir.join("config.txt");
    fs::write(&path, text).map_err(|e| io_error(&path, e))
}

fn to_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("configs serialize")
}

fn stats_row(name: &str, s: &BucketStats) -> String {
    format!("{name}\t{}\t{:.2}\t{:.2}\t{:.2}\t{:.2}", s.count, s.avg_words, s.avg_fe, s.min_fe, s.max_fe)
}

pub(crate) fn partition(input: &Path, out: &Path, args: &ConfigArgs) -> Result<(), CliError> {
    let mut kv = KeyValues::load(args.config.as_deref(), &args.overrides)?;
    let bounds: PartitionBounds = kv.take(&PartitionBounds::default())?;
    kv.finish()?;
    if bounds.complex_max > bounds.simple_min {
        return Err(CliError::Usage("complex_max must not exceed simple_min".into()));
    }
    let sentences = load_sentences(input)?;
    create_dir(out)?;
    echo_config(out, &format!("simplify partition --input {}", input.display()), &[to_value(&bounds)])?;
    let p = partition_corpus(sentences, bounds);
    write_sentences(&out.join("simple.txt"), p.simple.iter().map(|(s, _)| s))?;
    write_sentences(&out.join("complex.txt"), p.complex.iter().map(|(s, _)| s))?;
    let mut stats = String::from("set\tsentences\tavg_words\tavg_fe\tmin_fe\tmax_fe\n");
    let _ = writeln!(stats, "{}", stats_row("simple", &p.simple_stats()));
    let _ = writeln!(stats, "{}", stats_row("complex", &p.complex_stats()));
    let path = out.join("stats.tsv");
    fs::write(&path, &stats).map_err(|e| io_error(&path, e))?;
    print!("{stats}");
    println!("discarded {} (middle band), unscored {}", p.discarded, p.unscored);
    Ok(())
}

pub(crate) fn synth(out: &Path, seed: Option<u64>, args: &ConfigArgs) -> Result<(), CliError> {
    let mut kv = KeyValues::load(args.config.as_deref(), &args.overrides)?;
    if let Some(s) = seed {
        kv.set("seed", s);
    }
    let config: SynthConfig = kv.take(&SynthConfig::default())?;
    kv.finish()?;
    let corpus = generate_synthetic_corpus(&config)?;
    create_dir(out)?;
    echo_config(out, "simplify synth", &[to_value(&config)])?;
    corpus.write_to(out)?;
    println!(
        "wrote {} simple, {} complex, {} labeled pairs, {} dev, {} test to {}",
        corpus.corpus.simple.len(),
        corpus.corpus.complex.len(),
        corpus.corpus.parallel.len(),
        corpus.dev.len(),
        corpus.test.len(),
        out.display()
    );
    Ok(())
}

/// One output line per input line; blank lines stay blank.
pub(crate) fn simplify(model: &Path, input: &Path, output: &Path) -> Result<(), CliError> {
    let model = Model::load(model)?;
    let lines = read_lines(input)?;
    let mut sentences = Vec::new();
    let mut slots = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if !line.trim().is_empty() {
            sentences.push(tokenize(line)?);
            slots.push(i);
        }
    }
    let outputs = simplify_all(&model, &sentences)?;
    let mut out = vec![String::new(); lines.len()];
    for (slot, s) in slots.into_iter().zip(outputs) {
        out[slot] = s.detokenize();
    }
    write_lines(output, &out)?;
    Ok(())
}

pub(crate) fn evaluate(src: &Path, pred: &Path, refs: &[PathBuf], report: &Path, smooth: bool) -> Result<(), CliError> {
    let instances = eval::load_instances(src, pred, refs)?;
    let options = BleuOptions {
        smooth,
        ..BleuOptions::default()
    };
    let r = eval::evaluate(&instances, options)?;
    r.write(report)?;
    println!(
        "SARI {:.2}  BLEU {:.2}  FE-diff {:.2}  word-diff {:.2}  ({} instances, {} without FE)",
        r.sari,
        r.bleu,
        r.fe_diff,
        r.word_diff,
        r.rows.len(),
        r.fe_skipped
    );
    Ok(())
}
