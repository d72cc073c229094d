//! SARI, multi-reference BLEU, FE-diff and word-diff, plus report files.
//!
//! Corpus values are means of per-instance values, except BLEU which pools
//! n-gram counts over the corpus. Means sum in sorted order, so every metric
//! is bitwise independent of instance order.

mod bleu;
mod ngram;
mod sari;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{read_lines, sentence_ease, tokenize, EvalItem, Sentence};

pub use bleu::{bleu_stats, closest_reference_len, corpus_bleu, BleuOptions, BleuStats};
pub use sari::{sari_components, sentence_sari};

/// Highest n-gram order for SARI and BLEU.
pub const MAX_N: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalInstance {
    pub source: Sentence,
    pub prediction: Sentence,
    pub references: Vec<Sentence>,
}

impl EvalInstance {
    pub fn new(source: Sentence, prediction: Sentence, references: Vec<Sentence>) -> Result<Self> {
        if references.is_empty() {
            return Err(Error::Contract("an evaluation instance needs at least one reference".into()));
        }
        Ok(Self {
            source,
            prediction,
            references,
        })
    }

    /// `|source| - |prediction|` in tokens.
    pub fn word_diff(&self) -> f64 {
        self.source.n() as f64 - self.prediction.n() as f64
    }

    /// `FE(prediction) - FE(source)`, or `None` when either side has no words.
    pub fn fe_diff(&self) -> Option<f64> {
        Some(sentence_ease(&self.prediction).ok()? - sentence_ease(&self.source).ok()?)
    }

    pub fn sari(&self) -> f64 {
        sentence_sari(&self.source, &self.prediction, &self.references, MAX_N)
    }
}

/// Clipped unigram F1 between two sentences: `2 * |a ∩ b| / (|a| + |b|)`
/// over token multisets. Two empty sentences overlap fully.
pub fn unigram_overlap(a: &Sentence, b: &Sentence) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let ca = ngram::counts(a.tokens(), 1);
    let cb = ngram::counts(b.tokens(), 1);
    let common: usize = ca.iter().map(|(g, &n)| n.min(cb.get(g).copied().unwrap_or(0))).sum();
    2.0 * common as f64 / (a.n() + b.n()) as f64
}

/// Order-independent mean.
fn mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

fn require(instances: &[EvalInstance]) -> Result<()> {
    if instances.is_empty() {
        return Err(Error::EmptyInput("evaluation corpus is empty".into()));
    }
    Ok(())
}

pub fn word_diff(instances: &[EvalInstance]) -> Result<f64> {
    require(instances)?;
    Ok(mean(instances.iter().map(EvalInstance::word_diff).collect()))
}

/// Mean FE difference over instances where it is defined, and the number
/// of instances skipped. NaN when every instance is skipped.
pub fn fe_diff(instances: &[EvalInstance]) -> Result<(f64, usize)> {
    require(instances)?;
    let defined: Vec<f64> = instances.iter().filter_map(EvalInstance::fe_diff).collect();
    let skipped = instances.len() - defined.len();
    if skipped > 0 {
        log::warn!("FE-diff undefined for {skipped} instance(s)");
    }
    if defined.is_empty() {
        return Ok((f64::NAN, skipped));
    }
    Ok((mean(defined), skipped))
}

/// Corpus SARI: mean of sentence SARI.
pub fn sari(instances: &[EvalInstance]) -> Result<f64> {
    require(instances)?;
    Ok(mean(instances.iter().map(EvalInstance::sari).collect()))
}

pub fn bleu(instances: &[EvalInstance], options: BleuOptions) -> Result<f64> {
    corpus_bleu(instances.iter().map(|i| (&i.prediction, &i.references[..])), options)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceRow {
    pub word_diff: f64,
    pub fe_diff: Option<f64>,
    pub sari: f64,
    pub prediction: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub fe_diff: f64,
    pub fe_skipped: usize,
    pub sari: f64,
    pub bleu: f64,
    pub word_diff: f64,
    pub rows: Vec<InstanceRow>,
}

pub fn evaluate(instances: &[EvalInstance], options: BleuOptions) -> Result<EvalReport> {
    let (fe, skipped) = fe_diff(instances)?;
    Ok(EvalReport {
        fe_diff: fe,
        fe_skipped: skipped,
        sari: sari(instances)?,
        bleu: bleu(instances, options)?,
        word_diff: word_diff(instances)?,
        rows: instances
            .iter()
            .map(|i| InstanceRow {
                word_diff: i.word_diff(),
                fe_diff: i.fe_diff(),
                sari: i.sari(),
                prediction: i.prediction.detokenize(),
            })
            .collect(),
    })
}

const TABLE_HEADER: &str = "index\tword_diff\tfe_diff\tsari\tprediction";

impl EvalReport {
    /// `key: value` header, a blank line, then one tab-separated row per
    /// instance. Floats are written in shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "instances: {}", self.rows.len());
        let _ = writeln!(out, "fe_diff: {:?}", self.fe_diff);
        let _ = writeln!(out, "fe_skipped: {}", self.fe_skipped);
        let _ = writeln!(out, "sari: {:?}", self.sari);
        let _ = writeln!(out, "bleu: {:?}", self.bleu);
        let _ = writeln!(out, "word_diff: {:?}", self.word_diff);
        out.push('\n');
        out.push_str(TABLE_HEADER);
        out.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            let fe = r.fe_diff.map_or("-".to_string(), |v| format!("{v:?}"));
            let _ = writeln!(out, "{i}\t{:?}\t{fe}\t{:?}\t{}", r.word_diff, r.sari, r.prediction);
        }
        out
    }

    pub fn from_text(text: &str, path: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_string(),
            line,
            message,
        };
        let lines: Vec<&str> = text.lines().collect();
        let mut header = std::collections::HashMap::new();
        let mut i = 0;
        while i < lines.len() && !lines[i].is_empty() {
            let (k, v) = lines[i]
                .split_once(": ")
                .ok_or_else(|| err(i + 1, "expected `key: value`".into()))?;
            header.insert(k, (i + 1, v));
            i += 1;
        }
        let field = |key: &str| -> Result<(usize, &str)> {
            header.get(key).copied().ok_or_else(|| err(1, format!("missing `{key}`")))
        };
        let float = |key: &str| -> Result<f64> {
            let (line, v) = field(key)?;
            v.parse().map_err(|_| err(line, format!("bad number for `{key}`")))
        };
        let int = |key: &str| -> Result<usize> {
            let (line, v) = field(key)?;
            v.parse().map_err(|_| err(line, format!("bad count for `{key}`")))
        };
        let count = int("instances")?;
        i += 1;
        if lines.get(i) != Some(&TABLE_HEADER) {
            return Err(err(i + 1, "missing instance table header".into()));
        }
        let mut rows = Vec::with_capacity(count);
        for (k, line) in lines[i + 1..].iter().enumerate() {
            let ln = i + 2 + k;
            let cols: Vec<&str> = line.splitn(5, '\t').collect();
            if cols.len() != 5 {
                return Err(err(ln, "expected 5 tab-separated columns".into()));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(ln, format!("bad number `{s}`")));
            rows.push(InstanceRow {
                word_diff: num(cols[1])?,
                fe_diff: if cols[2] == "-" { None } else { Some(num(cols[2])?) },
                sari: num(cols[3])?,
                prediction: cols[4].to_string(),
            });
        }
        if rows.len() != count {
            return Err(err(lines.len(), format!("expected {count} rows, found {}", rows.len())));
        }
        Ok(Self {
            fe_diff: float("fe_diff")?,
            fe_skipped: int("fe_skipped")?,
            sari: float("sari")?,
            bleu: float("bleu")?,
            word_diff: float("word_diff")?,
            rows,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

/// Loads line-aligned source, prediction and reference files.
pub fn load_instances(source: &Path, prediction: &Path, references: &[PathBuf]) -> Result<Vec<EvalInstance>> {
    if references.is_empty() {
        return Err(Error::Config("at least one reference file is required".into()));
    }
    let src = load_aligned(source)?;
    let pred = load_aligned(prediction)?;
    let refs = references.iter().map(|p| load_aligned(p)).collect::<Result<Vec<_>>>()?;
    let check = |path: &Path, n: usize| {
        if n != src.len() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: n.min(src.len()) + 1,
                message: format!("{n} lines but the source has {}", src.len()),
            });
        }
        Ok(())
    };
    check(prediction, pred.len())?;
    for (p, r) in references.iter().zip(&refs) {
        check(p, r.len())?;
    }
    (0..src.len())
        .map(|i| EvalInstance::new(src[i].clone(), pred[i].clone(), refs.iter().map(|r| r[i].clone()).collect()))
        .collect()
}

/// Loads a line-aligned source file and its reference files as evaluation
/// items. Lines with a blank source are skipped.
pub fn load_eval_items(source: &Path, references: &[PathBuf]) -> Result<Vec<EvalItem>> {
    if references.is_empty() {
        return Err(Error::Config("at least one reference file is required".into()));
    }
    let src = load_aligned(source)?;
    let refs = references.iter().map(|p| load_aligned(p)).collect::<Result<Vec<_>>>()?;
    for (p, r) in references.iter().zip(&refs) {
        if r.len() != src.len() {
            return Err(Error::Parse {
                path: p.display().to_string(),
                line: r.len().min(src.len()) + 1,
                message: format!("{} lines but the source has {}", r.len(), src.len()),
            });
        }
    }
    Ok(src
        .into_iter()
        .enumerate()
        .filter(|(_, s)| !s.is_empty())
        .map(|(i, source)| EvalItem {
            source,
            references: refs.iter().map(|r| r[i].clone()).collect(),
        })
        .collect())
}

/// Every line is one sentence, blank lines included as empty sentences, so
/// that alignment is positional.
fn load_aligned(path: &Path) -> Result<Vec<Sentence>> {
    read_lines(path)?
        .into_iter()
        .map(|l| {
            if l.trim().is_empty() {
                Ok(Sentence::default())
            } else {
                tokenize(&l)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn s(text: &str) -> Sentence {
        tokenize(text).unwrap()
    }

    fn inst(src: &str, pred: &str, refs: &[&str]) -> EvalInstance {
        EvalInstance::new(s(src), s(pred), refs.iter().map(|r| s(r)).collect()).unwrap()
    }

    #[test]
    fn word_diff_examples() {
        let i = inst("a b c d e f g h i j", "a b c d e f g", &["a"]);
        assert_eq!(i.word_diff(), 3.0);
        assert_eq!(inst("a b", "a b", &["a"]).word_diff(), 0.0);
        assert_eq!(inst("a b", "a b c", &["a"]).word_diff(), -1.0);
    }

    #[test]
    fn unigram_overlap_examples() {
        assert_eq!(unigram_overlap(&s("a b c"), &s("a b c")), 1.0);
        assert_eq!(unigram_overlap(&s("a b"), &s("c d")), 0.0);
        // one shared "a" is clipped to its single occurrence: 2 * 1 / 5
        assert!((unigram_overlap(&s("a a b"), &s("a c")) - 0.4).abs() < 1e-12);
        let empty = Sentence::from_tokens(Vec::<String>::new()).unwrap();
        assert_eq!(unigram_overlap(&empty, &empty), 1.0);
    }

    #[test]
    fn fe_diff_hand_pair() {
        // source: 3 words, 1+5+3 = 9 syllables (the, im-ple-men-ta-tion, pro-cee-ded)
        // prediction: 4 words, 1+1+1+1 syllables
        let i = inst("the implementation proceeded", "the work went on", &["x"]);
        let src = 206.835 - 1.015 * 3.0 - 84.6 * 9.0 / 3.0;
        let pred = 206.835 - 1.015 * 4.0 - 84.6 * 4.0 / 4.0;
        assert!((i.fe_diff().unwrap() - (pred - src)).abs() < 1e-9);
        assert!(i.fe_diff().unwrap() > 0.0);
    }

    #[test]
    fn undefined_fe_is_skipped() {
        let items = vec![inst("a cat", "a cat", &["x"]), EvalInstance::new(s("a cat"), Sentence::default(), vec![s("x")]).unwrap()];
        let (fe, skipped) = fe_diff(&items).unwrap();
        assert_eq!(fe, 0.0);
        assert_eq!(skipped, 1);
    }

    #[test]
    fn identity_predictions() {
        let items = vec![inst("the cat sat .", "the cat sat .", &["a cat sat ."]), inst("dogs run", "dogs run", &["dogs run"])];
        let r = evaluate(&items, BleuOptions::default()).unwrap();
        assert_eq!(r.word_diff, 0.0);
        assert_eq!(r.fe_diff, 0.0);
    }

    #[test]
    fn report_round_trips_and_matches_parts() {
        let items = vec![
            inst("the big dog ran home .", "the dog ran .", &["the dog ran home .", "a dog ran ."]),
            inst("moreover , x y z", "x y", &["x y z"]),
            EvalInstance::new(s("q r"), Sentence::default(), vec![s("q")]).unwrap(),
        ];
        let r = evaluate(&items, BleuOptions { max_n: 4, smooth: true }).unwrap();
        assert_eq!(r.sari.to_bits(), sari(&items).unwrap().to_bits());
        assert_eq!(r.word_diff.to_bits(), word_diff(&items).unwrap().to_bits());
        assert_eq!(r.bleu.to_bits(), bleu(&items, BleuOptions { max_n: 4, smooth: true }).unwrap().to_bits());
        assert_eq!(r.fe_diff.to_bits(), fe_diff(&items).unwrap().0.to_bits());
        let back = EvalReport::from_text(&r.to_text(), "mem").unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn metrics_ignore_instance_order() {
        let mut items = vec![
            inst("a b c d", "a c d", &["a c d"]),
            inst("e f g", "e f", &["f g"]),
            inst("h i j k l", "h i j k l", &["h j l"]),
        ];
        let before = evaluate(&items, BleuOptions::default()).unwrap();
        items.reverse();
        let after = evaluate(&items, BleuOptions::default()).unwrap();
        assert_eq!(before.sari.to_bits(), after.sari.to_bits());
        assert_eq!(before.bleu.to_bits(), after.bleu.to_bits());
        assert_eq!(before.word_diff.to_bits(), after.word_diff.to_bits());
    }

    #[test]
    fn eval_items_load_aligned_and_skip_blank_sources() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src");
        let r0 = dir.path().join("r0");
        let r1 = dir.path().join("r1");
        std::fs::write(&src, "the feline sat .\n\nthe canine ran .\n").unwrap();
        std::fs::write(&r0, "the cat sat .\nx\nthe dog ran .\n").unwrap();
        std::fs::write(&r1, "a cat sat .\ny\na dog ran .\n").unwrap();
        let items = load_eval_items(&src, &[r0.clone(), r1]).unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[1].references[1], s("a dog ran ."));
        std::fs::write(&r0, "only one line\n").unwrap();
        assert!(matches!(load_eval_items(&src, &[r0]), Err(Error::Parse { .. })));
        assert!(load_eval_items(&src, &[]).is_err());
    }

    #[test]
    fn errors() {
        assert!(sari(&[]).is_err());
        assert!(bleu(&[], BleuOptions::default()).is_err());
        assert!(EvalInstance::new(s("a"), s("a"), vec![]).is_err());
        assert!(EvalReport::from_text("instances: 1\n", "x").is_err());
    }
}
