use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{tokenize, Sentence};
use crate::error::{Error, Result};

/// One aligned pair of the labeled set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParallelPair {
    pub complex: Sentence,
    pub simple: Sentence,
}

/// Simple and complex sentence sets, plus optional labeled pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub simple: Vec<Sentence>,
    pub complex: Vec<Sentence>,
    pub parallel: Vec<ParallelPair>,
}

impl Corpus {
    pub fn new(simple: Vec<Sentence>, complex: Vec<Sentence>) -> Self {
        Self {
            simple,
            complex,
            parallel: Vec::new(),
        }
    }

    pub fn with_parallel(mut self, parallel: Vec<ParallelPair>) -> Self {
        self.parallel = parallel;
        self
    }

    /// Every sentence on either side, pairs included.
    pub fn all_sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.simple
            .iter()
            .chain(&self.complex)
            .chain(self.parallel.iter().flat_map(|p| [&p.complex, &p.simple]))
    }
}

/// Raw lines of a UTF-8 file, without trailing newlines.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect())
}

pub fn write_lines<S: AsRef<str>>(path: &Path, lines: impl IntoIterator<Item = S>) -> Result<()> {
    let mut out = Vec::new();
    for line in lines {
        out.extend_from_slice(line.as_ref().as_bytes());
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// One sentence per line; blank lines are skipped.
pub fn load_sentences(path: &Path) -> Result<Vec<Sentence>> {
    read_lines(path)?
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| tokenize(l))
        .collect()
}

pub fn write_sentences<'a>(path: &Path, sentences: impl IntoIterator<Item = &'a Sentence>) -> Result<()> {
    write_lines(path, sentences.into_iter().map(Sentence::detokenize))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Splits a line on its single tab.
fn split_tab<'l>(path: &Path, line_no: usize, line: &'l str) -> Result<(&'l str, &'l str)> {
    let mut parts = line.split('\t');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), None) => Ok((a, b)),
        _ => Err(parse_error(path, line_no, "expected exactly one tab")),
    }
}

/// Labeled pairs, one per line: `complex TAB simple`.
pub fn load_parallel(path: &Path) -> Result<Vec<ParallelPair>> {
    let mut pairs = Vec::new();
    for (i, line) in read_lines(path)?.iter().enumerate() {
        let (complex, simple) = split_tab(path, i + 1, line)?;
        let complex = tokenize(complex).map_err(|e| parse_error(path, i + 1, e.to_string()))?;
        let simple = tokenize(simple).map_err(|e| parse_error(path, i + 1, e.to_string()))?;
        pairs.push(ParallelPair { complex, simple });
    }
    Ok(pairs)
}

pub fn write_parallel(path: &Path, pairs: &[ParallelPair]) -> Result<()> {
    write_lines(
        path,
        pairs
            .iter()
            .map(|p| format!("{}\t{}", p.complex.detokenize(), p.simple.detokenize())),
    )
}

/// Synonym table, one `rare TAB frequent` pair per line.
pub fn load_synonyms(path: &Path) -> Result<Vec<(String, String)>> {
    let mut table = Vec::new();
    for (i, line) in read_lines(path)?.iter().enumerate() {
        let (rare, frequent) = split_tab(path, i + 1, line)?;
        if rare.is_empty() || frequent.is_empty() {
            return Err(parse_error(path, i + 1, "empty synonym entry"));
        }
        table.push((rare.to_string(), frequent.to_string()));
    }
    Ok(table)
}

pub fn write_synonyms(path: &Path, table: &[(String, String)]) -> Result<()> {
    write_lines(path, table.iter().map(|(r, f)| format!("{r}\t{f}")))
}

/// Word vectors keyed by token.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Embeddings {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

impl Embeddings {
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }
}

/// Text embeddings: `token v1 ... vd` per line, space separated. A leading
/// `count dim` header line, as written by word2vec-style tools, is skipped.
pub fn load_embeddings(path: &Path) -> Result<Embeddings> {
    let lines = read_lines(path)?;
    let mut out = Embeddings::default();
    for (i, line) in lines.iter().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            continue;
        }
        let values = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_error(path, i + 1, e.to_string()))?;
        if values.is_empty() {
            return Err(parse_error(path, i + 1, "token without a vector"));
        }
        if out.dim == 0 {
            out.dim = values.len();
        } else if values.len() != out.dim {
            return Err(parse_error(
                path,
                i + 1,
                format!("vector has {} components, expected {}", values.len(), out.dim),
            ));
        }
        out.vectors.insert(fields[0].to_string(), values);
    }
    Ok(out)
}

/// Writes vectors in `tokens` order using lossless float formatting.
pub fn write_embeddings(path: &Path, embeddings: &Embeddings, tokens: &[String]) -> Result<()> {
    let mut out = Vec::new();
    for t in tokens {
        let Some(v) = embeddings.get(t) else { continue };
        write!(out, "{t}").unwrap();
        for x in v {
            write!(out, " {x:?}").unwrap();
        }
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
