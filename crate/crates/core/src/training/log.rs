use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainingConfig;
use crate::error::{Error, Result};

/// One line of the training log.
///
/// Serialized as JSON with a `kind` tag: `start`, `loss`, `eval` or
/// `selected`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    Start {
        seed: u64,
        config: TrainingConfig,
    },
    /// A loss value as computed in the named update of iteration `step`
    /// (1-based), before that update's parameter change.
    Loss {
        step: u64,
        update: String,
        name: String,
        value: f64,
    },
    /// Dev metrics of the parameters after `step` iterations.
    Eval {
        step: u64,
        sari: f64,
        bleu: f64,
        /// Absent when no pair had scorable words on both sides.
        fe_diff: Option<f64>,
        word_diff: f64,
        seconds: f64,
    },
    Selected {
        step: u64,
        sari: f64,
        word_diff: f64,
        /// False when no checkpoint cleared the word-diff threshold and the
        /// best-SARI one was taken instead.
        qualified: bool,
    },
}

/// Append-only record list, optionally mirrored to a JSON-lines file.
#[derive(Debug, Default)]
pub struct TrainLog {
    records: Vec<LogRecord>,
    sink: Option<BufWriter<File>>,
}

impl Clone for TrainLog {
    fn clone(&self) -> Self {
        Self {
            records: self.records.clone(),
            sink: None,
        }
    }
}

impl TrainLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<LogRecord>) -> Self {
        Self { records, sink: None }
    }

    /// Mirrors every future record to `path`, appending.
    pub fn attach(&mut self, path: &Path) -> Result<()> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        self.sink = Some(BufWriter::new(file));
        Ok(())
    }

    /// Rewrites `path` with the records so far and mirrors later ones to it.
    pub fn persist(&mut self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).map_err(|e| Error::Contract(e.to_string()))?);
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))?;
        self.attach(path)
    }

    pub fn push(&mut self, record: LogRecord) -> Result<()> {
        if let Some(sink) = &mut self.sink {
            let line = serde_json::to_string(&record).map_err(|e| Error::Contract(e.to_string()))?;
            writeln!(sink, "{line}").and_then(|_| sink.flush()).map_err(|e| Error::io("train log", e))?;
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `(step, value)` of every loss record called `name`, in order.
    pub fn losses(&self, name: &str) -> Vec<(u64, f64)> {
        self.records
            .iter()
            .filter_map(|r| match r {
                LogRecord::Loss { step, name: n, value, .. } if n == name => Some((*step, *value)),
                _ => None,
            })
            .collect()
    }

    /// Every loss record as `(step, update, name, value)`.
    pub fn loss_trace(&self) -> Vec<(u64, &str, &str, f64)> {
        self.records
            .iter()
            .filter_map(|r| match r {
                LogRecord::Loss { step, update, name, value } => Some((*step, update.as_str(), name.as_str(), *value)),
                _ => None,
            })
            .collect()
    }

    pub fn evals(&self) -> Vec<&LogRecord> {
        self.records.iter().filter(|r| matches!(r, LogRecord::Eval { .. })).collect()
    }

    /// `(step, word_diff)` at every dev evaluation.
    pub fn word_diff_curve(&self) -> Vec<(u64, f64)> {
        self.records
            .iter()
            .filter_map(|r| match r {
                LogRecord::Eval { step, word_diff, .. } => Some((*step, *word_diff)),
                _ => None,
            })
            .collect()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(Self::from_records(records))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let mut log = TrainLog::new();
        log.attach(&path).unwrap();
        log.push(LogRecord::Start {
            seed: 3,
            config: TrainingConfig::desk(),
        })
        .unwrap();
        log.push(LogRecord::Loss {
            step: 1,
            update: "denoise".into(),
            name: "L_denoi".into(),
            value: 2.5,
        })
        .unwrap();
        log.push(LogRecord::Eval {
            step: 1,
            sari: 30.0,
            bleu: 50.0,
            fe_diff: Some(1.5),
            word_diff: 0.25,
            seconds: 0.1,
        })
        .unwrap();
        let back = TrainLog::read(&path).unwrap();
        assert_eq!(back.records(), log.records());
        assert_eq!(back.losses("L_denoi"), vec![(1, 2.5)]);
        assert_eq!(back.word_diff_curve(), vec![(1, 0.25)]);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(1).unwrap().contains(r#""kind":"loss""#));
    }
}
