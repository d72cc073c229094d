//! Synthetic two-register corpus.
//!
//! Sentences are built from clauses over a fixed set of concepts (nouns,
//! verbs, adjectives). Every concept has a frequent one-syllable form and a
//! rare form of three or four syllables. Simple sentences render one clause
//! with frequent forms. Complex sentences render clauses with rare forms and
//! always carry a connective, either as a prefix or joining a second clause.
//! Word vectors place the two forms of a concept close together.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    corpus::{write_embeddings, write_parallel, write_sentences, write_synonyms},
    Corpus, Embeddings, ParallelPair, Sentence,
};
use crate::error::{Error, Result};

const CONNECTIVES: [&str; 5] = ["moreover", "furthermore", "nevertheless", "consequently", "additionally"];
const ONSETS: &[u8] = b"bcdfghjklmnprstvwz";
const CODAS: &[u8] = b"bdgklmnprst";
const VOWELS: &[u8] = b"aeiou";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub nouns: usize,
    pub verbs: usize,
    pub adjectives: usize,
    /// Unpaired training sentences per side.
    pub simple_count: usize,
    pub complex_count: usize,
    /// Labeled (complex, simple) pairs, disjoint from the unpaired sets.
    pub parallel_count: usize,
    pub dev_count: usize,
    pub test_count: usize,
    /// Simple sentences held out of training.
    pub heldout_simple_count: usize,
    /// Chance that a noun slot carries an adjective.
    pub adjective_prob: f64,
    /// Chance that a complex sentence joins two clauses instead of
    /// prefixing a connective to one.
    pub join_prob: f64,
    pub embedding_dim: usize,
    /// Standard deviation of each concept vector's components.
    pub embedding_scale: f64,
    /// Per-form deviation from the concept vector, relative to the scale.
    pub synonym_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            nouns: 40,
            verbs: 20,
            adjectives: 20,
            simple_count: 2000,
            complex_count: 2000,
            parallel_count: 500,
            dev_count: 100,
            test_count: 200,
            heldout_simple_count: 200,
            adjective_prob: 0.4,
            join_prob: 0.5,
            embedding_dim: 32,
            embedding_scale: 0.5,
            synonym_noise: 0.15,
        }
    }
}

impl SynthConfig {
    /// Number of distinct single-clause sentences the grammar can produce.
    pub fn clause_capacity(&self) -> u128 {
        let (n, v, a) = (self.nouns as u128, self.verbs as u128, self.adjectives as u128);
        n * n * v * (a + 1) * (a + 1)
    }

    fn validate(&self) -> Result<()> {
        if self.nouns == 0 || self.verbs == 0 {
            return Err(Error::Config("synthetic grammar needs at least one noun and one verb".into()));
        }
        if !(0.0..=1.0).contains(&self.adjective_prob) || !(0.0..=1.0).contains(&self.join_prob) {
            return Err(Error::Config("probabilities must lie in [0, 1]".into()));
        }
        if self.embedding_dim == 0 {
            return Err(Error::Config("embedding_dim must be positive".into()));
        }
        let concepts = self.nouns + self.verbs + self.adjectives;
        let cvc = (ONSETS.len() * VOWELS.len() * CODAS.len()) as usize;
        if concepts > cvc {
            return Err(Error::Config(format!(
                "{concepts} concepts requested but only {cvc} one-syllable forms exist"
            )));
        }
        let simple = (self.simple_count + self.heldout_simple_count) as u128;
        let complex = (self.complex_count + self.parallel_count + self.dev_count + self.test_count) as u128;
        let capacity = self.clause_capacity();
        if simple.max(complex) > capacity {
            return Err(Error::Config(format!(
                "vocabulary too small: {} distinct sentences requested, grammar allows {capacity}",
                simple.max(complex)
            )));
        }
        Ok(())
    }
}

/// A held-out complex source with its reference simplifications.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalItem {
    pub source: Sentence,
    pub references: Vec<Sentence>,
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub config: SynthConfig,
    /// Training sides plus labeled pairs.
    pub corpus: Corpus,
    pub dev: Vec<EvalItem>,
    pub test: Vec<EvalItem>,
    pub heldout_simple: Vec<Sentence>,
    /// `(rare, frequent)` for every concept.
    pub synonyms: Vec<(String, String)>,
    pub embeddings: Embeddings,
}

impl SyntheticCorpus {
    pub fn synonym_map(&self) -> HashMap<String, String> {
        self.synonyms.iter().cloned().collect()
    }

    /// True when `output` carries the frequent form of some rare word of
    /// `source`.
    pub fn replaces_synonym(&self, source: &Sentence, output: &Sentence) -> bool {
        self.synonyms
            .iter()
            .any(|(rare, frequent)| source.tokens().contains(rare) && output.tokens().contains(frequent))
    }

    /// Every token the generator can emit, in a stable order.
    pub fn lexicon(&self) -> Vec<String> {
        let mut words: Vec<String> = ["the", ".", ","].iter().map(|s| s.to_string()).collect();
        words.extend(CONNECTIVES.iter().map(|s| s.to_string()));
        for (rare, frequent) in &self.synonyms {
            words.push(frequent.clone());
            words.push(rare.clone());
        }
        words
    }

    /// Writes the corpus files and oracle tables into `dir`:
    /// `simple.txt`, `complex.txt`, `parallel.tsv`, `heldout_simple.txt`,
    /// `{dev,test}.src`, `{dev,test}.ref.{k}`, `synonyms.tsv`,
    /// `embeddings.txt`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_sentences(&dir.join("simple.txt"), &self.corpus.simple)?;
        write_sentences(&dir.join("complex.txt"), &self.corpus.complex)?;
        write_parallel(&dir.join("parallel.tsv"), &self.corpus.parallel)?;
        write_sentences(&dir.join("heldout_simple.txt"), &self.heldout_simple)?;
        for (name, items) in [("dev", &self.dev), ("test", &self.test)] {
            write_sentences(&dir.join(format!("{name}.src")), items.iter().map(|i| &i.source))?;
            let refs = items.first().map_or(0, |i| i.references.len());
            for k in 0..refs {
                write_sentences(
                    &dir.join(format!("{name}.ref.{k}")),
                    items.iter().map(|i| &i.references[k]),
                )?;
            }
        }
        write_synonyms(&dir.join("synonyms.tsv"), &self.synonyms)?;
        write_embeddings(&dir.join("embeddings.txt"), &self.embeddings, &self.lexicon())
    }
}

struct Concept {
    frequent: String,
    rare: String,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Clause {
    subject_adj: Option<usize>,
    subject: usize,
    verb: usize,
    object_adj: Option<usize>,
    object: usize,
}

struct Grammar {
    nouns: Vec<Concept>,
    verbs: Vec<Concept>,
    adjectives: Vec<Concept>,
}

impl Grammar {
    fn clause(&self, rng: &mut ChaCha8Rng, adjective_prob: f64) -> Clause {
        let adj = |rng: &mut ChaCha8Rng| {
            (!self.adjectives.is_empty() && rng.gen_bool(adjective_prob))
                .then(|| rng.gen_range(0..self.adjectives.len()))
        };
        let subject_adj = adj(rng);
        let subject = rng.gen_range(0..self.nouns.len());
        let verb = rng.gen_range(0..self.verbs.len());
        let object_adj = adj(rng);
        let object = rng.gen_range(0..self.nouns.len());
        Clause {
            subject_adj,
            subject,
            verb,
            object_adj,
            object,
        }
    }

    fn render(&self, c: &Clause, rare: bool, adjectives: bool, out: &mut Vec<String>) {
        let form = |concept: &Concept| if rare { concept.rare.clone() } else { concept.frequent.clone() };
        let phrase = |adj: Option<usize>, noun: usize, out: &mut Vec<String>| {
            out.push("the".into());
            if let Some(a) = adj.filter(|_| adjectives) {
                out.push(form(&self.adjectives[a]));
            }
            out.push(form(&self.nouns[noun]));
        };
        phrase(c.subject_adj, c.subject, out);
        out.push(form(&self.verbs[c.verb]));
        phrase(c.object_adj, c.object, out);
    }

    fn simple(&self, c: &Clause, adjectives: bool) -> Sentence {
        let mut tokens = Vec::new();
        self.render(c, false, adjectives, &mut tokens);
        tokens.push(".".into());
        Sentence { tokens }
    }
}

/// A complex sentence and the clauses it renders.
struct ComplexDraw {
    sentence: Sentence,
    first: Clause,
    second: Option<Clause>,
}

fn complex_sentence(g: &Grammar, rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> ComplexDraw {
    let connective = CONNECTIVES[rng.gen_range(0..CONNECTIVES.len())].to_string();
    let first = g.clause(rng, cfg.adjective_prob);
    let mut tokens = Vec::new();
    let second = if rng.gen_bool(cfg.join_prob) {
        let second = g.clause(rng, cfg.adjective_prob);
        g.render(&first, true, true, &mut tokens);
        tokens.push(",".into());
        tokens.push(connective);
        g.render(&second, true, true, &mut tokens);
        Some(second)
    } else {
        tokens.push(connective);
        tokens.push(",".into());
        g.render(&first, true, true, &mut tokens);
        None
    };
    tokens.push(".".into());
    ComplexDraw {
        sentence: Sentence { tokens },
        first,
        second,
    }
}

fn pseudo_words(rng: &mut ChaCha8Rng, count: usize, mut make: impl FnMut(&mut ChaCha8Rng) -> String, taken: &mut HashSet<String>) -> Vec<String> {
    let mut words = Vec::with_capacity(count);
    while words.len() < count {
        let w = make(rng);
        if taken.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

fn pick(rng: &mut ChaCha8Rng, letters: &[u8]) -> char {
    letters[rng.gen_range(0..letters.len())] as char
}

fn frequent_form(rng: &mut ChaCha8Rng) -> String {
    [pick(rng, ONSETS), pick(rng, VOWELS), pick(rng, CODAS)].iter().collect()
}

fn rare_form(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(3..=4);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(pick(rng, ONSETS));
        w.push(pick(rng, VOWELS));
    }
    w.push(pick(rng, CODAS));
    w
}

/// Builds a corpus deterministically from `config.seed`.
pub fn generate_synthetic_corpus(config: &SynthConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut taken: HashSet<String> = ["the"].iter().map(|s| s.to_string()).collect();
    taken.extend(CONNECTIVES.iter().map(|s| s.to_string()));
    let concepts = config.nouns + config.verbs + config.adjectives;
    let frequent = pseudo_words(&mut rng, concepts, frequent_form, &mut taken);
    let rare = pseudo_words(&mut rng, concepts, rare_form, &mut taken);
    let mut all: Vec<Concept> = frequent
        .into_iter()
        .zip(rare)
        .map(|(frequent, rare)| Concept { frequent, rare })
        .collect();
    let adjectives = all.split_off(config.nouns + config.verbs);
    let verbs = all.split_off(config.nouns);
    let grammar = Grammar {
        nouns: all,
        verbs,
        adjectives,
    };

    let attempts_for = |n: usize| 10_000 + 200 * n;

    let mut seen_simple: HashSet<Sentence> = HashSet::new();
    let mut draw_simple = |rng: &mut ChaCha8Rng, n: usize| -> Result<Vec<Sentence>> {
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0;
        while out.len() < n {
            attempts += 1;
            if attempts > attempts_for(n) {
                return Err(Error::Config("vocabulary too small for the requested simple sentences".into()));
            }
            let s = grammar.simple(&grammar.clause(rng, config.adjective_prob), true);
            if seen_simple.insert(s.clone()) {
                out.push(s);
            }
        }
        Ok(out)
    };
    let simple = draw_simple(&mut rng, config.simple_count)?;
    let heldout_simple = draw_simple(&mut rng, config.heldout_simple_count)?;

    let mut seen_complex: HashSet<Sentence> = HashSet::new();
    let mut draw_complex = |rng: &mut ChaCha8Rng, n: usize| -> Result<Vec<ComplexDraw>> {
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0;
        while out.len() < n {
            attempts += 1;
            if attempts > attempts_for(n) {
                return Err(Error::Config("vocabulary too small for the requested complex sentences".into()));
            }
            let d = complex_sentence(&grammar, rng, config);
            if seen_complex.insert(d.sentence.clone()) {
                out.push(d);
            }
        }
        Ok(out)
    };
    let complex: Vec<Sentence> = draw_complex(&mut rng, config.complex_count)?
        .into_iter()
        .map(|d| d.sentence)
        .collect();
    let parallel = draw_complex(&mut rng, config.parallel_count)?
        .into_iter()
        .map(|d| ParallelPair {
            simple: grammar.simple(&d.first, true),
            complex: d.sentence,
        })
        .collect();
    let eval_items = |draws: Vec<ComplexDraw>| -> Vec<EvalItem> {
        draws
            .into_iter()
            .map(|d| {
                let primary = grammar.simple(&d.first, true);
                let secondary = match &d.second {
                    Some(second) => {
                        let mut tokens = primary.tokens.clone();
                        tokens.extend(grammar.simple(second, true).tokens);
                        Sentence { tokens }
                    }
                    None => grammar.simple(&d.first, false),
                };
                EvalItem {
                    source: d.sentence,
                    references: vec![primary, secondary],
                }
            })
            .collect()
    };
    let dev = eval_items(draw_complex(&mut rng, config.dev_count)?);
    let test = eval_items(draw_complex(&mut rng, config.test_count)?);

    let synonyms: Vec<(String, String)> = grammar
        .nouns
        .iter()
        .chain(&grammar.verbs)
        .chain(&grammar.adjectives)
        .map(|c| (c.rare.clone(), c.frequent.clone()))
        .collect();
    let embeddings = synonym_aware_embeddings(&mut rng, config, &synonyms);

    Ok(SyntheticCorpus {
        config: config.clone(),
        corpus: Corpus::new(simple, complex).with_parallel(parallel),
        dev,
        test,
        heldout_simple,
        synonyms,
        embeddings,
    })
}

fn synonym_aware_embeddings(rng: &mut ChaCha8Rng, config: &SynthConfig, synonyms: &[(String, String)]) -> Embeddings {
    let dim = config.embedding_dim;
    let scale = config.embedding_scale;
    let gaussian = |rng: &mut ChaCha8Rng, s: f64| -> Vec<f64> {
        (0..dim).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let mut vectors = HashMap::new();
    for w in ["the", ".", ","].iter().chain(CONNECTIVES.iter()) {
        vectors.insert(w.to_string(), gaussian(rng, scale));
    }
    let mut pairs: Vec<&(String, String)> = synonyms.iter().collect();
    // order-independent of the table layout
    pairs.sort();
    for (rare, frequent) in pairs {
        let base = gaussian(rng, scale);
        for form in [frequent, rare] {
            let noise = gaussian(rng, scale * config.synonym_noise);
            let v = base.iter().zip(noise).map(|(b, n)| b + n).collect();
            vectors.insert(form.clone(), v);
        }
    }
    Embeddings { dim, vectors }
}
