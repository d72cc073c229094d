use std::collections::{HashMap, HashSet};

use super::ngram::counts;
use crate::text::Sentence;

type Counts<'a> = HashMap<&'a [String], usize>;

/// `num / den`, where an empty denominator scores 1 if `target_empty`
/// (nothing to do and nothing done) and 0 otherwise.
fn ratio(num: f64, den: usize, target_empty: bool) -> f64 {
    if den == 0 {
        return if target_empty { 1.0 } else { 0.0 };
    }
    num / den as f64
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn scaled<'a>(c: &Counts<'a>, k: usize) -> Counts<'a> {
    c.iter().map(|(g, v)| (*g, v * k)).collect()
}

fn count(c: &Counts, g: &[String]) -> usize {
    c.get(g).copied().unwrap_or(0)
}

/// The three SARI components at one n-gram order: `(F_add, F_keep, P_del)`.
pub fn sari_components(source: &Sentence, prediction: &Sentence, references: &[Sentence], n: usize) -> (f64, f64, f64) {
    let k = references.len().max(1);
    let s = counts(source.tokens(), n);
    let c = counts(prediction.tokens(), n);
    let mut r: Counts = HashMap::new();
    for reference in references {
        for (g, v) in counts(reference.tokens(), n) {
            *r.entry(g).or_insert(0) += v;
        }
    }
    let s_rep = scaled(&s, k);
    let c_rep = scaled(&c, k);

    // keep: n-grams in both source and prediction, weighted by how many
    // references also keep them
    let mut keep_num_p = 0.0;
    let mut kept = 0;
    for (g, &sv) in &s_rep {
        let kv = sv.min(count(&c_rep, g));
        if kv > 0 {
            kept += 1;
            keep_num_p += kv.min(count(&r, g)) as f64 / kv as f64;
        }
    }
    let mut keep_num_r = 0.0;
    let mut keep_target = 0;
    for (g, &sv) in &s_rep {
        let all = sv.min(count(&r, g));
        if all > 0 {
            keep_target += 1;
            let good = sv.min(count(&c_rep, g)).min(count(&r, g));
            keep_num_r += good as f64 / all as f64;
        }
    }
    let keep_p = ratio(keep_num_p, kept, keep_target == 0);
    let keep_r = ratio(keep_num_r, keep_target, kept == 0);
    let keep = f1(keep_p, keep_r);

    // deletion: source n-grams the prediction drops, scored by precision
    let mut deleted = 0;
    let mut del_num = 0.0;
    let mut del_target = 0;
    for (g, &sv) in &s_rep {
        let dv = sv.saturating_sub(count(&c_rep, g));
        if dv > 0 {
            deleted += 1;
            del_num += dv.saturating_sub(count(&r, g)) as f64 / dv as f64;
        }
        if sv > count(&r, g) {
            del_target += 1;
        }
    }
    let del = ratio(del_num, deleted, del_target == 0);

    // addition: n-gram types new relative to the source
    let added: HashSet<&[String]> = c.keys().filter(|g| !s.contains_key(*g)).copied().collect();
    let add_target: HashSet<&[String]> = r.keys().filter(|g| !s.contains_key(*g)).copied().collect();
    let good = added.intersection(&add_target).count() as f64;
    let add_p = ratio(good, added.len(), add_target.is_empty());
    let add_r = ratio(good, add_target.len(), added.is_empty());
    let add = f1(add_p, add_r);

    (add, keep, del)
}

/// Sentence-level SARI in `[0, 100]`: the mean over orders `1..=max_n` of
/// `(F_add + F_keep + P_del) / 3`.
pub fn sentence_sari(source: &Sentence, prediction: &Sentence, references: &[Sentence], max_n: usize) -> f64 {
    let mut total = 0.0;
    for n in 1..=max_n {
        let (add, keep, del) = sari_components(source, prediction, references, n);
        total += (add + keep + del) / 3.0;
    }
    100.0 * total / max_n as f64
}
