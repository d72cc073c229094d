use std::collections::HashMap;

/// Multiset of the order-`n` n-grams of `tokens`.
pub(crate) fn counts<'a>(tokens: &'a [String], n: usize) -> HashMap<&'a [String], usize> {
    let mut out = HashMap::new();
    if n == 0 || tokens.len() < n {
        return out;
    }
    for w in tokens.windows(n) {
        *out.entry(w).or_insert(0) += 1;
    }
    out
}
