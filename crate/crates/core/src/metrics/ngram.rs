use std::collections::HashMap;

pub(crate) type NgramCounts<'a> = HashMap<&'a [String], usize>;

pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> NgramCounts<'_> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

pub(crate) fn total(counts: &NgramCounts<'_>) -> usize {
    counts.values().sum()
}

/// Multiset intersection size.
pub(crate) fn overlap(a: &NgramCounts<'_>, b: &NgramCounts<'_>) -> usize {
    a.iter()
        .map(|(g, ca)| b.get(g).map_or(0, |cb| (*ca).min(*cb)))
        .sum()
}

/// Multiset difference `a − b`.
pub(crate) fn difference<'a>(a: &NgramCounts<'a>, b: &NgramCounts<'_>) -> NgramCounts<'a> {
    a.iter()
        .filter_map(|(g, ca)| {
            let left = ca.saturating_sub(b.get(g).copied().unwrap_or(0));
            (left > 0).then_some((*g, left))
        })
        .collect()
}

pub(crate) fn f_measure(matched: usize, predicted: usize, reference: usize) -> f64 {
    if matched == 0 || predicted == 0 || reference == 0 {
        return 0.0;
    }
    let p = matched as f64 / predicted as f64;
    let r = matched as f64 / reference as f64;
    2.0 * p * r / (p + r)
}
