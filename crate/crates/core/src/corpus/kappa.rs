use std::collections::BTreeMap;

use super::types::DecisionTag;
use crate::error::{Error, Result};

/// Cohen's kappa between two annotators' tag sequences.
///
/// When chance agreement is 1 (both annotators used one identical constant
/// tag) the ratio is undefined; identical sequences return 1.0, anything else
/// 0.0.
pub fn cohen_kappa(labels_a: &[DecisionTag], labels_b: &[DecisionTag]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::contract(format!(
            "kappa needs equal lengths, got {} and {}",
            labels_a.len(),
            labels_b.len()
        )));
    }
    if labels_a.is_empty() {
        return Err(Error::contract("kappa needs at least one label"));
    }
    let n = labels_a.len() as f64;
    let agree = labels_a.iter().zip(labels_b).filter(|(a, b)| a == b).count() as f64;
    let p_o = agree / n;

    let mut marginals: BTreeMap<DecisionTag, (usize, usize)> = BTreeMap::new();
    for (a, b) in labels_a.iter().zip(labels_b) {
        marginals.entry(*a).or_default().0 += 1;
        marginals.entry(*b).or_default().1 += 1;
    }
    let p_e: f64 = marginals
        .values()
        .map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n))
        .sum();

    if (1.0 - p_e).abs() < f64::EPSILON {
        return Ok(if labels_a == labels_b { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}
