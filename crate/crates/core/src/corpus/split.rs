use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand::rngs::StdRng;
use std::collections::HashSet;

use super::types::DatasetSplit;
use crate::error::{Error, Result};

/// Default ratios, close to the 27006/3030/1425 utterance proportions of the
/// reference corpus.
pub const DEFAULT_SPLIT_RATIOS: [f64; 3] = [0.86, 0.095, 0.045];

/// Partitions meeting ids into train/validation/test.
///
/// Counts use largest-remainder rounding; every split with a positive ratio
/// receives at least one meeting. Deterministic for a fixed seed.
pub fn split_by_meeting(meeting_ids: &[String], ratios: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::config(format!("split ratios must be nonnegative, got {ratios:?}")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split ratios sum to {sum}, expected 1")));
    }
    let unique: HashSet<&String> = meeting_ids.iter().collect();
    if unique.len() != meeting_ids.len() {
        return Err(Error::config("duplicate meeting ids"));
    }
    let positive = ratios.iter().filter(|r| **r > 0.0).count();
    let n = meeting_ids.len();
    if n < positive {
        return Err(Error::config(format!(
            "{n} meetings cannot fill {positive} nonempty splits"
        )));
    }

    let mut counts = [0usize; 3];
    let mut remainders = [(0.0f64, 0usize); 3];
    for (i, r) in ratios.iter().enumerate() {
        let exact = r * n as f64;
        counts[i] = exact.floor() as usize;
        remainders[i] = (exact - exact.floor(), i);
    }
    let mut left = n - counts.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().cycle() {
        if left == 0 {
            break;
        }
        if ratios[i] > 0.0 {
            counts[i] += 1;
            left -= 1;
        }
    }
    // Starved positive splits borrow from the largest one.
    for i in 0..3 {
        if ratios[i] > 0.0 && counts[i] == 0 {
            let donor = (0..3).max_by_key(|&j| counts[j]).expect("three splits");
            counts[donor] -= 1;
            counts[i] += 1;
        }
    }

    let mut ids = meeting_ids.to_vec();
    ids.sort();
    ids.shuffle(&mut StdRng::seed_from_u64(seed));
    let test = ids.split_off(counts[0] + counts[1]);
    let validation = ids.split_off(counts[0]);
    Ok(DatasetSplit {
        train: ids,
        validation,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("m{i}")).collect()
    }

    #[test]
    fn ten_meetings_eight_one_one() {
        let s = split_by_meeting(&ids(10), [0.8, 0.1, 0.1], 7).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (8, 1, 1));
        let all: HashSet<_> = s.train.iter().chain(&s.validation).chain(&s.test).collect();
        assert_eq!(all.len(), 10);
    }

    #[test]
    fn same_seed_same_split() {
        let a = split_by_meeting(&ids(10), [0.8, 0.1, 0.1], 42).unwrap();
        let b = split_by_meeting(&ids(10), [0.8, 0.1, 0.1], 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ratios_must_sum_to_one() {
        let err = split_by_meeting(&ids(10), [0.5, 0.5, 0.1], 0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn too_few_meetings() {
        assert!(split_by_meeting(&ids(2), [0.8, 0.1, 0.1], 0).is_err());
        let s = split_by_meeting(&ids(2), [0.5, 0.5, 0.0], 0).unwrap();
        assert!(s.test.is_empty());
    }

    proptest! {
        #[test]
        fn partition_holds(n in 3usize..60, a in 1u32..100, b in 1u32..100, c in 1u32..100, seed: u64) {
            let total = (a + b + c) as f64;
            let ratios = [a as f64 / total, b as f64 / total, 1.0 - a as f64 / total - b as f64 / total];
            let input = ids(n);
            let s = split_by_meeting(&input, ratios, seed).unwrap();
            let mut all: Vec<_> = s.train.iter().chain(&s.validation).chain(&s.test).cloned().collect();
            all.sort();
            let mut expected = input.clone();
            expected.sort();
            prop_assert_eq!(all, expected);
            prop_assert!(!s.train.is_empty() && !s.validation.is_empty() && !s.test.is_empty());
        }
    }
}
