use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use crate::error::{Error, Result};

/// Human-evaluation criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Grammaticality and readability, 1 (bad) to 3 (good).
    TextFlow,
    /// Semantic closeness to the reference, 1 to 3.
    Understandability,
    /// Whether the rewrite keeps and enriches the original, 1 to 5.
    Effectiveness,
}

impl Criterion {
    pub fn max_score(self) -> u8 {
        match self {
            Criterion::TextFlow | Criterion::Understandability => 3,
            Criterion::Effectiveness => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub sample_id: String,
    pub evaluator_id: String,
    pub criterion: Criterion,
    pub score: u8,
}

/// Validated human-evaluation scores.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScoreSheet {
    entries: Vec<ScoreEntry>,
}

impl ScoreSheet {
    /// Validates scale bounds and (sample, evaluator, criterion) uniqueness.
    pub fn new(entries: Vec<ScoreEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if e.score < 1 || e.score > e.criterion.max_score() {
                return Err(Error::Validation(format!(
                    "entry {} (sample {}, evaluator {}): score {} outside 1..={} for {:?}",
                    i + 1,
                    e.sample_id,
                    e.evaluator_id,
                    e.score,
                    e.criterion.max_score(),
                    e.criterion
                )));
            }
            if !seen.insert((&e.sample_id, &e.evaluator_id, e.criterion)) {
                return Err(Error::Validation(format!(
                    "entry {}: sample {} already scored by evaluator {} for {:?}",
                    i + 1,
                    e.sample_id,
                    e.evaluator_id,
                    e.criterion
                )));
            }
        }
        Ok(ScoreSheet { entries })
    }

    /// Reads `sample_id,evaluator_id,criterion,score` CSV with a header row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut entries = Vec::new();
        for (i, rec) in rdr.deserialize::<ScoreEntry>().enumerate() {
            entries.push(rec.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })?);
        }
        ScoreSheet::new(entries)
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Aggregate for one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionSummary {
    pub criterion: Criterion,
    pub count: usize,
    pub mean: f64,
    /// `histogram[k]` counts score `k + 1`.
    pub histogram: Vec<usize>,
    /// `ratios[k]` is the share of score `k + 1`.
    pub ratios: Vec<f64>,
    /// Share of scores ≤ 2 (quality decreased, on the 1..5 scale).
    pub share_at_most_2: f64,
    /// Share of scores ≥ 4.
    pub share_at_least_4: f64,
}

impl CriterionSummary {
    /// Summary from a score histogram. `histogram[k]` counts score `k + 1`.
    pub fn from_histogram(criterion: Criterion, histogram: Vec<usize>) -> Result<Self> {
        if histogram.len() != criterion.max_score() as usize {
            return Err(Error::Validation(format!(
                "{criterion:?} histogram needs {} bins, got {}",
                criterion.max_score(),
                histogram.len()
            )));
        }
        let count: usize = histogram.iter().sum();
        if count == 0 {
            return Err(Error::Validation(format!("no {criterion:?} scores")));
        }
        let n = count as f64;
        let ratios: Vec<f64> = histogram.iter().map(|c| *c as f64 / n).collect();
        let mean = ratios.iter().enumerate().map(|(k, r)| (k + 1) as f64 * r).sum();
        let share = |pred: fn(usize) -> bool| -> f64 {
            ratios.iter().enumerate().filter(|(k, _)| pred(k + 1)).map(|(_, r)| r).sum()
        };
        Ok(CriterionSummary {
            criterion,
            count,
            mean,
            share_at_most_2: share(|s| s <= 2),
            share_at_least_4: share(|s| s >= 4),
            histogram,
            ratios,
        })
    }
}

/// Per-criterion mean over all entries, score histogram and cut shares.
pub fn aggregate_scores(sheet: &ScoreSheet) -> Result<Vec<CriterionSummary>> {
    if sheet.is_empty() {
        return Err(Error::Validation("score sheet is empty".into()));
    }
    let mut hist: BTreeMap<Criterion, Vec<usize>> = BTreeMap::new();
    for e in sheet.entries() {
        let bins = hist
            .entry(e.criterion)
            .or_insert_with(|| vec![0; e.criterion.max_score() as usize]);
        bins[(e.score - 1) as usize] += 1;
    }
    hist.into_iter()
        .map(|(c, h)| CriterionSummary::from_histogram(c, h))
        .collect()
}
