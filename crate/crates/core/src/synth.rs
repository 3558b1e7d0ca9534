//! Seeded synthetic corpora for smoke tests and learning checks.
//!
//! The detector corpus labels an utterance TD exactly when it was drawn
//! from a decision template, so a model that learns the templates can fit
//! it perfectly. The ellipsis corpus omits a place name from the decision
//! utterance that an earlier turn mentions; the gold rewrite restores it
//! and drops fillers.

use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

use crate::corpus::{
    DecisionLabel, DecisionTag, LabelSource, LabeledMeeting, Meeting, MeetingStatus, Utterance,
};
use crate::rewriter::RewriteRecord;

const SPEAKERS: [&str; 4] = ["A", "B", "C", "D"];
const OBJECTS: [&str; 16] = [
    "report", "budget", "schedule", "server", "contract", "design", "survey", "invoice",
    "prototype", "manual", "database", "website", "roadmap", "container", "shipment", "license",
];
const VERBS: [&str; 10] = [
    "review", "update", "ship", "cancel", "approve", "replace", "check", "order", "finish", "test",
];
const TIMES: [&str; 8] = [
    "by friday", "next week", "tomorrow", "this month", "before the launch", "on monday",
    "by noon", "after the audit",
];
const FILLERS: [&str; 6] = ["uh", "um", "well", "you know", "like", "hmm"];
const PLACES: [&str; 20] = [
    "sapporo", "osaka", "kyoto", "nagoya", "fukuoka", "sendai", "kobe", "nara", "yokohama",
    "chiba", "niigata", "okayama", "kumamoto", "hiroshima", "kanazawa", "nagano", "matsue",
    "toyama", "otaru", "hakodate",
];

fn decision_utterance(rng: &mut StdRng) -> String {
    let o = OBJECTS.choose(rng).unwrap();
    let v = VERBS.choose(rng).unwrap();
    let t = TIMES.choose(rng).unwrap();
    match rng.random_range(0..4) {
        0 => format!("so we decided to {v} the {o} {t}"),
        1 => format!("ok let us {v} the {o} {t} then"),
        2 => format!("agreed we will {v} the {o} {t}"),
        _ => format!("final call {v} the {o} {t}"),
    }
}

fn other_utterance(rng: &mut StdRng) -> String {
    let o = OBJECTS.choose(rng).unwrap();
    let o2 = OBJECTS.choose(rng).unwrap();
    let v = VERBS.choose(rng).unwrap();
    let t = TIMES.choose(rng).unwrap();
    let f = FILLERS.choose(rng).unwrap();
    match rng.random_range(0..8) {
        0 => format!("{f} what about the {o}"),
        1 => format!("i think the {o} looks fine"),
        2 => format!("did anyone {v} the {o} {t}"),
        3 => format!("{f} yeah"),
        4 => format!("the {o} is related to the {o2}"),
        5 => format!("maybe we should talk about the {o} later"),
        6 => format!("i am not sure we can {v} the {o}"),
        _ => format!("{f} the {o} came up {t}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorCorpusConfig {
    pub meetings: usize,
    pub utterances_per_meeting: usize,
    pub positive_rate: f64,
    pub seed: u64,
}

impl Default for DetectorCorpusConfig {
    fn default() -> Self {
        DetectorCorpusConfig {
            meetings: 40,
            utterances_per_meeting: 50,
            positive_rate: 0.06,
            seed: 7,
        }
    }
}

/// Templated meetings with gold labels. Meeting ids are `toy-000`, …
pub fn detector_corpus(config: &DetectorCorpusConfig) -> Vec<LabeledMeeting> {
    let mut rng = StdRng::seed_from_u64(config.seed);
    (0..config.meetings)
        .map(|m| {
            let id = format!("toy-{m:03}");
            let mut utterances = Vec::with_capacity(config.utterances_per_meeting);
            let mut labels = Vec::with_capacity(config.utterances_per_meeting);
            for i in 0..config.utterances_per_meeting {
                let decision = rng.random_bool(config.positive_rate);
                let text = if decision {
                    decision_utterance(&mut rng)
                } else {
                    other_utterance(&mut rng)
                };
                let uid = format!("u_{i}");
                utterances.push(Utterance {
                    id: uid.clone(),
                    index: i,
                    speaker: SPEAKERS[rng.random_range(0..SPEAKERS.len())].to_string(),
                    text,
                    start_time: Some(i as f64 * 4.0),
                    end_time: Some(i as f64 * 4.0 + 3.5),
                });
                labels.push(DecisionLabel {
                    utterance_id: uid,
                    tag: DecisionTag::from_bool(decision),
                    source: LabelSource::Gold,
                });
            }
            LabeledMeeting {
                meeting: Meeting {
                    id: id.clone(),
                    title: format!("Toy meeting {m}"),
                    recorded_at: None,
                    utterances,
                    status: MeetingStatus::Uploaded,
                },
                labels,
            }
        })
        .collect()
}

/// Context turns that mention a place, then a decision utterance that
/// refers to it only as "there".
pub fn ellipsis_corpus(count: usize, seed: u64) -> Vec<RewriteRecord> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let place = *PLACES.choose(&mut rng).unwrap();
            let o = *OBJECTS.choose(&mut rng).unwrap();
            let v = *VERBS.choose(&mut rng).unwrap();
            let f = *FILLERS.choose(&mut rng).unwrap();
            let mut context = Vec::new();
            if rng.random_bool(0.5) {
                context.push(other_utterance(&mut rng));
            }
            context.push(match rng.random_range(0..3) {
                0 => format!("the {o} at the {place} site is late"),
                1 => format!("{f} we got news from {place} about the {o}"),
                _ => format!("the {place} team asked about the {o}"),
            });
            if rng.random_bool(0.5) {
                context.push(format!("{f} yeah"));
            }
            RewriteRecord {
                id: format!("ell-{i:04}"),
                context,
                decision: format!("{f} ok we will {v} the {o} there"),
                gold_rewrite: format!("we will {v} the {o} at {place}"),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detector_corpus_is_seeded_and_valid() {
        let cfg = DetectorCorpusConfig::default();
        let a = detector_corpus(&cfg);
        assert_eq!(a, detector_corpus(&cfg));
        assert_eq!(a.len(), 40);
        let mut pos = 0;
        for m in &a {
            m.validate().unwrap();
            for (u, l) in m.meeting.utterances.iter().zip(&m.labels) {
                let templated = ["decided", "let us", "agreed", "final call"]
                    .iter()
                    .any(|k| u.text.contains(k));
                assert_eq!(templated, l.tag.is_decision(), "{}", u.text);
                pos += l.tag.is_decision() as usize;
            }
        }
        let rate = pos as f64 / 2000.0;
        assert!((0.03..0.09).contains(&rate), "{rate}");
    }

    #[test]
    fn ellipsis_rewrite_restores_a_context_place() {
        for r in ellipsis_corpus(50, 3) {
            let place = r.gold_rewrite.split(' ').next_back().unwrap();
            assert!(!r.decision.contains(place));
            assert!(r.context.iter().any(|c| c.contains(place)));
        }
    }
}
