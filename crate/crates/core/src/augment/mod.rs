//! Back-translation augmentation of positive detector windows.

mod translator;

pub use translator::{
    CachedTranslator, IdentityTranslator, ResilientTranslator, RetryPolicy, TranslatorClient,
};

use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::detector::Window;
use crate::error::{Error, Result};

/// Pivot languages used by default.
pub const DEFAULT_PIVOTS: [&str; 7] = ["vi", "en", "zh-CN", "zh-TW", "fr", "de", "ko"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentScope {
    /// Only windows whose target is TD.
    #[default]
    PositivesOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    pub pivot_langs: Vec<String>,
    pub source_lang: String,
    #[serde(default)]
    pub scope: AugmentScope,
    /// Upper bound on concurrent translation calls.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_parallelism() -> usize {
    4
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            pivot_langs: DEFAULT_PIVOTS.iter().map(|s| s.to_string()).collect(),
            source_lang: "ja".into(),
            scope: AugmentScope::PositivesOnly,
            parallelism: default_parallelism(),
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pivot_langs.is_empty() {
            return Err(Error::config("pivot list is empty"));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &self.pivot_langs {
            if !seen.insert(p) {
                return Err(Error::config(format!("pivot {p:?} listed twice")));
            }
        }
        if self.parallelism == 0 {
            return Err(Error::config("parallelism must be ≥ 1"));
        }
        Ok(())
    }
}

/// Text translated to a pivot and back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackTranslation {
    pub text: String,
    pub pivot: String,
}

/// `source → pivot → source` through `client`.
pub fn back_translate(
    text: &str,
    source_lang: &str,
    pivot: &str,
    client: &dyn TranslatorClient,
) -> Result<BackTranslation> {
    if text.is_empty() {
        return Err(Error::contract("cannot back-translate empty text"));
    }
    let forward = client.translate(text, source_lang, pivot)?;
    if forward.is_empty() {
        return Err(Error::Transport(format!("empty translation into {pivot}")));
    }
    let back = client.translate(&forward, pivot, source_lang)?;
    if back.is_empty() {
        return Err(Error::Transport(format!("empty translation back from {pivot}")));
    }
    Ok(BackTranslation {
        text: back,
        pivot: pivot.to_owned(),
    })
}

/// A (window, pivot) pair that could not be augmented.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub window_id: String,
    pub pivot: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentOutput {
    /// Originals in input order, followed by added copies ordered by
    /// (source window position, pivot position).
    pub windows: Vec<Window>,
    pub added: usize,
    pub skips: Vec<SkipRecord>,
}

fn translate_window(
    window: &Window,
    pivot: &str,
    config: &AugmentationConfig,
    client: &dyn TranslatorClient,
) -> Result<Window> {
    let mut copy = window.clone();
    for slot in copy.slots.iter_mut().filter(|s| !s.is_pad() && !s.text.is_empty()) {
        slot.text = back_translate(&slot.text, &config.source_lang, pivot, client)?.text;
    }
    copy.window_id = format!("{}@{pivot}", window.window_id);
    copy.pivot = Some(pivot.to_owned());
    copy.source_window = Some(window.window_id.clone());
    Ok(copy)
}

/// Adds one back-translated copy of every positive window per pivot.
///
/// All non-PAD slot texts of a window are translated; tags and target
/// position are kept. Negatives pass through unchanged. A failed
/// (window, pivot) pair is recorded as a skip and the original is kept.
/// Apply to training windows only.
pub fn augment_positive_windows(
    windows: &[Window],
    config: &AugmentationConfig,
    client: &dyn TranslatorClient,
) -> Result<AugmentOutput> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = windows
        .iter()
        .enumerate()
        .filter(|(_, w)| w.is_positive())
        .flat_map(|(wi, _)| (0..config.pivot_langs.len()).map(move |pi| (wi, pi)))
        .collect();

    let results: Mutex<Vec<Option<Result<Window>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = config.parallelism.min(jobs.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(wi, pi)) = jobs.get(j) else { break };
                let out = translate_window(&windows[wi], &config.pivot_langs[pi], config, client);
                results.lock().expect("results lock")[j] = Some(out);
            });
        }
    });

    let mut out = windows.to_vec();
    let mut skips = Vec::new();
    let mut added = 0;
    for ((wi, pi), res) in jobs.iter().zip(results.into_inner().expect("results lock")) {
        match res.expect("every job ran") {
            Ok(w) => {
                out.push(w);
                added += 1;
            }
            Err(e @ (Error::Transport(_) | Error::Contract(_))) => skips.push(SkipRecord {
                window_id: windows[*wi].window_id.clone(),
                pivot: config.pivot_langs[*pi].clone(),
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(AugmentOutput {
        windows: out,
        added,
        skips,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DecisionTag;
    use crate::detector::WindowSlot;

    /// Uppercases into the pivot and lowercases back.
    struct CaseStub;

    impl TranslatorClient for CaseStub {
        fn translate(&self, text: &str, source: &str, _target: &str) -> Result<String> {
            Ok(if source == "ja" { text.to_uppercase() } else { text.to_lowercase() })
        }
    }

    /// Fails every call into one pivot for one text.
    struct FailOn {
        text: &'static str,
        pivot: &'static str,
    }

    impl TranslatorClient for FailOn {
        fn translate(&self, text: &str, _source: &str, target: &str) -> Result<String> {
            if text == self.text && target == self.pivot {
                Err(Error::Transport("timeout".into()))
            } else {
                Ok(text.to_owned())
            }
        }
    }

    fn window(id: &str, target_tag: DecisionTag) -> Window {
        let slot = |i: usize, tag| WindowSlot {
            utterance_id: Some(format!("u{i}")),
            utterance_index: Some(i),
            text: format!("{id} text {i}"),
            tag: Some(tag),
        };
        Window {
            window_id: id.into(),
            meeting_id: "m".into(),
            target_pos: 1,
            slots: vec![slot(0, DecisionTag::NonTd), slot(1, target_tag), WindowSlot::pad()],
            pivot: None,
            source_window: None,
        }
    }

    fn config(pivots: &[&str]) -> AugmentationConfig {
        AugmentationConfig {
            pivot_langs: pivots.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn identity_round_trip() {
        let bt = back_translate("会議", "ja", "en", &IdentityTranslator).unwrap();
        assert_eq!(bt.text, "会議");
        assert_eq!(bt.pivot, "en");
    }

    #[test]
    fn case_stub_composition() {
        assert_eq!(back_translate("Abc", "ja", "en", &CaseStub).unwrap().text, "abc");
    }

    #[test]
    fn empty_text_rejected() {
        assert!(matches!(back_translate("", "ja", "en", &IdentityTranslator), Err(Error::Contract(_))));
    }

    #[test]
    fn two_positives_seven_pivots() {
        let ws = vec![
            window("a", DecisionTag::Td),
            window("b", DecisionTag::NonTd),
            window("c", DecisionTag::Td),
        ];
        let out = augment_positive_windows(&ws, &AugmentationConfig::default(), &IdentityTranslator).unwrap();
        assert_eq!(out.added, 14);
        assert_eq!(out.windows.len(), 17);
        assert_eq!(&out.windows[..3], &ws[..]);
        for (k, copy) in out.windows[3..].iter().enumerate() {
            let src = if k < 7 { &ws[0] } else { &ws[2] };
            assert_eq!(copy.slots, src.slots);
            assert_eq!(copy.pivot.as_deref(), Some(DEFAULT_PIVOTS[k % 7]));
            assert_eq!(copy.source_window.as_deref(), Some(src.window_id.as_str()));
        }
    }

    #[test]
    fn no_positives_is_identity() {
        let ws = vec![window("b", DecisionTag::NonTd)];
        let out = augment_positive_windows(&ws, &config(&["en"]), &IdentityTranslator).unwrap();
        assert_eq!(out.windows, ws);
        assert_eq!(out.added, 0);
    }

    #[test]
    fn transport_failure_is_skipped() {
        let ws = vec![
            window("a", DecisionTag::Td),
            window("b", DecisionTag::Td),
            window("c", DecisionTag::Td),
        ];
        let client = FailOn { text: "b text 1", pivot: "fr" };
        let out = augment_positive_windows(&ws, &config(&["en", "fr"]), &client).unwrap();
        assert_eq!(out.added, 5);
        assert_eq!(out.skips.len(), 1);
        assert_eq!(out.skips[0].window_id, "b");
        assert_eq!(out.skips[0].pivot, "fr");
        assert_eq!(out.windows.len(), 8);
    }

    #[test]
    fn pivots_must_be_unique() {
        assert!(config(&["en", "en"]).validate().is_err());
        assert!(config(&[]).validate().is_err());
    }
}
