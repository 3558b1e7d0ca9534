use std::collections::HashSet;

use proptest::prelude::*;

use mdt_core::augment::{augment_positive_windows, AugmentationConfig, IdentityTranslator};
use mdt_core::corpus::{
    parse_transcript, DecisionLabel, DecisionTag, LabelSource, Meeting, MeetingMeta, TranscriptFormat,
};
use mdt_core::detector::{
    assemble_detector_input, build_windows, detector_eval, predict_tags, DetectorConfig, DetectorMode, Window,
    WindowScorer,
};
use mdt_core::metrics::{
    aggregate_scores, bleu, restoration_f, rouge_n, BleuSmoothing, Criterion, CriterionSummary, ScoreEntry,
    ScoreSheet,
};
use mdt_core::rewriter::{assemble_rewriter_input, derive_picker_labels, select_context};
use mdt_core::service::JobState;
use mdt_core::text::{SpecialToken, Tokenizer, Vocab, WhitespaceTokenizer};

const WORDS: [&str; 8] = ["we", "ship", "the", "plan", "osaka", "decided", "um", "friday"];

fn sentence(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(&WORDS[..]), 1..=max).prop_map(|w| w.join(" "))
}

fn meeting(texts: &[String]) -> Meeting {
    let src: String = texts
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{{\"speaker\":\"S{}\",\"text\":\"{t}\"}}\n", i % 2))
        .collect();
    parse_transcript(src.as_bytes(), TranscriptFormat::Jsonl, MeetingMeta::new("p")).unwrap()
}

fn vocab() -> Vocab {
    Vocab::build("p", WORDS, 1, true)
}

/// Scores a window 0.9 when its target mentions "decided".
struct Keyword(usize, DetectorMode);

impl WindowScorer for Keyword {
    fn window_size(&self) -> usize {
        self.0
    }
    fn mode(&self) -> DetectorMode {
        self.1
    }
    fn version(&self) -> String {
        "keyword".into()
    }
    fn score_windows(&self, windows: &[Window]) -> mdt_core::Result<Vec<f64>> {
        Ok(windows
            .iter()
            .map(|w| if w.target().text.contains("decided") { 0.9 } else { 0.1 })
            .collect())
    }
}

fn labels_for(m: &Meeting, tags: &[bool]) -> Vec<DecisionLabel> {
    m.utterances
        .iter()
        .zip(tags)
        .map(|(u, t)| DecisionLabel {
            utterance_id: u.id.clone(),
            tag: DecisionTag::from_bool(*t),
            source: LabelSource::Gold,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parsed_indices_are_a_permutation(texts in prop::collection::vec(sentence(6), 1..40)) {
        let m = meeting(&texts);
        let mut idx: Vec<usize> = m.utterances.iter().map(|u| u.index).collect();
        idx.sort_unstable();
        prop_assert_eq!(idx, (0..texts.len()).collect::<Vec<_>>());
    }

    #[test]
    fn windows_cover_every_utterance_once(
        texts in prop::collection::vec(sentence(5), 1..60),
        w in 2usize..10,
        max_len in 12usize..64,
    ) {
        let m = meeting(&texts);
        let v = vocab();
        let sep = v.special(SpecialToken::Sep).unwrap();
        let cls = v.special(SpecialToken::Cls).unwrap();
        let windows = build_windows(&m, None, w, 1).unwrap();
        prop_assert_eq!(windows.len(), texts.len());
        let mut seen = HashSet::new();
        for win in &windows {
            prop_assert_eq!(win.size(), w);
            prop_assert_eq!(win.target_pos, w - 2);
            prop_assert!(!win.target().is_pad());
            prop_assert!(seen.insert(win.target().utterance_index.unwrap()));
            // PADs form a contiguous prefix or suffix.
            let pads = win.pad_mask();
            let first_real = pads.iter().position(|p| !p).unwrap();
            let last_real = pads.iter().rposition(|p| !p).unwrap();
            prop_assert!(pads[first_real..=last_real].iter().all(|p| !p));
            if max_len > w {
                let input = assemble_detector_input(win, &v, max_len).unwrap();
                prop_assert!(input.len() <= max_len);
                prop_assert_eq!(input.token_ids[0], cls);
                prop_assert_eq!(input.token_ids.iter().filter(|t| **t == cls).count(), 1);
                prop_assert_eq!(input.token_ids.iter().filter(|t| **t == sep).count(), w);
                prop_assert_eq!(input.sep_positions.len(), w);
            }
        }
    }

    #[test]
    fn predictions_are_total_and_self_eval_is_perfect(
        texts in prop::collection::vec(sentence(5), 1..40),
        sl in any::<bool>(),
    ) {
        let m = meeting(&texts);
        let mode = if sl { DetectorMode::SequenceLabeling } else { DetectorMode::SentenceClassification };
        let config = DetectorConfig { mode, ..DetectorConfig::default() };
        let labels = predict_tags(&m, &Keyword(config.window_size, mode), &config).unwrap();
        prop_assert_eq!(labels.len(), m.len());
        for (l, u) in labels.iter().zip(&m.utterances) {
            prop_assert_eq!(&l.utterance_id, &u.id);
            prop_assert_eq!(l.tag.is_decision(), u.text.contains("decided"));
        }
        if labels.iter().any(|l| l.tag.is_decision()) {
            let s = detector_eval(&labels, &labels).unwrap();
            prop_assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn augmentation_preserves_tags_and_counts(
        texts in prop::collection::vec(sentence(4), 1..30),
        tags in prop::collection::vec(any::<bool>(), 30),
        pivots in 1usize..8,
    ) {
        let m = meeting(&texts);
        let labels = labels_for(&m, &tags);
        let windows = build_windows(&m, Some(&labels), 5, 1).unwrap();
        let config = AugmentationConfig {
            pivot_langs: AugmentationConfig::default().pivot_langs[..pivots].to_vec(),
            ..AugmentationConfig::default()
        };
        let out = augment_positive_windows(&windows, &config, &IdentityTranslator).unwrap();
        let positives = windows.iter().filter(|w| w.is_positive()).count();
        prop_assert_eq!(out.added, positives * pivots - out.skips.len());
        prop_assert_eq!(&out.windows[..windows.len()], &windows[..]);
        for copy in &out.windows[windows.len()..] {
            prop_assert!(copy.is_positive());
            let src = windows.iter().find(|w| Some(&w.window_id) == copy.source_window.as_ref()).unwrap();
            prop_assert_eq!(copy.target_pos, src.target_pos);
            let tags = |w: &Window| w.slots.iter().map(|s| s.tag).collect::<Vec<_>>();
            prop_assert_eq!(tags(copy), tags(src));
        }
    }

    #[test]
    fn context_respects_budget(
        texts in prop::collection::vec(sentence(8), 0..20),
        budget in 1usize..40,
    ) {
        let v = vocab();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let ctx = select_context(&refs, budget, &v).unwrap();
        let used: usize = ctx.iter().map(|c| v.encode(c).len()).sum();
        prop_assert!(used <= budget);
        prop_assert!(ctx.len() <= texts.len());
        if !texts.is_empty() {
            prop_assert!(!ctx.is_empty());
        }
    }

    #[test]
    fn rewriter_layout_counts(
        context in prop::collection::vec(sentence(6), 0..8),
        decision in sentence(6),
    ) {
        let v = vocab();
        let input = assemble_rewriter_input(&context, &decision, &v).unwrap();
        let count = |t: SpecialToken| {
            let id = v.special(t).unwrap();
            input.token_ids.iter().filter(|x| **x == id).count()
        };
        prop_assert_eq!(count(SpecialToken::X1), context.len());
        prop_assert_eq!(count(SpecialToken::X2), 1);
        prop_assert_eq!(*input.token_ids.last().unwrap(), v.special(SpecialToken::Eos).unwrap());
        prop_assert_eq!(input.segment_ids.len(), input.token_ids.len());

        // A rewrite using only decision words selects no context token.
        let labels = derive_picker_labels(&input, &decision, &v);
        prop_assert_eq!(labels.len(), input.context_token_count());
        prop_assert!(labels.iter().all(|l| *l == 0));
        prop_assert_eq!(&labels, &derive_picker_labels(&input, &decision, &v));
    }

    #[test]
    fn metrics_are_bounded_and_reflexive(
        pred in sentence(10),
        reference in sentence(10),
        original in sentence(6),
    ) {
        let tok = WhitespaceTokenizer;
        for n in 1..=2 {
            let r = rouge_n(&pred, &reference, n, &tok).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            if tok.tokenize(&reference).len() >= n {
                prop_assert_eq!(rouge_n(&reference, &reference, n, &tok).unwrap(), 1.0);
            }
            if let Some(f) = restoration_f(&pred, &reference, &original, n, &tok).unwrap() {
                prop_assert!((0.0..=1.0).contains(&f));
                prop_assert_eq!(restoration_f(&reference, &reference, &original, n, &tok).unwrap(), Some(1.0));
            }
        }
        let b = bleu(&pred, &reference, &tok, 4, BleuSmoothing::AddOne).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&b));
        prop_assert!((bleu(&reference, &reference, &tok, 4, BleuSmoothing::AddOne).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn retokenizing_with_spaces_changes_nothing(pred in sentence(8), reference in sentence(8), original in sentence(5)) {
        let tok = WhitespaceTokenizer;
        let spaced = |s: &str| s.replace(' ', "   ");
        prop_assert_eq!(
            rouge_n(&pred, &reference, 1, &tok).unwrap(),
            rouge_n(&spaced(&pred), &spaced(&reference), 1, &tok).unwrap()
        );
        prop_assert_eq!(
            restoration_f(&pred, &reference, &original, 2, &tok).unwrap(),
            restoration_f(&spaced(&pred), &spaced(&reference), &spaced(&original), 2, &tok).unwrap()
        );
    }

    #[test]
    fn summary_mean_is_weighted_ratio_sum(hist in prop::collection::vec(0usize..50, 5)) {
        prop_assume!(hist.iter().sum::<usize>() > 0);
        let mut entries = Vec::new();
        for (k, c) in hist.iter().enumerate() {
            for _ in 0..*c {
                entries.push(ScoreEntry {
                    sample_id: format!("s{}", entries.len()),
                    evaluator_id: "e".into(),
                    criterion: Criterion::Effectiveness,
                    score: k as u8 + 1,
                });
            }
        }
        let s = aggregate_scores(&ScoreSheet::new(entries).unwrap()).unwrap().remove(0);
        let expected: f64 = s.ratios.iter().enumerate().map(|(k, r)| (k + 1) as f64 * r).sum();
        prop_assert!((s.mean - expected).abs() < 1e-12);
        prop_assert_eq!(&s, &CriterionSummary::from_histogram(Criterion::Effectiveness, hist).unwrap());
    }

    #[test]
    fn only_legal_job_paths_reach_done(steps in prop::collection::vec(0usize..5, 0..8)) {
        let all = [JobState::Queued, JobState::Detecting, JobState::Rewriting, JobState::Done, JobState::Failed];
        let mut state = JobState::Queued;
        let mut path = vec![state];
        for s in steps {
            if state.can_transition(all[s]) {
                state = all[s];
                path.push(state);
            }
        }
        if state == JobState::Done {
            prop_assert_eq!(path, vec![JobState::Queued, JobState::Detecting, JobState::Rewriting, JobState::Done]);
        }
        prop_assert!(!JobState::Done.can_transition(JobState::Failed));
    }
}
