//! Checked-in serializations of detector and rewriter inputs.
//!
//! Set `UPDATE_GOLDEN=1` to rewrite the fixtures after an intended change.

use std::path::PathBuf;

use mdt_core::corpus::{parse_transcript, Meeting, MeetingMeta, TranscriptFormat};
use mdt_core::detector::{assemble_detector_input, build_windows};
use mdt_core::rewriter::{assemble_context, assemble_rewriter_input};
use mdt_core::text::Vocab;
use serde_json::json;

const TRANSCRIPT: &str = r#"{"speaker":"A","text":"Good morning, shall we begin?"}
{"speaker":"B","text":"The Sapporo warehouse reported a delay."}
{"speaker":"A","text":"How long is the delay?"}
{"speaker":"B","text":"About two weeks, maybe three."}
{"speaker":"A","text":"Then we decided to move the launch to March."}
{"speaker":"C","text":"Fine with me."}
"#;

const LONE: &str = r#"{"speaker":"A","text":"We agreed on the budget."}
"#;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

fn meeting(id: &str, src: &str) -> Meeting {
    parse_transcript(src.as_bytes(), TranscriptFormat::Jsonl, MeetingMeta::new(id)).unwrap()
}

fn vocab(update: bool) -> Vocab {
    let path = dir().join("vocab.json");
    if update {
        // "march" is left out so the fixtures cover [UNK].
        let texts: Vec<&str> = TRANSCRIPT.lines().chain(LONE.lines()).collect();
        let mut v = Vocab::build("golden", texts, 1, true).to_file();
        v.tokens.retain(|t| t != "march");
        let v = Vocab::from_file(v).unwrap();
        v.save(&path).unwrap();
        v
    } else {
        Vocab::load(&path).unwrap()
    }
}

fn surfaces(v: &Vocab, ids: &[u32]) -> Vec<String> {
    ids.iter().map(|i| v.token(*i).unwrap_or("?").to_owned()).collect()
}

/// (case name, serialized fixture).
fn cases(v: &Vocab) -> Vec<(String, String)> {
    let six = meeting("six", TRANSCRIPT);
    let lone = meeting("lone", LONE);
    let mut out = Vec::new();

    // Detector: (meeting, target, w, max_len).
    let det = [
        ("detector_first_target_padded", &six, 0, 5, 512),
        ("detector_middle", &six, 3, 5, 512),
        ("detector_last_target_padded", &six, 5, 5, 512),
        ("detector_single_utterance", &lone, 0, 5, 512),
        ("detector_truncated_context", &six, 4, 3, 16),
    ];
    for (name, m, t, w, max_len) in det {
        let window = &build_windows(m, None, w, 1).unwrap()[t];
        let input = assemble_detector_input(window, v, max_len).unwrap();
        let doc = json!({
            "case": name,
            "window_size": w,
            "target": t,
            "pad_slots": window.slots.iter().map(|s| s.is_pad()).collect::<Vec<_>>(),
            "tokens": surfaces(v, &input.token_ids),
            "input": input,
        });
        out.push((name.to_owned(), serde_json::to_string_pretty(&doc).unwrap() + "\n"));
    }

    // Rewriter: (meeting, decision index, budget).
    let rw = [
        ("rewriter_empty_context", &six, 0, 360),
        ("rewriter_single_context", &six, 1, 360),
        ("rewriter_full_context", &six, 4, 360),
        ("rewriter_budget_drops_oldest", &six, 4, 12),
        ("rewriter_budget_cuts_nearest", &six, 4, 3),
    ];
    for (name, m, idx, budget) in rw {
        let context = assemble_context(m, idx, budget, v).unwrap();
        let input = assemble_rewriter_input(&context, &m.utterances[idx].text, v).unwrap();
        let doc = json!({
            "case": name,
            "decision_index": idx,
            "budget": budget,
            "tokens": surfaces(v, &input.token_ids),
            "input": input,
        });
        out.push((name.to_owned(), serde_json::to_string_pretty(&doc).unwrap() + "\n"));
    }
    out
}

/// Compares every case with its fixture; returns the mismatching names.
pub fn check() -> Result<usize, Vec<String>> {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let v = vocab(update);
    let cases = cases(&v);
    let mut bad = Vec::new();
    for (name, text) in &cases {
        let path = dir().join(format!("{name}.json"));
        if update {
            std::fs::write(&path, text).unwrap();
            continue;
        }
        match std::fs::read(&path) {
            Ok(b) if b == text.as_bytes() => {}
            _ => bad.push(name.clone()),
        }
    }
    if bad.is_empty() {
        Ok(cases.len())
    } else {
        Err(bad)
    }
}
