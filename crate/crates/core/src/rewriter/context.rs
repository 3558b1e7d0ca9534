use crate::corpus::Meeting;
use crate::error::{Error, Result};
use crate::text::Vocab;

/// Greedy suffix of whole utterances whose token total fits `budget`,
/// oldest first. If even the nearest utterance overflows, its first
/// `budget` tokens are kept.
pub fn select_context(preceding: &[&str], budget: usize, vocab: &Vocab) -> Result<Vec<String>> {
    if budget == 0 {
        return Err(Error::config("context budget must be ≥ 1"));
    }
    let mut picked = Vec::new();
    let mut used = 0;
    for (k, text) in preceding.iter().rev().enumerate() {
        let tokens = vocab.encode_with_offsets(text);
        if used + tokens.len() > budget {
            if k == 0 {
                let end = tokens[budget - 1].1.end;
                picked.push(text[..end].to_owned());
            }
            break;
        }
        used += tokens.len();
        picked.push((*text).to_owned());
    }
    picked.reverse();
    Ok(picked)
}

/// Context for the utterance at `decision_index`: preceding utterances
/// within `budget` tokens of `vocab`'s tokenizer.
pub fn assemble_context(
    meeting: &Meeting,
    decision_index: usize,
    budget: usize,
    vocab: &Vocab,
) -> Result<Vec<String>> {
    if decision_index >= meeting.len() {
        return Err(Error::contract(format!(
            "decision index {decision_index} out of range for meeting {} of {} utterances",
            meeting.id,
            meeting.len()
        )));
    }
    let preceding: Vec<&str> = meeting.utterances[..decision_index]
        .iter()
        .map(|u| u.text.as_str())
        .collect();
    select_context(&preceding, budget, vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{MeetingStatus, Utterance};

    fn vocab() -> Vocab {
        Vocab::build("t", ["a b c d e f g h"], 1, true)
    }

    fn sized(n: usize) -> String {
        vec!["a"; n].join(" ")
    }

    fn meeting(texts: &[String]) -> Meeting {
        Meeting {
            id: "m".into(),
            title: "m".into(),
            recorded_at: None,
            utterances: texts
                .iter()
                .enumerate()
                .map(|(i, t)| Utterance {
                    id: format!("u{i}"),
                    index: i,
                    speaker: "A".into(),
                    text: t.clone(),
                    start_time: None,
                    end_time: None,
                })
                .collect(),
            status: MeetingStatus::Uploaded,
        }
    }

    #[test]
    fn greedy_suffix_by_whole_utterance() {
        let texts = [sized(300), sized(100), sized(50), "b".into()];
        let m = meeting(&texts);
        let ctx = assemble_context(&m, 3, 360, &vocab()).unwrap();
        assert_eq!(ctx, vec![sized(100), sized(50)]);
    }

    #[test]
    fn first_utterance_has_empty_context() {
        let m = meeting(&["a".into(), "b".into()]);
        assert!(assemble_context(&m, 0, 360, &vocab()).unwrap().is_empty());
    }

    #[test]
    fn slack_budget_includes_all() {
        let texts = ["a b".into(), "c".into(), "d".into()];
        let m = meeting(&texts);
        assert_eq!(assemble_context(&m, 2, 360, &vocab()).unwrap(), vec!["a b", "c"]);
    }

    #[test]
    fn overflowing_nearest_is_tail_truncated() {
        let texts = ["a".into(), "b c d e".into(), "f".into()];
        let m = meeting(&texts);
        assert_eq!(assemble_context(&m, 2, 2, &vocab()).unwrap(), vec!["b c"]);
    }

    #[test]
    fn out_of_range_index() {
        let m = meeting(&["a".into()]);
        assert!(assemble_context(&m, 1, 10, &vocab()).is_err());
    }
}
