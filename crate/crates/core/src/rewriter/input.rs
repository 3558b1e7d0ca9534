use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::text::{SpecialToken, Vocab};

/// Serialized rewriter source:
/// `tokens(u1) [X1] … tokens(u_{n-1}) [X1] tokens(u_n) [X2] </s>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriterInput {
    pub context: Vec<String>,
    pub decision: String,
    pub token_ids: Vec<u32>,
    /// 0 for context tokens and their `[X1]`, 1 from the decision on.
    pub segment_ids: Vec<u32>,
    /// Positions in `token_ids` of context content tokens (markers excluded).
    pub context_positions: Vec<usize>,
    /// Positions of decision-utterance content tokens.
    pub decision_positions: Vec<usize>,
}

impl RewriterInput {
    pub fn context_token_count(&self) -> usize {
        self.context_positions.len()
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

pub fn assemble_rewriter_input(context: &[String], decision: &str, vocab: &Vocab) -> Result<RewriterInput> {
    let x1 = vocab.special(SpecialToken::X1)?;
    let x2 = vocab.special(SpecialToken::X2)?;
    let eos = vocab.special(SpecialToken::Eos)?;
    let decision_ids = vocab.encode(decision);
    if decision_ids.is_empty() {
        return Err(Error::contract("decision utterance is empty"));
    }
    let mut token_ids = Vec::new();
    let mut segment_ids = Vec::new();
    let mut context_positions = Vec::new();
    for utt in context {
        for id in vocab.encode(utt) {
            context_positions.push(token_ids.len());
            token_ids.push(id);
            segment_ids.push(0);
        }
        token_ids.push(x1);
        segment_ids.push(0);
    }
    let mut decision_positions = Vec::with_capacity(decision_ids.len());
    for id in decision_ids {
        decision_positions.push(token_ids.len());
        token_ids.push(id);
        segment_ids.push(1);
    }
    token_ids.extend([x2, eos]);
    segment_ids.extend([1, 1]);
    Ok(RewriterInput {
        context: context.to_vec(),
        decision: decision.to_owned(),
        token_ids,
        segment_ids,
        context_positions,
        decision_positions,
    })
}

/// Per context token: 1 when its surface form appears in the gold rewrite
/// but not in the decision utterance.
pub fn derive_picker_labels(input: &RewriterInput, gold_rewrite: &str, vocab: &Vocab) -> Vec<u8> {
    let rewrite: HashSet<String> = vocab.surfaces(gold_rewrite).into_iter().collect();
    let decision: HashSet<String> = vocab.surfaces(&input.decision).into_iter().collect();
    input
        .context
        .iter()
        .flat_map(|u| vocab.surfaces(u))
        .map(|s| u8::from(rewrite.contains(&s) && !decision.contains(&s)))
        .collect()
}

/// A training sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteExample {
    pub id: String,
    pub input: RewriterInput,
    pub gold_rewrite: String,
    /// Target ids, without start or end markers.
    pub target_ids: Vec<u32>,
    pub picker_labels: Vec<u8>,
}

impl RewriteExample {
    pub fn new(
        id: impl Into<String>,
        context: &[String],
        decision: &str,
        gold_rewrite: &str,
        budget: usize,
        vocab: &Vocab,
    ) -> Result<Self> {
        let id = id.into();
        let target_ids = vocab.encode(gold_rewrite);
        if target_ids.is_empty() {
            return Err(Error::Validation(format!("sample {id}: gold rewrite is empty")));
        }
        let refs: Vec<&str> = context.iter().map(String::as_str).collect();
        let context = super::context::select_context(&refs, budget, vocab)?;
        let input = assemble_rewriter_input(&context, decision, vocab)?;
        let picker_labels = derive_picker_labels(&input, gold_rewrite, vocab);
        debug_assert_eq!(picker_labels.len(), input.context_token_count());
        Ok(RewriteExample {
            id,
            input,
            gold_rewrite: gold_rewrite.to_owned(),
            target_ids,
            picker_labels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocab {
        Vocab::build("t", ["a b c sapporo we check it there at"], 1, true)
    }

    fn count(ids: &[u32], id: u32) -> usize {
        ids.iter().filter(|&&x| x == id).count()
    }

    #[test]
    fn single_context_layout() {
        let v = vocab();
        let inp = assemble_rewriter_input(&["a".into()], "b", &v).unwrap();
        let expect = vec![
            v.id("a").unwrap(),
            v.special(SpecialToken::X1).unwrap(),
            v.id("b").unwrap(),
            v.special(SpecialToken::X2).unwrap(),
            v.special(SpecialToken::Eos).unwrap(),
        ];
        assert_eq!(inp.token_ids, expect);
        assert_eq!(inp.segment_ids, vec![0, 0, 1, 1, 1]);
        assert_eq!(inp.context_positions, vec![0]);
        assert_eq!(inp.decision_positions, vec![2]);
    }

    #[test]
    fn empty_context_has_no_x1() {
        let v = vocab();
        let inp = assemble_rewriter_input(&[], "b c", &v).unwrap();
        assert_eq!(count(&inp.token_ids, v.special(SpecialToken::X1).unwrap()), 0);
        assert_eq!(inp.token_ids.len(), 4);
    }

    #[test]
    fn one_x1_per_context_utterance() {
        let v = vocab();
        let ctx: Vec<String> = vec!["a".into(), "b c".into(), "a".into()];
        let inp = assemble_rewriter_input(&ctx, "c", &v).unwrap();
        assert_eq!(count(&inp.token_ids, v.special(SpecialToken::X1).unwrap()), 3);
        assert_eq!(count(&inp.token_ids, v.special(SpecialToken::X2).unwrap()), 1);
        assert_eq!(*inp.token_ids.last().unwrap(), v.special(SpecialToken::Eos).unwrap());
    }

    #[test]
    fn empty_decision_rejected() {
        assert!(assemble_rewriter_input(&[], "  ", &vocab()).is_err());
    }

    #[test]
    fn unregistered_specials_are_a_setup_error() {
        let file = crate::text::VocabFile {
            name: "bare".into(),
            lowercase: true,
            tokens: vec!["[PAD]".into(), "[UNK]".into(), "a".into()],
        };
        let v = Vocab::from_file(file).unwrap();
        assert!(matches!(assemble_rewriter_input(&[], "a", &v), Err(Error::Setup(_))));
    }

    #[test]
    fn picker_labels_follow_restoration_rule() {
        let v = vocab();
        let ctx = vec!["sapporo a".into(), "check it".into()];
        let inp = assemble_rewriter_input(&ctx, "we check it there", &v).unwrap();
        let labels = derive_picker_labels(&inp, "we check it at sapporo", &v);
        assert_eq!(labels, vec![1, 0, 0, 0]);
        let none = derive_picker_labels(&inp, "we check it there", &v);
        assert!(none.iter().all(|&l| l == 0));
    }
}
