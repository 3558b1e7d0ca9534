use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::config::{RewriterConfig, RewriterMode};
use super::input::RewriteExample;
use super::model::{PointerGenerator, Seq2SeqBackend};
use super::record::RewriteRecord;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalReport, EvalSample};
use crate::nn::Ctx;
use crate::text::{Vocab, WhitespaceTokenizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriterEpochLog {
    pub epoch: usize,
    pub generation_loss: f64,
    /// Absent in writer-only mode.
    pub picker_loss: Option<f64>,
    pub total_loss: f64,
    pub validation_rouge1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriterTrainingLog {
    pub mode: RewriterMode,
    pub epochs: Vec<RewriterEpochLog>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub parameters: usize,
}

pub struct TrainedRewriter {
    pub model: PointerGenerator,
    pub log: RewriterTrainingLog,
}

/// Word vocabulary over contexts, decisions and rewrites.
pub fn build_vocab(records: &[RewriteRecord], min_freq: usize) -> Vocab {
    let texts = records.iter().flat_map(|r| {
        r.context
            .iter()
            .map(String::as_str)
            .chain([r.decision.as_str(), r.gold_rewrite.as_str()])
    });
    Vocab::build("word", texts, min_freq, true)
}

pub fn examples(records: &[RewriteRecord], vocab: &Vocab, config: &RewriterConfig) -> Result<Vec<RewriteExample>> {
    records
        .iter()
        .map(|r| {
            RewriteExample::new(
                r.id.clone(),
                &r.context,
                &r.decision,
                &r.gold_rewrite,
                config.context_budget_tokens,
                vocab,
            )
        })
        .collect()
}

/// Decodes every example and scores it against its gold rewrite.
pub fn evaluate_examples(
    model: &dyn Seq2SeqBackend,
    examples: &[RewriteExample],
    config: &RewriterConfig,
) -> Result<EvalReport> {
    let samples = examples
        .iter()
        .map(|e| {
            let ids = model.generate(&e.input, config.beam_width, config.max_output_tokens)?;
            Ok(EvalSample {
                id: e.id.clone(),
                prediction: model.vocab().decode(&ids, true),
                reference: e.gold_rewrite.clone(),
                original: e.input.decision.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate(&samples, &WhitespaceTokenizer)
}

/// Builds a vocabulary from `train`, then trains a fresh model.
pub fn train_rewriter(
    train: &[RewriteRecord],
    validation: &[RewriteRecord],
    config: &RewriterConfig,
    mode: RewriterMode,
) -> Result<TrainedRewriter> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    let vocab = build_vocab(train, config.model.vocab_min_freq);
    let train_ex = examples(train, &vocab, config)?;
    let val_ex = examples(validation, &vocab, config)?;
    let mut model = PointerGenerator::new(vocab, config, mode)?;
    let log = fit(&mut model, &train_ex, &val_ex, config)?;
    Ok(TrainedRewriter { model, log })
}

/// Trains with AdamW and keeps the epoch with the best validation ROUGE-1
/// (the last epoch when there is no validation set).
pub fn fit(
    model: &mut PointerGenerator,
    train: &[RewriteExample],
    validation: &[RewriteExample],
    config: &RewriterConfig,
) -> Result<RewriterTrainingLog> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    let mode = model.mode();
    let mut opt = AdamW::new(
        model.params().vars(),
        ParamsAdamW {
            lr: config.learning_rate,
            weight_decay: config.weight_decay,
            ..Default::default()
        },
    )?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = StdRng::seed_from_u64(config.seed);
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Vec<candle_core::Tensor>)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut ctx = Ctx::train(config.seed.wrapping_mul(1_000_003).wrapping_add(epoch as u64));
        let (mut gen_sum, mut pick_sum, mut total_sum, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&RewriteExample> = chunk.iter().map(|&i| &train[i]).collect();
            let parts = model.losses(&batch, &mut ctx)?;
            let loss = match (&parts.picker, mode) {
                (Some(p), RewriterMode::JointPickerWriter) => (&parts.generation + (p * config.picker_loss_weight)?)?,
                _ => parts.generation.clone(),
            };
            opt.backward_step(&loss)?;
            gen_sum += parts.generation.to_scalar::<f32>()? as f64;
            if let Some(p) = &parts.picker {
                pick_sum += p.to_scalar::<f32>()? as f64;
            }
            total_sum += loss.to_scalar::<f32>()? as f64;
            batches += 1;
        }
        let n = batches.max(1) as f64;
        let validation_rouge1 = if validation.is_empty() {
            None
        } else {
            Some(evaluate_examples(&*model, validation, config)?.rouge1)
        };
        let entry = RewriterEpochLog {
            epoch,
            generation_loss: gen_sum / n,
            picker_loss: (mode == RewriterMode::JointPickerWriter).then_some(pick_sum / n),
            total_loss: total_sum / n,
            validation_rouge1,
        };
        tracing::info!(epoch, loss = entry.total_loss, val_rouge1 = ?validation_rouge1, "rewriter epoch");
        let score = validation_rouge1.unwrap_or(epoch as f64);
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, epoch, model.snapshot()?));
        }
        epochs.push(entry);
    }
    let (_, best_epoch, snapshot) = best.ok_or_else(|| Error::config("epochs must be ≥ 1"))?;
    model.restore(&snapshot)?;
    Ok(RewriterTrainingLog {
        mode,
        epochs,
        best_epoch,
        parameters: model.params().count(),
    })
}
