use candle_core::{Tensor, D};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::config::{DetectorConfig, DetectorMode};
use super::eval::{tag_counts, DetectionScores, TagCounts};
use super::model::DetectorModel;
use super::predict::predict_tags;
use super::window::Window;
use crate::corpus::{DecisionTag, LabeledMeeting};
use crate::error::{Error, Result};
use crate::nn::Ctx;
use crate::text::Vocab;

/// Backend and head weights.
type Snapshot = (Vec<Tensor>, Vec<Tensor>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation: Option<DetectionScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub positive_weight: f64,
    pub parameters: usize,
}

pub struct TrainedDetector {
    pub model: DetectorModel,
    pub log: TrainingLog,
}

/// Builds a vocabulary from the training windows, then trains a fresh model.
pub fn train_detector(
    train: &[Window],
    validation: &[LabeledMeeting],
    config: &DetectorConfig,
) -> Result<TrainedDetector> {
    config.validate()?;
    let texts = train.iter().flat_map(|w| w.slots.iter().map(|s| s.text.as_str()));
    let vocab = Vocab::build("word", texts, config.encoder.vocab_min_freq, true);
    let model = DetectorModel::new(vocab, config)?;
    let log = fit(&model, train, validation, config)?;
    Ok(TrainedDetector { model, log })
}

/// Supervision for one window: (label, weight) per prediction row.
fn targets(window: &Window, mode: DetectorMode) -> Vec<Option<DecisionTag>> {
    match mode {
        DetectorMode::SequenceLabeling => window
            .slots
            .iter()
            .map(|s| if s.is_pad() { None } else { s.tag })
            .collect(),
        DetectorMode::SentenceClassification => vec![window.target_tag()],
    }
}

/// Validation scores pooled over meetings.
pub fn evaluate_meetings(
    model: &DetectorModel,
    meetings: &[LabeledMeeting],
    config: &DetectorConfig,
) -> Result<DetectionScores> {
    let mut counts = TagCounts::default();
    for m in meetings {
        let predicted = predict_tags(&m.meeting, model, config)?;
        counts.add(tag_counts(&predicted, &m.labels)?);
    }
    Ok(counts.scores())
}

/// Trains `model` in place with AdamW and keeps the best-validation-F1 epoch.
///
/// SL mode supervises every non-PAD slot of each window; SC mode only the
/// target. The TD class is up-weighted by `config.positive_weight`, or by the
/// negative/positive ratio when unset.
pub fn fit(
    model: &DetectorModel,
    train: &[Window],
    validation: &[LabeledMeeting],
    config: &DetectorConfig,
) -> Result<TrainingLog> {
    config.validate()?;
    let meta = model.meta();
    if meta.window_size != config.window_size || meta.mode != config.mode {
        return Err(Error::contract(format!(
            "model built for w = {} in {} mode cannot train with w = {} in {} mode",
            meta.window_size, meta.mode, config.window_size, config.mode
        )));
    }
    if train.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    for w in train {
        w.validate()?;
    }
    if !train.iter().any(Window::is_positive) {
        return Err(Error::NoPositiveClass);
    }
    for m in validation {
        m.validate()?;
    }

    let inputs = train.iter().map(|w| model.assemble(w)).collect::<Result<Vec<_>>>()?;
    let supervision: Vec<Vec<Option<DecisionTag>>> = train.iter().map(|w| targets(w, config.mode)).collect();
    let (pos, neg) = supervision.iter().flatten().flatten().fold((0usize, 0usize), |(p, n), t| {
        if t.is_decision() {
            (p + 1, n)
        } else {
            (p, n + 1)
        }
    });
    let positive_weight = config
        .positive_weight
        .unwrap_or_else(|| if pos == 0 { 1.0 } else { (neg as f64 / pos as f64).max(1.0) });

    let mut opt = AdamW::new(
        model.trainable(),
        ParamsAdamW {
            lr: config.learning_rate,
            weight_decay: config.weight_decay,
            ..Default::default()
        },
    )?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = StdRng::seed_from_u64(config.seed);
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Snapshot)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut ctx = Ctx::train(config.seed.wrapping_mul(1_000_003).wrapping_add(epoch as u64));
        let (mut loss_sum, mut loss_batches) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let mut labels = Vec::new();
            let mut weights = Vec::new();
            for &i in batch {
                for t in &supervision[i] {
                    labels.push(u32::from(t.is_some_and(DecisionTag::is_decision)));
                    weights.push(match t {
                        None => 0f32,
                        Some(DecisionTag::Td) => positive_weight as f32,
                        Some(DecisionTag::NonTd) => 1.0,
                    });
                }
            }
            let weight_sum: f32 = weights.iter().sum();
            if weight_sum == 0.0 {
                continue;
            }
            let batch_inputs: Vec<_> = batch.iter().map(|&i| inputs[i].clone()).collect();
            let logits = model.logits(&batch_inputs, &mut ctx)?;
            let rows = labels.len();
            let logp = candle_nn::ops::log_softmax(&logits, D::Minus1)?;
            let labels = Tensor::from_vec(labels, (rows, 1), logits.device())?;
            let nll = logp.gather(&labels, 1)?.squeeze(1)?.neg()?;
            let weights = Tensor::from_vec(weights, rows, logits.device())?;
            let loss = ((nll * weights)?.sum_all()? / weight_sum as f64)?;
            opt.backward_step(&loss)?;
            loss_sum += loss.to_scalar::<f32>()? as f64;
            loss_batches += 1;
        }
        let train_loss = loss_sum / loss_batches.max(1) as f64;
        let val = if validation.is_empty() {
            None
        } else {
            Some(evaluate_meetings(model, validation, config)?)
        };
        tracing::info!(epoch, train_loss, val_f1 = val.map(|v| v.f1), "detector epoch");
        let score = val.map_or(epoch as f64, |v| v.f1);
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, epoch, model.snapshot()?));
        }
        epochs.push(EpochLog {
            epoch,
            train_loss,
            validation: val,
        });
    }

    let (_, best_epoch, snapshot) = best.expect("at least one epoch");
    model.restore(&snapshot)?;
    Ok(TrainingLog {
        epochs,
        best_epoch,
        positive_weight,
        parameters: model.trainable().iter().map(|v| v.as_tensor().elem_count()).sum(),
    })
}
