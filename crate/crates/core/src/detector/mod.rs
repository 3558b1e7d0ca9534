//! Windowed decision-utterance detection.
//!
//! Each utterance is classified inside a window of `w` consecutive
//! utterances where it sits second from the back, so the model sees `w − 2`
//! preceding turns and the following reply. The encoder input is
//! `[CLS] u1 [SEP] … uw [SEP]`; the SL head reads every `[SEP]` vector and
//! the SC head reads `[CLS]`.

mod backend;
mod config;
mod eval;
mod input;
mod model;
mod predict;
mod train;
mod window;

pub use backend::{EncoderBackend, TransformerBackend, TransformerSettings};
pub use config::{DetectorConfig, DetectorMode, EncoderSettings};
pub use eval::{detector_eval, tag_counts, DetectionScores, TagCounts};
pub use input::{assemble_detector_input, DetectorInput, TruncationRecord};
pub use model::{ConstantScorer, DetectorMeta, DetectorModel, WindowScorer};
pub use predict::predict_tags;
pub use train::{evaluate_meetings, fit, train_detector, EpochLog, TrainedDetector, TrainingLog};
pub use window::{build_windows, Window, WindowSlot};
