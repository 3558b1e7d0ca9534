//! Meeting decision tracking.
//!
//! Turns meeting transcripts into itemized, self-contained decision lists:
//!
//! 1. [`detector`] tags decision-related utterances with a windowed
//!    utterance-level sequence labeler.
//! 2. [`rewriter`] restores omitted context into each tagged utterance and
//!    converts it to written form with a jointly trained picker and writer.
//! 3. [`service`] stores meetings and decision items and serves them over
//!    HTTP for review.
//!
//! [`metrics`] scores rewrites (ROUGE, BLEU, restoration f-scores) and
//! aggregates human score sheets; [`augment`] back-translates positive
//! detector windows.

pub mod augment;
pub mod corpus;
pub mod detector;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod rewriter;
#[cfg(feature = "server")]
pub mod service;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
