//! Storage and HTTP API for processed meetings.
//!
//! Uploads are parsed and stored; processing runs the detector and rewriter
//! in the background and swaps in the new decision items in one
//! transaction, so readers see either the previous run or the new one.

mod api;
mod job;
mod store;

pub use api::{router, serve, ApiError, AppState, TranscriptView, UploadResponse};
pub use job::{JobState, ProcessingJob, StageTimings};
pub use store::{Inserted, MeetingSummary, Store};
