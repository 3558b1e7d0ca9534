//! Transcript data model, ingestion, meeting-level splits and annotator agreement.

mod dir;
mod kappa;
mod split;
mod transcript;
mod types;

pub use dir::{partition, read_corpus_dir, write_corpus_dir};
pub use kappa::cohen_kappa;
pub use split::{split_by_meeting, DEFAULT_SPLIT_RATIOS};
pub use transcript::{
    parse_labels, parse_transcript, write_labels, write_transcript, MeetingMeta, TranscriptFormat,
};
pub use types::{
    DatasetSplit, DecisionItem, DecisionLabel, DecisionTag, LabelSource, LabeledMeeting, Meeting, MeetingStatus,
    ModelVersions, Utterance,
};
