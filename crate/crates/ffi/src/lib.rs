//! C ABI over the transcript parser, window builder and evaluation metrics.
//!
//! Every fallible call returns an [`MdtStatus`]; on failure the message is
//! available from [`mdt_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Strings are
//! NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mdt_core::corpus::{cohen_kappa, parse_transcript, DecisionTag, Meeting, MeetingMeta, TranscriptFormat};
use mdt_core::detector::build_windows;
use mdt_core::metrics::{
    aggregate_scores, bleu, restoration_f, rouge_n, BleuSmoothing, Criterion, CriterionSummary, ScoreSheet, BLEU_MAX_N,
};
use mdt_core::text::{ScriptRunTokenizer, Tokenizer, WhitespaceTokenizer};
use mdt_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    EmptyTranscript = 4,
    ContractViolation = 5,
    ValidationError = 6,
    ConfigError = 7,
    OutOfRange = 8,
    Internal = 9,
    Panic = 10,
}

/// Word splitter used by the metric functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdtTokenizer {
    Whitespace = 0,
    /// Script-boundary splitter for Japanese text.
    ScriptRun = 1,
}

/// Human-evaluation criterion.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdtCriterion {
    TextFlow = 0,
    Understandability = 1,
    Effectiveness = 2,
}

/// Aggregate of one criterion. `histogram[k]` counts score `k + 1`; bins
/// past the criterion's maximum score are zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MdtCriterionSummary {
    pub count: usize,
    pub mean: f64,
    pub share_at_most_2: f64,
    pub share_at_least_4: f64,
    pub histogram: [usize; 5],
}

/// Parsed meeting transcript.
pub struct MdtMeeting {
    meeting: Meeting,
}

/// Validated human-evaluation score sheet.
pub struct MdtScoreSheet {
    summaries: Vec<CriterionSummary>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(MdtStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } => MdtStatus::ParseError,
            Error::EmptyTranscript => MdtStatus::EmptyTranscript,
            Error::Contract(_) => MdtStatus::ContractViolation,
            Error::Validation(_) | Error::Csv(_) => MdtStatus::ValidationError,
            Error::Config(_) => MdtStatus::ConfigError,
            _ => MdtStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MdtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MdtStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside mdt".into());
            MdtStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(MdtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(MdtStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn tokenizer(t: MdtTokenizer) -> &'static dyn Tokenizer {
    match t {
        MdtTokenizer::Whitespace => &WhitespaceTokenizer,
        MdtTokenizer::ScriptRun => &ScriptRunTokenizer,
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mdt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mdt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a JSONL transcript (`{"speaker", "text", "id"?}` per line).
///
/// # Safety
/// `jsonl` and `meeting_id` must be valid NUL-terminated strings; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn mdt_meeting_parse_jsonl(
    jsonl: *const c_char,
    meeting_id: *const c_char,
    out_meeting: *mut *mut MdtMeeting,
) -> MdtStatus {
    guard(|| {
        let data = text(jsonl, "jsonl")?;
        let id = text(meeting_id, "meeting_id")?;
        let slot = out(out_meeting, "out_meeting")?;
        let meeting = parse_transcript(data.as_bytes(), TranscriptFormat::Jsonl, MeetingMeta::new(id))?;
        *slot = Box::into_raw(Box::new(MdtMeeting { meeting }));
        Ok(())
    })
}

/// Number of utterances; 0 for a null handle.
///
/// # Safety
/// `meeting` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mdt_meeting_len(meeting: *const MdtMeeting) -> usize {
    meeting.as_ref().map_or(0, |m| m.meeting.len())
}

/// Utterance indices of the window of `window_size` slots targeting
/// utterance `target`. PAD slots are written as -1. `out_indices` must hold
/// `window_size` entries.
///
/// # Safety
/// `meeting` must be a live handle and `out_indices` must point to
/// `window_size` writable `int64_t`.
#[no_mangle]
pub unsafe extern "C" fn mdt_meeting_window(
    meeting: *const MdtMeeting,
    target: usize,
    window_size: usize,
    out_indices: *mut i64,
) -> MdtStatus {
    guard(|| {
        let m = meeting.as_ref().ok_or_else(|| null("meeting"))?;
        if out_indices.is_null() {
            return Err(null("out_indices"));
        }
        if target >= m.meeting.len() {
            return Err(Failure(
                MdtStatus::OutOfRange,
                format!("target {target} outside 0..{}", m.meeting.len()),
            ));
        }
        let windows = build_windows(&m.meeting, None, window_size, 1)?;
        let dst = std::slice::from_raw_parts_mut(out_indices, window_size);
        for (d, s) in dst.iter_mut().zip(&windows[target].slots) {
            *d = s.utterance_index.map_or(-1, |i| i as i64);
        }
        Ok(())
    })
}

/// # Safety
/// `meeting` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mdt_meeting_free(meeting: *mut MdtMeeting) {
    if !meeting.is_null() {
        drop(Box::from_raw(meeting));
    }
}

/// ROUGE-N F-measure, `n` in 1..=2.
///
/// # Safety
/// String arguments must be valid NUL-terminated strings; `out_score` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn mdt_rouge_n(
    prediction: *const c_char,
    reference: *const c_char,
    n: usize,
    tok: MdtTokenizer,
    out_score: *mut f64,
) -> MdtStatus {
    guard(|| {
        let p = text(prediction, "prediction")?;
        let r = text(reference, "reference")?;
        let o = out(out_score, "out_score")?;
        *o = rouge_n(p, r, n, tokenizer(tok))?;
        Ok(())
    })
}

/// Sentence BLEU up to 4-grams with add-one smoothing for n ≥ 2.
///
/// # Safety
/// As [`mdt_rouge_n`].
#[no_mangle]
pub unsafe extern "C" fn mdt_bleu(
    prediction: *const c_char,
    reference: *const c_char,
    tok: MdtTokenizer,
    out_score: *mut f64,
) -> MdtStatus {
    guard(|| {
        let p = text(prediction, "prediction")?;
        let r = text(reference, "reference")?;
        let o = out(out_score, "out_score")?;
        *o = bleu(p, r, tokenizer(tok), BLEU_MAX_N, BleuSmoothing::AddOne)?;
        Ok(())
    })
}

/// Restoration F-measure over n-grams absent from the original utterance.
/// When the reference restores nothing, `*out_skipped` is set and
/// `*out_score` is 0.
///
/// # Safety
/// As [`mdt_rouge_n`]; `out_skipped` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mdt_restoration_f(
    prediction: *const c_char,
    reference: *const c_char,
    original: *const c_char,
    n: usize,
    tok: MdtTokenizer,
    out_score: *mut f64,
    out_skipped: *mut bool,
) -> MdtStatus {
    guard(|| {
        let p = text(prediction, "prediction")?;
        let r = text(reference, "reference")?;
        let orig = text(original, "original")?;
        let o = out(out_score, "out_score")?;
        let skipped = out(out_skipped, "out_skipped")?;
        let f = restoration_f(p, r, orig, n, tokenizer(tok))?;
        *skipped = f.is_none();
        *o = f.unwrap_or(0.0);
        Ok(())
    })
}

/// Cohen's kappa between two binary label sequences (non-zero means TD).
///
/// # Safety
/// `a` and `b` must each point to `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn mdt_cohen_kappa(a: *const u8, b: *const u8, len: usize, out_kappa: *mut f64) -> MdtStatus {
    guard(|| {
        if a.is_null() || b.is_null() {
            return Err(null("label array"));
        }
        let o = out(out_kappa, "out_kappa")?;
        let tags = |p: *const u8| -> Vec<DecisionTag> {
            std::slice::from_raw_parts(p, len)
                .iter()
                .map(|v| DecisionTag::from_bool(*v != 0))
                .collect()
        };
        *o = cohen_kappa(&tags(a), &tags(b))?;
        Ok(())
    })
}

/// Parses a `sample_id,evaluator_id,criterion,score` CSV sheet.
///
/// # Safety
/// `csv` must be a valid NUL-terminated string; `out_sheet` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mdt_score_sheet_parse_csv(
    csv: *const c_char,
    out_sheet: *mut *mut MdtScoreSheet,
) -> MdtStatus {
    guard(|| {
        let data = text(csv, "csv")?;
        let slot = out(out_sheet, "out_sheet")?;
        let sheet = ScoreSheet::from_csv(data.as_bytes())?;
        let summaries = aggregate_scores(&sheet)?;
        *slot = Box::into_raw(Box::new(MdtScoreSheet { summaries }));
        Ok(())
    })
}

/// Summary of one criterion. Fails with `OutOfRange` when the sheet has no
/// scores for it.
///
/// # Safety
/// `sheet` must be a live handle and `out_summary` writable.
#[no_mangle]
pub unsafe extern "C" fn mdt_score_sheet_summary(
    sheet: *const MdtScoreSheet,
    criterion: MdtCriterion,
    out_summary: *mut MdtCriterionSummary,
) -> MdtStatus {
    guard(|| {
        let s = sheet.as_ref().ok_or_else(|| null("sheet"))?;
        let o = out(out_summary, "out_summary")?;
        let c = match criterion {
            MdtCriterion::TextFlow => Criterion::TextFlow,
            MdtCriterion::Understandability => Criterion::Understandability,
            MdtCriterion::Effectiveness => Criterion::Effectiveness,
        };
        let sum = s
            .summaries
            .iter()
            .find(|x| x.criterion == c)
            .ok_or_else(|| Failure(MdtStatus::OutOfRange, format!("no {c:?} scores in sheet")))?;
        let mut histogram = [0; 5];
        histogram[..sum.histogram.len()].copy_from_slice(&sum.histogram);
        *o = MdtCriterionSummary {
            count: sum.count,
            mean: sum.mean,
            share_at_most_2: sum.share_at_most_2,
            share_at_least_4: sum.share_at_least_4,
            histogram,
        };
        Ok(())
    })
}

/// # Safety
/// `sheet` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mdt_score_sheet_free(sheet: *mut MdtScoreSheet) {
    if !sheet.is_null() {
        drop(Box::from_raw(sheet));
    }
}
