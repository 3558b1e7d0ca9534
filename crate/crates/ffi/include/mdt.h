#ifndef MDT_H
#define MDT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum MdtStatus {
  MDT_STATUS_OK = 0,
  MDT_STATUS_NULL_POINTER = 1,
  MDT_STATUS_INVALID_UTF8 = 2,
  MDT_STATUS_PARSE_ERROR = 3,
  MDT_STATUS_EMPTY_TRANSCRIPT = 4,
  MDT_STATUS_CONTRACT_VIOLATION = 5,
  MDT_STATUS_VALIDATION_ERROR = 6,
  MDT_STATUS_CONFIG_ERROR = 7,
  MDT_STATUS_OUT_OF_RANGE = 8,
  MDT_STATUS_INTERNAL = 9,
  MDT_STATUS_PANIC = 10,
} MdtStatus;

// Word splitter used by the metric functions.
typedef enum MdtTokenizer {
  MDT_TOKENIZER_WHITESPACE = 0,
  // Script-boundary splitter for Japanese text.
  MDT_TOKENIZER_SCRIPT_RUN = 1,
} MdtTokenizer;

// Human-evaluation criterion.
typedef enum MdtCriterion {
  MDT_CRITERION_TEXT_FLOW = 0,
  MDT_CRITERION_UNDERSTANDABILITY = 1,
  MDT_CRITERION_EFFECTIVENESS = 2,
} MdtCriterion;

// Parsed meeting transcript.
typedef struct MdtMeeting MdtMeeting;

// Validated human-evaluation score sheet.
typedef struct MdtScoreSheet MdtScoreSheet;

// Aggregate of one criterion. `histogram[k]` counts score `k + 1`; bins
// past the criterion's maximum score are zero.
typedef struct MdtCriterionSummary {
  size_t count;
  double mean;
  double share_at_most_2;
  double share_at_least_4;
  size_t histogram[5];
} MdtCriterionSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *mdt_last_error_message(void);

// Library version as a static string.
const char *mdt_version(void);

// Parses a JSONL transcript (`{"speaker", "text", "id"?}` per line).
//
// # Safety
// `jsonl` and `meeting_id` must be valid NUL-terminated strings; `out` must
// be writable.
enum MdtStatus mdt_meeting_parse_jsonl(const char *jsonl,
                                       const char *meeting_id,
                                       struct MdtMeeting **out_meeting);

// Number of utterances; 0 for a null handle.
//
// # Safety
// `meeting` must be null or a live handle.
size_t mdt_meeting_len(const struct MdtMeeting *meeting);

// Utterance indices of the window of `window_size` slots targeting
// utterance `target`. PAD slots are written as -1. `out_indices` must hold
// `window_size` entries.
//
// # Safety
// `meeting` must be a live handle and `out_indices` must point to
// `window_size` writable `int64_t`.
enum MdtStatus mdt_meeting_window(const struct MdtMeeting *meeting,
                                  size_t target,
                                  size_t window_size,
                                  int64_t *out_indices);

// # Safety
// `meeting` must be null or a handle not yet freed.
void mdt_meeting_free(struct MdtMeeting *meeting);

// ROUGE-N F-measure, `n` in 1..=2.
//
// # Safety
// String arguments must be valid NUL-terminated strings; `out_score` must be
// writable.
enum MdtStatus mdt_rouge_n(const char *prediction,
                           const char *reference,
                           size_t n,
                           enum MdtTokenizer tok,
                           double *out_score);

// Sentence BLEU up to 4-grams with add-one smoothing for n ≥ 2.
//
// # Safety
// As [`mdt_rouge_n`].
enum MdtStatus mdt_bleu(const char *prediction,
                        const char *reference,
                        enum MdtTokenizer tok,
                        double *out_score);

// Restoration F-measure over n-grams absent from the original utterance.
// When the reference restores nothing, `*out_skipped` is set and
// `*out_score` is 0.
//
// # Safety
// As [`mdt_rouge_n`]; `out_skipped` must be writable.
enum MdtStatus mdt_restoration_f(const char *prediction,
                                 const char *reference,
                                 const char *original,
                                 size_t n,
                                 enum MdtTokenizer tok,
                                 double *out_score,
                                 bool *out_skipped);

// Cohen's kappa between two binary label sequences (non-zero means TD).
//
// # Safety
// `a` and `b` must each point to `len` readable bytes.
enum MdtStatus mdt_cohen_kappa(const uint8_t *a, const uint8_t *b, size_t len, double *out_kappa);

// Parses a `sample_id,evaluator_id,criterion,score` CSV sheet.
//
// # Safety
// `csv` must be a valid NUL-terminated string; `out_sheet` must be writable.
enum MdtStatus mdt_score_sheet_parse_csv(const char *csv, struct MdtScoreSheet **out_sheet);

// Summary of one criterion. Fails with `OutOfRange` when the sheet has no
// scores for it.
//
// # Safety
// `sheet` must be a live handle and `out_summary` writable.
enum MdtStatus mdt_score_sheet_summary(const struct MdtScoreSheet *sheet,
                                       enum MdtCriterion criterion,
                                       struct MdtCriterionSummary *out_summary);

// # Safety
// `sheet` must be null or a handle not yet freed.
void mdt_score_sheet_free(struct MdtScoreSheet *sheet);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MDT_H */
