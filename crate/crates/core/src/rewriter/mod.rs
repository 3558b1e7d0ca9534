//! Decision-utterance rewriting.
//!
//! A decision utterance and the turns before it (within a token budget) are
//! serialized as `u1 [X1] … u_{n-1} [X1] u_n [X2] </s>` and rewritten by an
//! encoder-decoder. In joint mode a picker head on the shared encoder learns
//! which context tokens the rewrite restores, and the decoder's copy
//! distribution is biased toward them.

mod config;
mod context;
mod input;
mod model;
mod record;
mod rewrite;
mod train;

pub use config::{RewriterConfig, RewriterMode, Seq2SeqSettings};
pub use context::{assemble_context, select_context};
pub use input::{assemble_rewriter_input, derive_picker_labels, RewriteExample, RewriterInput};
pub use model::{EchoBackend, LossParts, PointerGenerator, RewriterMeta, Seq2SeqBackend};
pub use record::{read_records, write_records, RewriteRecord};
pub use rewrite::rewrite;
pub use train::{
    build_vocab, evaluate_examples, examples, fit, train_rewriter, RewriterEpochLog, RewriterTrainingLog,
    TrainedRewriter,
};
