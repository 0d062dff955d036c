//! Abstention-aware ASR evaluation.
//!
//! Hypotheses may contain a placeholder token (`<ph>`) where the recognizer
//! declined to transcribe. Such hypotheses are aligned against a reference
//! with a placeholder-aware weighted edit distance, and the alignment gives a
//! reliability-aware score (RAS). The placeholder cost `alpha` can be fitted
//! to pairwise human preferences.
//!
//! The guide in `book/` walks through each module.
//!
//! ```
//! use ras_core::{score_utterance, Alpha, WordSeq};
//!
//! let reference = WordSeq::parse("the cat sat on the mat");
//! let hypothesis = WordSeq::parse("the cat <ph> the mat");
//! let s = score_utterance(&reference, &hypothesis, Alpha::default()).unwrap();
//! // the placeholder covers "sat on" at 0.5064 per word
//! assert_eq!(s.matches, 4);
//! assert!((s.ras - (4.0 - 2.0 * 0.5064) / 6.0).abs() < 1e-12);
//! ```

pub mod alignment;
pub mod calibration;
pub mod corpus;
pub mod fixed;
pub mod metric;
pub mod ph;
pub mod reward;
pub mod synth;
pub mod text;

pub use alignment::{
    weighted_edit_distance, weighted_edit_distance_fast, wer_align, AlignError, AlignOp, AlignmentResult,
    Alpha, WeightedCost, WerCounts, DEFAULT_ALPHA,
};
pub use calibration::{fit_alpha, preference_loss, CalibrationResult, PreferenceRecord};
pub use corpus::{build_report, load_corpus, EvalReport, UtteranceRecord};
pub use fixed::Fixed6;
pub use metric::{score_corpus, score_utterance, CorpusSummary, RasScore};
pub use ph::{gt_guided_replace, logit_replace, sweep_bar, ConfidentHyp, CountTable, WordCount};
pub use reward::{group_advantages, score_batch};
pub use text::{normalize_hypothesis, Symbol, TokenizeMode, Tokenizer, WordSeq, PH_SURFACE};

// Keeps the guide's snippets compiling and passing.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/alignment.md")]
    mod alignment {}
    #[doc = include_str!("../../../book/src/ras.md")]
    mod ras {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/placeholders.md")]
    mod placeholders {}
    #[doc = include_str!("../../../book/src/rewards.md")]
    mod rewards {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
