//! Tooling for OCR post-correction research on historical text.
//!
//! The crate learns character-confusion profiles from small parallel
//! (OCR output, gold) corpora, replays them into clean text to build large
//! synthetic training corpora, scores correctors with character- and
//! word-level measures, and tunes trainable correctors with a cost-ordered
//! greedy hyperparameter search.
//!
//! Module map:
//!
//! * [`text`]: corpus loading, normalization, character frequencies, splits.
//! * [`align`]: Levenshtein distance, global alignment, word attribution.
//! * [`error_model`]: confusion profiles, error taxonomy, noise injection.
//! * [`metrics`]: Acc_Char, WER, CER and McNemar's test.
//! * [`corrector`]: the trainable-corrector contract and a noisy-channel model.
//! * [`optimizer`]: greedy and exhaustive hyperparameter search.

pub mod align;
pub mod corrector;
pub mod error;
pub mod error_model;
pub mod metrics;
pub mod optimizer;
pub mod text;

pub use error::{Error, Result};
