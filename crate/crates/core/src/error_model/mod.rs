//! Learning, classifying and replaying OCR character errors.
//!
//! A confusion [`ErrorProfile`] is learned from a small parallel corpus by
//! aligning every OCR line with its gold line. The profile then drives
//! [`inject_corpus`], which corrupts clean text with generic deletions,
//! insertions and swaps plus the profile's period-specific substitutions.

mod classify;
mod inject;
mod profile;
mod sweep;

pub use classify::{classify_errors, error_events, ErrorEvent, ErrorType, ErrorTypeHistogram};
pub use inject::{
    inject_corpus, inject_line, inject_lines, line_rng, InjectedLine, InjectionEvents, InjectionStats, NoiseConfig,
    RandomStream,
};
pub use profile::{extract_confusions, ConfusionEntry, ErrorProfile, HEBREW_NEWSPAPER_CONFUSIONS};
pub use sweep::{noise_sweep, NoiseSweep, SweepRow};
