//! Correction quality measures and significance testing.
//!
//! All corpus-level figures are micro-averaged: distances and counts are
//! summed over lines before dividing.

use std::fmt::Write as _;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::align::{align, levenshtein, word_align_counts, CharAlignmentCounts, DelimiterSet, WordAlignmentCounts};
use crate::text::Corpus;
use crate::{Error, Result};

fn ensure_parallel(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::structural(format!("{what}: unit count mismatch {a}≠{b}")));
    }
    Ok(())
}

fn map_lines<S, T, F>(gold: &[S], other: &[S], f: F) -> Vec<T>
where
    S: AsRef<str> + Sync,
    T: Send,
    F: Fn(&str, &str) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        gold.par_iter()
            .zip(other.par_iter())
            .map(|(g, o)| f(g.as_ref(), o.as_ref()))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        gold.iter().zip(other).map(|(g, o)| f(g.as_ref(), o.as_ref())).collect()
    }
}

/// Share of the OCR errors a corrector removed, in percent.
///
/// `(lev(GS, OCRed) - lev(GS, Fixed)) / lev(GS, OCRed) * 100` when the
/// corrector did not add more errors than it fixed, 0 otherwise. With no
/// OCR errors at all the score is 100 if the output is still perfect and 0
/// if it is not.
pub fn acc_char_from_distances(lev_ocred: usize, lev_fixed: usize) -> f64 {
    if lev_ocred == 0 {
        return if lev_fixed == 0 { 100.0 } else { 0.0 };
    }
    if lev_ocred >= lev_fixed {
        (lev_ocred - lev_fixed) as f64 / lev_ocred as f64 * 100.0
    } else {
        0.0
    }
}

/// Distances `(Σ lev(GS, OCRed), Σ lev(GS, Fixed))` over parallel texts.
pub fn acc_char_distances<S: AsRef<str> + Sync>(gs: &[S], ocred: &[S], fixed: &[S]) -> Result<(usize, usize)> {
    ensure_parallel("acc_char (gold vs ocred)", gs.len(), ocred.len())?;
    ensure_parallel("acc_char (gold vs fixed)", gs.len(), fixed.len())?;
    let lev_ocred: usize = map_lines(gs, ocred, levenshtein).into_iter().sum();
    let lev_fixed: usize = map_lines(gs, fixed, levenshtein).into_iter().sum();
    Ok((lev_ocred, lev_fixed))
}

/// Corpus-level Acc_Char over parallel texts.
pub fn acc_char<S: AsRef<str> + Sync>(gs: &[S], ocred: &[S], fixed: &[S]) -> Result<f64> {
    let (o, f) = acc_char_distances(gs, ocred, fixed)?;
    Ok(acc_char_from_distances(o, f))
}

/// Summed word-level counts over parallel texts.
pub fn word_counts<S: AsRef<str> + Sync>(
    gold: &[S],
    hypothesis: &[S],
    delimiters: &DelimiterSet,
) -> Result<WordAlignmentCounts> {
    ensure_parallel("wer", gold.len(), hypothesis.len())?;
    Ok(
        map_lines(gold, hypothesis, |g, h| word_align_counts(&align(g, h), delimiters))
            .into_iter()
            .sum(),
    )
}

/// Summed character-level counts over parallel texts.
pub fn char_counts<S: AsRef<str> + Sync>(gold: &[S], hypothesis: &[S]) -> Result<CharAlignmentCounts> {
    ensure_parallel("cer", gold.len(), hypothesis.len())?;
    Ok(map_lines(gold, hypothesis, |g, h| align(g, h).char_counts())
        .into_iter()
        .sum())
}

/// Word error rate `(I_w + S_w + D_w) / N_w`.
pub fn wer<S: AsRef<str> + Sync>(gold: &[S], hypothesis: &[S], delimiters: &DelimiterSet) -> Result<f64> {
    word_counts(gold, hypothesis, delimiters)?
        .error_rate()
        .ok_or_else(|| Error::structural("WER undefined: gold text has no words"))
}

/// Character error rate `(I + S + D) / N` over characters.
pub fn cer<S: AsRef<str> + Sync>(gold: &[S], hypothesis: &[S]) -> Result<f64> {
    char_counts(gold, hypothesis)?
        .error_rate()
        .ok_or_else(|| Error::structural("CER undefined: gold text is empty"))
}

/// CER of a corpus's noisy side against its gold side.
pub fn raw_cer(corpus: &Corpus) -> Result<f64> {
    cer(&corpus.gold_lines(), &corpus.noisy_lines())
}

/// Fraction of hypothesis lines exactly equal to gold.
pub fn validation_accuracy<S: AsRef<str>>(gold: &[S], hypothesis: &[S]) -> Result<f64> {
    ensure_parallel("validation accuracy", gold.len(), hypothesis.len())?;
    if gold.is_empty() {
        return Err(Error::structural("validation accuracy of an empty corpus"));
    }
    let exact = gold
        .iter()
        .zip(hypothesis)
        .filter(|(g, h)| g.as_ref() == h.as_ref())
        .count();
    Ok(exact as f64 / gold.len() as f64)
}

/// McNemar's test on the discordant counts of two paired classifiers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McNemarResult {
    /// Continuity-corrected statistic `(|b - c| - 1)² / (b + c)`.
    pub chi_square: f64,
    /// Upper tail of the chi-square distribution with one degree of freedom.
    pub p_value: f64,
    /// Exact two-sided binomial p-value, reported when `b + c < 25`.
    pub exact_p_value: Option<f64>,
    /// Pairs where A is right and B is wrong.
    pub b: u64,
    /// Pairs where A is wrong and B is right.
    pub c: u64,
}

pub fn mcnemar(b: u64, c: u64) -> Result<McNemarResult> {
    let n = b + c;
    if n == 0 {
        return Err(Error::structural("McNemar test needs at least one discordant pair"));
    }
    let diff = b.abs_diff(c) as f64;
    let chi_square = (diff - 1.0).powi(2) / n as f64;
    let p_value = ChiSquared::new(1.0)
        .expect("one degree of freedom")
        .sf(chi_square)
        .clamp(0.0, 1.0);
    let exact_p_value = (n < 25).then(|| {
        // two-sided binomial(n, 1/2) tail at min(b, c)
        let k = b.min(c);
        let mut term = 0.5f64.powi(n as i32);
        let mut tail = 0.0;
        for i in 0..=k {
            tail += term;
            term *= (n - i) as f64 / (i + 1) as f64;
        }
        (2.0 * tail).min(1.0)
    });
    Ok(McNemarResult {
        chi_square,
        p_value,
        exact_p_value,
        b,
        c,
    })
}

/// Discordant counts `(b, c)` from per-line correctness of two systems.
pub fn discordant_counts(a_correct: &[bool], b_correct: &[bool]) -> Result<(u64, u64)> {
    ensure_parallel("mcnemar", a_correct.len(), b_correct.len())?;
    let mut counts = (0, 0);
    for (&a, &b) in a_correct.iter().zip(b_correct) {
        match (a, b) {
            (true, false) => counts.0 += 1,
            (false, true) => counts.1 += 1,
            _ => {}
        }
    }
    Ok(counts)
}

/// The full evaluation of one corrector on a test corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionEval {
    /// Percent of OCR character errors removed, in `[0, 100]`.
    pub acc_char: f64,
    pub wer: f64,
    pub cer: f64,
    pub word_counts: WordAlignmentCounts,
    pub char_counts: CharAlignmentCounts,
}

pub const REPORT_COLUMNS: [&str; 3] = [
    "Character-based Accuracy Increase (in %)",
    "1-WER (in %)",
    "1-CER (in %)",
];

impl CorrectionEval {
    pub fn one_minus_wer_percent(&self) -> f64 {
        (1.0 - self.wer) * 100.0
    }

    pub fn one_minus_cer_percent(&self) -> f64 {
        (1.0 - self.cer) * 100.0
    }

    /// Header plus one row, tab separated, followed by the raw counts.
    pub fn to_tsv(&self, label: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "system\t{}\t{}\t{}\tN_w\tS_w\tI_w\tD_w\tN_c\tS_c\tI_c\tD_c",
            REPORT_COLUMNS[0], REPORT_COLUMNS[1], REPORT_COLUMNS[2]
        );
        let (w, c) = (self.word_counts, self.char_counts);
        let _ = writeln!(
            out,
            "{label}\t{:.2}\t{:.2}\t{:.2}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.acc_char,
            self.one_minus_wer_percent(),
            self.one_minus_cer_percent(),
            w.reference,
            w.substituted,
            w.inserted,
            w.deleted,
            c.reference,
            c.substituted,
            c.inserted,
            c.deleted
        );
        out
    }

    /// Human-readable table with the same three headline columns.
    pub fn to_table(&self, label: &str) -> String {
        let widths = [
            label.len().max(6),
            REPORT_COLUMNS[0].len(),
            REPORT_COLUMNS[1].len(),
            REPORT_COLUMNS[2].len(),
        ];
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<w0$} | {} | {} | {}",
            "system",
            REPORT_COLUMNS[0],
            REPORT_COLUMNS[1],
            REPORT_COLUMNS[2],
            w0 = widths[0]
        );
        let _ = writeln!(
            out,
            "{}-+-{}-+-{}-+-{}",
            "-".repeat(widths[0]),
            "-".repeat(widths[1]),
            "-".repeat(widths[2]),
            "-".repeat(widths[3])
        );
        let _ = writeln!(
            out,
            "{:<w0$} | {:>w1$.2} | {:>w2$.2} | {:>w3$.2}",
            label,
            self.acc_char,
            self.one_minus_wer_percent(),
            self.one_minus_cer_percent(),
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3]
        );
        out
    }
}

/// Scores corrected text against gold and the original OCR output.
pub fn evaluate_corrector<S: AsRef<str> + Sync>(
    gs: &[S],
    ocred: &[S],
    fixed: &[S],
    delimiters: &DelimiterSet,
) -> Result<CorrectionEval> {
    let (lev_ocred, lev_fixed) = acc_char_distances(gs, ocred, fixed)?;
    let word_counts = word_counts(gs, fixed, delimiters)?;
    let char_counts = char_counts(gs, fixed)?;
    Ok(CorrectionEval {
        acc_char: acc_char_from_distances(lev_ocred, lev_fixed),
        wer: word_counts
            .error_rate()
            .ok_or_else(|| Error::structural("WER undefined: gold text has no words"))?,
        cer: char_counts
            .error_rate()
            .ok_or_else(|| Error::structural("CER undefined: gold text is empty"))?,
        word_counts,
        char_counts,
    })
}
