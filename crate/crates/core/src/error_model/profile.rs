use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::classify::{error_events, ErrorType};
use crate::align::{align, EditOp};
use crate::text::Corpus;
use crate::{Error, Result};

/// The eight most frequent OCR confusions measured on 19th and 20th
/// century Hebrew newspaper scans, as `(ocr output, gold, share of all
/// substitutions)`.
///
/// The sixth row pairs final mem with itself; it is kept verbatim and
/// dropped by [`ErrorProfile::from_rows`] like any other degenerate row.
pub const HEBREW_NEWSPAPER_CONFUSIONS: [(char, char, f64); 8] = [
    ('ח', 'ה', 0.0817),
    ('ד', 'ר', 0.0501),
    ('ג', 'נ', 0.0419),
    ('ב', 'כ', 0.0344),
    ('\'', ',', 0.0339),
    ('ם', 'ם', 0.0318),
    ('ח', 'ת', 0.0265),
    ('ל', '\'', 0.0265),
];

/// One learned confusion: OCR produced `error_char` where the gold text has
/// `correct_char`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionEntry {
    pub error_char: char,
    pub correct_char: char,
    /// Share of all observed substitutions, in `(0, 1]`.
    pub probability: f64,
}

/// A period-specific error profile, sorted by descending probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProfile {
    entries: Vec<ConfusionEntry>,
    pub total_substitutions_observed: u64,
    pub source_label: String,
}

fn sort_entries(entries: &mut [ConfusionEntry]) {
    entries.sort_by(|a, b| {
        b.probability
            .total_cmp(&a.probability)
            .then(a.correct_char.cmp(&b.correct_char))
            .then(a.error_char.cmp(&b.error_char))
    });
}

impl ErrorProfile {
    pub fn empty(source_label: impl Into<String>) -> Self {
        ErrorProfile {
            entries: Vec::new(),
            total_substitutions_observed: 0,
            source_label: source_label.into(),
        }
    }

    /// Builds a profile from `(error, correct, probability)` rows.
    ///
    /// Rows whose two characters are equal cannot describe a confusion; they
    /// are skipped with a warning. Probabilities outside `(0, 1]` and
    /// duplicate pairs are errors.
    pub fn from_rows<I>(rows: I, total: u64, source_label: impl Into<String>) -> Result<Self>
    where
        I: IntoIterator<Item = (char, char, f64)>,
    {
        let mut seen = std::collections::HashSet::new();
        let mut entries = Vec::new();
        for (error_char, correct_char, probability) in rows {
            if error_char == correct_char {
                log::warn!("skipping degenerate confusion row {error_char:?} -> {correct_char:?}");
                continue;
            }
            if !(probability > 0.0 && probability <= 1.0) {
                return Err(Error::structural(format!(
                    "confusion {error_char:?}/{correct_char:?}: probability {probability} outside (0, 1]"
                )));
            }
            if !seen.insert((error_char, correct_char)) {
                return Err(Error::structural(format!(
                    "duplicate confusion {error_char:?}/{correct_char:?}"
                )));
            }
            entries.push(ConfusionEntry {
                error_char,
                correct_char,
                probability,
            });
        }
        sort_entries(&mut entries);
        Ok(ErrorProfile {
            entries,
            total_substitutions_observed: total,
            source_label: source_label.into(),
        })
    }

    /// The built-in Hebrew newspaper profile (seven usable rows).
    pub fn hebrew_newspapers() -> Self {
        Self::from_rows(HEBREW_NEWSPAPER_CONFUSIONS, 0, "hebrew-newspapers").expect("built-in rows are valid")
    }

    pub fn entries(&self) -> &[ConfusionEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, error_char: char, correct_char: char) -> Option<&ConfusionEntry> {
        self.entries
            .iter()
            .find(|e| e.error_char == error_char && e.correct_char == correct_char)
    }

    /// Observed count behind an entry, recovered from its probability.
    pub fn count(&self, entry: &ConfusionEntry) -> u64 {
        (entry.probability * self.total_substitutions_observed as f64).round() as u64
    }

    /// Serializes as `error_char<TAB>correct_char<TAB>probability` rows,
    /// preceded by `#` comment lines carrying the label and the total.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# source: {}", self.source_label);
        let _ = writeln!(out, "# total_substitutions: {}", self.total_substitutions_observed);
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}\t{}", e.error_char, e.correct_char, e.probability);
        }
        out
    }

    pub fn from_tsv(text: &str, source_label: impl Into<String>) -> Result<Self> {
        let mut source_label = source_label.into();
        let mut total = 0;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(v) = comment.strip_prefix("total_substitutions:") {
                    total = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::structural(format!("line {}: bad total '{}'", lineno + 1, v.trim())))?;
                } else if let Some(v) = comment.strip_prefix("source:") {
                    source_label = v.trim().to_string();
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let bad = || {
                Error::structural(format!(
                    "line {}: expected error<TAB>correct<TAB>probability",
                    lineno + 1
                ))
            };
            let cols: Vec<&str> = line.split('\t').collect();
            let [e, c, p] = cols[..] else { return Err(bad()) };
            let single = |s: &str| {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(ch), None) => Ok(ch),
                    _ => Err(bad()),
                }
            };
            let probability: f64 = p.trim().parse().map_err(|_| bad())?;
            rows.push((single(e)?, single(c)?, probability));
        }
        Self::from_rows(rows, total, source_label)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_tsv(&text, label)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

fn pair_confusions(gold: &str, noisy: &str) -> Vec<(char, char)> {
    let al = align(gold, noisy);
    error_events(&al)
        .into_iter()
        .filter(|ev| ev.kind == ErrorType::CharReplacement)
        .filter_map(|ev| match al.ops[ev.ops.start] {
            EditOp::Substitute { gold, other } => Some((other, gold)),
            _ => None,
        })
        .collect()
}

/// Learns a confusion profile from a parallel corpus.
///
/// Each pair is aligned at unit cost and every character replacement
/// `gold g → noisy e` adds one observation of `(e, g)`. Crossed substitution
/// pairs are transpositions, not confusions, and are not counted. The
/// probability of a pair is its share of all counted replacements.
pub fn extract_confusions(corpus: &Corpus) -> Result<ErrorProfile> {
    corpus.ensure_non_empty()?;
    #[cfg(feature = "parallel")]
    let per_pair: Vec<Vec<(char, char)>> = corpus
        .pairs()
        .par_iter()
        .map(|p| pair_confusions(&p.gold, &p.noisy))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let per_pair: Vec<Vec<(char, char)>> = corpus.iter().map(|p| pair_confusions(&p.gold, &p.noisy)).collect();

    let mut counts: BTreeMap<(char, char), u64> = BTreeMap::new();
    for pair in per_pair.into_iter().flatten() {
        *counts.entry(pair).or_default() += 1;
    }
    let total: u64 = counts.values().sum();
    let mut entries: Vec<ConfusionEntry> = counts
        .into_iter()
        .map(|((error_char, correct_char), n)| ConfusionEntry {
            error_char,
            correct_char,
            probability: n as f64 / total as f64,
        })
        .collect();
    sort_entries(&mut entries);
    Ok(ErrorProfile {
        entries,
        total_substitutions_observed: total,
        source_label: corpus.name.clone(),
    })
}
