//! Corpus ingestion, line normalization, character frequencies and
//! deterministic train/validation splitting.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unicode_normalization::UnicodeNormalization;

use crate::{Error, Result};

/// Normalizes one line of text.
///
/// Tabs and stray line-break characters become a single space, the result is
/// put in Unicode canonical composition (NFC) and trailing whitespace is
/// stripped. Composition matters for Hebrew: niqqud and other combining marks
/// otherwise split one visible glyph across several alignment columns.
pub fn normalize_line(line: &str) -> String {
    let mapped: String = line
        .chars()
        .map(|c| match c {
            '\t' | '\r' | '\n' | '\u{0B}' | '\u{0C}' | '\u{85}' | '\u{2028}' | '\u{2029}' => ' ',
            c => c,
        })
        .nfc()
        .collect();
    let trimmed_len = mapped.trim_end().len();
    let mut mapped = mapped;
    mapped.truncate(trimmed_len);
    mapped
}

/// One aligned unit of work: an OCR (or injected) line and its gold version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub id: usize,
    pub noisy: String,
    pub gold: String,
}

/// An ordered list of sentence pairs with dense ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pairs: Vec<SentencePair>,
}

impl Corpus {
    /// Builds a corpus from `(noisy, gold)` tuples, normalizing both sides and
    /// numbering pairs from zero.
    pub fn from_pairs<I, A, B>(name: impl Into<String>, pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let pairs = pairs
            .into_iter()
            .enumerate()
            .map(|(id, (noisy, gold))| SentencePair {
                id,
                noisy: normalize_line(noisy.as_ref()),
                gold: normalize_line(gold.as_ref()),
            })
            .collect();
        Corpus {
            name: name.into(),
            pairs,
        }
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SentencePair> {
        self.pairs.iter()
    }

    pub fn noisy_lines(&self) -> Vec<&str> {
        self.pairs.iter().map(|p| p.noisy.as_str()).collect()
    }

    pub fn gold_lines(&self) -> Vec<&str> {
        self.pairs.iter().map(|p| p.gold.as_str()).collect()
    }

    /// Fails with a structural error when the corpus has no pairs.
    pub fn ensure_non_empty(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::structural(format!("corpus '{}' is empty", self.name)));
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a SentencePair;
    type IntoIter = std::slice::Iter<'a, SentencePair>;

    fn into_iter(self) -> Self::IntoIter {
        self.pairs.iter()
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn read_all_lines(path: &Path) -> Result<Vec<String>> {
    open(path)?.lines().map(|l| l.map_err(|e| Error::io(path, e))).collect()
}

/// Pairs line `i` of `noisy_path` with line `i` of `gold_path`.
pub fn load_parallel_corpus(noisy_path: &Path, gold_path: &Path) -> Result<Corpus> {
    let noisy = read_all_lines(noisy_path)?;
    let gold = read_all_lines(gold_path)?;
    if noisy.len() != gold.len() {
        return Err(Error::structural(format!(
            "line count mismatch {}≠{} ({} vs {})",
            noisy.len(),
            gold.len(),
            noisy_path.display(),
            gold_path.display()
        )));
    }
    let name = gold_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Corpus::from_pairs(name, noisy.into_iter().zip(gold)))
}

/// Loads a single-file parallel corpus with `noisy<TAB>gold` per line.
pub fn load_tsv_corpus(path: &Path) -> Result<Corpus> {
    let mut pairs = Vec::new();
    for (i, line) in read_all_lines(path)?.into_iter().enumerate() {
        let mut cols = line.split('\t');
        match (cols.next(), cols.next(), cols.next()) {
            (Some(noisy), Some(gold), None) => pairs.push((noisy.to_string(), gold.to_string())),
            _ => {
                return Err(Error::structural(format!(
                    "{}:{}: expected exactly two tab-separated columns",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Corpus::from_pairs(name, pairs))
}

/// Streaming iterator over the non-blank normalized lines of a plain corpus.
pub struct PlainLines<R> {
    path: PathBuf,
    lines: Lines<R>,
}

impl<R: BufRead> PlainLines<R> {
    pub fn new(path: impl Into<PathBuf>, reader: R) -> Self {
        PlainLines {
            path: path.into(),
            lines: reader.lines(),
        }
    }
}

impl<R: BufRead> Iterator for PlainLines<R> {
    type Item = Result<String>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            match self.lines.next()? {
                Err(e) => return Some(Err(Error::io(&self.path, e))),
                Ok(raw) => {
                    let line = normalize_line(&raw);
                    if !line.trim().is_empty() {
                        return Some(Ok(line));
                    }
                }
            }
        }
    }
}

/// Opens a plain corpus for streaming; nothing beyond the current line is
/// held in memory.
pub fn plain_lines(path: &Path) -> Result<PlainLines<BufReader<File>>> {
    Ok(PlainLines::new(path, open(path)?))
}

/// Reads a plain (gold-only) corpus, dropping blank lines.
pub fn load_plain_corpus(path: &Path) -> Result<Vec<String>> {
    let lines = plain_lines(path)?.collect::<Result<Vec<_>>>()?;
    if lines.is_empty() {
        return Err(Error::structural(format!(
            "{}: corpus has no non-empty lines",
            path.display()
        )));
    }
    Ok(lines)
}

/// Relative frequency of every non-whitespace character in a reference text.
#[derive(Debug, Clone, PartialEq)]
pub struct CharFrequencyTable {
    // sorted by character
    entries: Vec<(char, f64)>,
}

impl CharFrequencyTable {
    /// Counts characters across `lines`, skipping whitespace.
    pub fn build<I, S>(lines: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts = CharCounts::default();
        for line in lines {
            counts.add_line(line.as_ref());
        }
        counts.into_table()
    }

    /// Builds a table from explicit weights. Non-positive weights are dropped;
    /// the rest are normalized to sum to one.
    pub fn from_weights<I: IntoIterator<Item = (char, f64)>>(weights: I) -> Result<Self> {
        let mut merged: BTreeMap<char, f64> = BTreeMap::new();
        for (c, w) in weights {
            if w > 0.0 && w.is_finite() && !c.is_whitespace() {
                *merged.entry(c).or_default() += w;
            }
        }
        let total: f64 = merged.values().sum();
        if merged.is_empty() || total <= 0.0 {
            return Err(Error::structural("no countable characters"));
        }
        Ok(CharFrequencyTable {
            entries: merged.into_iter().map(|(c, w)| (c, w / total)).collect(),
        })
    }

    pub fn entries(&self) -> &[(char, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn frequency(&self, c: char) -> Option<f64> {
        self.entries
            .binary_search_by(|(k, _)| k.cmp(&c))
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn min_frequency(&self) -> f64 {
        self.entries.iter().map(|&(_, f)| f).fold(f64::INFINITY, f64::min)
    }
}

/// Incremental character counter, for building frequency tables over
/// streamed corpora.
#[derive(Debug, Default, Clone)]
pub struct CharCounts {
    counts: BTreeMap<char, u64>,
}

impl CharCounts {
    pub fn add_line(&mut self, line: &str) {
        for c in line.chars().filter(|c| !c.is_whitespace()) {
            *self.counts.entry(c).or_default() += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn into_table(self) -> Result<CharFrequencyTable> {
        let total = self.total();
        if total == 0 {
            return Err(Error::structural("no countable characters"));
        }
        Ok(CharFrequencyTable {
            entries: self
                .counts
                .into_iter()
                .map(|(c, n)| (c, n as f64 / total as f64))
                .collect(),
        })
    }
}

/// Splits a corpus into train and validation parts.
///
/// The train part receives `round(train_fraction * N)` pairs chosen by a
/// seeded shuffle; both parts keep the original relative order and are
/// renumbered from zero.
pub fn split_train_valid(corpus: &Corpus, train_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::argument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    corpus.ensure_non_empty()?;
    let n = corpus.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_train = vec![false; n];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let pick = |want: bool| {
        corpus
            .iter()
            .zip(&in_train)
            .filter(|(_, &t)| t == want)
            .map(|(p, _)| (p.noisy.as_str(), p.gold.as_str()))
            .collect::<Vec<_>>()
    };
    Ok((
        Corpus::from_pairs(format!("{}.train", corpus.name), pick(true)),
        Corpus::from_pairs(format!("{}.valid", corpus.name), pick(false)),
    ))
}
