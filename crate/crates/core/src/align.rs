//! Character-level edit distance and global (Needleman-Wunsch) alignment.
//!
//! Alignments are always oriented from a *gold* line to an *other* line
//! (OCR output, injected noise or a corrector's hypothesis): `Delete` removes
//! a gold character, `Insert` adds a character only present in the other
//! line.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::AddAssign;

use crate::{Error, Result};

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let next = (diag + usize::from(ca != cb)).min(row[j] + 1).min(row[j + 1] + 1);
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}

/// One column of an alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditOp {
    Match(char),
    Substitute {
        gold: char,
        other: char,
    },
    /// A character present only in the other line.
    Insert(char),
    /// A gold character missing from the other line.
    Delete(char),
}

impl EditOp {
    pub fn gold_char(&self) -> Option<char> {
        match *self {
            EditOp::Match(c) | EditOp::Delete(c) => Some(c),
            EditOp::Substitute { gold, .. } => Some(gold),
            EditOp::Insert(_) => None,
        }
    }

    pub fn other_char(&self) -> Option<char> {
        match *self {
            EditOp::Match(c) | EditOp::Insert(c) => Some(c),
            EditOp::Substitute { other, .. } => Some(other),
            EditOp::Delete(_) => None,
        }
    }

    pub fn is_match(&self) -> bool {
        matches!(self, EditOp::Match(_))
    }
}

/// Integer weights for global alignment. Higher scores are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scoring {
    pub match_score: i32,
    pub mismatch: i32,
    pub gap: i32,
}

impl Scoring {
    /// Match 0, mismatch -1, gap -1: the optimal score is minus the
    /// Levenshtein distance, so every optimal alignment is a minimal edit
    /// script.
    pub const fn unit_cost() -> Self {
        Scoring {
            match_score: 0,
            mismatch: -1,
            gap: -1,
        }
    }

    /// The textbook similarity weights (+1/-1/-1). Optimal alignments under
    /// these weights may use more edits than the Levenshtein distance.
    pub const fn similarity() -> Self {
        Scoring {
            match_score: 1,
            mismatch: -1,
            gap: -1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mismatch >= self.match_score || self.gap >= self.match_score {
            return Err(Error::argument(format!(
                "degenerate scoring: match {} must exceed mismatch {} and gap {}",
                self.match_score, self.mismatch, self.gap
            )));
        }
        Ok(())
    }

    fn pair(&self, a: char, b: char) -> i32 {
        if a == b {
            self.match_score
        } else {
            self.mismatch
        }
    }
}

impl Default for Scoring {
    fn default() -> Self {
        Scoring::unit_cost()
    }
}

/// An edit script from a gold line to another line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub ops: Vec<EditOp>,
    pub score: i64,
}

impl Alignment {
    /// Number of non-match columns.
    pub fn edit_count(&self) -> usize {
        self.ops.iter().filter(|op| !op.is_match()).count()
    }

    pub fn gold(&self) -> String {
        self.ops.iter().filter_map(EditOp::gold_char).collect()
    }

    pub fn other(&self) -> String {
        self.ops.iter().filter_map(EditOp::other_char).collect()
    }

    /// Replays the script over `gold`, returning the other line.
    ///
    /// Fails if `gold` disagrees with the gold characters the script expects.
    pub fn apply(&self, gold: &str) -> Result<String> {
        let mut src = gold.chars();
        let mut out = String::with_capacity(gold.len());
        for op in &self.ops {
            if let Some(expected) = op.gold_char() {
                match src.next() {
                    Some(c) if c == expected => {}
                    got => {
                        return Err(Error::structural(format!(
                            "edit script expects {expected:?}, found {got:?}"
                        )))
                    }
                }
            }
            if let Some(c) = op.other_char() {
                out.push(c);
            }
        }
        if src.next().is_some() {
            return Err(Error::structural("edit script ends before the gold line"));
        }
        Ok(out)
    }

    /// Counts substitutions, insertions and deletions at character level.
    pub fn char_counts(&self) -> EditCounts {
        let mut counts = EditCounts::default();
        for op in &self.ops {
            match op {
                EditOp::Match(_) => {}
                EditOp::Substitute { .. } => counts.substituted += 1,
                EditOp::Insert(_) => counts.inserted += 1,
                EditOp::Delete(_) => counts.deleted += 1,
            }
            if op.gold_char().is_some() {
                counts.reference += 1;
            }
        }
        counts
    }

    /// Serializes the script as space-separated `M`, `S:g:o`, `I:o` and
    /// `D:g` tokens. `:` `\` and space inside characters are escaped as
    /// `\:` `\\` and `\s`.
    pub fn to_compact(&self) -> String {
        let mut out = String::new();
        for (i, op) in self.ops.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            match *op {
                EditOp::Match(_) => out.push('M'),
                EditOp::Substitute { gold, other } => {
                    out.push_str("S:");
                    push_escaped(&mut out, gold);
                    out.push(':');
                    push_escaped(&mut out, other);
                }
                EditOp::Insert(c) => {
                    out.push_str("I:");
                    push_escaped(&mut out, c);
                }
                EditOp::Delete(c) => {
                    out.push_str("D:");
                    push_escaped(&mut out, c);
                }
            }
        }
        out
    }

    /// Parses the compact form back into ops. `M` tokens carry no character,
    /// so the gold line is needed to recover them.
    pub fn from_compact(compact: &str, gold: &str) -> Result<Alignment> {
        let mut gold_chars = gold.chars();
        let mut ops = Vec::new();
        for token in compact.split(' ').filter(|t| !t.is_empty()) {
            let bad = || Error::structural(format!("malformed edit token '{token}'"));
            let (kind, rest) = match token.split_once(':') {
                Some((k, r)) => (k, Some(r)),
                None => (token, None),
            };
            let op = match (kind, rest) {
                ("M", None) => EditOp::Match(gold_chars.next().ok_or_else(bad)?),
                ("S", Some(rest)) => {
                    let chars = unescape_fields(rest).ok_or_else(bad)?;
                    let [g, o] = chars[..] else { return Err(bad()) };
                    gold_chars.next().filter(|&c| c == g).ok_or_else(bad)?;
                    EditOp::Substitute { gold: g, other: o }
                }
                ("I", Some(rest)) => match unescape_fields(rest).as_deref() {
                    Some(&[o]) => EditOp::Insert(o),
                    _ => return Err(bad()),
                },
                ("D", Some(rest)) => match unescape_fields(rest).as_deref() {
                    Some(&[g]) => {
                        gold_chars.next().filter(|&c| c == g).ok_or_else(bad)?;
                        EditOp::Delete(g)
                    }
                    _ => return Err(bad()),
                },
                _ => return Err(bad()),
            };
            ops.push(op);
        }
        if gold_chars.next().is_some() {
            return Err(Error::structural("edit script shorter than gold line"));
        }
        let score = -(ops.iter().filter(|op| !op.is_match()).count() as i64);
        Ok(Alignment { ops, score })
    }
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_compact())
    }
}

fn push_escaped(out: &mut String, c: char) {
    match c {
        ':' => out.push_str("\\:"),
        '\\' => out.push_str("\\\\"),
        ' ' => out.push_str("\\s"),
        c => out.push(c),
    }
}

/// Splits `a:b` (escaped) into single characters.
fn unescape_fields(s: &str) -> Option<Vec<char>> {
    let mut fields = Vec::new();
    let mut current: Option<char> = None;
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        let decoded = match c {
            ':' => {
                fields.push(current.take()?);
                continue;
            }
            '\\' => match chars.next()? {
                ':' => ':',
                '\\' => '\\',
                's' => ' ',
                _ => return None,
            },
            c => c,
        };
        if current.replace(decoded).is_some() {
            return None;
        }
    }
    fields.push(current?);
    Some(fields)
}

/// Optimal global alignment score in linear space.
pub fn needleman_wunsch_score(gold: &str, other: &str, scoring: Scoring) -> Result<i64> {
    scoring.validate()?;
    let b: Vec<char> = other.chars().collect();
    let gap = i64::from(scoring.gap);
    let mut row: Vec<i64> = (0..=b.len() as i64).map(|j| j * gap).collect();
    for (i, ca) in gold.chars().enumerate() {
        let mut diag = row[0];
        row[0] = (i as i64 + 1) * gap;
        for (j, &cb) in b.iter().enumerate() {
            let next = (diag + i64::from(scoring.pair(ca, cb)))
                .max(row[j + 1] + gap)
                .max(row[j] + gap);
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    Ok(row[b.len()])
}

/// Globally optimal alignment of `gold` against `other`.
///
/// Traceback runs from the end of both lines and, among equally scored
/// moves, prefers the diagonal (match/substitute), then a deletion, then an
/// insertion.
pub fn needleman_wunsch(gold: &str, other: &str, scoring: Scoring) -> Result<Alignment> {
    scoring.validate()?;
    Ok(align_unchecked(gold, other, scoring))
}

/// Unit-cost alignment; the edit count equals the Levenshtein distance.
pub fn align(gold: &str, other: &str) -> Alignment {
    align_unchecked(gold, other, Scoring::unit_cost())
}

fn align_unchecked(gold: &str, other: &str, scoring: Scoring) -> Alignment {
    let a: Vec<char> = gold.chars().collect();
    let b: Vec<char> = other.chars().collect();
    let (n, m) = (a.len(), b.len());
    let width = m + 1;
    let gap = i64::from(scoring.gap);
    let mut table = vec![0i64; (n + 1) * width];
    for j in 0..=m {
        table[j] = j as i64 * gap;
    }
    for i in 1..=n {
        table[i * width] = i as i64 * gap;
        for j in 1..=m {
            let diag = table[(i - 1) * width + j - 1] + i64::from(scoring.pair(a[i - 1], b[j - 1]));
            let up = table[(i - 1) * width + j] + gap;
            let left = table[i * width + j - 1] + gap;
            table[i * width + j] = diag.max(up).max(left);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = table[i * width + j];
        if i > 0 && j > 0 && here == table[(i - 1) * width + j - 1] + i64::from(scoring.pair(a[i - 1], b[j - 1])) {
            ops.push(if a[i - 1] == b[j - 1] {
                EditOp::Match(a[i - 1])
            } else {
                EditOp::Substitute {
                    gold: a[i - 1],
                    other: b[j - 1],
                }
            });
            i -= 1;
            j -= 1;
        } else if i > 0 && here == table[(i - 1) * width + j] + gap {
            ops.push(EditOp::Delete(a[i - 1]));
            i -= 1;
        } else {
            ops.push(EditOp::Insert(b[j - 1]));
            j -= 1;
        }
    }
    ops.reverse();
    Alignment {
        ops,
        score: table[n * width + m],
    }
}

/// Characters that separate words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelimiterSet(BTreeSet<char>);

impl DelimiterSet {
    pub fn new<I: IntoIterator<Item = char>>(chars: I) -> Result<Self> {
        let set: BTreeSet<char> = chars.into_iter().collect();
        if set.is_empty() {
            return Err(Error::argument("delimiter set is empty"));
        }
        Ok(DelimiterSet(set))
    }

    /// Parses an explicit character list such as `" .,;"`.
    pub fn parse(list: &str) -> Result<Self> {
        Self::new(list.chars())
    }

    pub fn contains(&self, c: char) -> bool {
        self.0.contains(&c)
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.0.iter().copied()
    }

    /// Splits a line into its words.
    pub fn words<'a>(&'a self, line: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        line.split(move |c| self.contains(c)).filter(|w| !w.is_empty())
    }
}

impl Default for DelimiterSet {
    /// Space, tab and `. , : ; ! ? ' " ( )`.
    fn default() -> Self {
        DelimiterSet(" \t.,:;!?'\"()".chars().collect())
    }
}

/// Reference length and error counts of one aligned text, at word or
/// character granularity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EditCounts {
    /// Units (words or characters) in the reference text.
    pub reference: usize,
    pub substituted: usize,
    pub inserted: usize,
    pub deleted: usize,
}

/// Word-level counts `N_w`, `S_w`, `I_w`, `D_w`.
pub type WordAlignmentCounts = EditCounts;
/// Character-level counts.
pub type CharAlignmentCounts = EditCounts;

impl EditCounts {
    pub fn errors(&self) -> usize {
        self.substituted + self.inserted + self.deleted
    }

    /// `(S + I + D) / N`, or `None` for an empty reference.
    pub fn error_rate(&self) -> Option<f64> {
        (self.reference > 0).then(|| self.errors() as f64 / self.reference as f64)
    }
}

impl AddAssign for EditCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.reference += rhs.reference;
        self.substituted += rhs.substituted;
        self.inserted += rhs.inserted;
        self.deleted += rhs.deleted;
    }
}

impl std::iter::Sum for EditCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(EditCounts::default(), |mut acc, c| {
            acc += c;
            acc
        })
    }
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Attributes the character alignment to words.
///
/// Gold and other words that share an aligned column form a group. A group
/// of exactly one gold and one other word with only matching columns is
/// correct. Any other group with `g` gold and `o` other words contributes
/// `min(g, o)` substitutions plus `g - o` deletions or `o - g` insertions, so
/// a deleted space that merges two gold words costs one substitution and one
/// deletion. Gold words with no aligned counterpart are deletions, other
/// words with none are insertions. An error column touching only delimiters
/// (an extra or missing space, say) marks the nearest preceding gold word as
/// wrong, or the following one at the start of the line, unless it borders
/// a wholly inserted or deleted word.
pub fn word_align_counts(alignment: &Alignment, delimiters: &DelimiterSet) -> WordAlignmentCounts {
    let is_word = |c: Option<char>| c.filter(|&c| !delimiters.contains(c));

    // word index per column on each side
    let mut gold_word = Vec::with_capacity(alignment.ops.len());
    let mut other_word = Vec::with_capacity(alignment.ops.len());
    let (mut n_gold, mut n_other) = (0usize, 0usize);
    let (mut in_gold, mut in_other) = (false, false);
    for op in &alignment.ops {
        gold_word.push(match op.gold_char() {
            Some(c) if !delimiters.contains(c) => {
                if !in_gold {
                    in_gold = true;
                    n_gold += 1;
                }
                Some(n_gold - 1)
            }
            Some(_) => {
                in_gold = false;
                None
            }
            None => None,
        });
        other_word.push(match op.other_char() {
            Some(c) if !delimiters.contains(c) => {
                if !in_other {
                    in_other = true;
                    n_other += 1;
                }
                Some(n_other - 1)
            }
            Some(_) => {
                in_other = false;
                None
            }
            None => None,
        });
    }

    let mut groups = DisjointSet((0..n_gold + n_other).collect());
    let mut wrong = vec![false; n_gold + n_other];
    let mut delimiter_errors = Vec::new();
    for (k, op) in alignment.ops.iter().enumerate() {
        if let (Some(g), Some(o)) = (gold_word[k], other_word[k]) {
            groups.union(g, n_gold + o);
        }
        if op.is_match() {
            continue;
        }
        let g = is_word(op.gold_char()).and(gold_word[k]);
        let o = is_word(op.other_char()).and(other_word[k]);
        if let Some(g) = g {
            wrong[g] = true;
        }
        if let Some(o) = o {
            wrong[n_gold + o] = true;
        }
        if g.is_none() && o.is_none() {
            delimiter_errors.push(k);
        }
    }

    // (gold words, other words) per group root
    let mut shape = vec![(0usize, 0usize); n_gold + n_other];
    for node in 0..n_gold + n_other {
        let root = groups.find(node);
        if node < n_gold {
            shape[root].0 += 1;
        } else {
            shape[root].1 += 1;
        }
    }
    let node_at = |k: usize| gold_word[k].or(other_word[k].map(|o| n_gold + o));
    for k in delimiter_errors {
        let left = (0..k).rev().find_map(node_at);
        let right = (k + 1..alignment.ops.len()).find_map(node_at);
        let mut is_whole_word_edit = |node: usize| {
            let (g, o) = shape[groups.find(node)];
            g == 0 || o == 0
        };
        // a space next to an inserted or deleted word belongs to that edit
        if left.is_some_and(&mut is_whole_word_edit) || right.is_some_and(&mut is_whole_word_edit) {
            continue;
        }
        if let Some(node) = left.or(right) {
            wrong[node] = true;
        }
    }

    let mut group_wrong = vec![false; n_gold + n_other];
    for node in 0..n_gold + n_other {
        let root = groups.find(node);
        group_wrong[root] |= wrong[node];
    }

    let mut counts = EditCounts {
        reference: n_gold,
        ..EditCounts::default()
    };
    for (&(g, o), &any_wrong) in shape.iter().zip(&group_wrong) {
        match (g, o) {
            (0, 0) => {}
            (1, 1) if !any_wrong => {}
            (g, o) => {
                counts.substituted += g.min(o);
                counts.deleted += g.saturating_sub(o);
                counts.inserted += o.saturating_sub(g);
            }
        }
    }
    counts
}
