use std::fmt;
use std::ops::Range;

use crate::align::{Alignment, EditOp};

/// Error taxonomy used for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorType {
    CharReplacement,
    CharSwap,
    MissingSpace,
    RedundantSpace,
    RedundantChar,
    MissingChar,
}

impl ErrorType {
    pub const ALL: [ErrorType; 6] = [
        ErrorType::CharReplacement,
        ErrorType::CharSwap,
        ErrorType::MissingSpace,
        ErrorType::RedundantSpace,
        ErrorType::RedundantChar,
        ErrorType::MissingChar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorType::CharReplacement => "char_replacement",
            ErrorType::CharSwap => "char_swap",
            ErrorType::MissingSpace => "missing_space",
            ErrorType::RedundantSpace => "redundant_space",
            ErrorType::RedundantChar => "redundant_char",
            ErrorType::MissingChar => "missing_char",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One classified error and the alignment columns it covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorEvent {
    pub kind: ErrorType,
    pub ops: Range<usize>,
}

/// Splits the non-match columns of an alignment into typed error events.
///
/// An adjacent transposition shows up either as two crossed substitutions
/// `(a→b)(b→a)` or, on cost ties, as a gap/match/gap triple such as
/// `Delete(a) Match(b) Insert(a)`; both count as one [`ErrorType::CharSwap`].
pub fn error_events(alignment: &Alignment) -> Vec<ErrorEvent> {
    let ops = &alignment.ops;
    let mut events = Vec::new();
    let mut i = 0;
    while i < ops.len() {
        let swap_len = match (ops.get(i), ops.get(i + 1), ops.get(i + 2)) {
            (Some(EditOp::Substitute { gold: g1, other: o1 }), Some(EditOp::Substitute { gold: g2, other: o2 }), _)
                if g1 == o2 && g2 == o1 =>
            {
                Some(2)
            }
            (Some(EditOp::Delete(a)), Some(EditOp::Match(b)), Some(EditOp::Insert(c)))
            | (Some(EditOp::Insert(a)), Some(EditOp::Match(b)), Some(EditOp::Delete(c)))
                if a == c && a != b =>
            {
                Some(3)
            }
            _ => None,
        };
        if let Some(len) = swap_len {
            events.push(ErrorEvent {
                kind: ErrorType::CharSwap,
                ops: i..i + len,
            });
            i += len;
            continue;
        }
        let kind = match ops[i] {
            EditOp::Match(_) => None,
            EditOp::Substitute { .. } => Some(ErrorType::CharReplacement),
            EditOp::Delete(c) if c.is_whitespace() => Some(ErrorType::MissingSpace),
            EditOp::Delete(_) => Some(ErrorType::MissingChar),
            EditOp::Insert(c) if c.is_whitespace() => Some(ErrorType::RedundantSpace),
            EditOp::Insert(_) => Some(ErrorType::RedundantChar),
        };
        if let Some(kind) = kind {
            events.push(ErrorEvent { kind, ops: i..i + 1 });
        }
        i += 1;
    }
    events
}

/// Counts of each error type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorTypeHistogram {
    counts: [u64; 6],
}

impl ErrorTypeHistogram {
    pub fn add(&mut self, kind: ErrorType) {
        self.counts[kind.index()] += 1;
    }

    pub fn merge(&mut self, other: &ErrorTypeHistogram) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
    }

    pub fn count(&self, kind: ErrorType) -> u64 {
        self.counts[kind.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn fraction(&self, kind: ErrorType) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.count(kind) as f64 / t as f64,
        }
    }

    /// `error_type<TAB>count<TAB>fraction` rows with a header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("error_type\tcount\tfraction\n");
        for kind in ErrorType::ALL {
            out.push_str(&format!("{}\t{}\t{:.6}\n", kind, self.count(kind), self.fraction(kind)));
        }
        out
    }
}

/// Histogram of error types in one alignment.
pub fn classify_errors(alignment: &Alignment) -> ErrorTypeHistogram {
    let mut hist = ErrorTypeHistogram::default();
    for event in error_events(alignment) {
        hist.add(event.kind);
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::align;

    #[test]
    fn identical_lines_have_no_errors() {
        let hist = classify_errors(&align("שלום עולם", "שלום עולם"));
        assert_eq!(hist.total(), 0);
    }

    #[test]
    fn crossed_substitutions_are_a_swap() {
        let hist = classify_errors(&align("ab", "ba"));
        assert_eq!(hist.count(ErrorType::CharSwap), 1);
        assert_eq!(hist.total(), 1);
    }

    #[test]
    fn gap_match_gap_transposition_is_a_swap() {
        let al = Alignment {
            ops: vec![EditOp::Delete('a'), EditOp::Match('b'), EditOp::Insert('a')],
            score: -2,
        };
        assert_eq!(classify_errors(&al).count(ErrorType::CharSwap), 1);
    }

    #[test]
    fn space_errors() {
        let missing = classify_errors(&align("a b", "ab"));
        assert_eq!(missing.count(ErrorType::MissingSpace), 1);
        assert_eq!(missing.total(), 1);
        let redundant = classify_errors(&align("ab", "a b"));
        assert_eq!(redundant.count(ErrorType::RedundantSpace), 1);
    }

    #[test]
    fn char_errors() {
        assert_eq!(
            classify_errors(&align("abc", "abxc")).count(ErrorType::RedundantChar),
            1
        );
        assert_eq!(classify_errors(&align("abc", "ac")).count(ErrorType::MissingChar), 1);
        let rep = classify_errors(&align("הלום", "חלום"));
        assert_eq!(rep.count(ErrorType::CharReplacement), 1);
        assert_eq!(rep.total(), 1);
    }

    #[test]
    fn histogram_tsv_layout() {
        let mut hist = ErrorTypeHistogram::default();
        hist.add(ErrorType::CharSwap);
        hist.add(ErrorType::CharSwap);
        hist.add(ErrorType::MissingChar);
        let tsv = hist.to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], "error_type\tcount\tfraction");
        assert_eq!(lines[2], "char_swap\t2\t0.666667");
        assert_eq!(lines.len(), 7);
    }
}
