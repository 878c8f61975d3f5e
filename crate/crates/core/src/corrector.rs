//! Trainable correctors.
//!
//! [`CorrectorContract`] is what the optimizer and the metrics need from a
//! corrector. [`NoisyChannel`] implements it with a character n-gram
//! language model and a channel learned from the confusions seen in the
//! training pairs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::align::{align, EditOp};
use crate::error_model::{extract_confusions, ErrorProfile};
use crate::metrics;
use crate::optimizer::{Config, HyperParam, HyperParamSpace};
use crate::text::Corpus;
use crate::{Error, Result};

/// A corrector that can be trained on (noisy, gold) pairs.
pub trait CorrectorContract: Sync {
    type Config;
    type Model: Sync;

    fn train(&self, corpus: &Corpus, config: &Self::Config) -> Result<Self::Model>;

    /// Must be deterministic for a fixed model.
    fn correct(&self, model: &Self::Model, noisy: &str) -> String;

    /// Fraction of lines corrected exactly to gold.
    fn validation_accuracy(&self, model: &Self::Model, corpus: &Corpus) -> Result<f64> {
        corpus.ensure_non_empty()?;
        let noisy = corpus.noisy_lines();
        #[cfg(feature = "parallel")]
        let fixed: Vec<String> = noisy.par_iter().map(|l| self.correct(model, l)).collect();
        #[cfg(not(feature = "parallel"))]
        let fixed: Vec<String> = noisy.iter().map(|l| self.correct(model, l)).collect();
        metrics::validation_accuracy(
            &corpus.gold_lines(),
            &fixed.iter().map(String::as_str).collect::<Vec<_>>(),
        )
    }
}

/// Hyperparameters of the noisy-channel corrector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectorHyper {
    pub ngram_order: usize,
    /// Weight of the channel log-probability against the language model.
    pub channel_weight: f64,
    pub beam_width: usize,
    pub max_edits_per_word: usize,
    /// Additive smoothing constant for both models.
    pub smoothing_k: f64,
}

impl Default for CorrectorHyper {
    fn default() -> Self {
        CorrectorHyper {
            ngram_order: 3,
            channel_weight: 1.0,
            beam_width: 4,
            max_edits_per_word: 2,
            smoothing_k: 0.1,
        }
    }
}

const MAX_NGRAM_ORDER: usize = 12;

impl CorrectorHyper {
    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_NGRAM_ORDER).contains(&self.ngram_order) {
            return Err(Error::argument(format!(
                "ngram_order {} outside 2..={MAX_NGRAM_ORDER}",
                self.ngram_order
            )));
        }
        if !(self.channel_weight >= 0.0 && self.channel_weight.is_finite()) {
            return Err(Error::argument(format!(
                "channel_weight {} must be finite and >= 0",
                self.channel_weight
            )));
        }
        if self.beam_width == 0 {
            return Err(Error::argument("beam_width must be at least 1"));
        }
        if !(self.smoothing_k > 0.0 && self.smoothing_k.is_finite()) {
            return Err(Error::argument(format!(
                "smoothing_k {} must be finite and > 0",
                self.smoothing_k
            )));
        }
        Ok(())
    }

    /// Reads the five corrector parameters from an optimizer assignment;
    /// missing names keep their defaults.
    pub fn from_config(config: &Config) -> Result<Self> {
        let mut h = CorrectorHyper::default();
        for (name, value) in config.iter() {
            let bad = || Error::argument(format!("{name}: unusable value {value}"));
            let uint = || value.as_i64().filter(|&v| v >= 0).map(|v| v as usize).ok_or_else(bad);
            let float = || value.as_f64().ok_or_else(bad);
            match name {
                "ngram_order" => h.ngram_order = uint()?,
                "channel_weight" => h.channel_weight = float()?,
                "beam_width" => h.beam_width = uint()?,
                "max_edits_per_word" => h.max_edits_per_word = uint()?,
                "smoothing_k" => h.smoothing_k = float()?,
                other => return Err(Error::argument(format!("unknown corrector parameter '{other}'"))),
            }
        }
        h.validate()?;
        Ok(h)
    }

    pub fn to_config(&self) -> Config {
        Config::new()
            .with("ngram_order", self.ngram_order as i64)
            .with("channel_weight", self.channel_weight)
            .with("beam_width", self.beam_width as i64)
            .with("max_edits_per_word", self.max_edits_per_word as i64)
            .with("smoothing_k", self.smoothing_k)
    }
}

/// The corrector's tunable space. Higher-order models cost the most to
/// train; the decoding parameters only change correction time.
pub fn corrector_space() -> HyperParamSpace {
    let params = [
        HyperParam::new("ngram_order", [2i64, 3, 4, 5], 3i64, 5),
        HyperParam::new("beam_width", [1i64, 2, 4, 8], 4i64, 4),
        HyperParam::new("max_edits_per_word", [1i64, 2], 2i64, 3),
        HyperParam::new("channel_weight", [0.5, 1.0, 2.0, 4.0], 1.0, 2),
        HyperParam::new("smoothing_k", [0.01, 0.1, 1.0], 0.1, 1),
    ];
    HyperParamSpace::new(params.into_iter().collect::<Result<Vec<_>>>().expect("valid")).expect("valid")
}

const BOS: char = '\u{2}';
const EOS: char = '\u{3}';

#[derive(Debug, Clone, PartialEq)]
struct CharLm {
    order: usize,
    counts: HashMap<String, HashMap<char, u64>>,
    totals: HashMap<String, u64>,
    /// Distinct predicted symbols, end-of-line included.
    symbols: usize,
}

impl CharLm {
    fn new(order: usize) -> Self {
        CharLm {
            order,
            counts: HashMap::new(),
            totals: HashMap::new(),
            symbols: 1,
        }
    }

    fn add(&mut self, context: String, c: char, n: u64) {
        *self.totals.entry(context.clone()).or_default() += n;
        *self.counts.entry(context).or_default().entry(c).or_default() += n;
    }

    fn add_line(&mut self, line: &str) {
        let mut history: Vec<char> = vec![BOS; self.order - 1];
        for c in line.chars().chain(std::iter::once(EOS)) {
            let ctx: String = history[history.len() - (self.order - 1)..].iter().collect();
            self.add(ctx, c, 1);
            history.push(c);
        }
    }

    fn finish(&mut self) {
        let symbols: BTreeSet<char> = self.counts.values().flat_map(|m| m.keys().copied()).collect();
        self.symbols = symbols.len().max(1) + usize::from(!symbols.contains(&EOS));
    }

    fn log_prob(&self, context: &str, c: char, k: f64) -> f64 {
        let n = self.counts.get(context).and_then(|m| m.get(&c)).copied().unwrap_or(0);
        let total = self.totals.get(context).copied().unwrap_or(0);
        ((n as f64 + k) / (total as f64 + k * self.symbols as f64)).ln()
    }

    /// Occurrences of each symbol, summed over contexts.
    fn unigrams(&self) -> HashMap<char, u64> {
        let mut out = HashMap::new();
        for m in self.counts.values() {
            for (&c, &n) in m {
                *out.entry(c).or_default() += n;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Channel {
    subs: HashMap<(char, char), u64>,
    subs_of_gold: HashMap<char, u64>,
    gold_counts: HashMap<char, u64>,
    gold_total: u64,
    deleted: u64,
    inserted: u64,
    alphabet: usize,
}

impl Channel {
    fn new(profile: &ErrorProfile, lm: &CharLm, deleted: u64, inserted: u64) -> Self {
        let mut gold_counts = lm.unigrams();
        gold_counts.remove(&EOS);
        let mut subs = HashMap::new();
        let mut subs_of_gold: HashMap<char, u64> = HashMap::new();
        let mut alphabet: BTreeSet<char> = gold_counts.keys().copied().collect();
        for e in profile.entries() {
            let n = profile.count(e);
            subs.insert((e.error_char, e.correct_char), n);
            *subs_of_gold.entry(e.correct_char).or_default() += n;
            alphabet.insert(e.error_char);
            alphabet.insert(e.correct_char);
        }
        Channel {
            subs,
            subs_of_gold,
            gold_total: gold_counts.values().sum(),
            gold_counts,
            deleted,
            inserted,
            alphabet: alphabet.len().max(1),
        }
    }

    /// log P(noisy | candidate) along the unit-cost alignment.
    ///
    /// A gold character `g` seen `C(g)` times has `alphabet + 1` outcomes
    /// (kept, replaced by any other character, deleted), each smoothed by
    /// `k`. Insertions use the corpus-wide insertion rate spread evenly over
    /// the alphabet.
    fn log_prob(&self, candidate: &str, noisy: &str, k: f64) -> f64 {
        let outcomes = (self.alphabet + 1) as f64;
        let ins_den = self.gold_total as f64 + k * outcomes;
        let del = |g: char| {
            let c = self.gold_counts.get(&g).copied().unwrap_or(0) as f64;
            let rate = (self.deleted as f64 + k) / (self.gold_total as f64 + k * outcomes);
            (rate, c)
        };
        let mut lp = 0.0;
        for op in align(candidate, noisy).ops {
            lp += match op {
                EditOp::Match(g) => {
                    let (d, c) = del(g);
                    let changed = self.subs_of_gold.get(&g).copied().unwrap_or(0) as f64;
                    let kept = (c - changed - d * c).max(0.0);
                    ((kept + k) / (c + k * outcomes)).ln()
                }
                EditOp::Substitute { gold, other } => {
                    let c = self.gold_counts.get(&gold).copied().unwrap_or(0) as f64;
                    let n = self.subs.get(&(other, gold)).copied().unwrap_or(0) as f64;
                    ((n + k) / (c + k * outcomes)).ln()
                }
                EditOp::Delete(g) => del(g).0.ln(),
                EditOp::Insert(_) => ((self.inserted as f64 + k) / ins_den / self.alphabet as f64).ln(),
            };
        }
        lp
    }
}

/// A trained noisy-channel corrector.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyChannelModel {
    hyper: CorrectorHyper,
    vocabulary: BTreeSet<String>,
    by_length: BTreeMap<usize, Vec<String>>,
    lm: CharLm,
    profile: ErrorProfile,
    channel: Channel,
}

/// A decoded line and the score the decoder gave it.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub text: String,
    pub score: f64,
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(' ')
}

fn within(a: &str, b: &str, max: usize) -> bool {
    let (la, lb) = (a.chars().count(), b.chars().count());
    la.abs_diff(lb) <= max && crate::align::levenshtein(a, b) <= max
}

impl NoisyChannelModel {
    fn assemble(
        hyper: CorrectorHyper,
        vocabulary: BTreeSet<String>,
        lm: CharLm,
        profile: ErrorProfile,
        deleted: u64,
        inserted: u64,
    ) -> Self {
        let mut by_length: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for w in &vocabulary {
            by_length.entry(w.chars().count()).or_default().push(w.clone());
        }
        let channel = Channel::new(&profile, &lm, deleted, inserted);
        NoisyChannelModel {
            hyper,
            vocabulary,
            by_length,
            lm,
            profile,
            channel,
        }
    }

    pub fn hyper(&self) -> &CorrectorHyper {
        &self.hyper
    }

    pub fn profile(&self) -> &ErrorProfile {
        &self.profile
    }

    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }

    /// The same model decoding with different beam, edit and weight
    /// settings. The n-gram order is fixed at training time.
    pub fn with_decoding(&self, hyper: CorrectorHyper) -> Result<Self> {
        hyper.validate()?;
        if hyper.ngram_order != self.hyper.ngram_order {
            return Err(Error::argument(format!(
                "model was trained with ngram_order {}, not {}",
                self.hyper.ngram_order, hyper.ngram_order
            )));
        }
        Ok(NoisyChannelModel { hyper, ..self.clone() })
    }

    /// Vocabulary words within `max_edits_per_word` of `token`, plus the
    /// token itself, in lexicographic order.
    pub fn candidates(&self, token: &str) -> Vec<String> {
        let max = self.hyper.max_edits_per_word;
        let mut out: BTreeSet<String> = BTreeSet::new();
        out.insert(token.to_string());
        if max > 0 && !token.is_empty() {
            let len = token.chars().count();
            for words in self
                .by_length
                .range(len.saturating_sub(max)..=len + max)
                .map(|(_, w)| w)
            {
                out.extend(words.iter().filter(|w| within(w, token, max)).cloned());
            }
        }
        out.into_iter().collect()
    }

    /// Language-model log-probability of `text` following `history`,
    /// optionally closing the line.
    fn lm_extend(&self, history: &mut Vec<char>, text: &str, close: bool) -> f64 {
        let k = self.hyper.smoothing_k;
        let n = self.hyper.ngram_order - 1;
        let mut lp = 0.0;
        for c in text.chars().chain(close.then_some(EOS)) {
            let ctx: String = history[history.len() - n..].iter().collect();
            lp += self.lm.log_prob(&ctx, c, k);
            history.push(c);
        }
        let keep = history.len() - n;
        history.drain(..keep);
        lp
    }

    /// Score of correcting `noisy` to the words `choice`, one per token.
    pub fn sentence_score(&self, noisy: &str, choice: &[&str]) -> f64 {
        let noisy: Vec<&str> = tokens(noisy).collect();
        assert_eq!(noisy.len(), choice.len(), "one choice per token");
        let mut history = vec![BOS; self.hyper.ngram_order - 1];
        let mut score = 0.0;
        for (i, (&n, &c)) in noisy.iter().zip(choice).enumerate() {
            let last = i + 1 == noisy.len();
            let text = if last { c.to_string() } else { format!("{c} ") };
            score += self.lm_extend(&mut history, &text, last);
            score += self.hyper.channel_weight * self.channel.log_prob(c, n, self.hyper.smoothing_k);
        }
        score
    }

    fn beam(&self, options: &[Vec<(String, f64)>], width: usize) -> (f64, Vec<usize>) {
        struct Hyp {
            score: f64,
            picks: Vec<usize>,
            history: Vec<char>,
        }
        let mut beam = vec![Hyp {
            score: 0.0,
            picks: Vec::new(),
            history: vec![BOS; self.hyper.ngram_order - 1],
        }];
        for (i, cands) in options.iter().enumerate() {
            let last = i + 1 == options.len();
            let mut next = Vec::with_capacity(beam.len() * cands.len());
            for h in &beam {
                for (j, (word, channel)) in cands.iter().enumerate() {
                    let mut history = h.history.clone();
                    let text = if last { word.clone() } else { format!("{word} ") };
                    let lm = self.lm_extend(&mut history, &text, last);
                    let mut picks = h.picks.clone();
                    picks.push(j);
                    next.push(Hyp {
                        score: h.score + lm + self.hyper.channel_weight * channel,
                        picks,
                        history,
                    });
                }
            }
            next.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.picks.cmp(&b.picks)));
            next.truncate(width);
            beam = next;
        }
        let best = beam.swap_remove(0);
        (best.score, best.picks)
    }

    /// Beam decoding at width `width`.
    ///
    /// The result is the best line found by any beam of width `1..=width`,
    /// so a wider setting never scores lower. Equal scores go to the
    /// lexicographically smaller word sequence.
    pub fn decode(&self, noisy: &str, width: usize) -> Decoded {
        let k = self.hyper.smoothing_k;
        let mut seen: HashMap<&str, Vec<(String, f64)>> = HashMap::new();
        let options: Vec<Vec<(String, f64)>> = tokens(noisy)
            .map(|tok| {
                seen.entry(tok)
                    .or_insert_with(|| {
                        self.candidates(tok)
                            .into_iter()
                            .map(|c| {
                                let lp = self.channel.log_prob(&c, tok, k);
                                (c, lp)
                            })
                            .collect()
                    })
                    .clone()
            })
            .collect();
        let exhaustive = options
            .iter()
            .try_fold(1usize, |acc, c| acc.checked_mul(c.len()))
            .is_some_and(|n| n <= width);
        let widths = if exhaustive { width..=width } else { 1..=width.max(1) };
        let mut best: Option<(f64, Vec<usize>)> = None;
        for w in widths {
            let cand = self.beam(&options, w);
            let better = match &best {
                None => true,
                Some((s, p)) => cand.0 > *s || (cand.0 == *s && cand.1 < *p),
            };
            if better {
                best = Some(cand);
            }
        }
        let (score, picks) = best.expect("at least one width");
        let words: Vec<&str> = picks.iter().zip(&options).map(|(&j, c)| c[j].0.as_str()).collect();
        Decoded {
            text: words.join(" "),
            score,
        }
    }

    pub fn correct_line(&self, noisy: &str) -> String {
        self.decode(noisy, self.hyper.beam_width).text
    }

    pub fn correct_lines<S: AsRef<str> + Sync>(&self, lines: &[S]) -> Vec<String> {
        #[cfg(feature = "parallel")]
        let out = lines.par_iter().map(|l| self.correct_line(l.as_ref())).collect();
        #[cfg(not(feature = "parallel"))]
        let out = lines.iter().map(|l| self.correct_line(l.as_ref())).collect();
        out
    }

    /// Writes the model directory: `vocabulary.txt`, `ngrams.tsv`,
    /// `channel.tsv` and `hyper.txt`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, body: String| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
        };
        let mut vocab = String::new();
        for w in &self.vocabulary {
            vocab.push_str(w);
            vocab.push('\n');
        }
        write("vocabulary.txt", vocab)?;

        let mut rows: Vec<(String, char, u64)> = self
            .lm
            .counts
            .iter()
            .flat_map(|(ctx, m)| m.iter().map(move |(&c, &n)| (ctx.clone(), c, n)))
            .collect();
        rows.sort();
        let mut ngrams = String::new();
        for (ctx, c, n) in rows {
            let _ = writeln!(ngrams, "{}\t{}\t{n}", escape(&ctx), escape(&c.to_string()));
        }
        write("ngrams.tsv", ngrams)?;
        write("channel.tsv", self.profile.to_tsv())?;

        let h = &self.hyper;
        let kv = format!(
            "ngram_order = {}\nchannel_weight = {}\nbeam_width = {}\nmax_edits_per_word = {}\nsmoothing_k = {}\ndeleted_chars = {}\ninserted_chars = {}\n",
            h.ngram_order,
            h.channel_weight,
            h.beam_width,
            h.max_edits_per_word,
            h.smoothing_k,
            self.channel.deleted,
            self.channel.inserted
        );
        write("hyper.txt", kv)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
        };
        let mut kv: HashMap<String, String> = HashMap::new();
        for line in read("hyper.txt")?.lines() {
            if let Some((k, v)) = line.split_once('=') {
                kv.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        fn field<T: std::str::FromStr>(kv: &HashMap<String, String>, key: &str) -> Result<T> {
            kv.get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::structural(format!("hyper.txt: missing or bad '{key}'")))
        }
        let hyper = CorrectorHyper {
            ngram_order: field(&kv, "ngram_order")?,
            channel_weight: field(&kv, "channel_weight")?,
            beam_width: field(&kv, "beam_width")?,
            max_edits_per_word: field(&kv, "max_edits_per_word")?,
            smoothing_k: field(&kv, "smoothing_k")?,
        };
        hyper.validate()?;
        let deleted = field(&kv, "deleted_chars")?;
        let inserted = field(&kv, "inserted_chars")?;

        let vocabulary: BTreeSet<String> = read("vocabulary.txt")?
            .lines()
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();

        let mut lm = CharLm::new(hyper.ngram_order);
        for (i, line) in read("ngrams.tsv")?.lines().enumerate() {
            let bad = || {
                Error::structural(format!(
                    "ngrams.tsv line {}: expected context<TAB>char<TAB>count",
                    i + 1
                ))
            };
            let [ctx, c, n] = line.split('\t').collect::<Vec<_>>()[..] else {
                return Err(bad());
            };
            let ctx = unescape(ctx).ok_or_else(bad)?;
            let c = unescape(c).ok_or_else(bad)?;
            let mut chars = c.chars();
            let (Some(c), None) = (chars.next(), chars.next()) else {
                return Err(bad());
            };
            if ctx.chars().count() != hyper.ngram_order - 1 {
                return Err(bad());
            }
            lm.add(ctx, c, n.parse().map_err(|_| bad())?);
        }
        lm.finish();
        let profile = ErrorProfile::from_tsv(&read("channel.tsv")?, "channel")?;
        Ok(Self::assemble(hyper, vocabulary, lm, profile, deleted, inserted))
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            BOS => out.push_str("\\^"),
            EOS => out.push_str("\\$"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match it.next()? {
            '\\' => '\\',
            '^' => BOS,
            '$' => EOS,
            _ => return None,
        });
    }
    Some(out)
}

/// Trains a noisy-channel model on the gold sides (vocabulary, n-grams) and
/// the aligned pairs (channel).
pub fn train_noisy_channel(train: &Corpus, hyper: CorrectorHyper) -> Result<NoisyChannelModel> {
    hyper.validate()?;
    train.ensure_non_empty()?;
    let mut vocabulary = BTreeSet::new();
    let mut lm = CharLm::new(hyper.ngram_order);
    for pair in train {
        vocabulary.extend(tokens(&pair.gold).filter(|w| !w.is_empty()).map(str::to_string));
        lm.add_line(&pair.gold);
    }
    lm.finish();
    let profile = extract_confusions(train)?;
    let edit = |p: &crate::text::SentencePair| align(&p.gold, &p.noisy).char_counts();
    #[cfg(feature = "parallel")]
    let counts: crate::align::EditCounts = train.pairs().par_iter().map(edit).reduce(Default::default, |mut a, b| {
        a += b;
        a
    });
    #[cfg(not(feature = "parallel"))]
    let counts: crate::align::EditCounts = train.iter().map(edit).sum();
    Ok(NoisyChannelModel::assemble(
        hyper,
        vocabulary,
        lm,
        profile,
        counts.deleted as u64,
        counts.inserted as u64,
    ))
}

/// The noisy-channel corrector behind [`CorrectorContract`].
#[derive(Debug, Clone, Copy, Default)]
pub struct NoisyChannel;

impl CorrectorContract for NoisyChannel {
    type Config = CorrectorHyper;
    type Model = NoisyChannelModel;

    fn train(&self, corpus: &Corpus, config: &CorrectorHyper) -> Result<NoisyChannelModel> {
        train_noisy_channel(corpus, *config)
    }

    fn correct(&self, model: &NoisyChannelModel, noisy: &str) -> String {
        model.correct_line(noisy)
    }
}

/// Optimizer objective: train on `train` with the assignment's
/// hyperparameters, score validation accuracy on `valid`.
pub fn builtin_evaluator<'a>(train: &'a Corpus, valid: &'a Corpus) -> impl Fn(&Config) -> Result<f64> + Sync + 'a {
    move |config| {
        let hyper = CorrectorHyper::from_config(config)?;
        let model = NoisyChannel.train(train, &hyper)?;
        NoisyChannel.validation_accuracy(&model, valid)
    }
}

impl From<CorrectorHyper> for Config {
    fn from(h: CorrectorHyper) -> Self {
        h.to_config()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const WORDS: [&str; 8] = ["הלום", "שלום", "ילד", "הבית", "גדול", "ספר", "עולם", "דבר"];

    fn sentences() -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..WORDS.len() {
            for j in 0..WORDS.len() {
                if i != j {
                    out.push(format!("{} {} {}", WORDS[i], WORDS[j], WORDS[(i + j) % WORDS.len()]));
                }
            }
        }
        out
    }

    // every ה in the gold side is read as ח
    fn he_chet_corpus() -> Corpus {
        let pairs: Vec<(String, String)> = sentences().into_iter().map(|g| (g.replace('ה', "ח"), g)).collect();
        Corpus::from_pairs("hc", pairs)
    }

    fn clean_corpus() -> Corpus {
        Corpus::from_pairs("clean", sentences().into_iter().map(|g| (g.clone(), g)))
    }

    #[test]
    fn noiseless_training_learns_no_channel() {
        let model = train_noisy_channel(&clean_corpus(), CorrectorHyper::default()).unwrap();
        assert!(model.profile().is_empty());
        for line in sentences().iter().take(20) {
            assert_eq!(model.correct_line(line), *line);
        }
    }

    #[test]
    fn single_confusion_channel() {
        let model = train_noisy_channel(&he_chet_corpus(), CorrectorHyper::default()).unwrap();
        assert_eq!(model.profile().len(), 1);
        let e = model.profile().entries()[0];
        assert_eq!((e.error_char, e.correct_char), ('ח', 'ה'));
        assert_eq!(model.correct_line("חלום ילד"), "הלום ילד");
    }

    // exhaustive scoring over every candidate combination
    fn brute_force(model: &NoisyChannelModel, noisy: &str) -> (f64, String) {
        let cands: Vec<Vec<String>> = tokens(noisy).map(|t| model.candidates(t)).collect();
        let mut best: Option<(f64, Vec<String>)> = None;
        let mut idx = vec![0usize; cands.len()];
        loop {
            let choice: Vec<String> = idx.iter().zip(&cands).map(|(&i, c)| c[i].clone()).collect();
            let refs: Vec<&str> = choice.iter().map(String::as_str).collect();
            let s = model.sentence_score(noisy, &refs);
            if best.as_ref().is_none_or(|(b, p)| s > *b || (s == *b && choice < *p)) {
                best = Some((s, choice));
            }
            let mut k = idx.len();
            loop {
                if k == 0 {
                    let (s, words) = best.unwrap();
                    return (s, words.join(" "));
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < cands[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    #[test]
    fn restored_word_is_the_exhaustive_argmax() {
        let model = train_noisy_channel(&he_chet_corpus(), CorrectorHyper::default()).unwrap();
        let wide = model
            .with_decoding(CorrectorHyper {
                beam_width: 10_000,
                ..*model.hyper()
            })
            .unwrap();
        for noisy in ["חלום", "ספר חלום", "חבית גדול", "חלום שלום דבר"] {
            let (score, text) = brute_force(&model, noisy);
            let d = wide.decode(noisy, 10_000);
            assert_eq!(d.text, text);
            assert!((d.score - score).abs() < 1e-9);
        }
        assert_eq!(brute_force(&model, "חבית גדול").1, "הבית גדול");
    }

    #[test]
    fn zero_edits_is_identity() {
        let model = train_noisy_channel(
            &he_chet_corpus(),
            CorrectorHyper {
                beam_width: 1,
                max_edits_per_word: 0,
                ..Default::default()
            },
        )
        .unwrap();
        for line in ["חלום ילד", "xyz  abc", "", "שלום"] {
            assert_eq!(model.correct_line(line), line);
        }
    }

    #[test]
    fn unknown_names_pass_through() {
        let model = train_noisy_channel(&he_chet_corpus(), CorrectorHyper::default()).unwrap();
        assert_eq!(model.correct_line("ספר ירושלמי דבר"), "ספר ירושלמי דבר");
        assert_eq!(model.correct_line("Rothschild"), "Rothschild");
    }

    #[test]
    fn heavy_channel_only_inverts_the_learned_confusion() {
        let model = train_noisy_channel(
            &he_chet_corpus(),
            CorrectorHyper {
                channel_weight: 1e6,
                ..Default::default()
            },
        )
        .unwrap();
        let noisy = ["חלום ילד", "ספר חבית", "עולם דבר גדול", "שלום שלום"];
        let mut changed = 0;
        for line in noisy {
            let fixed = model.correct_line(line);
            assert_eq!(fixed.chars().count(), line.chars().count());
            for (a, b) in line.chars().zip(fixed.chars()) {
                assert!(a == b || (a, b) == ('ח', 'ה'), "{line} -> {fixed}");
                changed += usize::from(a != b);
            }
        }
        assert!(changed >= 2);
    }

    #[test]
    fn round_trip_through_directory() {
        let model = train_noisy_channel(&he_chet_corpus(), CorrectorHyper::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path()).unwrap();
        for f in ["vocabulary.txt", "ngrams.tsv", "channel.tsv", "hyper.txt"] {
            assert!(dir.path().join(f).is_file());
        }
        let back = NoisyChannelModel::load(dir.path()).unwrap();
        assert_eq!(back.hyper(), model.hyper());
        assert_eq!(back.vocabulary(), model.vocabulary());
        assert_eq!(back.lm, model.lm);
        assert_eq!(back.channel, model.channel);
        assert_eq!(back.correct_line("חלום ספר"), model.correct_line("חלום ספר"));
        assert!(NoisyChannelModel::load(&dir.path().join("missing")).is_err());
    }

    #[test]
    fn escapes_round_trip() {
        for s in ["a\\b", "\u{2}\u{2}x", "$^\\$", "\u{3}"] {
            assert_eq!(unescape(&escape(s)).unwrap(), s);
        }
    }

    #[test]
    fn hyper_validation_and_config() {
        assert!(train_noisy_channel(
            &clean_corpus(),
            CorrectorHyper {
                ngram_order: 1,
                ..Default::default()
            }
        )
        .is_err());
        assert!(train_noisy_channel(
            &clean_corpus(),
            CorrectorHyper {
                beam_width: 0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(train_noisy_channel(
            &clean_corpus(),
            CorrectorHyper {
                smoothing_k: 0.0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(train_noisy_channel(
            &clean_corpus(),
            CorrectorHyper {
                channel_weight: -1.0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(train_noisy_channel(
            &Corpus::from_pairs("e", Vec::<(&str, &str)>::new()),
            CorrectorHyper::default()
        )
        .is_err());
        let h = CorrectorHyper {
            ngram_order: 4,
            smoothing_k: 0.01,
            ..Default::default()
        };
        assert_eq!(CorrectorHyper::from_config(&h.to_config()).unwrap(), h);
        assert_eq!(
            CorrectorHyper::from_config(&corrector_space().default_config()).unwrap(),
            CorrectorHyper::default()
        );
        assert!(CorrectorHyper::from_config(&Config::new().with("layers", 2i64)).is_err());
    }

    #[test]
    fn contract_accuracy_counts_exact_lines() {
        let corpus = he_chet_corpus();
        let model = NoisyChannel.train(&corpus, &CorrectorHyper::default()).unwrap();
        let acc = NoisyChannel.validation_accuracy(&model, &corpus).unwrap();
        let exact = corpus.iter().filter(|p| model.correct_line(&p.noisy) == p.gold).count();
        assert_eq!(acc, exact as f64 / corpus.len() as f64);
        assert!(acc > 0.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn wider_beams_never_score_lower(picks in prop::collection::vec((0usize..8, any::<bool>()), 1..5)) {
            let model = train_noisy_channel(&he_chet_corpus(), CorrectorHyper::default()).unwrap();
            let line: Vec<String> = picks
                .iter()
                .map(|&(i, noisy)| if noisy { WORDS[i].replace('ה', "ח") } else { WORDS[i].to_string() })
                .collect();
            let line = line.join(" ");
            let mut last = f64::NEG_INFINITY;
            for w in 1..=8 {
                let d = model.decode(&line, w);
                prop_assert!(d.score >= last);
                last = d.score;
            }
            prop_assert_eq!(model.correct_line(&line), model.correct_line(&line));
        }
    }
}
