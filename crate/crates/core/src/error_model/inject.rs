use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::profile::ErrorProfile;
use crate::text::{CharFrequencyTable, Corpus};
use crate::{Error, Result};

/// Source of uniform draws in `[0, 1)`.
///
/// Every random choice the injector makes is derived from these draws, which
/// lets tests script the exact stream.
pub trait RandomStream {
    fn next_unit(&mut self) -> f64;

    /// Uniform index in `0..n`; `n` must be positive.
    fn index(&mut self, n: usize) -> usize {
        ((self.next_unit() * n as f64) as usize).min(n - 1)
    }

    /// Index drawn proportionally to `weights` (all non-negative, not all
    /// zero).
    fn weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let target = self.next_unit() * total;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return i;
            }
        }
        weights.len() - 1
    }
}

impl<R: RngCore> RandomStream for R {
    fn next_unit(&mut self) -> f64 {
        self.gen::<f64>()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// The random stream for line `index` under `seed`. Independent of how
/// lines are scheduled across threads.
pub fn line_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index)))
}

/// Parameters of the noise generator.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    /// Gate probability of each corruption step, strictly between 0 and 1.
    pub noise_ratio: f64,
    /// Weights for choosing characters to delete or insert.
    pub char_freq: CharFrequencyTable,
    /// Period-specific confusions; `None` injects generic noise only.
    pub profile: Option<ErrorProfile>,
    pub seed: u64,
    /// Upper bound of the uniform swap count `k ∈ {1, ..., max_swaps}`.
    pub max_swaps: usize,
}

impl NoiseConfig {
    pub fn new(noise_ratio: f64, char_freq: CharFrequencyTable) -> Result<Self> {
        let config = NoiseConfig {
            noise_ratio,
            char_freq,
            profile: None,
            seed: 42,
            max_swaps: 2,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_profile(mut self, profile: ErrorProfile) -> Self {
        self.profile = Some(profile);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_swaps(mut self, max_swaps: usize) -> Self {
        self.max_swaps = max_swaps;
        self
    }

    pub fn with_noise_ratio(mut self, noise_ratio: f64) -> Self {
        self.noise_ratio = noise_ratio;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_ratio > 0.0 && self.noise_ratio < 1.0) {
            return Err(Error::argument(format!(
                "noise ratio {} violates 0 < NR < 1",
                self.noise_ratio
            )));
        }
        if self.max_swaps == 0 {
            return Err(Error::argument("max_swaps must be at least 1"));
        }
        if self.char_freq.is_empty() {
            return Err(Error::argument("character frequency table is empty"));
        }
        Ok(())
    }
}

/// What happened to one line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InjectionEvents {
    pub deleted: bool,
    pub inserted: bool,
    /// Number of adjacent swaps performed (0 when the swap gate failed).
    pub swaps: usize,
    /// Period-specific replacements performed.
    pub replacements: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectedLine {
    pub text: String,
    pub events: InjectionEvents,
}

/// Corrupts one gold line.
///
/// Steps run in a fixed order, each consuming draws from `rng`:
///
/// 1. with probability NR, delete one character, choosing among the line's
///    characters in proportion to their frequency (characters missing from
///    the table weigh as much as the rarest one). Skipped on one-character
///    lines.
/// 2. with probability NR, insert a frequency-weighted character at a
///    uniform position.
/// 3. with probability NR, perform `k` swaps of adjacent characters, `k`
///    uniform in `1..=max_swaps`. Skipped on lines shorter than two.
/// 4. for each profile entry in order, if the line contains the entry's
///    correct character and a fresh draw is below `NR × EP`, replace one
///    uniformly chosen occurrence of it by the error character.
pub fn inject_line<R: RandomStream + ?Sized>(line: &str, config: &NoiseConfig, rng: &mut R) -> Result<InjectedLine> {
    config.validate()?;
    if line.is_empty() {
        return Err(Error::argument("cannot inject noise into an empty line"));
    }
    let nr = config.noise_ratio;
    let mut chars: Vec<char> = line.chars().collect();
    let mut events = InjectionEvents::default();

    if rng.next_unit() < nr && chars.len() > 1 {
        let floor = config.char_freq.min_frequency();
        let weights: Vec<f64> = chars
            .iter()
            .map(|&c| config.char_freq.frequency(c).unwrap_or(floor))
            .collect();
        chars.remove(rng.weighted(&weights));
        events.deleted = true;
    }

    if rng.next_unit() < nr {
        let table = config.char_freq.entries();
        let weights: Vec<f64> = table.iter().map(|&(_, f)| f).collect();
        let c = table[rng.weighted(&weights)].0;
        let pos = rng.index(chars.len() + 1);
        chars.insert(pos, c);
        events.inserted = true;
    }

    if rng.next_unit() < nr && chars.len() >= 2 {
        let k = 1 + rng.index(config.max_swaps);
        for _ in 0..k {
            let p = rng.index(chars.len() - 1);
            chars.swap(p, p + 1);
        }
        events.swaps = k;
    }

    if let Some(profile) = &config.profile {
        for entry in profile.entries() {
            let positions: Vec<usize> = chars
                .iter()
                .enumerate()
                .filter(|(_, &c)| c == entry.correct_char)
                .map(|(i, _)| i)
                .collect();
            if positions.is_empty() {
                continue;
            }
            if rng.next_unit() < nr * entry.probability {
                let at = positions[rng.index(positions.len())];
                chars[at] = entry.error_char;
                events.replacements += 1;
            }
        }
    }

    Ok(InjectedLine {
        text: chars.into_iter().collect(),
        events,
    })
}

/// Aggregated event counts over many injected lines.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InjectionStats {
    pub lines: u64,
    pub deletions: u64,
    pub insertions: u64,
    pub swap_events: u64,
    pub replacements: u64,
}

impl InjectionStats {
    pub fn record(&mut self, events: &InjectionEvents) {
        self.lines += 1;
        self.deletions += u64::from(events.deleted);
        self.insertions += u64::from(events.inserted);
        self.swap_events += u64::from(events.swaps > 0);
        self.replacements += events.replacements as u64;
    }

    fn rate(&self, n: u64) -> f64 {
        if self.lines == 0 {
            0.0
        } else {
            n as f64 / self.lines as f64
        }
    }

    pub fn deletion_rate(&self) -> f64 {
        self.rate(self.deletions)
    }

    pub fn insertion_rate(&self) -> f64 {
        self.rate(self.insertions)
    }

    pub fn swap_rate(&self) -> f64 {
        self.rate(self.swap_events)
    }

    /// Mean period-specific replacements per line.
    pub fn replacement_rate(&self) -> f64 {
        self.rate(self.replacements)
    }
}

/// Injects noise into a block of lines whose first line has global index
/// `first_index`. Streaming callers feed consecutive blocks; the output does
/// not depend on the block size.
pub fn inject_lines<S: AsRef<str> + Sync>(
    lines: &[S],
    first_index: u64,
    config: &NoiseConfig,
) -> Result<Vec<InjectedLine>> {
    config.validate()?;
    let one = |(i, line): (usize, &S)| {
        let mut rng = line_rng(config.seed, first_index + i as u64);
        inject_line(line.as_ref(), config, &mut rng)
    };
    #[cfg(feature = "parallel")]
    let out = lines.par_iter().enumerate().map(one).collect();
    #[cfg(not(feature = "parallel"))]
    let out = lines.iter().enumerate().map(one).collect();
    out
}

/// Builds a synthetic parallel corpus: pair `i` is `(noise(gold_i), gold_i)`.
pub fn inject_corpus<S: AsRef<str> + Sync>(gold_lines: &[S], config: &NoiseConfig) -> Result<(Corpus, InjectionStats)> {
    if gold_lines.is_empty() {
        return Err(Error::structural("no gold lines to inject"));
    }
    let injected = inject_lines(gold_lines, 0, config)?;
    let mut stats = InjectionStats::default();
    for line in &injected {
        stats.record(&line.events);
    }
    let corpus = Corpus::from_pairs(
        "injected",
        injected
            .into_iter()
            .zip(gold_lines)
            .map(|(noisy, gold)| (noisy.text, gold.as_ref().to_string())),
    );
    Ok((corpus, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Replays a fixed list of draws, then repeats the last one.
    struct Scripted {
        draws: Vec<f64>,
        next: usize,
    }

    impl Scripted {
        fn new(draws: &[f64]) -> Self {
            Scripted {
                draws: draws.to_vec(),
                next: 0,
            }
        }
    }

    impl RandomStream for Scripted {
        fn next_unit(&mut self) -> f64 {
            let u = self.draws[self.next.min(self.draws.len() - 1)];
            self.next += 1;
            u
        }
    }

    fn uniform_table(chars: &str) -> CharFrequencyTable {
        CharFrequencyTable::from_weights(chars.chars().map(|c| (c, 1.0))).unwrap()
    }

    #[test]
    fn failing_gates_leave_line_unchanged() {
        let config = NoiseConfig::new(0.5, uniform_table("אבגד")).unwrap();
        let out = inject_line("אבגד", &config, &mut Scripted::new(&[0.99])).unwrap();
        assert_eq!(out.text, "אבגד");
        assert_eq!(out.events, InjectionEvents::default());
    }

    #[test]
    fn passing_gates_apply_steps_in_order() {
        // table {a,b,c,d} uniform; every draw 0.0:
        // delete -> weights uniform, index 0 -> "bcd"
        // insert -> char 'a' at position 0 -> "abcd"
        // swap   -> k = 1, position 0 -> "bacd"
        let config = NoiseConfig::new(0.5, uniform_table("abcd")).unwrap();
        let out = inject_line("abcd", &config, &mut Scripted::new(&[0.0])).unwrap();
        assert_eq!(out.text, "bacd");
        assert_eq!(out.text.chars().count(), 4);
        assert_eq!(
            out.events,
            InjectionEvents {
                deleted: true,
                inserted: true,
                swaps: 1,
                replacements: 0
            }
        );

        // explicit stream: gate, delete pick (0.8 -> 'd'), gate, insert
        // char (0.3 -> 'b'), position (0.99 -> end), gate, k (0.6 -> 2),
        // swap at 0, swap at 1
        let draws = [0.1, 0.8, 0.1, 0.3, 0.99, 0.1, 0.6, 0.0, 0.5];
        let out = inject_line("abcd", &config, &mut Scripted::new(&draws)).unwrap();
        // "abcd" -> "abc" -> "abcb" -> "bacb" -> "bcab"
        assert_eq!(out.text, "bcab");
        assert_eq!(out.events.swaps, 2);
    }

    #[test]
    fn deletion_prefers_frequent_characters() {
        let table = CharFrequencyTable::from_weights([('a', 0.9), ('b', 0.1)]).unwrap();
        let config = NoiseConfig::new(0.5, table).unwrap();
        // weights over "ab" are 0.9, 0.1; a draw of 0.85 still lands on 'a'
        let draws = [0.0, 0.85, 0.99];
        let out = inject_line("ab", &config, &mut Scripted::new(&draws)).unwrap();
        assert_eq!(out.text, "b");
    }

    #[test]
    fn period_specific_replacement() {
        let profile = ErrorProfile::from_rows([('ח', 'ה', 0.9)], 10, "t").unwrap();
        let config = NoiseConfig::new(0.5, uniform_table("ה")).unwrap().with_profile(profile);
        // three generic gates fail, then the entry gate (0.1 < 0.45) passes
        let draws = [0.99, 0.99, 0.99, 0.1, 0.5];
        let out = inject_line("ההה", &config, &mut Scripted::new(&draws)).unwrap();
        assert_eq!(out.text, "החה");
        assert_eq!(out.text.matches('ח').count(), 1);
        assert_eq!(out.events.replacements, 1);
    }

    #[test]
    fn short_lines_skip_deletion_and_swap() {
        let config = NoiseConfig::new(0.5, uniform_table("x")).unwrap();
        // delete gate passes on a single char but is skipped, insert gate
        // fails, swap gate passes but the line is still one char
        let out = inject_line("a", &config, &mut Scripted::new(&[0.0, 0.99, 0.0])).unwrap();
        assert_eq!(out.text, "a");
        assert!(!out.events.deleted);
        assert_eq!(out.events.swaps, 0);
    }

    #[test]
    fn noise_ratio_must_be_open_unit_interval() {
        let table = uniform_table("a");
        for nr in [0.0, 1.0, 1.2, -0.1] {
            assert!(matches!(NoiseConfig::new(nr, table.clone()), Err(Error::Argument(_))));
        }
        let mut config = NoiseConfig::new(0.2, table).unwrap();
        config.noise_ratio = 1.5;
        assert!(inject_line("abc", &config, &mut line_rng(0, 0)).is_err());
    }

    #[test]
    fn corpus_injection_is_deterministic_and_block_independent() {
        let lines: Vec<String> = (0..500).map(|i| format!("line number {i} here")).collect();
        let table = CharFrequencyTable::build(&lines).unwrap();
        let config = NoiseConfig::new(0.3, table).unwrap().with_seed(9);
        let (a, sa) = inject_corpus(&lines, &config).unwrap();
        let (b, sb) = inject_corpus(&lines, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        let mut blocks = Vec::new();
        for (k, chunk) in lines.chunks(37).enumerate() {
            blocks.extend(inject_lines(chunk, (k * 37) as u64, &config).unwrap());
        }
        let streamed: Vec<String> = blocks
            .into_iter()
            .map(|l| crate::text::normalize_line(&l.text))
            .collect();
        assert_eq!(streamed, a.noisy_lines());
        assert!(inject_corpus(&Vec::<String>::new(), &config).is_err());
    }
}
