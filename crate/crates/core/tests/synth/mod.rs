//! Synthetic Hebrew-like text shared by the integration tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LETTERS: &str = "אבגדהוזחטיכלמנסעפצקרשת";
pub const FINALS: &str = "ךםןףץ";

/// `n` distinct words of three to six letters.
pub fn vocabulary(n: usize, seed: u64) -> Vec<String> {
    let letters: Vec<char> = LETTERS.chars().collect();
    let finals: Vec<char> = FINALS.chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let len = rng.gen_range(3..=6);
        let mut w: String = (0..len).map(|_| letters[rng.gen_range(0..letters.len())]).collect();
        if rng.gen_bool(0.2) {
            w.pop();
            w.push(finals[rng.gen_range(0..finals.len())]);
        }
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Sentences of four to eight words drawn with Zipf-like weights over
/// `vocab` order.
pub fn sentences(vocab: &[String], n: usize, seed: u64) -> Vec<String> {
    let weights: Vec<f64> = (0..vocab.len()).map(|r| 1.0 / (r as f64 + 1.0).powf(0.9)).collect();
    let total: f64 = weights.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(4..=8);
            (0..len)
                .map(|_| {
                    let mut t = rng.gen::<f64>() * total;
                    let mut i = 0;
                    while i + 1 < weights.len() && t >= weights[i] {
                        t -= weights[i];
                        i += 1;
                    }
                    vocab[i].as_str()
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}
