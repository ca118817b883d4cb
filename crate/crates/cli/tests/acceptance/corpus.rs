//! Synthetic closed-vocabulary corpora.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ONSETS: &[&str] = &["b", "c", "d", "f", "g", "h", "l", "m", "n", "p", "r", "s", "t", "v", "w", "br", "st", "tr"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ea", "ou"];
const CODAS: &[&str] = &["", "", "", "n", "r", "s", "t", "l", "nd"];

/// `n` distinct pseudo-words of two to ten letters.
pub fn vocabulary(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words = BTreeSet::new();
    while words.len() < n {
        let syllables = rng.random_range(1..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
            w.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
            w.push_str(CODAS[rng.random_range(0..CODAS.len())]);
        }
        if (2..=10).contains(&w.chars().count()) {
            words.insert(w);
        }
    }
    let mut words: Vec<String> = words.into_iter().collect();
    // Decouple frequency rank from alphabetical order.
    rand::seq::SliceRandom::shuffle(words.as_mut_slice(), &mut rng);
    words
}

/// Sentences from a first-order Markov chain with Zipf-distributed starts
/// and a handful of weighted successors per word. `chain` fixes the
/// transition table, `seed` the walk.
pub fn markov_text(vocab: &[String], n_tokens: usize, chain: u64, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(chain);
    let zipf = WeightedIndex::new((0..vocab.len()).map(|r| 1.0 / (r as f64 + 1.0))).unwrap();
    let successors: Vec<Vec<usize>> = (0..vocab.len())
        .map(|_| (0..6).map(|_| zipf.sample(&mut rng)).collect())
        .collect();
    let step = WeightedIndex::new([0.35, 0.2, 0.15, 0.12, 0.1, 0.08]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut out = String::new();
    let mut emitted = 0;
    while emitted < n_tokens {
        let len = rng.random_range(6..=14).min(n_tokens - emitted).max(1);
        let mut w = zipf.sample(&mut rng);
        for i in 0..len {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&vocab[w]);
            if i + 1 == len {
                out.push('.');
            }
            w = successors[w][step.sample(&mut rng)];
        }
        // The period is a token too.
        emitted += len + 1;
    }
    out.push('\n');
    out
}
