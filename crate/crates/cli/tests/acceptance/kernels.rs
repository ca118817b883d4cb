//! Distance kernel, candidate search and relaxed index lookups.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ocrpost_core::candidate_search::{brute_force_search, levenshtein, search, Lexicon, SearchOptions};
use ocrpost_core::ngram_index::NgramIndex;

/// Full-matrix edit distance over Unicode scalar values.
fn naive_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

const WIDE: &[char] = &[
    'a', 'b', 'c', 'e', 'l', 'm', 'n', 'r', 'u', 'é', 'è', 'ß', 'ø', 'ж', 'я', 'λ', 'ω', '中', '文', 'ア', '😀', '🚀',
    '\u{0301}', '1', '0', ' ',
];
const NARROW: &[char] = &['a', 'b', 'é'];

fn random_string(rng: &mut ChaCha8Rng, max_len: usize) -> String {
    let alphabet = if rng.random_bool(0.5) { WIDE } else { NARROW };
    let len = rng.random_range(0..=max_len);
    (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
}

pub fn distance_kernel() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut strings = Vec::with_capacity(10_001);
    for _ in 0..10_001 {
        strings.push(random_string(&mut rng, 15));
    }
    let mut mismatches = 0;
    let mut asym = 0;
    for pair in strings.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let d = levenshtein(a, b);
        if d != naive_levenshtein(a, b) {
            mismatches += 1;
        }
        if d != levenshtein(b, a) {
            asym += 1;
        }
    }
    let mut triangle = 0;
    for t in strings.windows(3) {
        let (a, b, c) = (&t[0], &t[1], &t[2]);
        if levenshtein(a, c) > levenshtein(a, b) + levenshtein(b, c) {
            triangle += 1;
        }
    }
    if mismatches + asym + triangle > 0 {
        return Err(format!(
            "{mismatches} oracle mismatches, {asym} asymmetric pairs, {triangle} triangle violations"
        ));
    }
    Ok("10000 pairs match the oracle; symmetry and triangle inequality hold on 9999 triples".into())
}

pub fn candidate_search_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let letters: Vec<char> = "abcdefghijklmnoprstuéö".chars().collect();
    let mut terms = BTreeSet::new();
    while terms.len() < 50_000 {
        let len = rng.random_range(2..=12);
        let w: String = (0..len).map(|_| letters[rng.random_range(0..letters.len())]).collect();
        terms.insert(w);
    }
    let terms: Vec<String> = terms.into_iter().collect();
    let lexicon = Lexicon::from_terms("fixture", terms.iter().map(String::as_str));

    let mut queries = Vec::with_capacity(200);
    for q in 0..200 {
        let s = if q % 2 == 0 {
            // Mutated lexicon term: lands near many neighbours.
            let mut chars: Vec<char> = terms[rng.random_range(0..terms.len())].chars().collect();
            for _ in 0..rng.random_range(1..=3) {
                let pos = rng.random_range(0..chars.len());
                match rng.random_range(0..3) {
                    0 => chars[pos] = letters[rng.random_range(0..letters.len())],
                    1 if chars.len() > 1 => {
                        chars.remove(pos);
                    }
                    _ => chars.insert(pos, letters[rng.random_range(0..letters.len())]),
                }
            }
            chars.into_iter().collect()
        } else {
            let len = rng.random_range(1..=10);
            (0..len).map(|_| letters[rng.random_range(0..letters.len())]).collect::<String>()
        };
        queries.push(s);
    }

    let mut total = 0;
    let mut bad = Vec::new();
    for delta in 1..=3 {
        for q in &queries {
            let fast = search(q, &lexicon, delta, SearchOptions::default()).map_err(|e| e.to_string())?;
            let slow = brute_force_search(q, &lexicon, delta, false);
            let a: BTreeSet<(usize, &str)> = fast.candidates.iter().map(|c| (c.distance, c.term.as_str())).collect();
            let b: BTreeSet<(usize, &str)> = slow.candidates.iter().map(|c| (c.distance, c.term.as_str())).collect();
            total += a.len();
            if a != b {
                bad.push(format!("{q:?} at delta {delta}"));
            }
        }
    }
    if !bad.is_empty() {
        return Err(format!("{} queries differ, e.g. {}", bad.len(), bad[0]));
    }
    Ok(format!("600 queries agree ({total} candidates in total)"))
}

pub fn relaxed_index() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vocab: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
    let mut records: Vec<(Vec<usize>, u64)> = Vec::with_capacity(100_000);
    let mut file = String::new();
    for _ in 0..100_000 {
        // Skewed choice so masked lookups aggregate many records.
        let gram: Vec<usize> = (0..5)
            .map(|_| {
                let r: f64 = rng.random();
                ((r * r) * vocab.len() as f64) as usize
            })
            .collect();
        let count = rng.random_range(1..=1000u64);
        let words: Vec<&str> = gram.iter().map(|&w| vocab[w].as_str()).collect();
        let _ = writeln!(file, "{}\t{count}", words.join(" "));
        records.push((gram, count));
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("5gm.txt");
    std::fs::write(&path, &file).map_err(|e| e.to_string())?;
    let index = NgramIndex::from_files(&[&path], 5).map_err(|e| e.to_string())?;

    let mut mismatches = 0;
    let mut below_exact = 0;
    let mut nonzero = 0;
    for q in 0..1000 {
        let gram: Vec<usize> = if q % 4 == 3 {
            // Random tuple, often unattested.
            (0..5).map(|_| rng.random_range(0..vocab.len())).collect()
        } else {
            records[rng.random_range(0..records.len())].0.clone()
        };
        let wild = rng.random_range(0..5);
        let words: Vec<&str> = gram.iter().map(|&w| vocab[w].as_str()).collect();
        let oracle: u64 = records
            .iter()
            .filter(|(g, _)| (0..5).all(|p| p == wild || g[p] == gram[p]))
            .map(|(_, c)| c)
            .sum();
        let relaxed = index.relaxed_freq(&words, wild).map_err(|e| e.to_string())?;
        let exact = index.freq(&words).map_err(|e| e.to_string())?;
        if relaxed != oracle {
            mismatches += 1;
        }
        if relaxed < exact {
            below_exact += 1;
        }
        if relaxed > 0 {
            nonzero += 1;
        }
    }
    if mismatches + below_exact > 0 {
        return Err(format!("{mismatches} oracle mismatches, {below_exact} queries with relaxed < exact"));
    }
    Ok(format!("1000 masked queries match the scan ({nonzero} non-zero); relaxed >= exact"))
}
