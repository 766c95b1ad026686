//! Checks the engine's similarity against a separately written full-matrix
//! edit distance.

use edubot_core::similarity::{fold, levenshtein, similarity};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Textbook Wagner-Fischer with the whole (m+1) x (n+1) table.
fn oracle_distance(a: &[char], b: &[char]) -> usize {
    let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in table.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in table[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let substitution = table[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            table[i][j] = substitution.min(table[i - 1][j] + 1).min(table[i][j - 1] + 1);
        }
    }
    table[a.len()][b.len()]
}

/// Similarity as the exact fraction (longest - distance) / longest.
fn oracle_ratio(a: &str, b: &str) -> (usize, usize) {
    let fa = fold(a);
    let fb = fold(b);
    let longest = fa.len().max(fb.len());
    if longest == 0 {
        return (1, 1);
    }
    (longest - oracle_distance(&fa, &fb), longest)
}

fn random_string(rng: &mut ChaCha8Rng) -> String {
    const ALPHABET: &[char] = &['a', 'b', 'c', 'A', 'B', ' ', '\t', 'é', 'É', 'ß', '?', '日', 'z'];
    let len = rng.random_range(0..=32);
    (0..len).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())]).collect()
}

#[test]
fn frozen_examples() {
    // kitten -> sitting: k->s, e->i, insert g
    assert_eq!(oracle_ratio("kitten", "sitting"), (4, 7));
    assert_eq!(similarity("kitten", "sitting"), 1.0 - 3.0 / 7.0);
    // one deletion against an 18-char prompt
    assert_eq!(oracle_ratio("How are you doing", "How are you doing?"), (17, 18));
    assert_eq!(similarity("How are you doing", "How are you doing?"), 1.0 - 1.0 / 18.0);
    assert_eq!(oracle_ratio("", "x"), (0, 1));
}

#[test]
fn thousand_random_pairs_match_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..1000 {
        let a = random_string(&mut rng);
        let b = random_string(&mut rng);
        let (num, den) = oracle_ratio(&a, &b);
        let got = similarity(&a, &b);
        let expected = num as f64 / den as f64;
        assert!((got - expected).abs() < 1e-12, "{a:?} {b:?}: {got} vs {num}/{den}");
        assert_eq!(
            levenshtein(&a, &b),
            oracle_distance(&a.chars().collect::<Vec<_>>(), &b.chars().collect::<Vec<_>>())
        );
    }
}

proptest! {
    #[test]
    fn distance_matches_oracle(a in "\\PC{0,32}", b in "\\PC{0,32}") {
        let ca: Vec<char> = a.chars().collect();
        let cb: Vec<char> = b.chars().collect();
        prop_assert_eq!(levenshtein(&a, &b), oracle_distance(&ca, &cb));
    }

    #[test]
    fn similarity_matches_oracle(a in "[a-dA-D ]{0,32}", b in "[a-dA-D ]{0,32}") {
        let (num, den) = oracle_ratio(&a, &b);
        prop_assert!((similarity(&a, &b) - num as f64 / den as f64).abs() < 1e-12);
    }
}
