//! Normalized Levenshtein similarity over case-folded text.

use crate::text::clean_whitespace;

/// Edit distance (insertions, deletions, substitutions) over Unicode code points.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    // keep the row over the shorter string
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }

    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (i, &lc) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &sc) in short.iter().enumerate() {
            let above = row[j + 1];
            let cost = usize::from(lc != sc);
            row[j + 1] = (diag + cost).min(above + 1).min(row[j] + 1);
            diag = above;
        }
    }
    row[short.len()]
}

/// Lowercase fold after whitespace cleaning.
pub fn fold(text: &str) -> Vec<char> {
    clean_whitespace(text).to_lowercase().chars().collect()
}

/// `1 - distance / max_len` over folded text; `1.0` when both fold to empty.
pub fn similarity(a: &str, b: &str) -> f64 {
    similarity_folded(&fold(a), &fold(b))
}

pub(crate) fn similarity_folded(a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    let distance = levenshtein_chars(a, b);
    1.0 - distance as f64 / longest as f64
}
