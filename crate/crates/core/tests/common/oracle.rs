//! Test-only oracles and generators. Nothing here calls the aligners.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ras_core::{Symbol, WordSeq};

pub const TOL: f64 = 1e-9;

/// Minimum alignment cost and, among alignments within `TOL` of it, the most
/// matches, found by walking every monotone alignment one by one.
///
/// Steps: delete a reference word (1); a lexical hypothesis word is inserted
/// (1), matched (0), or substituted (1); a placeholder is inserted (alpha) or
/// covers any non-empty run of reference words (alpha per word).
pub fn brute_force(reference: &WordSeq, hypothesis: &WordSeq, alpha: f64) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0usize);
    walk(
        reference.symbols(),
        hypothesis.symbols(),
        0,
        0,
        0.0,
        0,
        alpha,
        &mut best,
    );
    best
}

#[allow(clippy::too_many_arguments)]
fn walk(
    r: &[Symbol],
    h: &[Symbol],
    i: usize,
    j: usize,
    cost: f64,
    matches: usize,
    alpha: f64,
    best: &mut (f64, usize),
) {
    if i == r.len() && j == h.len() {
        if cost < best.0 - TOL {
            *best = (cost, matches);
        } else if (cost - best.0).abs() <= TOL && matches > best.1 {
            best.1 = matches;
        }
        return;
    }
    if i < r.len() {
        walk(r, h, i + 1, j, cost + 1.0, matches, alpha, best);
    }
    if j < h.len() {
        match &h[j] {
            Symbol::Word(_) => {
                walk(r, h, i, j + 1, cost + 1.0, matches, alpha, best);
                if i < r.len() {
                    if r[i] == h[j] {
                        walk(r, h, i + 1, j + 1, cost, matches + 1, alpha, best);
                    } else {
                        walk(r, h, i + 1, j + 1, cost + 1.0, matches, alpha, best);
                    }
                }
            }
            Symbol::Placeholder => {
                walk(r, h, i, j + 1, cost + alpha, matches, alpha, best);
                for end in i + 1..=r.len() {
                    walk(
                        r,
                        h,
                        end,
                        j + 1,
                        cost + alpha * (end - i) as f64,
                        matches,
                        alpha,
                        best,
                    );
                }
            }
        }
    }
}

/// Plain Levenshtein distance by the textbook two-row recurrence.
pub fn levenshtein(r: &[Symbol], h: &[Symbol]) -> usize {
    let mut prev: Vec<usize> = (0..=h.len()).collect();
    for i in 1..=r.len() {
        let mut cur = vec![i; h.len() + 1];
        for j in 1..=h.len() {
            let sub = prev[j - 1] + usize::from(r[i - 1] != h[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        prev = cur;
    }
    prev[h.len()]
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const ALPHABET: [&str; 3] = ["a", "b", "c"];

pub fn random_reference(rng: &mut impl Rng, max_len: usize) -> WordSeq {
    let n = rng.random_range(1..=max_len);
    (0..n)
        .map(|_| Symbol::Word(ALPHABET[rng.random_range(0..3)].into()))
        .collect()
}

/// Hypothesis over the same alphabet, each position a placeholder with
/// probability `ph_prob`, runs merged.
pub fn random_hypothesis(rng: &mut impl Rng, max_len: usize, ph_prob: f64) -> WordSeq {
    let m = rng.random_range(0..=max_len);
    let raw: WordSeq = (0..m)
        .map(|_| {
            if rng.random_bool(ph_prob) {
                Symbol::Placeholder
            } else {
                Symbol::Word(ALPHABET[rng.random_range(0..3)].into())
            }
        })
        .collect();
    raw.normalized()
}

/// Realistic-length pair: reference of about `len` words from a larger
/// vocabulary, hypothesis corrupted by substitutions, deletions, insertions,
/// and placeholders at roughly `ph_density`.
pub fn random_utterance(rng: &mut impl Rng, len: usize, ph_density: f64) -> (WordSeq, WordSeq) {
    let word = |rng: &mut dyn rand::RngCore| Symbol::Word(format!("w{}", rng.random_range(0..200)));
    let reference: WordSeq = (0..len).map(|_| word(rng)).collect();
    let mut hyp = Vec::new();
    for r in reference.iter() {
        let u: f64 = rng.random();
        if u < ph_density {
            hyp.push(Symbol::Placeholder);
        } else if u < ph_density + 0.08 {
            hyp.push(word(rng));
        } else if u < ph_density + 0.11 {
        } else {
            hyp.push(r.clone());
        }
        if rng.random_bool(0.03) {
            hyp.push(word(rng));
        }
    }
    (reference, WordSeq::new(hyp).normalized())
}
