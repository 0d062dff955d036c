//! Reliability-aware score: usefulness minus cost, per utterance and pooled.
//!
//! For a reference of `N` words and a hypothesis aligned to it with `C`
//! matches at weighted distance `g`:
//!
//! ```text
//! usefulness = C / N
//! cost       = g / N
//! ras        = usefulness - cost
//! ```
//!
//! Without placeholders this is `1 - (2(S + D) + I) / N`, a strictly
//! decreasing function of the WER error count.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::alignment::{weighted_edit_distance_fast, wer_align, AlignError, Alpha, WeightedCost};
use crate::text::WordSeq;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RasScore {
    pub ras: f64,
    pub usefulness: f64,
    pub cost: f64,
    /// Plain WER; `None` when the hypothesis contains a placeholder.
    pub wer: Option<f64>,
    pub n_ref: usize,
    pub matches: usize,
    pub distance: WeightedCost,
    /// Placeholders after merging runs.
    pub ph_count: usize,
}

/// Scores one utterance. Placeholder runs in `hypothesis` are merged first.
pub fn score_utterance(
    reference: &WordSeq,
    hypothesis: &WordSeq,
    alpha: Alpha,
) -> Result<RasScore, AlignError> {
    let hyp = hypothesis.normalized();
    let aligned = weighted_edit_distance_fast(reference, &hyp, alpha)?;
    let n = reference.len();
    let wer = if hyp.contains_placeholder() {
        None
    } else {
        Some(wer_align(reference, &hyp)?.0.wer())
    };
    Ok(from_parts(
        n,
        aligned.matches,
        aligned.weighted,
        alpha,
        wer,
        hyp.placeholder_count(),
    ))
}

fn from_parts(
    n: usize,
    matches: usize,
    distance: WeightedCost,
    alpha: Alpha,
    wer: Option<f64>,
    ph_count: usize,
) -> RasScore {
    let nf = n as f64;
    let usefulness = matches as f64 / nf;
    // Written so that an all-placeholder hypothesis costs exactly alpha.
    let cost = distance.unit as f64 / nf + alpha.get() * (distance.abstain as f64 / nf);
    RasScore {
        ras: usefulness - cost,
        usefulness,
        cost,
        wer,
        n_ref: n,
        matches,
        distance,
        ph_count,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanScores {
    pub ras: f64,
    pub usefulness: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub count: usize,
    /// Pooled counts: `sum C / sum N` and `sum g / sum N`.
    pub micro: RasScore,
    /// Unweighted means of the per-utterance values.
    #[serde(rename = "macro")]
    pub macro_avg: MeanScores,
}

impl CorpusSummary {
    /// `None` for an empty slice.
    pub fn from_scores(scores: &[RasScore], alpha: Alpha) -> Option<CorpusSummary> {
        if scores.is_empty() {
            return None;
        }
        let n: usize = scores.iter().map(|s| s.n_ref).sum();
        let matches: usize = scores.iter().map(|s| s.matches).sum();
        let distance: WeightedCost = scores.iter().map(|s| s.distance).sum();
        let ph_count: usize = scores.iter().map(|s| s.ph_count).sum();
        let wer = scores
            .iter()
            .map(|s| s.wer.map(|w| (w * s.n_ref as f64).round()))
            .sum::<Option<f64>>()
            .map(|errors| errors / n as f64);
        let k = scores.len() as f64;
        let mean = |f: fn(&RasScore) -> f64| scores.iter().map(f).sum::<f64>() / k;
        Some(CorpusSummary {
            count: scores.len(),
            micro: from_parts(n, matches, distance, alpha, wer, ph_count),
            macro_avg: MeanScores {
                ras: mean(|s| s.ras),
                usefulness: mean(|s| s.usefulness),
                cost: mean(|s| s.cost),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorpusScoreError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("{} row(s) failed to score, first at row {}: {}", .0.len(), .0[0].0, .0[0].1)]
    Rows(Vec<(usize, AlignError)>),
}

/// Scores every `(reference, hypothesis)` pair and pools the results.
///
/// Rows are scored in parallel; the summary does not depend on scheduling.
/// All failing rows are reported together, by index.
pub fn score_corpus(pairs: &[(WordSeq, WordSeq)], alpha: Alpha) -> Result<CorpusSummary, CorpusScoreError> {
    if pairs.is_empty() {
        return Err(CorpusScoreError::EmptyCorpus);
    }
    let results: Vec<_> = pairs
        .par_iter()
        .map(|(r, h)| score_utterance(r, h, alpha))
        .collect();
    let mut scores = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(s) => scores.push(s),
            Err(e) => failures.push((i, e)),
        }
    }
    if !failures.is_empty() {
        return Err(CorpusScoreError::Rows(failures));
    }
    Ok(CorpusSummary::from_scores(&scores, alpha).expect("nonempty"))
}
