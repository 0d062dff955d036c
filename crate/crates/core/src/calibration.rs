//! Fitting the placeholder cost `alpha` to pairwise human preferences.
//!
//! Each record pairs a conventional transcript `A` (no placeholders) with an
//! abstaining transcript `B` of the same audio, plus how many listeners
//! preferred `A`, preferred `B`, or could not decide. Under a Bradley–Terry
//! model the probability of preferring `B` is the logistic of the RAS gap
//! `dR = R(B) - R(A)`:
//!
//! ```text
//! pref  = -1/K * sum_i [ kB/s * ln sigma(dR_i) + kA/s * ln(1 - sigma(dR_i)) ]
//! tie   =  1/K * sum_i   kC/s * dR_i^2
//! total = pref + lambda * tie
//! ```
//!
//! `alpha` is chosen to minimize `total` over (0, 1): a coarse grid at step
//! 0.01 followed by golden-section refinement around the best grid point.
//! The objective is only piecewise smooth (the optimal alignment can switch
//! as `alpha` moves), so no derivatives are used.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{AlignError, Alpha};
use crate::metric::score_utterance;
use crate::text::{Tokenizer, WordSeq};

/// Default strength of the indifference term.
pub const DEFAULT_LAMBDA: f64 = 0.1;

const GRID_LO: f64 = 0.01;
const GRID_HI: f64 = 0.99;
const GRID_STEPS: usize = 99;
const REFINE_TOL: f64 = 1e-4;
const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("no preference records")]
    EmptyRecords,
    #[error("record {id}: no votes (k_a + k_b + k_c = 0)")]
    NoVotes { id: String },
    #[error("record {id}: conventional transcript contains a placeholder")]
    PlaceholderInPlain { id: String },
    #[error("record {id}: {source}")]
    Align { id: String, source: AlignError },
    #[error("lambda must be a finite nonnegative number, got {0}")]
    InvalidLambda(f64),
}

/// One listening-test item as read from disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub id: String,
    #[serde(rename = "ref")]
    pub reference: String,
    /// Conventional transcript, no placeholders.
    #[serde(rename = "hyp_a")]
    pub hyp_plain: String,
    /// Abstaining transcript.
    #[serde(rename = "hyp_b")]
    pub hyp_abstain: String,
    pub k_a: u32,
    pub k_b: u32,
    pub k_c: u32,
}

impl PreferenceRecord {
    pub fn votes(&self) -> u32 {
        self.k_a + self.k_b + self.k_c
    }
}

/// A validated, tokenized record.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRecord {
    pub id: String,
    pub reference: WordSeq,
    pub plain: WordSeq,
    pub abstain: WordSeq,
    pub k_a: u32,
    pub k_b: u32,
    pub k_c: u32,
}

impl PreparedRecord {
    pub fn prepare(record: &PreferenceRecord, tokenizer: &Tokenizer) -> Result<Self, CalibrationError> {
        let id = record.id.clone();
        if record.votes() == 0 {
            return Err(CalibrationError::NoVotes { id });
        }
        let plain = tokenizer.tokenize(&record.hyp_plain);
        if plain.contains_placeholder() {
            return Err(CalibrationError::PlaceholderInPlain { id });
        }
        let prepared = PreparedRecord {
            id,
            reference: tokenizer.tokenize(&record.reference),
            plain,
            abstain: tokenizer.tokenize(&record.hyp_abstain).normalized(),
            k_a: record.k_a,
            k_b: record.k_b,
            k_c: record.k_c,
        };
        // Surface reference problems now rather than inside the optimizer.
        prepared.try_delta_ras(Alpha::default())?;
        Ok(prepared)
    }

    fn votes(&self) -> f64 {
        (self.k_a + self.k_b + self.k_c) as f64
    }

    fn try_delta_ras(&self, alpha: Alpha) -> Result<f64, CalibrationError> {
        let wrap = |source| CalibrationError::Align {
            id: self.id.clone(),
            source,
        };
        let b = score_utterance(&self.reference, &self.abstain, alpha).map_err(wrap)?;
        let a = score_utterance(&self.reference, &self.plain, alpha).map_err(wrap)?;
        Ok(b.ras - a.ras)
    }

    /// `R(ref, B) - R(ref, A)`.
    pub fn delta_ras(&self, alpha: Alpha) -> f64 {
        self.try_delta_ras(alpha).expect("validated in prepare")
    }
}

/// Tokenizes and validates every record.
pub fn prepare_records(
    records: &[PreferenceRecord],
    tokenizer: &Tokenizer,
) -> Result<Vec<PreparedRecord>, CalibrationError> {
    if records.is_empty() {
        return Err(CalibrationError::EmptyRecords);
    }
    records
        .iter()
        .map(|r| PreparedRecord::prepare(r, tokenizer))
        .collect()
}

/// RAS gap of one raw record.
pub fn delta_ras(
    record: &PreferenceRecord,
    tokenizer: &Tokenizer,
    alpha: Alpha,
) -> Result<f64, CalibrationError> {
    PreparedRecord::prepare(record, tokenizer)?.try_delta_ras(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossParts {
    pub total: f64,
    pub pref: f64,
    pub tie: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn check_lambda(lambda: f64) -> Result<(), CalibrationError> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(CalibrationError::InvalidLambda(lambda))
    }
}

/// Preference and indifference losses at a fixed `alpha`.
pub fn preference_loss(
    records: &[PreparedRecord],
    alpha: Alpha,
    lambda: f64,
) -> Result<LossParts, CalibrationError> {
    if records.is_empty() {
        return Err(CalibrationError::EmptyRecords);
    }
    check_lambda(lambda)?;
    let deltas = deltas_at(records, alpha);
    Ok(loss_from_deltas(records, &deltas, lambda))
}

fn deltas_at(records: &[PreparedRecord], alpha: Alpha) -> Vec<f64> {
    records.par_iter().map(|r| r.delta_ras(alpha)).collect()
}

fn loss_from_deltas(records: &[PreparedRecord], deltas: &[f64], lambda: f64) -> LossParts {
    let mut pref = 0.0;
    let mut tie = 0.0;
    for (r, &d) in records.iter().zip(deltas) {
        let s = r.votes();
        let p = sigmoid(d).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        pref -= r.k_b as f64 / s * p.ln() + r.k_a as f64 / s * (1.0 - p).ln();
        tie += r.k_c as f64 / s * d * d;
    }
    let k = records.len() as f64;
    let (pref, tie) = (pref / k, tie / k);
    LossParts {
        total: pref + lambda * tie,
        pref,
        tie,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationWarning {
    /// The minimizer sits on the edge of the search interval.
    AtBoundary,
    /// Every record has `dR = 0` at every grid point; alpha is unidentifiable.
    FlatObjective,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub alpha_star: f64,
    pub lambda: f64,
    pub total_loss: f64,
    pub pref_loss: f64,
    pub tie_loss: f64,
    /// Mean of `dR_i` at `alpha_star`.
    pub mean_delta_ras: f64,
    /// Share of all votes that were "can't decide".
    pub tie_rate: f64,
    pub records: usize,
    pub warnings: Vec<CalibrationWarning>,
    /// `(alpha, total loss)` on the coarse grid.
    pub loss_curve: Vec<(f64, f64)>,
}

/// Minimizes `f` on `[lo, hi]` until the bracket is narrower than `tol`.
///
/// Returns the best point evaluated.
pub fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = if f2 < f1 { (x2, f2) } else { (x1, f1) };
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
            if f1 < best.1 {
                best = (x1, f1);
            }
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
            if f2 < best.1 {
                best = (x2, f2);
            }
        }
    }
    best
}

fn grid() -> impl Iterator<Item = f64> {
    (1..=GRID_STEPS).map(|i| i as f64 / 100.0)
}

/// Finds the `alpha` in (0, 1) minimizing the total loss.
pub fn fit_alpha(records: &[PreparedRecord], lambda: f64) -> Result<CalibrationResult, CalibrationError> {
    if records.is_empty() {
        return Err(CalibrationError::EmptyRecords);
    }
    check_lambda(lambda)?;
    let alpha = |x: f64| Alpha::new(x).expect("search stays inside (0, 1)");

    let mut loss_curve = Vec::with_capacity(GRID_STEPS);
    let mut flat = true;
    for x in grid() {
        let deltas = deltas_at(records, alpha(x));
        flat &= deltas.iter().all(|&d| d == 0.0);
        loss_curve.push((x, loss_from_deltas(records, &deltas, lambda).total));
    }
    let best = loss_curve
        .iter()
        .enumerate()
        .fold(0, |b, (i, &(_, l))| if l < loss_curve[b].1 { i } else { b });

    let mut warnings = Vec::new();
    let alpha_star = if flat {
        warnings.push(CalibrationWarning::FlatObjective);
        loss_curve[best].0
    } else {
        let lo = if best == 0 {
            GRID_LO
        } else {
            loss_curve[best - 1].0
        };
        let hi = loss_curve.get(best + 1).map_or(GRID_HI, |p| p.0);
        let objective = |x: f64| loss_from_deltas(records, &deltas_at(records, alpha(x)), lambda).total;
        let (x, fx) = golden_section_min(objective, lo, hi, REFINE_TOL);
        if fx <= loss_curve[best].1 {
            x
        } else {
            loss_curve[best].0
        }
    };
    if !(GRID_LO + 2.0 * REFINE_TOL..=GRID_HI - 2.0 * REFINE_TOL).contains(&alpha_star) {
        warnings.push(CalibrationWarning::AtBoundary);
    }

    let deltas = deltas_at(records, alpha(alpha_star));
    let parts = loss_from_deltas(records, &deltas, lambda);
    let ties: u64 = records.iter().map(|r| r.k_c as u64).sum();
    let votes: u64 = records.iter().map(|r| (r.k_a + r.k_b + r.k_c) as u64).sum();
    Ok(CalibrationResult {
        alpha_star,
        lambda,
        total_loss: parts.total,
        pref_loss: parts.pref,
        tie_loss: parts.tie,
        mean_delta_ras: deltas.iter().sum::<f64>() / deltas.len() as f64,
        tie_rate: ties as f64 / votes as f64,
        records: records.len(),
        warnings,
        loss_curve,
    })
}
