//! Placeholder-aware weighted edit distance and plain WER alignment.
//!
//! A placeholder in the hypothesis can stand in for a contiguous span of one
//! or more reference words at `alpha` per word ([`AlignOp::PhAbsorb`]), or for
//! nothing at all at a flat `alpha` ([`AlignOp::PhInsert`]). Lexical words
//! align with the usual match / substitute / insert / delete operations at
//! unit cost. Without placeholders the distance is the Levenshtein distance.
//!
//! Both the textbook table (which scans every absorb start for each cell) and
//! the prefix-minimum variant are provided. They share the cell ordering and
//! tie-breaking below and return identical results; the fast one is what the
//! scorer uses.
//!
//! Ordering of candidate alignments:
//!
//! 1. lower cost wins;
//! 2. at equal cost, more exact matches win;
//! 3. remaining ties are broken reading the trace left to right, preferring a
//!    diagonal step (match, substitute, absorb) over a deletion over an
//!    insertion, and a shorter absorb span over a longer one.
//!
//! The table is filled from the end of both sequences so that rule 3 can be
//! applied while walking the trace forward.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{Symbol, WordSeq};

/// Abstention cost calibrated from human preference judgments.
pub const DEFAULT_ALPHA: f64 = 0.5064;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlignError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("reference contains a placeholder at position {index}")]
    RefContainsPlaceholder { index: usize },
    #[error("placeholder at position {index} in plain WER alignment")]
    PlaceholderInPlainAlignment { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("alpha must lie strictly between 0 and 1, got {0}")]
pub struct AlphaOutOfRange(pub f64);

/// Cost factor for placeholder operations, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Alpha, AlphaOutOfRange> {
        if value > 0.0 && value < 1.0 {
            Ok(Alpha(value))
        } else {
            Err(AlphaOutOfRange(value))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Alpha {
    fn default() -> Self {
        Alpha(DEFAULT_ALPHA)
    }
}

impl TryFrom<f64> for Alpha {
    type Error = AlphaOutOfRange;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Alpha::new(value)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One step of an alignment. Indices are 0-based positions in the reference
/// and hypothesis passed to the aligner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AlignOp {
    Match {
        ref_idx: usize,
        hyp_idx: usize,
    },
    Substitute {
        ref_idx: usize,
        hyp_idx: usize,
    },
    Delete {
        ref_idx: usize,
    },
    InsertWord {
        hyp_idx: usize,
    },
    /// Placeholder at `hyp_idx` covers `ref[ref_start..ref_end]`, never empty.
    PhAbsorb {
        ref_start: usize,
        ref_end: usize,
        hyp_idx: usize,
    },
    /// Placeholder at `hyp_idx` aligned to no reference word.
    PhInsert {
        hyp_idx: usize,
    },
}

impl AlignOp {
    /// `(unit operations, placeholder units)` charged by this step.
    pub fn cost_units(&self) -> WeightedCost {
        match *self {
            AlignOp::Match { .. } => WeightedCost::ZERO,
            AlignOp::Substitute { .. } | AlignOp::Delete { .. } | AlignOp::InsertWord { .. } => {
                WeightedCost { unit: 1, abstain: 0 }
            }
            AlignOp::PhAbsorb {
                ref_start, ref_end, ..
            } => WeightedCost {
                unit: 0,
                abstain: ref_end - ref_start,
            },
            AlignOp::PhInsert { .. } => WeightedCost { unit: 0, abstain: 1 },
        }
    }

    pub fn cost(&self, alpha: Alpha) -> f64 {
        self.cost_units().value(alpha)
    }

    pub fn is_match(&self) -> bool {
        matches!(self, AlignOp::Match { .. })
    }

    /// Reference span `[start, end)` consumed by this step.
    pub fn ref_span(&self) -> Option<(usize, usize)> {
        match *self {
            AlignOp::Match { ref_idx, .. }
            | AlignOp::Substitute { ref_idx, .. }
            | AlignOp::Delete { ref_idx } => Some((ref_idx, ref_idx + 1)),
            AlignOp::PhAbsorb {
                ref_start, ref_end, ..
            } => Some((ref_start, ref_end)),
            AlignOp::InsertWord { .. } | AlignOp::PhInsert { .. } => None,
        }
    }

    pub fn hyp_idx(&self) -> Option<usize> {
        match *self {
            AlignOp::Match { hyp_idx, .. }
            | AlignOp::Substitute { hyp_idx, .. }
            | AlignOp::InsertWord { hyp_idx }
            | AlignOp::PhAbsorb { hyp_idx, .. }
            | AlignOp::PhInsert { hyp_idx } => Some(hyp_idx),
            AlignOp::Delete { .. } => None,
        }
    }
}

/// Alignment cost split into unit-cost operations and placeholder units, so
/// that the real-valued cost is `unit + alpha * abstain`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeightedCost {
    pub unit: usize,
    pub abstain: usize,
}

impl WeightedCost {
    pub const ZERO: WeightedCost = WeightedCost { unit: 0, abstain: 0 };

    pub fn value(self, alpha: Alpha) -> f64 {
        self.unit as f64 + alpha.get() * self.abstain as f64
    }
}

impl std::ops::Add for WeightedCost {
    type Output = WeightedCost;

    fn add(self, rhs: WeightedCost) -> WeightedCost {
        WeightedCost {
            unit: self.unit + rhs.unit,
            abstain: self.abstain + rhs.abstain,
        }
    }
}

impl std::iter::Sum for WeightedCost {
    fn sum<I: Iterator<Item = WeightedCost>>(iter: I) -> Self {
        iter.fold(WeightedCost::ZERO, |a, b| a + b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// Minimum weighted edit distance.
    pub cost: f64,
    pub weighted: WeightedCost,
    /// Number of [`AlignOp::Match`] steps in `trace`.
    pub matches: usize,
    pub trace: Vec<AlignOp>,
}

/// Substitution, deletion, insertion, and hit counts of a plain alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WerCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub hits: usize,
    /// Reference length.
    pub n: usize,
}

impl WerCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn wer(&self) -> f64 {
        self.errors() as f64 / self.n as f64
    }
}

/// Score of a partial alignment, compared with [`Key::cmp_with`].
///
/// Placeholder units are signed because the prefix-minimum variant stores
/// them shifted by the row index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Key {
    unit: i64,
    abstain: i64,
    matches: i64,
}

impl Key {
    const ZERO: Key = Key {
        unit: 0,
        abstain: 0,
        matches: 0,
    };

    fn plus(self, unit: i64, abstain: i64, matches: i64) -> Key {
        Key {
            unit: self.unit + unit,
            abstain: self.abstain + abstain,
            matches: self.matches + matches,
        }
    }

    /// `Less` means `self` is the better alignment.
    fn cmp_with(self, other: Key, alpha: f64) -> Ordering {
        let diff = (self.unit - other.unit) as f64 + alpha * (self.abstain - other.abstain) as f64;
        if diff < 0.0 {
            Ordering::Less
        } else if diff > 0.0 {
            Ordering::Greater
        } else {
            other.matches.cmp(&self.matches)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    End,
    Diag,
    Delete,
    Insert,
    /// Absorb up to (exclusive) this reference index.
    Absorb(usize),
}

/// Column-major DP table over suffixes: cell `(i, j)` holds the best
/// alignment of `ref[i..]` with `hyp[j..]`.
struct Table {
    rows: usize,
    keys: Vec<Key>,
    steps: Vec<Step>,
}

impl Table {
    fn new(n: usize, m: usize) -> Self {
        let size = (n + 1) * (m + 1);
        Table {
            rows: n + 1,
            keys: vec![Key::ZERO; size],
            steps: vec![Step::End; size],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        j * self.rows + i
    }

    #[inline]
    fn key(&self, i: usize, j: usize) -> Key {
        self.keys[self.at(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, key: Key, step: Step) {
        let at = self.at(i, j);
        self.keys[at] = key;
        self.steps[at] = step;
    }
}

/// Candidates must be offered in preference order; a later one only wins if
/// strictly better.
struct Best {
    key: Key,
    step: Step,
}

impl Best {
    fn first(key: Key, step: Step) -> Self {
        Best { key, step }
    }

    fn offer(&mut self, key: Key, step: Step, alpha: f64) {
        if key.cmp_with(self.key, alpha) == Ordering::Less {
            self.key = key;
            self.step = step;
        }
    }
}

fn check_reference(reference: &WordSeq) -> Result<(), AlignError> {
    if reference.is_empty() {
        return Err(AlignError::EmptyReference);
    }
    if let Some(index) = reference.iter().position(Symbol::is_placeholder) {
        return Err(AlignError::RefContainsPlaceholder { index });
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum AbsorbScan {
    Exhaustive,
    PrefixMin,
}

/// Placeholder-aware weighted edit distance, scanning every absorb span.
///
/// Runs in `O(N^2 M)` time. The hypothesis is used as given; callers that
/// score raw output should merge placeholder runs first (see
/// [`WordSeq::normalized`]).
pub fn weighted_edit_distance(
    reference: &WordSeq,
    hypothesis: &WordSeq,
    alpha: Alpha,
) -> Result<AlignmentResult, AlignError> {
    check_reference(reference)?;
    Ok(align(
        reference.symbols(),
        hypothesis.symbols(),
        alpha,
        AbsorbScan::Exhaustive,
    ))
}

/// Same result as [`weighted_edit_distance`] in `O(N M)` time.
///
/// The absorb term `min_k g(k) + alpha * (k - i)` is kept as a running
/// minimum of `g(k) + alpha * k` per placeholder column.
pub fn weighted_edit_distance_fast(
    reference: &WordSeq,
    hypothesis: &WordSeq,
    alpha: Alpha,
) -> Result<AlignmentResult, AlignError> {
    check_reference(reference)?;
    Ok(align(
        reference.symbols(),
        hypothesis.symbols(),
        alpha,
        AbsorbScan::PrefixMin,
    ))
}

fn align(reference: &[Symbol], hypothesis: &[Symbol], alpha: Alpha, scan: AbsorbScan) -> AlignmentResult {
    let n = reference.len();
    let m = hypothesis.len();
    let a = alpha.get();
    let mut table = Table::new(n, m);

    for i in (0..n).rev() {
        let key = table.key(i + 1, m).plus(1, 0, 0);
        table.set(i, m, key, Step::Delete);
    }

    for j in (0..m).rev() {
        match &hypothesis[j] {
            Symbol::Word(word) => {
                let key = table.key(n, j + 1).plus(1, 0, 0);
                table.set(n, j, key, Step::Insert);
                for i in (0..n).rev() {
                    let diag = match &reference[i] {
                        Symbol::Word(r) if r == word => table.key(i + 1, j + 1).plus(0, 0, 1),
                        _ => table.key(i + 1, j + 1).plus(1, 0, 0),
                    };
                    let mut best = Best::first(diag, Step::Diag);
                    best.offer(table.key(i + 1, j).plus(1, 0, 0), Step::Delete, a);
                    best.offer(table.key(i, j + 1).plus(1, 0, 0), Step::Insert, a);
                    table.set(i, j, best.key, best.step);
                }
            }
            Symbol::Placeholder => {
                let key = table.key(n, j + 1).plus(0, 1, 0);
                table.set(n, j, key, Step::Insert);
                // Running best of key(k, j+1) shifted by +k in placeholder units.
                let mut running: Option<(Key, usize)> = None;
                for i in (0..n).rev() {
                    let absorb = match scan {
                        AbsorbScan::Exhaustive => {
                            let mut best = (table.key(i + 1, j + 1).plus(0, 1, 0), i + 1);
                            for k in i + 2..=n {
                                let cand = table.key(k, j + 1).plus(0, (k - i) as i64, 0);
                                if cand.cmp_with(best.0, a) == Ordering::Less {
                                    best = (cand, k);
                                }
                            }
                            best
                        }
                        AbsorbScan::PrefixMin => {
                            let k = i + 1;
                            let cand = table.key(k, j + 1).plus(0, k as i64, 0);
                            running = match running {
                                Some((cur, at)) if cand.cmp_with(cur, a) == Ordering::Greater => {
                                    Some((cur, at))
                                }
                                _ => Some((cand, k)),
                            };
                            let (shifted, end) = running.expect("set above");
                            (shifted.plus(0, -(i as i64), 0), end)
                        }
                    };
                    let mut best = Best::first(absorb.0, Step::Absorb(absorb.1));
                    best.offer(table.key(i + 1, j).plus(1, 0, 0), Step::Delete, a);
                    best.offer(table.key(i, j + 1).plus(0, 1, 0), Step::Insert, a);
                    table.set(i, j, best.key, best.step);
                }
            }
        }
    }

    let mut trace = Vec::with_capacity(n + m);
    let (mut i, mut j) = (0, 0);
    loop {
        let step = table.steps[table.at(i, j)];
        match step {
            Step::End => break,
            Step::Delete => {
                trace.push(AlignOp::Delete { ref_idx: i });
                i += 1;
            }
            Step::Insert => {
                trace.push(match hypothesis[j] {
                    Symbol::Word(_) => AlignOp::InsertWord { hyp_idx: j },
                    Symbol::Placeholder => AlignOp::PhInsert { hyp_idx: j },
                });
                j += 1;
            }
            Step::Diag => {
                trace.push(if reference[i] == hypothesis[j] {
                    AlignOp::Match {
                        ref_idx: i,
                        hyp_idx: j,
                    }
                } else {
                    AlignOp::Substitute {
                        ref_idx: i,
                        hyp_idx: j,
                    }
                });
                i += 1;
                j += 1;
            }
            Step::Absorb(end) => {
                trace.push(AlignOp::PhAbsorb {
                    ref_start: i,
                    ref_end: end,
                    hyp_idx: j,
                });
                i = end;
                j += 1;
            }
        }
    }

    let total = table.key(0, 0);
    let weighted = WeightedCost {
        unit: total.unit as usize,
        abstain: total.abstain as usize,
    };
    AlignmentResult {
        cost: weighted.value(alpha),
        weighted,
        matches: total.matches as usize,
        trace,
    }
}

/// Standard unit-cost word alignment used for WER and for locating the
/// error segments of a hypothesis.
///
/// Among minimum-cost alignments the one with the most hits is chosen; any
/// remaining tie is resolved reading left to right, preferring substitution
/// over deletion over insertion.
pub fn wer_align(reference: &WordSeq, hypothesis: &WordSeq) -> Result<(WerCounts, Vec<AlignOp>), AlignError> {
    if reference.is_empty() {
        return Err(AlignError::EmptyReference);
    }
    if let Some(index) = reference.iter().position(Symbol::is_placeholder) {
        return Err(AlignError::PlaceholderInPlainAlignment { index });
    }
    if let Some(index) = hypothesis.iter().position(Symbol::is_placeholder) {
        return Err(AlignError::PlaceholderInPlainAlignment { index });
    }
    let r = reference.symbols();
    let h = hypothesis.symbols();
    let (n, m) = (r.len(), h.len());
    let rows = n + 1;
    let at = |i: usize, j: usize| j * rows + i;

    // (edits, hits); smaller edits, then larger hits.
    let better = |a: (u32, u32), b: (u32, u32)| a.0 < b.0 || (a.0 == b.0 && a.1 > b.1);
    let mut cells = vec![(0u32, 0u32); rows * (m + 1)];
    let mut steps = vec![Step::End; rows * (m + 1)];

    for i in (0..n).rev() {
        cells[at(i, m)] = (cells[at(i + 1, m)].0 + 1, cells[at(i + 1, m)].1);
        steps[at(i, m)] = Step::Delete;
    }
    for j in (0..m).rev() {
        cells[at(n, j)] = (cells[at(n, j + 1)].0 + 1, cells[at(n, j + 1)].1);
        steps[at(n, j)] = Step::Insert;
        for i in (0..n).rev() {
            let d = cells[at(i + 1, j + 1)];
            let mut best = if r[i] == h[j] {
                (d.0, d.1 + 1)
            } else {
                (d.0 + 1, d.1)
            };
            let mut step = Step::Diag;
            let del = cells[at(i + 1, j)];
            let del = (del.0 + 1, del.1);
            if better(del, best) {
                best = del;
                step = Step::Delete;
            }
            let ins = cells[at(i, j + 1)];
            let ins = (ins.0 + 1, ins.1);
            if better(ins, best) {
                best = ins;
                step = Step::Insert;
            }
            cells[at(i, j)] = best;
            steps[at(i, j)] = step;
        }
    }

    let mut counts = WerCounts {
        substitutions: 0,
        deletions: 0,
        insertions: 0,
        hits: 0,
        n,
    };
    let mut trace = Vec::with_capacity(n + m);
    let (mut i, mut j) = (0, 0);
    loop {
        match steps[at(i, j)] {
            Step::End => break,
            Step::Delete => {
                counts.deletions += 1;
                trace.push(AlignOp::Delete { ref_idx: i });
                i += 1;
            }
            Step::Insert => {
                counts.insertions += 1;
                trace.push(AlignOp::InsertWord { hyp_idx: j });
                j += 1;
            }
            Step::Diag => {
                if r[i] == h[j] {
                    counts.hits += 1;
                    trace.push(AlignOp::Match {
                        ref_idx: i,
                        hyp_idx: j,
                    });
                } else {
                    counts.substitutions += 1;
                    trace.push(AlignOp::Substitute {
                        ref_idx: i,
                        hyp_idx: j,
                    });
                }
                i += 1;
                j += 1;
            }
            Step::Absorb(_) => unreachable!("no placeholders in plain alignment"),
        }
    }
    Ok((counts, trace))
}

/// Checks that `trace` is a monotone alignment covering every position of
/// both sequences exactly once, with placeholder ops on placeholders only.
pub fn trace_is_valid(trace: &[AlignOp], reference: &WordSeq, hypothesis: &WordSeq) -> bool {
    let (mut i, mut j) = (0, 0);
    let r = reference.symbols();
    let h = hypothesis.symbols();
    for op in trace {
        if let Some((start, end)) = op.ref_span() {
            if start != i || end <= start || end > r.len() {
                return false;
            }
            i = end;
        }
        if let Some(hyp_idx) = op.hyp_idx() {
            if hyp_idx != j || hyp_idx >= h.len() {
                return false;
            }
            let is_ph_op = matches!(op, AlignOp::PhAbsorb { .. } | AlignOp::PhInsert { .. });
            if is_ph_op != h[hyp_idx].is_placeholder() {
                return false;
            }
            j += 1;
        }
        match *op {
            AlignOp::Match { ref_idx, hyp_idx } if r[ref_idx] != h[hyp_idx] => return false,
            AlignOp::Substitute { ref_idx, hyp_idx } if r[ref_idx] == h[hyp_idx] => return false,
            _ => {}
        }
    }
    i == r.len() && j == h.len()
}
