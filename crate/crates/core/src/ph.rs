//! Building placeholder-replaced hypotheses.
//!
//! Two strategies:
//!
//! * [`gt_guided_replace`] aligns a hypothesis with its ground truth and
//!   swaps every erroneous segment for placeholders. The result serves as a
//!   training target and as a near-oracle upper bound.
//! * [`logit_replace`] masks words whose confidence is below a bar, with
//!   [`sweep_bar`] picking the bar that maximizes corpus RAS.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{wer_align, AlignError, AlignOp, Alpha};
use crate::metric::{score_corpus, CorpusScoreError};
use crate::text::{Symbol, WordSeq};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhError {
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error("confidence bar {0} outside [0, 1]")]
    BarOutOfRange(f64),
    #[error("word {index}: confidence {conf} outside [0, 1]")]
    InvalidConfidence { index: usize, conf: f64 },
    #[error("word {index}: {word:?} is not a single non-empty token")]
    InvalidWord { index: usize, word: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("bar grid is empty")]
    EmptyGrid,
    #[error("row {index}: {source}")]
    Row { index: usize, source: AlignError },
    #[error("count table line {line}: {message}")]
    CountTable { line: usize, message: String },
}

/// Number of placeholder tokens that stand in for a text segment.
pub trait TokenCounter {
    /// Must return at least 1 for a non-empty segment.
    fn count(&self, segment: &[&str]) -> usize;
}

/// One placeholder per word.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordCount;

impl TokenCounter for WordCount {
    fn count(&self, segment: &[&str]) -> usize {
        segment.len()
    }
}

/// Per-segment counts from a sidecar table, falling back to one per word.
///
/// Keys are segments with words joined by single spaces. The text format has
/// one `segment<TAB>count` pair per line; blank lines and lines starting with
/// `#` are skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountTable {
    counts: HashMap<String, usize>,
}

impl CountTable {
    pub fn new() -> Self {
        CountTable::default()
    }

    /// Panics if `count` is zero.
    pub fn insert(&mut self, segment: &str, count: usize) {
        assert!(count > 0, "placeholder count must be positive");
        self.counts.insert(join_words(segment), count);
    }

    pub fn from_tsv(reader: impl BufRead) -> Result<Self, PhError> {
        let mut table = CountTable::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| PhError::CountTable {
                line: line_no,
                message,
            };
            let line = line.map_err(|e| err(e.to_string()))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (segment, count) = line
                .rsplit_once('\t')
                .ok_or_else(|| err("expected segment<TAB>count".into()))?;
            let count: usize = count
                .trim()
                .parse()
                .map_err(|e| err(format!("bad count {count:?}: {e}")))?;
            if count == 0 {
                return Err(err("count must be at least 1".into()));
            }
            if segment.trim().is_empty() {
                return Err(err("empty segment".into()));
            }
            table.insert(segment, count);
        }
        Ok(table)
    }
}

fn join_words(segment: &str) -> String {
    segment.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl TokenCounter for CountTable {
    fn count(&self, segment: &[&str]) -> usize {
        self.counts
            .get(&segment.join(" "))
            .copied()
            .unwrap_or(segment.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Substitute,
    Insert,
    Delete,
}

/// A maximal run of same-kind errors in a plain alignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorSegment {
    pub kind: SegmentKind,
    /// Hypothesis words for substitutions and insertions, missing reference
    /// words for deletions.
    pub words: Vec<String>,
    /// Range of the segment's ops in the alignment trace.
    pub ops: std::ops::Range<usize>,
}

fn word_at(seq: &WordSeq, i: usize) -> &str {
    seq.symbols()[i]
        .as_word()
        .expect("plain alignment has no placeholders")
}

/// Groups adjacent error ops of the same kind.
pub fn error_segments(trace: &[AlignOp], reference: &WordSeq, hypothesis: &WordSeq) -> Vec<ErrorSegment> {
    let mut out: Vec<ErrorSegment> = Vec::new();
    for (at, op) in trace.iter().enumerate() {
        let (kind, word) = match *op {
            AlignOp::Substitute { hyp_idx, .. } => (SegmentKind::Substitute, word_at(hypothesis, hyp_idx)),
            AlignOp::InsertWord { hyp_idx } => (SegmentKind::Insert, word_at(hypothesis, hyp_idx)),
            AlignOp::Delete { ref_idx } => (SegmentKind::Delete, word_at(reference, ref_idx)),
            _ => continue,
        };
        match out.last_mut() {
            Some(seg) if seg.kind == kind && seg.ops.end == at => {
                seg.words.push(word.to_owned());
                seg.ops.end = at + 1;
            }
            _ => out.push(ErrorSegment {
                kind,
                words: vec![word.to_owned()],
                ops: at..at + 1,
            }),
        }
    }
    out
}

/// Replaces each erroneous segment of `hypothesis` with placeholders.
///
/// Matched words are kept. Each run of substitutions, insertions, or
/// deletions becomes `counter.count(segment)` placeholders, where the segment
/// is the hypothesis text for substitutions and insertions and the missing
/// reference text for deletions. Placeholder runs are not merged, so token
/// counts survive into training targets.
pub fn gt_guided_replace(
    reference: &WordSeq,
    hypothesis: &WordSeq,
    counter: &impl TokenCounter,
) -> Result<WordSeq, PhError> {
    let (_, trace) = wer_align(reference, hypothesis)?;
    let segments = error_segments(&trace, reference, hypothesis);
    let mut segments = segments.iter().peekable();
    let mut out = Vec::with_capacity(hypothesis.len());
    for (at, op) in trace.iter().enumerate() {
        if let AlignOp::Match { hyp_idx, .. } = *op {
            out.push(hypothesis.symbols()[hyp_idx].clone());
            continue;
        }
        let seg = segments.next_if(|s| s.ops.start == at);
        if let Some(seg) = seg {
            let words: Vec<&str> = seg.words.iter().map(String::as_str).collect();
            let n = counter.count(&words).max(1);
            out.extend(std::iter::repeat_n(Symbol::Placeholder, n));
        }
    }
    Ok(WordSeq::new(out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidentWord {
    #[serde(rename = "w")]
    pub word: String,
    pub conf: f64,
}

/// Hypothesis words with word-level confidences in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidentHyp {
    words: Vec<ConfidentWord>,
}

impl ConfidentHyp {
    pub fn new(words: Vec<ConfidentWord>) -> Result<Self, PhError> {
        for (index, w) in words.iter().enumerate() {
            if w.word.is_empty() || w.word.chars().any(char::is_whitespace) {
                return Err(PhError::InvalidWord {
                    index,
                    word: w.word.clone(),
                });
            }
            if !(0.0..=1.0).contains(&w.conf) {
                return Err(PhError::InvalidConfidence { index, conf: w.conf });
            }
        }
        Ok(ConfidentHyp { words })
    }

    /// Pairs already-tokenized words with their confidences.
    pub fn from_parts(words: &WordSeq, confidences: &[f64]) -> Result<Self, PhError> {
        assert_eq!(words.len(), confidences.len(), "one confidence per word");
        ConfidentHyp::new(
            words
                .iter()
                .zip(confidences)
                .map(|(w, &conf)| ConfidentWord {
                    word: w.to_string(),
                    conf,
                })
                .collect(),
        )
    }

    pub fn words(&self) -> &[ConfidentWord] {
        &self.words
    }
}

fn check_bar(bar: f64) -> Result<(), PhError> {
    if (0.0..=1.0).contains(&bar) {
        Ok(())
    } else {
        Err(PhError::BarOutOfRange(bar))
    }
}

/// Masks every word with confidence strictly below `bar`, then merges
/// placeholder runs.
pub fn logit_replace(hyp: &ConfidentHyp, bar: f64) -> Result<WordSeq, PhError> {
    check_bar(bar)?;
    let out: WordSeq = hyp
        .words
        .iter()
        .map(|w| {
            if w.conf < bar {
                Symbol::Placeholder
            } else {
                Symbol::parse(&w.word)
            }
        })
        .collect();
    Ok(out.normalized())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarSweep {
    pub best_bar: f64,
    pub best_ras: f64,
    /// `(bar, micro RAS)` in grid order.
    pub curve: Vec<(f64, f64)>,
}

/// Bars 0.00, 0.01, ..., 0.50.
pub fn default_bar_grid() -> Vec<f64> {
    (0..=50).map(|i| i as f64 / 100.0).collect()
}

/// Scores the corpus at every bar; the best bar maximizes micro RAS, ties
/// going to the smallest bar.
pub fn sweep_bar(
    corpus: &[(WordSeq, ConfidentHyp)],
    alpha: Alpha,
    grid: &[f64],
) -> Result<BarSweep, PhError> {
    if corpus.is_empty() {
        return Err(PhError::EmptyCorpus);
    }
    if grid.is_empty() {
        return Err(PhError::EmptyGrid);
    }
    let mut curve = Vec::with_capacity(grid.len());
    for &bar in grid {
        let pairs = corpus
            .iter()
            .map(|(r, h)| Ok((r.clone(), logit_replace(h, bar)?)))
            .collect::<Result<Vec<_>, PhError>>()?;
        let summary = score_corpus(&pairs, alpha).map_err(|e| match e {
            CorpusScoreError::EmptyCorpus => PhError::EmptyCorpus,
            CorpusScoreError::Rows(mut rows) => {
                let (index, source) = rows.swap_remove(0);
                PhError::Row { index, source }
            }
        })?;
        curve.push((bar, summary.micro.ras));
    }
    let (best_bar, best_ras) = curve
        .iter()
        .copied()
        .reduce(|best, p| {
            if p.1 > best.1 || (p.1 == best.1 && p.0 < best.0) {
                p
            } else {
                best
            }
        })
        .expect("nonempty grid");
    Ok(BarSweep {
        best_bar,
        best_ras,
        curve,
    })
}
