//! Line-delimited corpus files and evaluation reports.
//!
//! Corpus rows are UTF-8 JSON objects, one per line:
//!
//! ```text
//! {"id":"utt-1","ref":"the cat sat","hyp":"the <ph> sat"}
//! {"id":"utt-2","ref":"on the mat","hyp":"on a mat","confidences":[0.9,0.2,0.8]}
//! ```
//!
//! Reports carry per-utterance scores, micro and macro summaries, and the
//! WER/RAS scatter over placeholder-free rows. Every real is printed at six
//! decimals so that identical inputs give byte-identical output.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::Alpha;
use crate::calibration::PreferenceRecord;
use crate::fixed::Fixed6;
use crate::metric::{score_utterance, CorpusSummary, RasScore};
use crate::ph::{ConfidentHyp, ConfidentWord};
use crate::text::{Tokenizer, WordSeq};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoadError {
    #[error("line {line}: read failed: {message}")]
    Io { line: usize, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: empty reference for id {id:?}")]
    EmptyReference { line: usize, id: String },
    #[error("line {line}: id {id:?} has {words} hypothesis words but {confidences} confidences")]
    ConfidenceLengthMismatch {
        line: usize,
        id: String,
        words: usize,
        confidences: usize,
    },
    #[error("line {line}: id {id:?}: {message}")]
    Invalid {
        line: usize,
        id: String,
        message: String,
    },
}

impl LoadError {
    pub fn line(&self) -> usize {
        match self {
            LoadError::Io { line, .. }
            | LoadError::Parse { line, .. }
            | LoadError::DuplicateId { line, .. }
            | LoadError::EmptyReference { line, .. }
            | LoadError::ConfidenceLengthMismatch { line, .. }
            | LoadError::Invalid { line, .. } => *line,
        }
    }

    pub fn id(&self) -> Option<&str> {
        match self {
            LoadError::Io { .. } | LoadError::Parse { .. } => None,
            LoadError::DuplicateId { id, .. }
            | LoadError::EmptyReference { id, .. }
            | LoadError::ConfidenceLengthMismatch { id, .. }
            | LoadError::Invalid { id, .. } => Some(id),
        }
    }
}

/// One corpus row as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    #[serde(rename = "ref")]
    pub reference: String,
    pub hyp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidences: Option<Vec<f64>>,
}

/// A validated row with its tokenized text.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub line: usize,
    pub record: UtteranceRecord,
    pub reference: WordSeq,
    pub hypothesis: WordSeq,
}

/// Parses non-blank lines as JSON, numbering lines from 1.
fn json_lines<T: DeserializeOwned>(
    reader: impl BufRead,
) -> impl Iterator<Item = (usize, Result<T, LoadError>)> {
    reader.lines().enumerate().filter_map(|(i, line)| {
        let line_no = i + 1;
        let parsed = match line {
            Err(e) => Err(LoadError::Io {
                line: line_no,
                message: e.to_string(),
            }),
            Ok(text) if text.trim().is_empty() => return None,
            Ok(text) => serde_json::from_str(&text).map_err(|e| LoadError::Parse {
                line: line_no,
                message: e.to_string(),
            }),
        };
        Some((line_no, parsed))
    })
}

fn validate(line: usize, record: UtteranceRecord, tokenizer: &Tokenizer) -> Result<Utterance, LoadError> {
    let reference = tokenizer.tokenize(&record.reference);
    if reference.is_empty() {
        return Err(LoadError::EmptyReference { line, id: record.id });
    }
    let hypothesis = tokenizer.tokenize(&record.hyp);
    if let Some(conf) = &record.confidences {
        if conf.len() != hypothesis.len() {
            return Err(LoadError::ConfidenceLengthMismatch {
                line,
                words: hypothesis.len(),
                confidences: conf.len(),
                id: record.id,
            });
        }
    }
    Ok(Utterance {
        line,
        record,
        reference,
        hypothesis,
    })
}

/// Reads every row, validating each one independently. Never stops early.
pub fn read_corpus(reader: impl BufRead, tokenizer: &Tokenizer) -> Vec<Result<Utterance, LoadError>> {
    let mut seen = HashSet::new();
    json_lines::<UtteranceRecord>(reader)
        .map(|(line, parsed)| {
            let record = parsed?;
            if !seen.insert(record.id.clone()) {
                return Err(LoadError::DuplicateId { line, id: record.id });
            }
            validate(line, record, tokenizer)
        })
        .collect()
}

/// Reads and validates a corpus, failing on the first bad row.
pub fn load_corpus(reader: impl BufRead, tokenizer: &Tokenizer) -> Result<Vec<Utterance>, LoadError> {
    read_corpus(reader, tokenizer).into_iter().collect()
}

/// Writes records as JSON lines.
pub fn write_records<'a>(
    records: impl IntoIterator<Item = &'a UtteranceRecord>,
    mut writer: impl Write,
) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Listening-test records, one per line.
pub fn load_preferences(reader: impl BufRead) -> Result<Vec<PreferenceRecord>, LoadError> {
    let mut seen = HashSet::new();
    json_lines::<PreferenceRecord>(reader)
        .map(|(line, parsed)| {
            let record = parsed?;
            if !seen.insert(record.id.clone()) {
                return Err(LoadError::DuplicateId { line, id: record.id });
            }
            Ok(record)
        })
        .collect()
}

#[derive(Debug, Clone, Deserialize)]
struct RawLogitRecord {
    id: String,
    #[serde(rename = "ref")]
    reference: String,
    #[serde(default)]
    words: Option<Vec<ConfidentWord>>,
    #[serde(default)]
    hyp: Option<String>,
    #[serde(default)]
    confidences: Option<Vec<f64>>,
}

/// A reference with a confidence-annotated hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitUtterance {
    pub line: usize,
    pub id: String,
    pub reference_text: String,
    pub reference: WordSeq,
    pub hypothesis: ConfidentHyp,
}

/// Reads confidence-annotated rows.
///
/// Each row carries either `words: [{"w", "conf"}]` (taken verbatim) or
/// `hyp` plus a parallel `confidences` array (hyp tokenized).
pub fn load_logit_corpus(
    reader: impl BufRead,
    tokenizer: &Tokenizer,
) -> Result<Vec<LogitUtterance>, LoadError> {
    let mut seen = HashSet::new();
    json_lines::<RawLogitRecord>(reader)
        .map(|(line, parsed)| {
            let raw = parsed?;
            if !seen.insert(raw.id.clone()) {
                return Err(LoadError::DuplicateId { line, id: raw.id });
            }
            let reference = tokenizer.tokenize(&raw.reference);
            if reference.is_empty() {
                return Err(LoadError::EmptyReference { line, id: raw.id });
            }
            let invalid = |id: &str, message: String| LoadError::Invalid {
                line,
                id: id.to_owned(),
                message,
            };
            let hypothesis = match (raw.words, raw.hyp, raw.confidences) {
                (Some(words), None, None) => ConfidentHyp::new(words),
                (None, Some(hyp), Some(conf)) => {
                    let words = tokenizer.tokenize(&hyp);
                    if words.len() != conf.len() {
                        return Err(LoadError::ConfidenceLengthMismatch {
                            line,
                            id: raw.id,
                            words: words.len(),
                            confidences: conf.len(),
                        });
                    }
                    ConfidentHyp::from_parts(&words, &conf)
                }
                _ => {
                    return Err(invalid(
                        &raw.id,
                        "expected either `words` or both `hyp` and `confidences`".into(),
                    ))
                }
            }
            .map_err(|e| invalid(&raw.id, e.to_string()))?;
            Ok(LogitUtterance {
                line,
                id: raw.id,
                reference_text: raw.reference,
                reference,
                hypothesis,
            })
        })
        .collect()
}

/// A row that could not be loaded or scored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowFailure {
    pub line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub error: String,
}

impl From<&LoadError> for RowFailure {
    fn from(e: &LoadError) -> Self {
        RowFailure {
            line: e.line(),
            id: e.id().map(str::to_owned),
            error: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub alpha: Alpha,
    /// Scored rows sorted by id.
    pub rows: Vec<(String, RasScore)>,
    /// `None` when no row scored.
    pub summary: Option<CorpusSummary>,
    /// Sorted by line.
    pub failures: Vec<RowFailure>,
}

/// Scores loaded rows and assembles the report. Row failures from loading
/// are carried over; scoring failures are added alongside them.
pub fn build_report(rows: &[Result<Utterance, LoadError>], alpha: Alpha) -> EvalReport {
    let scored: Vec<_> = rows
        .par_iter()
        .map(|row| match row {
            Ok(u) => score_utterance(&u.reference, &u.hypothesis, alpha)
                .map(|s| (u.record.id.clone(), s))
                .map_err(|e| RowFailure {
                    line: u.line,
                    id: Some(u.record.id.clone()),
                    error: e.to_string(),
                }),
            Err(e) => Err(RowFailure::from(e)),
        })
        .collect();
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for r in scored {
        match r {
            Ok(row) => ok.push(row),
            Err(f) => failures.push(f),
        }
    }
    ok.sort_by(|a, b| a.0.cmp(&b.0));
    failures.sort_by_key(|f| f.line);
    let scores: Vec<RasScore> = ok.iter().map(|(_, s)| s.clone()).collect();
    EvalReport {
        alpha,
        summary: CorpusSummary::from_scores(&scores, alpha),
        rows: ok,
        failures,
    }
}

#[derive(Serialize)]
struct RowView<'a> {
    id: &'a str,
    ras: Fixed6,
    usefulness: Fixed6,
    cost: Fixed6,
    wer: Option<Fixed6>,
    n_ref: usize,
    ph_count: usize,
}

#[derive(Serialize)]
struct MicroView {
    ras: Fixed6,
    usefulness: Fixed6,
    cost: Fixed6,
    wer: Option<Fixed6>,
    n_ref: usize,
    matches: usize,
    ph_count: usize,
}

#[derive(Serialize)]
struct MeanView {
    ras: Fixed6,
    usefulness: Fixed6,
    cost: Fixed6,
}

#[derive(Serialize)]
struct SummaryView {
    count: usize,
    micro: MicroView,
    #[serde(rename = "macro")]
    macro_avg: MeanView,
}

#[derive(Serialize)]
struct ScatterView<'a> {
    id: &'a str,
    wer: Fixed6,
    ras: Fixed6,
}

#[derive(Serialize)]
struct ReportView<'a> {
    alpha: f64,
    summary: Option<SummaryView>,
    per_utterance: Vec<RowView<'a>>,
    scatter: Vec<ScatterView<'a>>,
    failures: &'a [RowFailure],
}

impl EvalReport {
    fn view(&self) -> ReportView<'_> {
        ReportView {
            alpha: self.alpha.get(),
            summary: self.summary.as_ref().map(|s| SummaryView {
                count: s.count,
                micro: MicroView {
                    ras: Fixed6(s.micro.ras),
                    usefulness: Fixed6(s.micro.usefulness),
                    cost: Fixed6(s.micro.cost),
                    wer: s.micro.wer.map(Fixed6),
                    n_ref: s.micro.n_ref,
                    matches: s.micro.matches,
                    ph_count: s.micro.ph_count,
                },
                macro_avg: MeanView {
                    ras: Fixed6(s.macro_avg.ras),
                    usefulness: Fixed6(s.macro_avg.usefulness),
                    cost: Fixed6(s.macro_avg.cost),
                },
            }),
            per_utterance: self
                .rows
                .iter()
                .map(|(id, s)| RowView {
                    id,
                    ras: Fixed6(s.ras),
                    usefulness: Fixed6(s.usefulness),
                    cost: Fixed6(s.cost),
                    wer: s.wer.map(Fixed6),
                    n_ref: s.n_ref,
                    ph_count: s.ph_count,
                })
                .collect(),
            scatter: self
                .rows
                .iter()
                .filter_map(|(id, s)| {
                    Some(ScatterView {
                        id,
                        wer: Fixed6(s.wer?),
                        ras: Fixed6(s.ras),
                    })
                })
                .collect(),
            failures: &self.failures,
        }
    }

    /// Pretty-printed JSON document with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.view()).expect("report values are finite");
        s.push('\n');
        s
    }

    /// Tab-separated per-utterance table; missing WER is an empty cell.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("id\tras\tusefulness\tcost\twer\tn_ref\tph_count\n");
        for (id, s) in &self.rows {
            let wer = s.wer.map(|w| Fixed6(w).to_string()).unwrap_or_default();
            writeln!(
                out,
                "{id}\t{}\t{}\t{}\t{wer}\t{}\t{}",
                Fixed6(s.ras),
                Fixed6(s.usefulness),
                Fixed6(s.cost),
                s.n_ref,
                s.ph_count
            )
            .expect("writing to a String");
        }
        out
    }
}
