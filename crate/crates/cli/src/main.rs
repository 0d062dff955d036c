//! `ras`: score, calibrate, and build placeholder training data from the
//! command line.

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ras_core::calibration::{prepare_records, DEFAULT_LAMBDA};
use ras_core::corpus::{load_logit_corpus, load_preferences, read_corpus};
use ras_core::ph::default_bar_grid;
use ras_core::reward::{RewardConfig, DEFAULT_MAX_BATCH};
use ras_core::synth::{synth_preferences, SynthConfig};
use ras_core::{
    build_report, fit_alpha, gt_guided_replace, logit_replace, sweep_bar, Alpha, CountTable, Fixed6,
    TokenizeMode, Tokenizer, UtteranceRecord, WordCount,
};
use ras_server::{ServiceConfig, DEFAULT_BODY_LIMIT};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "ras",
    version,
    about = "Reliability-aware scoring for ASR transcripts with placeholders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Placeholder cost per reference word, strictly between 0 and 1.
    #[arg(long, global = true, default_value_t = Alpha::default().get(), value_parser = parse_alpha)]
    alpha: f64,

    /// How text is split into words.
    #[arg(long, global = true, value_enum, default_value_t = Tokenize::Whitespace)]
    tokenize: Tokenize,

    /// Lowercase words before aligning.
    #[arg(long, global = true)]
    lowercase: bool,

    /// Strip punctuation before aligning.
    #[arg(long, global = true)]
    strip_punct: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Tokenize {
    Whitespace,
    MixedCjk,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    /// JSON report document.
    Doc,
    /// Tab-separated per-utterance table.
    Tsv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Design {
    Realistic,
    Informative,
}

#[derive(Debug, Args)]
struct Output {
    /// Write here instead of stdout. The file is replaced atomically.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score a JSONL corpus of {id, ref, hyp} rows.
    Score {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Doc)]
        format: Format,
        /// Exit with status 2 if any row fails to load or score.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Fit alpha to listening-test preferences.
    Calibrate {
        input: PathBuf,
        /// Weight of the indifference term.
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Replace the errors of each hypothesis with placeholders, guided by the reference.
    MakePh {
        input: PathBuf,
        /// TSV of `segment<TAB>count` giving placeholders per error segment.
        #[arg(long)]
        counts: Option<PathBuf>,
        /// Exit with status 2 if any row fails.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Replace words whose confidence is below a bar with placeholders.
    ReplaceLogit {
        input: PathBuf,
        /// Confidence bar in [0, 1].
        #[arg(long)]
        bar: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Find the confidence bar that maximizes corpus RAS.
    SweepBar {
        input: PathBuf,
        /// `start:stop:step` or a comma-separated list. Defaults to 0:0.5:0.01.
        #[arg(long, value_parser = parse_grid)]
        bar_grid: Option<Grid>,
        #[command(flatten)]
        output: Output,
    },
    /// Run the HTTP reward service until interrupted.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Most items accepted in one score request.
        #[arg(long, default_value_t = DEFAULT_MAX_BATCH)]
        max_batch: usize,
        /// Largest accepted request body in bytes.
        #[arg(long, default_value_t = DEFAULT_BODY_LIMIT)]
        body_limit: usize,
    },
    /// Generate synthetic listening-test preferences with a known alpha.
    GenSynthPrefs {
        #[arg(long, default_value_t = 200)]
        count: usize,
        /// Votes per item.
        #[arg(long, default_value_t = 25)]
        votes: u32,
        #[arg(long, default_value_t = 0.5, value_parser = parse_alpha)]
        alpha_true: f64,
        /// Chance that a vote is "can't decide".
        #[arg(long, default_value_t = 0.0, value_parser = parse_probability)]
        tie_prob: f64,
        #[arg(long, value_enum, default_value_t = Design::Realistic)]
        design: Design,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    Alpha::new(x).map(Alpha::get).map_err(|e| e.to_string())
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("must lie in [0, 1], got {x}"))
    }
}

#[derive(Debug, Clone)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let bars = if let [start, stop, step] = s.split(':').collect::<Vec<_>>()[..] {
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step <= 0.0 || stop < start {
            return Err("need start <= stop and step > 0".into());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // Rounding keeps bars like 0.07 exact in the output.
        (0..=n)
            .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
            .collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if let Some(b) = bars.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(format!("bar {b} outside [0, 1]"));
    }
    if bars.is_empty() {
        return Err("empty grid".into());
    }
    Ok(Grid(bars))
}

/// How a run ended, mapped onto the process exit status.
enum Failure {
    /// Bad or unreadable input data.
    Data(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }
}

type Outcome = Result<(), Failure>;

fn data(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Data(e.into())
}

fn internal(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Internal(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Data(e) | Failure::Internal(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let alpha = Alpha::new(cli.alpha).map_err(internal)?;
    let mode = match cli.tokenize {
        Tokenize::Whitespace => TokenizeMode::Whitespace,
        Tokenize::MixedCjk => TokenizeMode::MixedCjk,
    };
    let tokenizer = Tokenizer::new(mode)
        .with_lowercase(cli.lowercase)
        .with_strip_punct(cli.strip_punct);

    match cli.command {
        Command::Score {
            input,
            format,
            strict,
            output,
        } => {
            check_out(&output)?;
            let rows = read_corpus(open(&input)?, &tokenizer);
            let report = build_report(&rows, alpha);
            let text = match format {
                Format::Doc => report.to_json(),
                Format::Tsv => report.to_tsv(),
            };
            emit(&output, text.as_bytes())?;
            report_failures(
                report
                    .failures
                    .iter()
                    .map(|f| format!("line {}: {}", f.line, f.error)),
                strict,
            )
        }
        Command::Calibrate {
            input,
            lambda,
            output,
        } => {
            check_out(&output)?;
            let records = load_preferences(open(&input)?).map_err(data)?;
            let prepared = prepare_records(&records, &tokenizer).map_err(data)?;
            let result = fit_alpha(&prepared, lambda).map_err(data)?;
            for w in &result.warnings {
                eprintln!("warning: {w:?}");
            }
            emit(&output, &to_json(&result)?)
        }
        Command::MakePh {
            input,
            counts,
            strict,
            output,
        } => {
            check_out(&output)?;
            let table = counts
                .map(|p| CountTable::from_tsv(open(&p)?).map_err(data))
                .transpose()?;
            let mut out = Vec::new();
            let mut failures = Vec::new();
            for row in read_corpus(open(&input)?, &tokenizer) {
                let u = match row {
                    Ok(u) => u,
                    Err(e) => {
                        failures.push(e.to_string());
                        continue;
                    }
                };
                let replaced = match &table {
                    Some(t) => gt_guided_replace(&u.reference, &u.hypothesis, t),
                    None => gt_guided_replace(&u.reference, &u.hypothesis, &WordCount),
                };
                match replaced {
                    Ok(hyp) => out.push(UtteranceRecord {
                        hyp: hyp.to_string(),
                        confidences: None,
                        ..u.record
                    }),
                    Err(e) => failures.push(format!("line {}: id {:?}: {e}", u.line, u.record.id)),
                }
            }
            emit(&output, &jsonl(&out)?)?;
            report_failures(failures.into_iter(), strict)
        }
        Command::ReplaceLogit { input, bar, output } => {
            check_out(&output)?;
            let rows = load_logit_corpus(open(&input)?, &tokenizer).map_err(data)?;
            let out = rows
                .into_iter()
                .map(|u| {
                    Ok(UtteranceRecord {
                        id: u.id,
                        reference: u.reference_text,
                        hyp: logit_replace(&u.hypothesis, bar)?.to_string(),
                        confidences: None,
                    })
                })
                .collect::<Result<Vec<_>, ras_core::ph::PhError>>()
                .map_err(data)?;
            emit(&output, &jsonl(&out)?)
        }
        Command::SweepBar {
            input,
            bar_grid,
            output,
        } => {
            check_out(&output)?;
            let rows = load_logit_corpus(open(&input)?, &tokenizer).map_err(data)?;
            let corpus: Vec<_> = rows.into_iter().map(|u| (u.reference, u.hypothesis)).collect();
            let grid = bar_grid.map_or_else(default_bar_grid, |g| g.0);
            let sweep = sweep_bar(&corpus, alpha, &grid).map_err(data)?;
            emit(&output, &to_json(&SweepView::new(alpha, &sweep))?)
        }
        Command::Serve {
            bind,
            max_batch,
            body_limit,
        } => serve(
            bind,
            ServiceConfig {
                reward: RewardConfig {
                    default_alpha: alpha,
                    tokenizer,
                    max_batch,
                },
                body_limit,
            },
        ),
        Command::GenSynthPrefs {
            count,
            votes,
            alpha_true,
            tie_prob,
            design,
            seed,
            output,
        } => {
            check_out(&output)?;
            let base = match design {
                Design::Realistic => SynthConfig::default(),
                Design::Informative => SynthConfig::informative(),
            };
            let cfg = SynthConfig {
                items: count,
                votes,
                alpha_true: Alpha::new(alpha_true).map_err(internal)?,
                tie_prob,
                ..base
            };
            emit(&output, &jsonl(&synth_preferences(&cfg, seed))?)
        }
    }
}

fn serve(bind: SocketAddr, config: ServiceConfig) -> Outcome {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(io::stderr)
        .init();
    let rt = tokio::runtime::Runtime::new().map_err(internal)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .with_context(|| format!("cannot bind {bind}"))
            .map_err(data)?;
        ras_server::serve(listener, config, ras_server::interrupt())
            .await
            .map_err(internal)
    })
}

#[derive(Serialize)]
struct SweepView {
    alpha: f64,
    best_bar: f64,
    best_ras: Fixed6,
    curve: Vec<SweepPoint>,
}

#[derive(Serialize)]
struct SweepPoint {
    bar: f64,
    ras: Fixed6,
}

impl SweepView {
    fn new(alpha: Alpha, sweep: &ras_core::ph::BarSweep) -> Self {
        SweepView {
            alpha: alpha.get(),
            best_bar: sweep.best_bar,
            best_ras: Fixed6(sweep.best_ras),
            curve: sweep
                .curve
                .iter()
                .map(|&(bar, ras)| SweepPoint {
                    bar,
                    ras: Fixed6(ras),
                })
                .collect(),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(data)
}

/// Fails before any work if the output directory does not exist.
fn check_out(output: &Output) -> Outcome {
    if let Some(path) = &output.out {
        let dir = out_dir(path);
        if !dir.is_dir() {
            return Err(data(anyhow!("output directory {} does not exist", dir.display())));
        }
    }
    Ok(())
}

fn out_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

fn emit(output: &Output, bytes: &[u8]) -> Outcome {
    match &output.out {
        None => io::stdout().lock().write_all(bytes).map_err(internal),
        Some(path) => {
            let mut tmp = tempfile::NamedTempFile::new_in(out_dir(path)).map_err(internal)?;
            tmp.write_all(bytes).map_err(internal)?;
            tmp.persist(path)
                .with_context(|| format!("cannot write {}", path.display()))
                .map_err(internal)?;
            Ok(())
        }
    }
}

fn to_json(value: &impl Serialize) -> Result<Vec<u8>, Failure> {
    let mut buf = serde_json::to_vec_pretty(value).map_err(internal)?;
    buf.push(b'\n');
    Ok(buf)
}

fn jsonl<'a, T: Serialize + 'a>(rows: impl IntoIterator<Item = &'a T>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut buf, row).map_err(internal)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

fn report_failures(failures: impl Iterator<Item = String>, strict: bool) -> Outcome {
    let mut n = 0;
    for f in failures {
        eprintln!("skipped {f}");
        n += 1;
    }
    if strict && n > 0 {
        Err(data(anyhow!("{n} row(s) failed")))
    } else {
        Ok(())
    }
}
