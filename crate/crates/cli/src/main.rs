//! `probe`: command-line front end for the probing-with-noise experiments.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use probe_core::corpus::{
    fixed_split, load_corpus_with_report, resampled_split, validate_statistics, ExpectedCounts,
};
use probe_core::embed::{embed_corpus, load_word_vectors_filtered, read_embedding_set, write_embedding_set};
use probe_core::noise::compute_ranges;
use probe_core::report::{parse_tsv, render, ReportFormat};
use probe_core::runner::run_experiment;
use probe_core::stats::norm_correlation_report;
use probe_core::{AblationKind, AblationSpec, Corpus, CorpusFormat, ExperimentConfig, ExperimentSummary};

#[derive(Parser)]
#[command(
    name = "probe",
    version,
    about = "Probe sentence embeddings with norm and dimension ablations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Tsv,
    Jsonl,
}

impl From<FormatArg> for CorpusFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Tsv => CorpusFormat::Tsv,
            FormatArg::Jsonl => CorpusFormat::Jsonl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Fixed,
    Resampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportArg {
    Json,
    Text,
    Tsv,
}

impl From<ReportArg> for ReportFormat {
    fn from(f: ReportArg) -> Self {
        match f {
            ReportArg::Json => ReportFormat::Json,
            ReportArg::Text => ReportFormat::Text,
            ReportArg::Tsv => ReportFormat::Tsv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load a corpus and compare its per-expression counts with the expected table.
    Validate {
        #[arg(long)]
        corpus: PathBuf,
        /// Corpus format; inferred from the extension when omitted.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// TSV of expected counts (`verb noun total idiomatic`); defaults to the reference table.
        #[arg(long)]
        counts: Option<PathBuf>,
    },
    /// Print the train/test split as JSON.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "fixed")]
        mode: SplitArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Mean-pool static word vectors into a sentence embedding store.
    Embed {
        #[arg(long)]
        corpus: PathBuf,
        /// Text file of `word v1 ... vd` lines.
        #[arg(long)]
        vectors: PathBuf,
        /// Seed for the random vectors given to out-of-vocabulary tokens.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Print the norm and component ranges of an embedding store.
    Ranges {
        #[arg(long)]
        embeddings: PathBuf,
    },
    /// Run the experiment matrix described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Correlate L1/L2 norms with the labels.
    Correlate {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Also report correlations after norm ablation.
        #[arg(long)]
        ablate_norm: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Re-render a summary file (JSON or TSV).
    Report {
        #[arg(long)]
        summaries: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportArg,
    },
}

/// A non-error outcome that still warrants a failing exit status.
#[derive(Debug)]
struct ValidationFailed(String);

impl fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationFailed {}

const EXIT_VALIDATION: u8 = 2;
const EXIT_INTEGRITY: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ValidationFailed>().is_some() {
        return EXIT_VALIDATION;
    }
    match err
        .downcast_ref::<probe_core::Error>()
        .map(probe_core::Error::root)
    {
        Some(probe_core::Error::Integrity(_)) => EXIT_INTEGRITY,
        Some(
            probe_core::Error::Config(_)
            | probe_core::Error::Parse { .. }
            | probe_core::Error::Json(_)
            | probe_core::Error::SanityGate(_),
        ) => EXIT_VALIDATION,
        _ => 1,
    }
}

fn load(path: &Path, format: Option<FormatArg>) -> anyhow::Result<Corpus> {
    let format = format.map_or_else(|| CorpusFormat::from_path(path), CorpusFormat::from);
    let (corpus, report) = load_corpus_with_report(path, format)?;
    if report.unknown_dropped > 0 {
        log::info!("dropped {} sentences labelled unknown", report.unknown_dropped);
    }
    Ok(corpus)
}

fn validate(corpus: &Path, format: Option<FormatArg>, counts: Option<&Path>) -> anyhow::Result<()> {
    let format = format.map_or_else(|| CorpusFormat::from_path(corpus), CorpusFormat::from);
    let (corpus, load_report) = load_corpus_with_report(corpus, format)?;
    let expected = match counts {
        Some(p) => ExpectedCounts::load(p)?,
        None => ExpectedCounts::reference(),
    };
    let report = validate_statistics(&corpus, &expected);
    println!(
        "{} sentences loaded, {} unknown-label rows dropped",
        load_report.retained, load_report.unknown_dropped
    );
    print!("{report}");
    if report.is_conforming() {
        Ok(())
    } else {
        Err(ValidationFailed(format!(
            "{} expressions differ from the expected counts",
            report.mismatches().count()
        ))
        .into())
    }
}

fn split(corpus: &Path, mode: SplitArg, seed: u64, format: Option<FormatArg>) -> anyhow::Result<()> {
    let corpus = load(corpus, format)?;
    let split = match mode {
        SplitArg::Fixed => fixed_split(&corpus)?,
        SplitArg::Resampled => resampled_split(&corpus, seed)?,
    };
    println!("{}", serde_json::to_string_pretty(&split.manifest())?);
    Ok(())
}

fn embed(
    corpus: &Path,
    vectors: &Path,
    seed: u64,
    out: &Path,
    format: Option<FormatArg>,
) -> anyhow::Result<()> {
    let corpus = load(corpus, format)?;
    let vocabulary: HashSet<String> = corpus
        .sentences()
        .iter()
        .flat_map(|s| s.tokens.iter().cloned())
        .collect();
    let table = load_word_vectors_filtered(vectors, Some(&vocabulary))?;
    let oov = vocabulary.iter().filter(|w| !table.contains(w)).count();
    log::info!(
        "{} of {} corpus word types found in {}",
        vocabulary.len() - oov,
        vocabulary.len(),
        vectors.display()
    );
    let set = embed_corpus(&table, &corpus, seed)?;
    write_embedding_set(&set, out)?;
    println!(
        "wrote {} {}-d sentence vectors to {}",
        set.len(),
        set.dimensionality(),
        out.display()
    );
    Ok(())
}

fn ranges(embeddings: &Path) -> anyhow::Result<()> {
    let set = read_embedding_set(embeddings)?;
    println!("{}", serde_json::to_string_pretty(&compute_ranges(&set)?)?);
    Ok(())
}

fn run(config: &Path, output_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let mut config = ExperimentConfig::load(config)?;
    if let Some(dir) = output_dir {
        config.output_dir = dir;
    }
    let outcome = run_experiment(&config)?;
    for path in outcome.write(&config.output_dir)? {
        log::info!("wrote {}", path.display());
    }
    for f in &outcome.manifest.failures {
        eprintln!(
            "condition {} ({}) failed: {}",
            f.condition,
            f.split.label(),
            f.error
        );
    }
    print!("{}", render(&outcome.summaries, ReportFormat::Text)?);
    outcome.sanity_check()?;
    Ok(())
}

fn correlate(
    embeddings: &Path,
    corpus: &Path,
    ablate_norm: bool,
    seed: u64,
    format: Option<FormatArg>,
) -> anyhow::Result<()> {
    let corpus = load(corpus, format)?;
    let set = read_embedding_set(embeddings)?;
    let spec = AblationSpec::from_ranges(AblationKind::AblN, &compute_ranges(&set)?)?;
    let report = norm_correlation_report(&set, &corpus, &spec, seed)?;
    println!("{:<10} {:>9} {:>9}", report.source, "L1", "L2");
    println!(
        "{:<10} {:>9.4} {:>9.4}",
        "vanilla", report.vanilla.l1, report.vanilla.l2
    );
    if ablate_norm {
        println!(
            "{:<10} {:>9.4} {:>9.4}",
            "abl. N", report.abl_n.l1, report.abl_n.l2
        );
    }
    Ok(())
}

fn report(summaries: &Path, format: ReportArg) -> anyhow::Result<()> {
    let text = fs::read_to_string(summaries).with_context(|| format!("reading {}", summaries.display()))?;
    let rows: Vec<ExperimentSummary> = if summaries.extension().is_some_and(|e| e == "tsv") {
        parse_tsv(&text)?
    } else {
        serde_json::from_str(&text).map_err(probe_core::Error::from)?
    };
    print!("{}", render(&rows, format.into())?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate {
            corpus,
            format,
            counts,
        } => validate(&corpus, format, counts.as_deref()),
        Command::Split {
            corpus,
            mode,
            seed,
            format,
        } => split(&corpus, mode, seed, format),
        Command::Embed {
            corpus,
            vectors,
            seed,
            out,
            format,
        } => embed(&corpus, &vectors, seed, &out, format),
        Command::Ranges { embeddings } => ranges(&embeddings),
        Command::Run { config, output_dir } => run(&config, output_dir),
        Command::Correlate {
            embeddings,
            corpus,
            ablate_norm,
            seed,
            format,
        } => correlate(&embeddings, &corpus, ablate_norm, seed, format),
        Command::Report { summaries, format } => report(&summaries, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
