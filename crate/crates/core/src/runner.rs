//! Experiment matrix execution.
//!
//! A matrix is every requested condition crossed with every requested split
//! protocol, each cell repeated `n_runs` times. Every run gets its own seed,
//! derived from the base seed, the condition, the split and the run index, so
//! that any single number can be reproduced in isolation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condition::{Condition, SplitKind};
use crate::corpus::{
    fixed_split, load_corpus, resampled_split, validate_statistics, Corpus, CorpusFormat, ExpectedCounts,
    Label, LabeledSentence, Split,
};
use crate::embed::{embed_corpus, load_word_vectors, read_embedding_set, EmbeddingSet};
use crate::error::{Error, Result};
use crate::noise::{compute_ranges, transform, AblationKind, AblationSpec, RangeReport};
use crate::probe::{auc_from_scores, random_prediction_baseline, stack_rows, train_probe, ProbeConfig};
use crate::report::{render, ReportFormat};
use crate::seed;
use crate::stats::{classify, ExperimentSummary, RunSeries};

/// Mean AUC band that the random baselines must fall in for a run to be trusted.
pub const SANITY_BAND: (f64, f64) = (0.45, 0.55);

pub const DEFAULT_RUNS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    /// Mean-pooled static word vectors; `seed` drives the OOV draws.
    StaticTable {
        path: PathBuf,
        #[serde(default)]
        seed: u64,
    },
    /// A pre-computed embedding store (JSONL).
    ExternalSet { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SplitModeConfig {
    Fixed,
    /// One fresh split per resample; `n_resamples` splits per run.
    Resampled {
        #[serde(default = "one")]
        n_resamples: usize,
    },
    Both {
        #[serde(default = "one")]
        n_resamples: usize,
    },
}

fn one() -> usize {
    1
}

impl SplitModeConfig {
    fn kinds(self) -> Vec<(SplitKind, usize)> {
        match self {
            SplitModeConfig::Fixed => vec![(SplitKind::Fixed, 1)],
            SplitModeConfig::Resampled { n_resamples } => vec![(SplitKind::Resampled, n_resamples)],
            SplitModeConfig::Both { n_resamples } => {
                vec![(SplitKind::Fixed, 1), (SplitKind::Resampled, n_resamples)]
            }
        }
    }
}

fn default_runs() -> usize {
    DEFAULT_RUNS
}

fn default_level() -> f64 {
    0.95
}

fn default_conditions() -> Vec<Condition> {
    Condition::ALL.to_vec()
}

fn default_split() -> SplitModeConfig {
    SplitModeConfig::Fixed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub corpus_path: PathBuf,
    #[serde(default)]
    pub corpus_format: Option<CorpusFormat>,
    pub embedding_source: EmbeddingSource,
    #[serde(flatten)]
    pub options: RunOptions,
    pub output_dir: PathBuf,
}

/// Everything about a run except where the data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    #[serde(default = "default_conditions")]
    pub conditions: Vec<Condition>,
    #[serde(default = "default_split")]
    pub split_mode: SplitModeConfig,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_level")]
    pub ci_level: f64,
    #[serde(default)]
    pub probe: ProbeConfig,
    /// Overrides the norm range measured on the embedding set.
    #[serde(default)]
    pub norm_range: Option<[f64; 2]>,
    /// Overrides the component range measured on the embedding set.
    #[serde(default)]
    pub dim_range: Option<[f64; 2]>,
    /// Worker threads; `None` uses `PROBE_WORKERS` or all cores.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            conditions: default_conditions(),
            split_mode: SplitModeConfig::Fixed,
            n_runs: DEFAULT_RUNS,
            base_seed: 0,
            ci_level: 0.95,
            probe: ProbeConfig::default(),
            norm_range: None,
            dim_range: None,
            workers: None,
        }
    }
}

impl RunOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if self.conditions.is_empty() {
            return Err(Error::Config("no conditions requested".into()));
        }
        if let SplitModeConfig::Resampled { n_resamples } | SplitModeConfig::Both { n_resamples } =
            self.split_mode
        {
            if n_resamples == 0 {
                return Err(Error::Config("n_resamples must be at least 1".into()));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        crate::stats::z_value(self.ci_level)?;
        self.probe.validate()
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)?;
        // relative paths are relative to the config file
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus_path);
        fix(&mut self.output_dir);
        match &mut self.embedding_source {
            EmbeddingSource::StaticTable { path, .. } | EmbeddingSource::ExternalSet { path } => fix(path),
        }
    }
}

/// One executed (or failed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub condition: Condition,
    pub split: SplitKind,
    pub run: usize,
    pub resample: usize,
    /// Seed of the resampled split; absent for the fixed split.
    pub split_seed: Option<u64>,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub auc: Option<f64>,
    pub epochs: Option<usize>,
    pub error: Option<String>,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionFailure {
    pub condition: Condition,
    pub split: SplitKind,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software_version: String,
    pub options: RunOptions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
    pub embedding_source: String,
    pub dimensionality: usize,
    pub n_sentences: usize,
    /// Ranges measured over the whole embedding set (train and test together).
    pub ranges: RangeReport,
    pub ablation: AblationSpec,
    pub notes: Vec<String>,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<ConditionFailure>,
    pub total_elapsed_ms: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub summaries: Vec<ExperimentSummary>,
    pub series: Vec<RunSeries>,
    pub manifest: RunManifest,
}

impl ExperimentOutcome {
    pub fn summary(&self, condition: Condition, split: SplitKind) -> Option<&ExperimentSummary> {
        self.summaries
            .iter()
            .find(|s| s.condition == condition && s.split == split)
    }

    /// Fails if a random baseline's mean AUC lies outside [`SANITY_BAND`].
    pub fn sanity_check(&self) -> Result<()> {
        let bad: Vec<String> = self
            .summaries
            .iter()
            .filter(|s| s.condition.is_random_baseline())
            .filter(|s| !(SANITY_BAND.0..=SANITY_BAND.1).contains(&s.mean))
            .map(|s| format!("{} {} mean AUC {:.4}", s.condition, s.split.label(), s.mean))
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::SanityGate(bad.join("; ")))
        }
    }

    /// Writes summaries (json/text/tsv), the raw run series and the manifest.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: &str, content: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        put("summary.json", render(&self.summaries, ReportFormat::Json)?)?;
        put("summary.txt", render(&self.summaries, ReportFormat::Text)?)?;
        put("summary.tsv", render(&self.summaries, ReportFormat::Tsv)?)?;
        put("series.json", serde_json::to_string_pretty(&self.series)? + "\n")?;
        put(
            "manifest.json",
            serde_json::to_string_pretty(&self.manifest)? + "\n",
        )?;
        Ok(written)
    }
}

/// Seed for run `run`, resample `resample` of `condition` under `split`.
pub fn run_seed(base_seed: u64, condition: Condition, split: SplitKind, run: usize, resample: usize) -> u64 {
    seed::derive(
        base_seed,
        &[
            condition.name().as_bytes(),
            split.name().as_bytes(),
            &(run as u64).to_le_bytes(),
            &(resample as u64).to_le_bytes(),
        ],
    )
}

/// Seed of the split drawn for (run, resample); shared by every condition.
pub fn split_seed(base_seed: u64, n_resamples: usize, run: usize, resample: usize) -> u64 {
    base_seed.wrapping_add((run * n_resamples + resample) as u64)
}

struct Job {
    condition: Condition,
    split: SplitKind,
    run: usize,
    resample: usize,
    split_seed: Option<u64>,
}

fn worker_count(requested: Option<usize>) -> usize {
    requested
        .or_else(|| {
            std::env::var("PROBE_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
                .filter(|&n: &usize| n > 0)
        })
        .unwrap_or_else(rayon::current_num_threads)
}

/// Runs the matrix on in-memory data.
pub fn run_matrix(corpus: &Corpus, set: &EmbeddingSet, options: &RunOptions) -> Result<ExperimentOutcome> {
    options.validate()?;
    set.check_coverage(corpus)?;
    let started = Instant::now();

    let ranges = compute_ranges(set)?;
    let base_spec = AblationSpec::new(
        AblationKind::Vanilla,
        options.norm_range.unwrap_or([ranges.l2_min, ranges.l2_max]),
        options.dim_range.unwrap_or([ranges.dim_min, ranges.dim_max]),
    )?;

    let mut conditions = options.conditions.clone();
    conditions.sort();
    conditions.dedup();

    let mut jobs = Vec::new();
    for (split, n_resamples) in options.split_mode.kinds() {
        for &condition in &conditions {
            for run in 0..options.n_runs {
                for resample in 0..n_resamples {
                    jobs.push(Job {
                        condition,
                        split,
                        run,
                        resample,
                        split_seed: (split == SplitKind::Resampled)
                            .then(|| split_seed(options.base_seed, n_resamples, run, resample)),
                    });
                }
            }
        }
    }

    let fixed = if options
        .split_mode
        .kinds()
        .iter()
        .any(|(k, _)| *k == SplitKind::Fixed)
    {
        Some(fixed_split(corpus))
    } else {
        None
    };

    let execute = |job: &Job| -> RunRecord {
        let t0 = Instant::now();
        let seed = run_seed(options.base_seed, job.condition, job.split, job.run, job.resample);
        let split = match job.split_seed {
            Some(s) => resampled_split(corpus, s),
            None => match fixed.as_ref().expect("fixed split requested") {
                Ok(split) => Ok(split.clone()),
                Err(e) => Err(Error::Config(e.to_string())),
            },
        };
        let (outcome, n_train, n_test) = match split {
            Ok(split) => (
                execute_run(job.condition, &split, set, &base_spec, &options.probe, seed),
                split.train.len(),
                split.test.len(),
            ),
            Err(e) => (Err(e), 0, 0),
        };
        let (auc, epochs, error) = match outcome {
            Ok((auc, epochs)) => (Some(auc), epochs, None),
            Err(e) => (None, None, Some(e.to_string())),
        };
        RunRecord {
            condition: job.condition,
            split: job.split,
            run: job.run,
            resample: job.resample,
            split_seed: job.split_seed,
            seed,
            n_train,
            n_test,
            auc,
            epochs,
            error,
            elapsed_ms: t0.elapsed().as_millis() as u64,
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(options.workers))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<RunRecord> = pool.install(|| jobs.par_iter().map(execute).collect());

    // Aggregate per cell, in report order.
    let mut cells: BTreeMap<(SplitKind, Condition), Vec<&RunRecord>> = BTreeMap::new();
    for r in &runs {
        cells.entry((r.split, r.condition)).or_default().push(r);
    }
    let mut series = Vec::new();
    let mut failures = Vec::new();
    for ((split, condition), records) in &cells {
        if let Some(failed) = records.iter().find(|r| r.error.is_some()) {
            failures.push(ConditionFailure {
                condition: *condition,
                split: *split,
                error: format!(
                    "run {} resample {}: {}",
                    failed.run,
                    failed.resample,
                    failed.error.as_deref().unwrap_or_default()
                ),
            });
            continue;
        }
        let scores = records.iter().filter_map(|r| r.auc).collect();
        match RunSeries::new(*condition, *split, scores) {
            Ok(s) => series.push(s),
            Err(e) => failures.push(ConditionFailure {
                condition: *condition,
                split: *split,
                error: e.to_string(),
            }),
        }
    }
    for f in &failures {
        log::warn!(
            "condition {} ({}) aborted: {}",
            f.condition,
            f.split.label(),
            f.error
        );
    }

    let mut summaries = series
        .iter()
        .map(|s| ExperimentSummary::from_series(s, options.ci_level))
        .collect::<Result<Vec<_>>>()?;
    classify_table(&mut summaries);

    let validation = validate_statistics(corpus, &ExpectedCounts::reference());
    let mut notes = vec![
        "tokenisation: lowercase, strip sentence-terminal punctuation, split on whitespace".to_string(),
        "features are not standardised before probing".to_string(),
        "ablation ranges are measured over the full embedding set (train and test)".to_string(),
        "rand_vec train and test vectors are redrawn in every run".to_string(),
    ];
    if !validation.is_conforming() {
        notes.push(format!(
            "corpus differs from the reference counts in {} expressions",
            validation.mismatches().count()
        ));
    }

    let manifest = RunManifest {
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        options: options.clone(),
        config: None,
        embedding_source: set.source().to_string(),
        dimensionality: set.dimensionality(),
        n_sentences: corpus.len(),
        ranges,
        ablation: base_spec,
        notes,
        runs,
        failures,
        total_elapsed_ms: started.elapsed().as_millis() as u64,
    };
    Ok(ExperimentOutcome {
        summaries,
        series,
        manifest,
    })
}

/// Classifies every row against the random baselines and vanilla row of the same split.
pub fn classify_table(summaries: &mut [ExperimentSummary]) {
    let reference = summaries.to_vec();
    for s in summaries.iter_mut() {
        let randoms: Vec<&ExperimentSummary> = reference
            .iter()
            .filter(|r| r.split == s.split && r.condition.is_random_baseline())
            .collect();
        let vanilla = reference
            .iter()
            .find(|r| r.split == s.split && r.condition == Condition::Vanilla);
        s.classification = classify(s, &randoms, vanilla);
    }
    summaries.sort_by_key(|s| (s.condition, s.split));
}

fn labels_of(sentences: &[&LabeledSentence]) -> Vec<Label> {
    sentences.iter().map(|s| s.label).collect()
}

/// Transforms the vectors of `sentences` under `spec`, one generator per sentence.
fn condition_matrix(
    sentences: &[&LabeledSentence],
    set: &EmbeddingSet,
    spec: &AblationSpec,
    seed: u64,
) -> Result<ndarray::Array2<f64>> {
    let vectors = sentences
        .iter()
        .map(|s| {
            let v = set
                .vector(&s.id)
                .ok_or_else(|| Error::Integrity(format!("no embedding for sentence {}", s.id)))?;
            let mut rng = seed::sentence_rng(seed, &s.id);
            transform(v, spec, &mut rng).map_err(|e| e.in_sentence(&s.id))
        })
        .collect::<Result<Vec<_>>>()?;
    let d = vectors.first().map_or(0, Vec::len);
    stack_rows(vectors.iter().map(Vec::as_slice), d)
}

/// One run of one condition: returns the test AUC and, for trained conditions, the epoch count.
fn execute_run(
    condition: Condition,
    split: &Split<'_>,
    set: &EmbeddingSet,
    base_spec: &AblationSpec,
    probe: &ProbeConfig,
    seed: u64,
) -> Result<(f64, Option<usize>)> {
    let test_labels = labels_of(&split.test);
    let Some(kind) = condition.ablation() else {
        let test: Vec<(&str, Label)> = split.test.iter().map(|s| (s.id.as_str(), s.label)).collect();
        let predictions = random_prediction_baseline(&test, seed);
        let scores: Vec<f64> = predictions.iter().map(|p| p.score).collect();
        return Ok((auc_from_scores(&scores, &test_labels)?, None));
    };
    let spec = base_spec.with_kind(kind);
    let noise_seed = seed::derive(seed, &[b"noise"]);
    let train_x = condition_matrix(&split.train, set, &spec, noise_seed)?;
    let test_x = condition_matrix(&split.test, set, &spec, noise_seed)?;
    let model = train_probe(
        train_x.view(),
        &labels_of(&split.train),
        probe,
        seed::derive(seed, &[b"probe"]),
    )?;
    let scores = model.predict_proba(test_x.view())?;
    Ok((
        auc_from_scores(scores.as_slice().expect("contiguous"), &test_labels)?,
        Some(model.epochs_run),
    ))
}

/// Loads the corpus and embeddings named in `config` and runs the matrix.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.options.validate()?;
    let format = config
        .corpus_format
        .unwrap_or_else(|| CorpusFormat::from_path(&config.corpus_path));
    let corpus = load_corpus(&config.corpus_path, format)?;
    let set = match &config.embedding_source {
        EmbeddingSource::StaticTable { path, seed } => {
            let table = load_word_vectors(path)?;
            embed_corpus(&table, &corpus, *seed)?
        }
        EmbeddingSource::ExternalSet { path } => read_embedding_set(path)?,
    };
    let mut outcome = run_matrix(&corpus, &set, &config.options)?;
    outcome.manifest.config = Some(config.clone());
    Ok(outcome)
}
