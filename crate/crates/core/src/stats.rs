//! Aggregation over repeated runs, CI-overlap classification and norm correlation.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::condition::{Condition, SplitKind};
use crate::corpus::Corpus;
use crate::embed::EmbeddingSet;
use crate::error::{Error, Result};
use crate::noise::{ablate_norm, l1_norm, l2_norm, AblationKind, AblationSpec};
use crate::seed;

/// One AUC per run for a (condition, split) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeries {
    pub condition: Condition,
    pub split: SplitKind,
    pub scores: Vec<f64>,
}

impl RunSeries {
    pub fn new(condition: Condition, split: SplitKind, scores: Vec<f64>) -> Result<Self> {
        if scores.len() < 2 {
            return Err(Error::Input(format!(
                "a run series needs at least 2 runs, got {}",
                scores.len()
            )));
        }
        if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Input(format!("run score {bad} outside [0, 1]")));
        }
        Ok(RunSeries {
            condition,
            split,
            scores,
        })
    }

    pub fn n_runs(&self) -> usize {
        self.scores.len()
    }
}

/// Two-sided standard normal quantile for a confidence `level`.
pub fn z_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("confidence level {level} outside (0, 1)")));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

/// Mean and normal-approximation CI half-width `z * s / sqrt(n)`, with `s` the sample std.
pub fn summarise_scores(scores: &[f64], level: f64) -> Result<(f64, f64)> {
    let n = scores.len();
    if n < 2 {
        return Err(Error::Input(format!("need at least 2 runs, got {n}")));
    }
    let z = z_value(level)?;
    let nf = n as f64;
    let mean = scores.iter().sum::<f64>() / nf;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok((mean, z * var.sqrt() / nf.sqrt()))
}

pub fn summarise(series: &RunSeries, level: f64) -> Result<(f64, f64)> {
    summarise_scores(&series.scores, level)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    SameAsRandom,
    SameAsVanilla,
    Distinct,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::SameAsRandom => "same_as_random",
            Classification::SameAsVanilla => "same_as_vanilla",
            Classification::Distinct => "distinct",
        }
    }

    /// Short flag for table cells.
    pub fn flag(self) -> &'static str {
        match self {
            Classification::SameAsRandom => "R",
            Classification::SameAsVanilla => "V",
            Classification::Distinct => "*",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub condition: Condition,
    pub split: SplitKind,
    pub mean: f64,
    pub ci_halfwidth: f64,
    pub n_runs: usize,
    pub classification: Classification,
}

impl ExperimentSummary {
    /// Summarises a series. Classification starts as `Distinct` until [`classify`] runs.
    pub fn from_series(series: &RunSeries, level: f64) -> Result<Self> {
        let (mean, ci_halfwidth) = summarise(series, level)?;
        Ok(ExperimentSummary {
            condition: series.condition,
            split: series.split,
            mean,
            ci_halfwidth,
            n_runs: series.n_runs(),
            classification: Classification::Distinct,
        })
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.ci_halfwidth
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci_halfwidth
    }

    /// Whether the closed confidence intervals intersect.
    pub fn overlaps(&self, other: &ExperimentSummary) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }
}

/// CI-overlap classification.
///
/// Overlap with any random baseline wins over overlap with vanilla, so that a
/// result is only credited with information when it is clear of every baseline.
pub fn classify(
    summary: &ExperimentSummary,
    random_refs: &[&ExperimentSummary],
    vanilla_ref: Option<&ExperimentSummary>,
) -> Classification {
    if random_refs.iter().any(|r| summary.overlaps(r)) {
        Classification::SameAsRandom
    } else if vanilla_ref.is_some_and(|v| summary.overlaps(v)) {
        Classification::SameAsVanilla
    } else {
        Classification::Distinct
    }
}

/// Product-moment correlation, accumulated with Welford-style co-moment updates.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Input(format!(
            "{} x values but {} y values",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::Input("pearson needs at least 3 points".into()));
    }
    let (mut mean_x, mut mean_y) = (0.0, 0.0);
    let (mut m2_x, mut m2_y, mut co) = (0.0, 0.0, 0.0);
    for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
        let n = (i + 1) as f64;
        let dx = a - mean_x;
        let dy = b - mean_y;
        mean_x += dx / n;
        mean_y += dy / n;
        m2_x += dx * (a - mean_x);
        m2_y += dy * (b - mean_y);
        co += dx * (b - mean_y);
    }
    if m2_x <= 0.0 || m2_y <= 0.0 {
        return Err(Error::UndefinedCorrelation(
            "an argument has zero variance".into(),
        ));
    }
    let r = co / (m2_x.sqrt() * m2_y.sqrt());
    if !r.is_finite() {
        return Err(Error::UndefinedCorrelation("non-finite result".into()));
    }
    Ok(r.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormCorrelation {
    pub l1: f64,
    pub l2: f64,
}

/// Correlation of L1/L2 norms with labels (idiomatic = 1), before and after norm ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub source: String,
    pub n: usize,
    pub vanilla: NormCorrelation,
    pub abl_n: NormCorrelation,
}

impl fmt::Display for CorrelationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>9} {:>9}", self.source, "L1", "L2")?;
        writeln!(
            f,
            "{:<10} {:>9.4} {:>9.4}",
            "vanilla", self.vanilla.l1, self.vanilla.l2
        )?;
        writeln!(
            f,
            "{:<10} {:>9.4} {:>9.4}",
            "abl. N", self.abl_n.l1, self.abl_n.l2
        )
    }
}

fn norm_correlation(vectors: &[Vec<f64>], labels: &[f64]) -> Result<NormCorrelation> {
    let l1: Vec<f64> = vectors.iter().map(|v| l1_norm(v)).collect();
    let l2: Vec<f64> = vectors.iter().map(|v| l2_norm(v)).collect();
    Ok(NormCorrelation {
        l1: pearson(&l1, labels)?,
        l2: pearson(&l2, labels)?,
    })
}

/// Norm-label correlations over the whole corpus. `spec` supplies the norm range;
/// its kind is ignored.
pub fn norm_correlation_report(
    set: &EmbeddingSet,
    corpus: &Corpus,
    spec: &AblationSpec,
    seed: u64,
) -> Result<CorrelationReport> {
    set.check_coverage(corpus)?;
    let spec = spec.with_kind(AblationKind::AblN);
    let mut vanilla = Vec::with_capacity(corpus.len());
    let mut ablated = Vec::with_capacity(corpus.len());
    let mut labels = Vec::with_capacity(corpus.len());
    for s in corpus.sentences() {
        let v = set.vector(&s.id).expect("coverage checked");
        let mut rng = seed::sentence_rng(seed, &s.id);
        ablated.push(ablate_norm(v, &spec, &mut rng).map_err(|e| e.in_sentence(&s.id))?);
        vanilla.push(v.to_vec());
        labels.push(s.label.as_f64());
    }
    Ok(CorrelationReport {
        source: set.source().to_string(),
        n: labels.len(),
        vanilla: norm_correlation(&vanilla, &labels)?,
        abl_n: norm_correlation(&ablated, &labels)?,
    })
}
