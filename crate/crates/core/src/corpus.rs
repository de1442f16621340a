//! Labeled idiom corpus: ingestion, statistics validation and train/test splits.
//!
//! A corpus holds sentences that each contain one verb-noun combination (VNC),
//! labeled as an idiomatic or literal usage. Splits are made over expressions,
//! never over sentences, so that a probe is always tested on expressions it has
//! not seen during training.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Expressions whose verb occurs in no other expression of the reference corpus.
/// The fixed split tests on exactly these.
pub const UNIQUE_VERB_EXPRESSIONS: [(&str, &str); 7] = [
    ("hold", "fire"),
    ("have", "word"),
    ("take", "heart"),
    ("kick", "heel"),
    ("see", "star"),
    ("cut", "figure"),
    ("find", "foot"),
];

/// Number of expressions drawn into the test side of a resampled split.
pub const RESAMPLED_TEST_SIZE: usize = 7;

const REFERENCE_COUNTS: &str = include_str!("../fixtures/vnc_counts.tsv");

/// A verb-noun combination such as `blow whistle`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expression {
    verb: String,
    noun: String,
}

impl Expression {
    pub fn new(verb: &str, noun: &str) -> Result<Self> {
        let verb = normalise_lemma(verb, "verb")?;
        let noun = normalise_lemma(noun, "noun")?;
        Ok(Expression { verb, noun })
    }

    pub fn verb(&self) -> &str {
        &self.verb
    }

    pub fn noun(&self) -> &str {
        &self.noun
    }
}

fn normalise_lemma(raw: &str, what: &str) -> Result<String> {
    let lemma = raw.trim().to_lowercase();
    if lemma.is_empty() {
        return Err(Error::Input(format!("empty {what}")));
    }
    if lemma.chars().any(char::is_whitespace) {
        return Err(Error::Input(format!("{what} '{lemma}' is not a single token")));
    }
    Ok(lemma)
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.verb, self.noun)
    }
}

impl FromStr for Expression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(verb), Some(noun), None) => Expression::new(verb, noun),
            _ => Err(Error::Input(format!("expected 'verb noun', got '{s}'"))),
        }
    }
}

impl Serialize for Expression {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expression {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Binary usage label. Idiomatic maps to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Literal = 0,
    Idiomatic = 1,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        self as u8 as f64
    }

    pub fn is_positive(self) -> bool {
        self == Label::Idiomatic
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Literal => Label::Idiomatic,
            Label::Idiomatic => Label::Literal,
        }
    }
}

impl From<bool> for Label {
    fn from(idiomatic: bool) -> Self {
        if idiomatic {
            Label::Idiomatic
        } else {
            Label::Literal
        }
    }
}

/// Label as it appears in a corpus file, before Unknown rows are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RawLabel {
    Known(Label),
    Unknown,
}

fn parse_label(raw: &str) -> Option<RawLabel> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "idiomatic" => Some(RawLabel::Known(Label::Idiomatic)),
        "literal" => Some(RawLabel::Known(Label::Literal)),
        "unknown" => Some(RawLabel::Unknown),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSentence {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub expression: Expression,
    pub label: Label,
}

impl LabeledSentence {
    pub fn new(id: &str, text: &str, expression: Expression, label: Label) -> Result<Self> {
        if id.trim().is_empty() {
            return Err(Error::Input("empty sentence id".into()));
        }
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::Input(format!("sentence {id} has no tokens")));
        }
        Ok(LabeledSentence {
            id: id.to_string(),
            text: text.to_string(),
            tokens,
            expression,
            label,
        })
    }
}

const TERMINAL_PUNCTUATION: &[char] = &['.', '!', '?', '…', '"', '\'', '”', '’'];

/// Lowercases, strips sentence-terminal punctuation and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let trimmed = lowered
        .trim_end()
        .trim_end_matches(|c: char| TERMINAL_PUNCTUATION.contains(&c) || c.is_whitespace());
    trimmed.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    sentences: Vec<LabeledSentence>,
    expressions: BTreeSet<Expression>,
}

impl Corpus {
    pub fn new(sentences: Vec<LabeledSentence>) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::Integrity("corpus is empty".into()));
        }
        let mut seen = HashSet::with_capacity(sentences.len());
        for s in &sentences {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Integrity(format!("duplicate sentence id '{}'", s.id)));
            }
        }
        let expressions = sentences.iter().map(|s| s.expression.clone()).collect();
        Ok(Corpus {
            sentences,
            expressions,
        })
    }

    pub fn sentences(&self) -> &[LabeledSentence] {
        &self.sentences
    }

    pub fn expressions(&self) -> &BTreeSet<Expression> {
        &self.expressions
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&LabeledSentence> {
        self.sentences.iter().find(|s| s.id == id)
    }

    /// Count of sentences per label.
    pub fn label_counts(&self) -> BTreeMap<Label, usize> {
        let mut counts = BTreeMap::new();
        for s in &self.sentences {
            *counts.entry(s.label).or_insert(0) += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Tsv,
    Jsonl,
}

impl CorpusFormat {
    /// Guesses the format from a file extension; anything but `.jsonl`/`.json` is TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Tsv,
        }
    }
}

/// What happened during ingestion besides the retained sentences.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub retained: usize,
    pub unknown_dropped: usize,
}

const TSV_HEADER: [&str; 5] = ["id", "label", "verb", "noun", "text"];

#[derive(Debug, Serialize, Deserialize)]
struct JsonRecord {
    id: String,
    label: String,
    verb: String,
    noun: String,
    text: String,
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    load_corpus_with_report(path, format).map(|(corpus, _)| corpus)
}

pub fn load_corpus_with_report(path: &Path, format: CorpusFormat) -> Result<(Corpus, LoadReport)> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&content, format, &path.display().to_string())
}

/// Parses corpus text. `origin` names the source in error messages.
pub fn parse_corpus(content: &str, format: CorpusFormat, origin: &str) -> Result<(Corpus, LoadReport)> {
    let mut sentences = Vec::new();
    let mut report = LoadReport::default();

    let mut lines = content.lines().enumerate().map(|(i, l)| (i + 1, l));
    if format == CorpusFormat::Tsv {
        let header = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| Error::Integrity(format!("{origin}: corpus is empty")))?;
        let columns: Vec<&str> = header.1.trim_end_matches('\r').split('\t').collect();
        if columns != TSV_HEADER {
            return Err(Error::parse(
                origin,
                header.0,
                format!("expected header '{}'", TSV_HEADER.join("\\t")),
            ));
        }
    }

    for (line_no, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let record = match format {
            CorpusFormat::Tsv => {
                let fields: Vec<&str> = line.splitn(5, '\t').collect();
                if fields.len() != 5 {
                    return Err(Error::parse(
                        origin,
                        line_no,
                        format!("expected 5 tab-separated fields, found {}", fields.len()),
                    ));
                }
                JsonRecord {
                    id: fields[0].to_string(),
                    label: fields[1].to_string(),
                    verb: fields[2].to_string(),
                    noun: fields[3].to_string(),
                    text: fields[4].to_string(),
                }
            }
            CorpusFormat::Jsonl => {
                serde_json::from_str(line).map_err(|e| Error::parse(origin, line_no, e.to_string()))?
            }
        };

        let label = parse_label(&record.label)
            .ok_or_else(|| Error::parse(origin, line_no, format!("unrecognised label '{}'", record.label)))?;
        let expression = Expression::new(&record.verb, &record.noun)
            .map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
        match label {
            RawLabel::Unknown => report.unknown_dropped += 1,
            RawLabel::Known(label) => {
                let sentence = LabeledSentence::new(&record.id, &record.text, expression, label)
                    .map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
                sentences.push(sentence);
            }
        }
    }

    if report.unknown_dropped > 0 {
        log::info!(
            "{origin}: dropped {} Unknown-labeled sentences",
            report.unknown_dropped
        );
    }
    report.retained = sentences.len();
    let corpus = Corpus::new(sentences).map_err(|e| match e {
        Error::Integrity(msg) => Error::Integrity(format!("{origin}: {msg}")),
        other => other,
    })?;
    Ok((corpus, report))
}

fn label_name(label: Label) -> &'static str {
    match label {
        Label::Idiomatic => "idiomatic",
        Label::Literal => "literal",
    }
}

pub fn render_corpus(corpus: &Corpus, format: CorpusFormat) -> Result<String> {
    let mut out = String::new();
    if format == CorpusFormat::Tsv {
        out.push_str(&TSV_HEADER.join("\t"));
        out.push('\n');
    }
    for s in corpus.sentences() {
        match format {
            CorpusFormat::Tsv => {
                if s.text.contains('\n') {
                    return Err(Error::Input(format!("sentence {} contains a newline", s.id)));
                }
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    s.id,
                    label_name(s.label),
                    s.expression.verb(),
                    s.expression.noun(),
                    s.text
                ));
            }
            CorpusFormat::Jsonl => {
                let record = JsonRecord {
                    id: s.id.clone(),
                    label: label_name(s.label).to_string(),
                    verb: s.expression.verb().to_string(),
                    noun: s.expression.noun().to_string(),
                    text: s.text.clone(),
                };
                out.push_str(&serde_json::to_string(&record)?);
                out.push('\n');
            }
        }
    }
    Ok(out)
}

pub fn write_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<()> {
    let text = render_corpus(corpus, format)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Expected per-expression (total, idiomatic) counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedCounts {
    counts: BTreeMap<Expression, (usize, usize)>,
}

impl ExpectedCounts {
    /// The 28-expression reference table shipped with the crate (1205 sentences, 749 idiomatic).
    pub fn reference() -> Self {
        Self::parse(REFERENCE_COUNTS, "reference counts").expect("bundled counts table is valid")
    }

    /// Parses a `verb<TAB>noun<TAB>total<TAB>idiomatic` table with a header line.
    pub fn parse(content: &str, origin: &str) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for (i, line) in content.lines().enumerate().skip(1) {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::parse(
                    origin,
                    line_no,
                    "expected verb, noun, total, idiomatic",
                ));
            }
            let expression = Expression::new(fields[0], fields[1])
                .map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
            let parse_count = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::parse(origin, line_no, format!("bad count '{s}': {e}")))
            };
            let total = parse_count(fields[2])?;
            let idiomatic = parse_count(fields[3])?;
            if idiomatic > total {
                return Err(Error::parse(origin, line_no, "idiomatic count exceeds total"));
            }
            counts.insert(expression, (total, idiomatic));
        }
        Ok(ExpectedCounts { counts })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content, &path.display().to_string())
    }

    pub fn from_map(counts: BTreeMap<Expression, (usize, usize)>) -> Self {
        ExpectedCounts { counts }
    }

    pub fn get(&self, expression: &Expression) -> Option<(usize, usize)> {
        self.counts.get(expression).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Expression, (usize, usize))> {
        self.counts.iter().map(|(e, &c)| (e, c))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpressionStats {
    pub expression: Expression,
    pub total: usize,
    pub idiomatic: usize,
    pub ratio: f64,
    pub expected_total: Option<usize>,
    pub expected_idiomatic: Option<usize>,
    pub expected_ratio: Option<f64>,
}

impl ExpressionStats {
    pub fn matches(&self) -> bool {
        self.expected_total == Some(self.total) && self.expected_idiomatic == Some(self.idiomatic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Rows for every expression in the corpus or in the expected table, ordered by expression.
    pub expressions: Vec<ExpressionStats>,
    pub total: usize,
    pub idiomatic: usize,
    pub ratio: f64,
    pub expected_total: usize,
    pub expected_idiomatic: usize,
}

impl ValidationReport {
    pub fn mismatches(&self) -> impl Iterator<Item = &ExpressionStats> {
        self.expressions.iter().filter(|s| !s.matches())
    }

    pub fn is_conforming(&self) -> bool {
        self.mismatches().next().is_none()
    }

    pub fn stats(&self, expression: &Expression) -> Option<&ExpressionStats> {
        self.expressions.iter().find(|s| &s.expression == expression)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} {:>7} {:>7} {:>6}   {:>7} {:>7} {:>6}",
            "expression", "total", "idiom", "ratio", "exp.tot", "exp.idm", "exp.r"
        )?;
        let opt = |v: Option<usize>| v.map_or("-".to_string(), |v| v.to_string());
        for s in &self.expressions {
            writeln!(
                f,
                "{:<16} {:>7} {:>7} {:>6.2}   {:>7} {:>7} {:>6}{}",
                s.expression.to_string(),
                s.total,
                s.idiomatic,
                s.ratio,
                opt(s.expected_total),
                opt(s.expected_idiomatic),
                s.expected_ratio.map_or("-".to_string(), |r| format!("{r:.2}")),
                if s.matches() { "" } else { "  MISMATCH" }
            )?;
        }
        writeln!(
            f,
            "{:<16} {:>7} {:>7} {:>6.2}   {:>7} {:>7}",
            "TOTAL", self.total, self.idiomatic, self.ratio, self.expected_total, self.expected_idiomatic
        )
    }
}

fn ratio(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64
    }
}

/// Compares per-expression counts against `expected`. Mismatches are reported, never fatal.
pub fn validate_statistics(corpus: &Corpus, expected: &ExpectedCounts) -> ValidationReport {
    let mut actual: BTreeMap<&Expression, (usize, usize)> = BTreeMap::new();
    for s in corpus.sentences() {
        let entry = actual.entry(&s.expression).or_insert((0, 0));
        entry.0 += 1;
        if s.label.is_positive() {
            entry.1 += 1;
        }
    }

    let keys: BTreeSet<&Expression> = actual.keys().copied().chain(expected.counts.keys()).collect();
    let expressions: Vec<ExpressionStats> = keys
        .into_iter()
        .map(|e| {
            let (total, idiomatic) = actual.get(e).copied().unwrap_or((0, 0));
            let exp = expected.get(e);
            ExpressionStats {
                expression: e.clone(),
                total,
                idiomatic,
                ratio: ratio(idiomatic, total),
                expected_total: exp.map(|c| c.0),
                expected_idiomatic: exp.map(|c| c.1),
                expected_ratio: exp.map(|c| ratio(c.1, c.0)),
            }
        })
        .collect();

    let total = corpus.len();
    let idiomatic = corpus
        .sentences()
        .iter()
        .filter(|s| s.label.is_positive())
        .count();
    ValidationReport {
        expressions,
        total,
        idiomatic,
        ratio: ratio(idiomatic, total),
        expected_total: expected.counts.values().map(|c| c.0).sum(),
        expected_idiomatic: expected.counts.values().map(|c| c.1).sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum SplitMode {
    Fixed,
    Resampled { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_expressions: BTreeSet<Expression>,
    pub test_expressions: BTreeSet<Expression>,
    pub mode: SplitMode,
}

/// A split together with the sentences on each side, in corpus order.
#[derive(Debug, Clone)]
pub struct Split<'a> {
    pub spec: SplitSpec,
    pub train: Vec<&'a LabeledSentence>,
    pub test: Vec<&'a LabeledSentence>,
}

/// On-disk description of a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub train_expressions: Vec<Expression>,
    pub test_expressions: Vec<Expression>,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

impl Split<'_> {
    pub fn manifest(&self) -> SplitManifest {
        let (mode, seed) = match self.spec.mode {
            SplitMode::Fixed => ("fixed", None),
            SplitMode::Resampled { seed } => ("resampled", Some(seed)),
        };
        SplitManifest {
            mode: mode.to_string(),
            seed,
            train_expressions: self.spec.train_expressions.iter().cloned().collect(),
            test_expressions: self.spec.test_expressions.iter().cloned().collect(),
            train_ids: self.train.iter().map(|s| s.id.clone()).collect(),
            test_ids: self.test.iter().map(|s| s.id.clone()).collect(),
        }
    }
}

fn partition(corpus: &Corpus, test_expressions: BTreeSet<Expression>, mode: SplitMode) -> Split<'_> {
    let train_expressions = corpus
        .expressions()
        .difference(&test_expressions)
        .cloned()
        .collect();
    let (test, train) = corpus
        .sentences()
        .iter()
        .partition(|s| test_expressions.contains(&s.expression));
    Split {
        spec: SplitSpec {
            train_expressions,
            test_expressions,
            mode,
        },
        train,
        test,
    }
}

/// Tests on the seven unique-verb expressions and trains on everything else.
pub fn fixed_split(corpus: &Corpus) -> Result<Split<'_>> {
    let mut test = BTreeSet::new();
    for (verb, noun) in UNIQUE_VERB_EXPRESSIONS {
        let e = Expression::new(verb, noun)?;
        if !corpus.expressions().contains(&e) {
            return Err(Error::Config(format!(
                "fixed split needs test expression '{e}', which is absent from the corpus"
            )));
        }
        test.insert(e);
    }
    Ok(partition(corpus, test, SplitMode::Fixed))
}

/// Draws seven test expressions uniformly without replacement.
pub fn resampled_split(corpus: &Corpus, seed: u64) -> Result<Split<'_>> {
    let all: Vec<&Expression> = corpus.expressions().iter().collect();
    if all.len() <= RESAMPLED_TEST_SIZE {
        return Err(Error::Config(format!(
            "resampled split needs at least {} expressions, corpus has {}",
            RESAMPLED_TEST_SIZE + 1,
            all.len()
        )));
    }
    let mut rng = seed::rng(seed);
    let test = index::sample(&mut rng, all.len(), RESAMPLED_TEST_SIZE)
        .into_iter()
        .map(|i| all[i].clone())
        .collect();
    Ok(partition(corpus, test, SplitMode::Resampled { seed }))
}
