//! Sentence embeddings: static word vectors with mean pooling, and the JSONL
//! embedding store shared with external extractors.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabeledSentence};
use crate::error::{Error, Result};
use crate::seed;

/// Static word vectors, keyed by lowercased word.
#[derive(Debug, Clone)]
pub struct WordVectorTable {
    source: String,
    dimensionality: usize,
    entries: HashMap<String, Vec<f64>>,
    // Per-component minimum and maximum over every vector read from the file,
    // used as the sampling envelope for out-of-vocabulary words.
    component_min: Vec<f64>,
    component_max: Vec<f64>,
    duplicates: usize,
}

impl WordVectorTable {
    /// Builds a table from in-memory entries. Later duplicates are ignored.
    pub fn from_entries<I>(source: &str, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut builder = TableBuilder::default();
        for (i, (word, vector)) in entries.into_iter().enumerate() {
            builder
                .push(word, vector, None)
                .map_err(|msg| Error::parse(source, i + 1, msg))?;
        }
        builder.finish(source)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dimensionality(&self) -> usize {
        self.dimensionality
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    /// Number of lines whose word had already been seen.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn envelope(&self) -> (&[f64], &[f64]) {
        (&self.component_min, &self.component_max)
    }

    /// A random vector inside the per-component envelope.
    pub fn random_word_vector<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.component_min
            .iter()
            .zip(&self.component_max)
            .map(|(&lo, &hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }
}

#[derive(Default)]
struct TableBuilder {
    dimensionality: Option<usize>,
    entries: HashMap<String, Vec<f64>>,
    component_min: Vec<f64>,
    component_max: Vec<f64>,
    duplicates: usize,
}

impl TableBuilder {
    /// `keep` restricts which words are stored; the envelope always covers every vector.
    fn push(
        &mut self,
        word: String,
        vector: Vec<f64>,
        keep: Option<&HashSet<String>>,
    ) -> std::result::Result<(), String> {
        let d = *self.dimensionality.get_or_insert(vector.len());
        if d == 0 {
            return Err("word vector has no components".into());
        }
        if vector.len() != d {
            return Err(format!(
                "word '{word}' has {} components, expected {d}",
                vector.len()
            ));
        }
        if let Some(bad) = vector.iter().find(|v| !v.is_finite()) {
            return Err(format!("word '{word}' has non-finite component {bad}"));
        }
        if self.component_min.is_empty() {
            self.component_min = vector.clone();
            self.component_max = vector.clone();
        } else {
            for ((lo, hi), &v) in self
                .component_min
                .iter_mut()
                .zip(self.component_max.iter_mut())
                .zip(&vector)
            {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
        }
        let word = word.to_lowercase();
        if keep.is_some_and(|k| !k.contains(&word)) {
            return Ok(());
        }
        match self.entries.entry(word) {
            Entry::Occupied(_) => self.duplicates += 1,
            Entry::Vacant(slot) => {
                slot.insert(vector);
            }
        }
        Ok(())
    }

    fn finish(self, source: &str) -> Result<WordVectorTable> {
        let dimensionality = self
            .dimensionality
            .ok_or_else(|| Error::Integrity(format!("{source}: no word vectors")))?;
        if self.duplicates > 0 {
            log::warn!(
                "{source}: {} duplicate words ignored (first occurrence kept)",
                self.duplicates
            );
        }
        Ok(WordVectorTable {
            source: source.to_string(),
            dimensionality,
            entries: self.entries,
            component_min: self.component_min,
            component_max: self.component_max,
            duplicates: self.duplicates,
        })
    }
}

/// Loads a `word v1 ... vd` text file. Dimensionality comes from the first line.
pub fn load_word_vectors(path: &Path) -> Result<WordVectorTable> {
    load_word_vectors_filtered(path, None)
}

/// Like [`load_word_vectors`], but only stores words in `vocabulary` (lowercased).
///
/// The OOV envelope is still computed over the whole file, so results match an
/// unfiltered load. Useful for multi-gigabyte pretrained tables.
pub fn load_word_vectors_filtered(
    path: &Path,
    vocabulary: Option<&HashSet<String>>,
) -> Result<WordVectorTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    let source = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("static")
        .to_string();
    let mut builder = TableBuilder::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap_or_default().to_string();
        let vector = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::parse(&origin, line_no, format!("unparseable float '{p}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        builder
            .push(word, vector, vocabulary)
            .map_err(|msg| Error::parse(&origin, line_no, msg))?;
    }
    builder.finish(&source)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceEmbedding {
    pub sentence_id: String,
    pub vector: Vec<f64>,
    pub source: String,
}

impl SentenceEmbedding {
    pub fn dimensionality(&self) -> usize {
        self.vector.len()
    }
}

/// Mean of the token vectors; out-of-vocabulary tokens get a fresh random vector each.
pub fn embed_sentence<R: Rng + ?Sized>(
    table: &WordVectorTable,
    sentence: &LabeledSentence,
    rng: &mut R,
) -> Result<SentenceEmbedding> {
    if sentence.tokens.is_empty() {
        return Err(Error::Input(format!("sentence {} has no tokens", sentence.id)));
    }
    let mut sum = vec![0.0; table.dimensionality()];
    for token in &sentence.tokens {
        match table.get(token) {
            Some(v) => add_assign(&mut sum, v),
            None => add_assign(&mut sum, &table.random_word_vector(rng)),
        }
    }
    let n = sentence.tokens.len() as f64;
    sum.iter_mut().for_each(|x| *x /= n);
    Ok(SentenceEmbedding {
        sentence_id: sentence.id.clone(),
        vector: sum,
        source: table.source().to_string(),
    })
}

fn add_assign(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}

/// Embeds every sentence. Each sentence draws OOV vectors from its own generator
/// keyed by `(seed, sentence id)`, so results do not depend on corpus order.
pub fn embed_corpus(table: &WordVectorTable, corpus: &Corpus, seed: u64) -> Result<EmbeddingSet> {
    let embeddings = corpus
        .sentences()
        .par_iter()
        .map(|s| {
            let mut rng = seed::sentence_rng(seed, &s.id);
            embed_sentence(table, s, &mut rng).map_err(|e| e.in_sentence(&s.id))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut set = EmbeddingSet::new(table.source(), table.dimensionality());
    for e in embeddings {
        set.insert(e)?;
    }
    Ok(set)
}

/// One embedding per sentence id, uniform source and dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    source: String,
    dimensionality: usize,
    embeddings: BTreeMap<String, SentenceEmbedding>,
}

impl EmbeddingSet {
    pub fn new(source: &str, dimensionality: usize) -> Self {
        EmbeddingSet {
            source: source.to_string(),
            dimensionality,
            embeddings: BTreeMap::new(),
        }
    }

    /// Builds a set from `(id, vector)` pairs.
    pub fn from_vectors<I>(source: &str, dimensionality: usize, vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut set = EmbeddingSet::new(source, dimensionality);
        for (id, vector) in vectors {
            set.insert(SentenceEmbedding {
                sentence_id: id,
                vector,
                source: source.to_string(),
            })?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, embedding: SentenceEmbedding) -> Result<()> {
        if embedding.vector.len() != self.dimensionality {
            return Err(Error::Integrity(format!(
                "embedding {} has dimensionality {}, set has {}",
                embedding.sentence_id,
                embedding.vector.len(),
                self.dimensionality
            )));
        }
        if embedding.source != self.source {
            return Err(Error::Integrity(format!(
                "embedding {} has source '{}', set has '{}'",
                embedding.sentence_id, embedding.source, self.source
            )));
        }
        if embedding.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integrity(format!(
                "embedding {} has non-finite components",
                embedding.sentence_id
            )));
        }
        if self.embeddings.contains_key(&embedding.sentence_id) {
            return Err(Error::Integrity(format!(
                "duplicate embedding for sentence {}",
                embedding.sentence_id
            )));
        }
        self.embeddings.insert(embedding.sentence_id.clone(), embedding);
        Ok(())
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dimensionality(&self) -> usize {
        self.dimensionality
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SentenceEmbedding> {
        self.embeddings.get(id)
    }

    pub fn vector(&self, id: &str) -> Option<&[f64]> {
        self.embeddings.get(id).map(|e| e.vector.as_slice())
    }

    /// Embeddings in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &SentenceEmbedding> {
        self.embeddings.values()
    }

    /// Checks that ids match the corpus one-to-one.
    pub fn check_coverage(&self, corpus: &Corpus) -> Result<()> {
        let missing: Vec<&str> = corpus
            .sentences()
            .iter()
            .filter(|s| !self.embeddings.contains_key(&s.id))
            .map(|s| s.id.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Integrity(format!(
                "{} corpus sentences have no embedding (first: {})",
                missing.len(),
                missing[0]
            )));
        }
        if let Some(unknown) = self.embeddings.keys().find(|id| corpus.get(id).is_none()) {
            return Err(Error::Integrity(format!(
                "embedding for unknown sentence id '{unknown}'"
            )));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct StoreRowOut<'a> {
    id: &'a str,
    source: &'a str,
    dim: usize,
    vector: &'a [f64],
}

#[derive(Deserialize)]
struct StoreRowIn {
    id: String,
    source: Option<String>,
    dim: Option<usize>,
    vector: Option<Vec<f64>>,
    tokens: Option<serde_json::Value>,
}

pub fn read_embedding_set(path: &Path) -> Result<EmbeddingSet> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    let mut set: Option<EmbeddingSet> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: StoreRowIn =
            serde_json::from_str(&line).map_err(|e| Error::parse(&origin, line_no, e.to_string()))?;
        let vector = match (row.vector, row.tokens) {
            (Some(v), _) => v,
            (None, Some(_)) => {
                return Err(Error::parse(
                    &origin,
                    line_no,
                    "token-matrix row; pool it with the extractor before loading",
                ))
            }
            (None, None) => return Err(Error::parse(&origin, line_no, "row has no vector")),
        };
        if let Some(dim) = row.dim {
            if dim != vector.len() {
                return Err(Error::Integrity(format!(
                    "{origin}:{line_no}: declared dim {dim} but vector has {} components",
                    vector.len()
                )));
            }
        }
        let source = row.source.unwrap_or_else(|| "external".to_string());
        let set = set.get_or_insert_with(|| EmbeddingSet::new(&source, vector.len()));
        set.insert(SentenceEmbedding {
            sentence_id: row.id,
            vector,
            source,
        })
        .map_err(|e| match e {
            Error::Integrity(msg) => Error::Integrity(format!("{origin}:{line_no}: {msg}")),
            other => other,
        })?;
    }
    set.ok_or_else(|| Error::Integrity(format!("{origin}: embedding store is empty")))
}

/// Writes the set as JSONL in id order. Floats use shortest round-trip notation,
/// so reading the file back reproduces every component exactly.
pub fn write_embedding_set(set: &EmbeddingSet, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for e in set.iter() {
        let row = StoreRowOut {
            id: &e.sentence_id,
            source: &e.source,
            dim: e.vector.len(),
            vector: &e.vector,
        };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Expression, Label};

    fn sentence(id: &str, text: &str) -> LabeledSentence {
        LabeledSentence::new(
            id,
            text,
            Expression::new("hit", "road").unwrap(),
            Label::Idiomatic,
        )
        .unwrap()
    }

    fn table() -> WordVectorTable {
        WordVectorTable::from_entries(
            "toy",
            vec![
                ("a".to_string(), vec![1.0, 2.0]),
                ("b".to_string(), vec![3.0, 4.0]),
            ],
        )
        .unwrap()
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_small_table() {
        let f = write_temp("cat 1 2 3\nDog 4 5 6\ncat 7 8 9\n");
        let t = load_word_vectors(f.path()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dimensionality(), 3);
        assert_eq!(t.get("dog"), Some(&[4.0, 5.0, 6.0][..]));
        assert_eq!(t.get("cat"), Some(&[1.0, 2.0, 3.0][..]));
        assert_eq!(t.duplicates(), 1);
        assert_eq!(t.envelope(), (&[1.0, 2.0, 3.0][..], &[7.0, 8.0, 9.0][..]));
    }

    #[test]
    fn inconsistent_dimensionality_fails_at_second_line() {
        let f = write_temp("cat 1.0 2.0\ndog 1.0 2.0 3.0\n");
        assert!(matches!(
            load_word_vectors(f.path()),
            Err(Error::Parse { line: 2, .. })
        ));
        let f = write_temp("cat 1.0 2.0\ndog 1.0 x\n");
        assert!(matches!(
            load_word_vectors(f.path()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn mean_pooling() {
        let mut rng = seed::rng(0);
        let e = embed_sentence(&table(), &sentence("s", "a b"), &mut rng).unwrap();
        assert_eq!(e.vector, vec![2.0, 3.0]);
        let e = embed_sentence(&table(), &sentence("s", "b"), &mut rng).unwrap();
        assert_eq!(e.vector, vec![3.0, 4.0]);
    }

    #[test]
    fn oov_draws_are_seeded_and_inside_envelope() {
        let t = table();
        let s = sentence("s", "zzz");
        let a = embed_sentence(&t, &s, &mut seed::rng(5)).unwrap();
        let b = embed_sentence(&t, &s, &mut seed::rng(5)).unwrap();
        assert_eq!(a, b);
        assert!((1.0..=3.0).contains(&a.vector[0]));
        assert!((2.0..=4.0).contains(&a.vector[1]));
    }

    #[test]
    fn empty_token_list_is_an_input_error() {
        let mut s = sentence("s", "a");
        s.tokens.clear();
        assert!(matches!(
            embed_sentence(&table(), &s, &mut seed::rng(0)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn store_rejects_mixed_dimensionality_and_token_rows() {
        let f = write_temp(
            "{\"id\":\"a\",\"source\":\"s\",\"dim\":2,\"vector\":[1,2]}\n{\"id\":\"b\",\"source\":\"s\",\"dim\":3,\"vector\":[1,2,3]}\n",
        );
        assert!(matches!(read_embedding_set(f.path()), Err(Error::Integrity(_))));
        let f = write_temp("{\"id\":\"a\",\"tokens\":[[1,2],[3,4]]}\n");
        assert!(matches!(read_embedding_set(f.path()), Err(Error::Parse { .. })));
        let f = write_temp("{\"id\":\"a\",\"source\":\"s\",\"dim\":3,\"vector\":[1,2]}\n");
        assert!(matches!(read_embedding_set(f.path()), Err(Error::Integrity(_))));
    }

    #[test]
    fn store_round_trip() {
        let set = EmbeddingSet::from_vectors(
            "bert",
            3,
            vec![
                ("x".to_string(), vec![0.1, -2.0 / 3.0, 1e-300]),
                ("y".to_string(), vec![std::f64::consts::PI, 7.0, -0.0]),
            ],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        write_embedding_set(&set, &path).unwrap();
        assert_eq!(read_embedding_set(&path).unwrap(), set);
    }
}
