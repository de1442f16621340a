//! Synthetic corpora and embedding sets with known structure.
//!
//! Used for end-to-end checks when the real corpus sentences and pretrained
//! vectors are not available.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{Corpus, ExpectedCounts, Expression, Label, LabeledSentence};
use crate::embed::EmbeddingSet;
use crate::error::Result;
use crate::seed;

/// A corpus with exactly the per-expression counts of `counts`.
///
/// Sentence text is placeholder; ids are `verb_noun_NNN` and the first
/// `idiomatic` sentences of each expression are labeled idiomatic.
pub fn corpus_from_counts(counts: &ExpectedCounts) -> Result<Corpus> {
    let mut sentences = Vec::new();
    for (expression, (total, idiomatic)) in counts.iter() {
        for i in 0..total {
            let id = format!("{}_{}_{:03}", expression.verb(), expression.noun(), i);
            let text = format!(
                "they {} the {} in sentence {i}.",
                expression.verb(),
                expression.noun()
            );
            sentences.push(LabeledSentence::new(
                &id,
                &text,
                expression.clone(),
                Label::from(i < idiomatic),
            )?);
        }
    }
    Corpus::new(sentences)
}

/// The 1205-sentence corpus with the reference per-expression counts.
pub fn reference_corpus() -> Corpus {
    corpus_from_counts(&ExpectedCounts::reference()).expect("reference counts build a valid corpus")
}

/// A small corpus of `n_expressions` expressions with `per_expression` sentences each,
/// half idiomatic.
pub fn toy_corpus(n_expressions: usize, per_expression: usize) -> Corpus {
    let mut sentences = Vec::new();
    for e in 0..n_expressions {
        let expression = Expression::new(&format!("verb{e}"), &format!("noun{e}")).expect("valid lemma");
        for i in 0..per_expression {
            let id = format!("e{e}_s{i}");
            sentences.push(
                LabeledSentence::new(&id, "a toy sentence", expression.clone(), Label::from(i % 2 == 0))
                    .expect("valid sentence"),
            );
        }
    }
    Corpus::new(sentences).expect("non-empty corpus")
}

fn gaussian_vector<R: Rng + ?Sized>(d: usize, std: f64, rng: &mut R) -> Vec<f64> {
    let normal = Normal::new(0.0, std).expect("finite std");
    (0..d).map(|_| normal.sample(rng)).collect()
}

/// Label-independent Gaussian vectors, offset by `mean` in every component.
pub fn gaussian_set(corpus: &Corpus, d: usize, mean: f64, seed: u64) -> EmbeddingSet {
    let vectors = corpus.sentences().iter().map(|s| {
        let mut rng = seed::sentence_rng(seed, &s.id);
        let v = gaussian_vector(d, 1.0, &mut rng)
            .into_iter()
            .map(|x| x + mean)
            .collect();
        (s.id.clone(), v)
    });
    EmbeddingSet::from_vectors("gaussian", d, vectors).expect("uniform dimensionality")
}

/// Idiomatic sentences get a `+shift` offset on every component of the first half.
///
/// Each half is rescaled to a norm drawn independently of the label, so the
/// label is carried by the direction of the first half only: the norm and the
/// second half hold no information.
pub fn direction_signal_set(corpus: &Corpus, d: usize, shift: f64, seed: u64) -> EmbeddingSet {
    assert!(
        d >= 2 && d.is_multiple_of(2),
        "direction_signal_set needs an even dimensionality"
    );
    let half = d / 2;
    let vectors = corpus.sentences().iter().map(|s| {
        let mut rng = seed::sentence_rng(seed, &s.id);
        let mut first = gaussian_vector(half, 1.0, &mut rng);
        if s.label.is_positive() {
            first.iter_mut().for_each(|x| *x += shift);
        }
        let first_norm = rng.random_range(1.0..2.0);
        let second = gaussian_vector(half, 1.0, &mut rng);
        let second_norm = rng.random_range(1.0..2.0);
        let scale = |v: Vec<f64>, target: f64| -> Vec<f64> {
            let n = crate::noise::l2_norm(&v);
            v.into_iter().map(|x| x * target / n).collect()
        };
        let mut v = scale(first, first_norm);
        v.extend(scale(second, second_norm));
        (s.id.clone(), v)
    });
    EmbeddingSet::from_vectors("direction-signal", d, vectors).expect("uniform dimensionality")
}

/// Like [`direction_signal_set`], but the second half is one vector shared by every
/// sentence, so it holds no information even within the finite sample.
///
/// A per-sentence noise half always carries some chance association with the
/// labels of a fixed corpus (of order `1/sqrt(n)`); probes pick that up in every
/// run alike, which the run-to-run confidence interval cannot see.
pub fn localised_signal_set(corpus: &Corpus, d: usize, shift: f64, seed: u64) -> EmbeddingSet {
    assert!(
        d >= 2 && d.is_multiple_of(2),
        "localised_signal_set needs an even dimensionality"
    );
    let half = d / 2;
    let shared = gaussian_vector(half, 1.0, &mut seed::rng(seed::derive(seed, &[b"shared-half"])));
    let vectors = corpus.sentences().iter().map(|s| {
        let mut rng = seed::sentence_rng(seed, &s.id);
        let mut first = gaussian_vector(half, 1.0, &mut rng);
        if s.label.is_positive() {
            first.iter_mut().for_each(|x| *x += shift);
        }
        let target = rng.random_range(1.0..2.0);
        let n = crate::noise::l2_norm(&first);
        let mut v: Vec<f64> = first.into_iter().map(|x| x * target / n).collect();
        v.extend_from_slice(&shared);
        (s.id.clone(), v)
    });
    EmbeddingSet::from_vectors("localised-signal", d, vectors).expect("uniform dimensionality")
}

/// Literal sentences get a random vector; idiomatic ones get `factor` times a random vector.
/// Directions are identically distributed, so only the norm carries the label.
pub fn norm_signal_set(corpus: &Corpus, d: usize, factor: f64, seed: u64) -> EmbeddingSet {
    let vectors = corpus.sentences().iter().map(|s| {
        let mut rng = seed::sentence_rng(seed, &s.id);
        let scale = if s.label.is_positive() { factor } else { 1.0 };
        let v = gaussian_vector(d, 1.0, &mut rng)
            .into_iter()
            .map(|x| x * scale)
            .collect();
        (s.id.clone(), v)
    });
    EmbeddingSet::from_vectors("norm-signal", d, vectors).expect("uniform dimensionality")
}

/// Two Gaussian blobs: idiomatic sentences centred at `+separation / 2` on every
/// component, literal ones at `-separation / 2`, unit variance.
pub fn blob_set(corpus: &Corpus, d: usize, separation: f64, seed: u64) -> EmbeddingSet {
    let vectors = corpus.sentences().iter().map(|s| {
        let mut rng = seed::sentence_rng(seed, &s.id);
        let centre = if s.label.is_positive() {
            separation / 2.0
        } else {
            -separation / 2.0
        };
        let v = gaussian_vector(d, 1.0, &mut rng)
            .into_iter()
            .map(|x| x + centre)
            .collect();
        (s.id.clone(), v)
    });
    EmbeddingSet::from_vectors("blobs", d, vectors).expect("uniform dimensionality")
}
