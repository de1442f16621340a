mod common;

use common::{mean, pairwise_auc, two_pass_pearson};
use ndarray::{Array1, Array2};
use probe_core::probe::{auc_from_scores, auc_roc, random_prediction_baseline, train_probe};
use probe_core::{seed, Label, ProbeConfig, ProbeModel};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Two unit-variance blobs at `+-half_gap` on every component.
fn blobs(n: usize, d: usize, half_gap: f64, seed: u64) -> (Array2<f64>, Vec<Label>) {
    let mut rng = seed::rng(seed);
    let labels: Vec<Label> = (0..n).map(|i| Label::from(i % 2 == 0)).collect();
    let x = Array2::from_shape_fn((n, d), |(i, _)| {
        let centre = if labels[i].is_positive() {
            half_gap
        } else {
            -half_gap
        };
        centre + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    (x, labels)
}

fn held_out_auc(model: &ProbeModel, x: &Array2<f64>, labels: &[Label]) -> f64 {
    let scores = model.predict_proba(x.view()).unwrap();
    auc_from_scores(scores.as_slice().unwrap(), labels).unwrap()
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = seed::rng(21);
    let x = Array2::from_shape_fn((5, 4), |_| rng.random_range(-2.0..2.0));
    let y = Array1::from(vec![1.0, 0.0, 1.0, 1.0, 0.0]);
    let model = ProbeModel::initialise(4, 6, &mut rng);
    let l2 = 1e-4;
    let (_, grads) = model.loss_and_gradients(x.view(), y.view(), l2).unwrap();
    let loss_at = |m: &ProbeModel| m.loss_and_gradients(x.view(), y.view(), l2).unwrap().0;
    let h = 1e-5;
    let check = |analytic: f64, plus: f64, minus: f64| {
        let numeric = (plus - minus) / (2.0 * h);
        let scale = analytic.abs().max(numeric.abs()).max(1e-8);
        assert!(
            (analytic - numeric).abs() / scale <= 1e-4,
            "analytic {analytic} numeric {numeric}"
        );
    };

    for idx in 0..model.w1.len() {
        let (r, c) = (idx / 4, idx % 4);
        let (mut p, mut m) = (model.clone(), model.clone());
        p.w1[[r, c]] += h;
        m.w1[[r, c]] -= h;
        check(grads.w1[[r, c]], loss_at(&p), loss_at(&m));
    }
    for j in 0..6 {
        let (mut p, mut m) = (model.clone(), model.clone());
        p.b1[j] += h;
        m.b1[j] -= h;
        check(grads.b1[j], loss_at(&p), loss_at(&m));
        let (mut p, mut m) = (model.clone(), model.clone());
        p.w2[j] += h;
        m.w2[j] -= h;
        check(grads.w2[j], loss_at(&p), loss_at(&m));
    }
    let (mut p, mut m) = (model.clone(), model.clone());
    p.b2 += h;
    m.b2 -= h;
    check(grads.b2, loss_at(&p), loss_at(&m));
}

fn full_batch(lr: f64, epochs: usize) -> ProbeConfig {
    ProbeConfig {
        learning_rate: lr,
        max_epochs: epochs,
        batch_size: Some(usize::MAX),
        shuffle: false,
        tolerance: 0.0,
        patience: usize::MAX,
        ..ProbeConfig::default()
    }
}

#[test]
fn full_batch_loss_never_increases() {
    let (x, labels) = blobs(60, 5, 0.5, 3);
    let model = train_probe(x.view(), &labels, &full_batch(1e-4, 100), 0).unwrap();
    assert_eq!(model.epochs_run, 100);
    for w in model.loss_curve.windows(2) {
        assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn separable_blobs_are_learned() {
    // Centres 2*sqrt(10) ~ 6.3 sigma apart.
    let (x, labels) = blobs(100, 10, 1.0, 1);
    let (xt, lt) = blobs(100, 10, 1.0, 2);
    let model = train_probe(x.view(), &labels, &ProbeConfig::default(), 7).unwrap();
    let auc = held_out_auc(&model, &xt, &lt);
    assert!((auc - 1.0).abs() <= 0.01, "auc {auc}");
}

#[test]
fn shuffled_labels_give_chance() {
    let aucs: Vec<f64> = (0..10)
        .map(|s| {
            let (x, mut labels) = blobs(100, 10, 1.0, 100 + s);
            labels.shuffle(&mut seed::rng(s));
            let (xt, mut lt) = blobs(1000, 10, 1.0, 200 + s);
            lt.shuffle(&mut seed::rng(300 + s));
            let model = train_probe(x.view(), &labels, &ProbeConfig::default(), s).unwrap();
            held_out_auc(&model, &xt, &lt)
        })
        .collect();
    assert!((mean(&aucs) - 0.5).abs() <= 0.05, "{aucs:?}");
}

#[test]
fn training_is_deterministic() {
    let (x, labels) = blobs(80, 6, 0.4, 9);
    let a = train_probe(x.view(), &labels, &ProbeConfig::default(), 42).unwrap();
    let b = train_probe(x.view(), &labels, &ProbeConfig::default(), 42).unwrap();
    assert_eq!(a, b);
    let c = train_probe(x.view(), &labels, &ProbeConfig::default(), 43).unwrap();
    assert_ne!(a.w1, c.w1);
}

#[test]
fn training_rejects_bad_input() {
    let (x, _) = blobs(10, 3, 1.0, 0);
    let single = vec![Label::Idiomatic; 10];
    assert!(matches!(
        train_probe(x.view(), &single, &ProbeConfig::default(), 0),
        Err(probe_core::Error::Training(_))
    ));
    let short = vec![Label::Idiomatic, Label::Literal];
    assert!(train_probe(x.view(), &short, &ProbeConfig::default(), 0).is_err());
}

#[test]
fn random_predictions_average_to_chance() {
    let labels: Vec<(String, Label)> = (0..391)
        .map(|i| (format!("s{i}"), Label::from(i % 3 != 0)))
        .collect();
    let refs: Vec<(&str, Label)> = labels.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    let aucs: Vec<f64> = (0..400)
        .map(|s| auc_roc(&random_prediction_baseline(&refs, s)).unwrap())
        .collect();
    assert!((mean(&aucs) - 0.5).abs() <= 0.01, "{}", mean(&aucs));

    let big: Vec<(String, Label)> = (0..10_000)
        .map(|i| (format!("s{i}"), Label::from(i % 2 == 0)))
        .collect();
    let refs: Vec<(&str, Label)> = big.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    let preds = random_prediction_baseline(&refs, 5);
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    let y: Vec<f64> = preds.iter().map(|p| p.label.as_f64()).collect();
    assert!(two_pass_pearson(&scores, &y).abs() < 0.05);
    assert_eq!(preds, random_prediction_baseline(&refs, 5));
}

/// Scores on a coarse grid so ties are common, with both classes present.
fn arb_instance() -> impl Strategy<Value = (Vec<f64>, Vec<Label>)> {
    (2usize..=50)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((0u8..8).prop_map(|k| k as f64 / 8.0), n),
                prop::collection::vec(any::<bool>(), n),
                0..n,
            )
        })
        .prop_map(|(scores, mut bits, k)| {
            // force both classes
            bits[k] = true;
            let n = bits.len();
            bits[(k + 1) % n] = false;
            (scores, bits.into_iter().map(Label::from).collect())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn auc_equals_pairwise_oracle((scores, labels) in arb_instance()) {
        prop_assert_eq!(auc_from_scores(&scores, &labels).unwrap(), pairwise_auc(&scores, &labels));
    }

    #[test]
    fn auc_is_invariant_to_monotone_maps((scores, labels) in arb_instance()) {
        let auc = auc_from_scores(&scores, &labels).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        prop_assert_eq!(auc_from_scores(&mapped, &labels).unwrap(), auc);
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        let flipped: Vec<Label> = labels.iter().map(|l| l.flipped()).collect();
        prop_assert!((auc_from_scores(&negated, &flipped).unwrap() - auc).abs() < 1e-12);
        prop_assert!((auc_from_scores(&negated, &labels).unwrap() - (1.0 - auc)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn small_step_full_batch_descent_is_monotone(seed in any::<u64>(), gap in 0.0f64..1.5) {
        let (x, labels) = blobs(40, 4, gap, seed);
        let model = train_probe(x.view(), &labels, &full_batch(1e-4, 30), seed).unwrap();
        for w in model.loss_curve.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }
}
