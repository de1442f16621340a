//! Single-hidden-layer MLP probe, AUC-ROC and the random-prediction baseline.
//!
//! The probe mirrors the scikit-learn `MLPClassifier` defaults: 100 ReLU units,
//! a logistic output, binary cross-entropy with an L2 penalty, Adam, mini-batches
//! of `min(200, n)` and loss-plateau stopping.

use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    /// `None` means `min(200, n_train)`.
    pub batch_size: Option<usize>,
    pub l2_penalty: f64,
    /// Training stops once the epoch loss fails to improve by `tolerance`
    /// for `patience` consecutive epochs.
    pub tolerance: f64,
    pub patience: usize,
    pub shuffle: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            hidden_units: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 200,
            batch_size: None,
            l2_penalty: 1e-4,
            tolerance: 1e-4,
            patience: 10,
            shuffle: true,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("learning_rate", self.learning_rate), ("epsilon", self.epsilon)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("probe {name} must be positive")));
            }
        }
        if self.hidden_units == 0 || self.max_epochs == 0 || self.batch_size == Some(0) {
            return Err(Error::Config(
                "probe hidden_units, max_epochs and batch_size must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam moment decays must lie in [0, 1)".into()));
        }
        if self.l2_penalty < 0.0 || self.tolerance < 0.0 {
            return Err(Error::Config(
                "l2_penalty and tolerance must be non-negative".into(),
            ));
        }
        Ok(())
    }

    fn effective_batch_size(&self, n: usize) -> usize {
        self.batch_size.unwrap_or(200).min(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    /// Hidden weights, `hidden_units x d`.
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
    pub epochs_run: usize,
    /// Epoch-average training loss, one entry per epoch.
    pub loss_curve: Vec<f64>,
}

/// Gradients of the penalised loss, laid out like [`ProbeModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl ProbeModel {
    /// Zero-bias model with weights drawn from `N(0, sqrt(6 / (fan_in + fan_out)))`.
    pub fn initialise<R: Rng + ?Sized>(d: usize, hidden_units: usize, rng: &mut R) -> Self {
        let std_hidden = (6.0 / (d + hidden_units) as f64).sqrt();
        let std_out = (6.0 / (hidden_units + 1) as f64).sqrt();
        let hidden = Normal::new(0.0, std_hidden).expect("finite std");
        let out = Normal::new(0.0, std_out).expect("finite std");
        let w1 = Array2::from_shape_simple_fn((hidden_units, d), || hidden.sample(rng));
        let w2 = Array1::from_shape_simple_fn(hidden_units, || out.sample(rng));
        ProbeModel {
            w1,
            b1: Array1::zeros(hidden_units),
            w2,
            b2: 0.0,
            epochs_run: 0,
            loss_curve: Vec::new(),
        }
    }

    /// A model whose every parameter is zero.
    pub fn zeros(d: usize, hidden_units: usize) -> Self {
        ProbeModel {
            w1: Array2::zeros((hidden_units, d)),
            b1: Array1::zeros(hidden_units),
            w2: Array1::zeros(hidden_units),
            b2: 0.0,
            epochs_run: 0,
            loss_curve: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden_units(&self) -> usize {
        self.w1.nrows()
    }

    fn check_dim(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Input(format!(
                "input has {} features, probe expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Pre-activations of the hidden layer.
    fn hidden(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut z1 = x.dot(&self.w1.t());
        z1 += &self.b1;
        z1
    }

    /// Output logits, one per row of `x`.
    pub fn logits(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_dim(&x)?;
        let mut a1 = self.hidden(&x);
        a1.mapv_inplace(|v| v.max(0.0));
        Ok(a1.dot(&self.w2) + self.b2)
    }

    /// Probability of the idiomatic class for each row of `x`.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.logits(x)?.mapv(sigmoid))
    }

    /// Mean cross-entropy plus `l2 / (2 n) * |W|^2`, and its gradients.
    ///
    /// `targets` holds 0/1 values. The penalty covers weights only, not biases.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<f64>,
        targets: ArrayView1<f64>,
        l2_penalty: f64,
    ) -> Result<(f64, Gradients)> {
        self.check_dim(&x)?;
        let n = x.nrows();
        if n == 0 || targets.len() != n {
            return Err(Error::Input(format!("{n} rows but {} targets", targets.len())));
        }
        let nf = n as f64;

        let z1 = self.hidden(&x);
        let a1 = z1.mapv(|v| v.max(0.0));
        let z2 = a1.dot(&self.w2) + self.b2;

        let mut data_loss = 0.0;
        let mut dz2 = Array1::zeros(n);
        for ((dz, &z), &y) in dz2.iter_mut().zip(&z2).zip(&targets) {
            data_loss += softplus(z) - y * z;
            *dz = (sigmoid(z) - y) / nf;
        }
        let penalty = 0.5 * l2_penalty / nf
            * (self.w1.iter().map(|w| w * w).sum::<f64>() + self.w2.iter().map(|w| w * w).sum::<f64>());
        let loss = data_loss / nf + penalty;

        let mut gw2 = a1.t().dot(&dz2);
        gw2.scaled_add(l2_penalty / nf, &self.w2);
        let gb2 = dz2.sum();

        // dL/dz1 = (dz2 * w2^T) masked by the ReLU derivative.
        let mut dz1 = Array2::zeros((n, self.hidden_units()));
        Zip::from(dz1.rows_mut())
            .and(z1.rows())
            .and(&dz2)
            .for_each(|mut row, z_row, &dz| {
                Zip::from(&mut row)
                    .and(&z_row)
                    .and(&self.w2)
                    .for_each(|g, &z, &w| *g = if z > 0.0 { dz * w } else { 0.0 });
            });
        let mut gw1 = dz1.t().dot(&x);
        gw1.scaled_add(l2_penalty / nf, &self.w1);
        let gb1 = dz1.sum_axis(Axis(0));

        Ok((
            loss,
            Gradients {
                w1: gw1,
                b1: gb1,
                w2: gw2,
                b2: gb2,
            },
        ))
    }
}

/// First and second moment estimates for one parameter tensor.
struct Moments<D: ndarray::Dimension> {
    m: ndarray::Array<f64, D>,
    v: ndarray::Array<f64, D>,
}

impl<D: ndarray::Dimension> Moments<D> {
    fn like(param: &ndarray::Array<f64, D>) -> Self {
        Moments {
            m: ndarray::Array::zeros(param.raw_dim()),
            v: ndarray::Array::zeros(param.raw_dim()),
        }
    }

    fn step(&mut self, param: &mut ndarray::Array<f64, D>, grad: &ndarray::Array<f64, D>, adam: &Adam) {
        Zip::from(param)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(grad)
            .for_each(|p, m, v, &g| {
                *m = adam.beta1 * *m + (1.0 - adam.beta1) * g;
                *v = adam.beta2 * *v + (1.0 - adam.beta2) * g * g;
                *p -= adam.step * *m / (v.sqrt() + adam.epsilon);
            });
    }
}

struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    // bias-corrected step size for the current iteration
    step: f64,
}

fn check_training_set(x: &ArrayView2<f64>, labels: &[Label]) -> Result<()> {
    if x.nrows() != labels.len() {
        return Err(Error::Input(format!(
            "{} training vectors but {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    if x.nrows() < 2 || x.ncols() == 0 {
        return Err(Error::Training(
            "need at least two non-empty training vectors".into(),
        ));
    }
    let positives = labels.iter().filter(|l| l.is_positive()).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Training("training set contains a single class".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("training vectors contain non-finite values".into()));
    }
    Ok(())
}

/// Trains a probe on the rows of `x`. Deterministic for a fixed `seed`.
pub fn train_probe(
    x: ArrayView2<f64>,
    labels: &[Label],
    config: &ProbeConfig,
    seed: u64,
) -> Result<ProbeModel> {
    config.validate()?;
    check_training_set(&x, labels)?;
    let n = x.nrows();
    let mut rng = seed::rng(seed);
    let mut model = ProbeModel::initialise(x.ncols(), config.hidden_units, &mut rng);
    let targets: Array1<f64> = labels.iter().map(|l| l.as_f64()).collect();

    let mut w1_moments = Moments::like(&model.w1);
    let mut b1_moments = Moments::like(&model.b1);
    let mut w2_moments = Moments::like(&model.w2);
    let mut b2_moments = Moments::like(&Array1::zeros(1));
    let mut b2 = Array1::from_elem(1, model.b2);

    let batch_size = config.effective_batch_size(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut best_loss = f64::INFINITY;
    let mut stale_epochs = 0;
    let mut t = 0i32;

    for _ in 0..config.max_epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb = targets.select(Axis(0), batch);
            model.b2 = b2[0];
            let (loss, grads) = model.loss_and_gradients(xb.view(), yb.view(), config.l2_penalty)?;
            epoch_loss += loss * batch.len() as f64;

            t += 1;
            let adam = Adam {
                beta1: config.beta1,
                beta2: config.beta2,
                epsilon: config.epsilon,
                step: config.learning_rate * (1.0 - config.beta2.powi(t)).sqrt()
                    / (1.0 - config.beta1.powi(t)),
            };
            w1_moments.step(&mut model.w1, &grads.w1, &adam);
            b1_moments.step(&mut model.b1, &grads.b1, &adam);
            w2_moments.step(&mut model.w2, &grads.w2, &adam);
            b2_moments.step(&mut b2, &Array1::from_elem(1, grads.b2), &adam);
        }
        model.b2 = b2[0];
        let epoch_loss = epoch_loss / n as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Training("loss diverged".into()));
        }
        model.loss_curve.push(epoch_loss);
        model.epochs_run += 1;

        if epoch_loss > best_loss - config.tolerance {
            stale_epochs += 1;
        } else {
            stale_epochs = 0;
        }
        best_loss = best_loss.min(epoch_loss);
        if stale_epochs >= config.patience {
            break;
        }
    }
    Ok(model)
}

/// Stacks equal-length vectors into a row matrix.
pub fn stack_rows<'a, I>(rows: I, d: usize) -> Result<Array2<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut flat = Vec::new();
    let mut n = 0;
    for row in rows {
        if row.len() != d {
            return Err(Error::Input(format!(
                "vector of length {} where {d} was expected",
                row.len()
            )));
        }
        flat.extend_from_slice(row);
        n += 1;
    }
    Ok(Array2::from_shape_vec((n, d), flat).expect("shape matches data"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub sentence_id: String,
    pub score: f64,
    pub label: Label,
}

/// An input to [`predict`].
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub id: &'a str,
    pub vector: &'a [f64],
    pub label: Label,
}

pub fn predict(model: &ProbeModel, examples: &[Example<'_>]) -> Result<Vec<ScoredPrediction>> {
    let x = stack_rows(examples.iter().map(|e| e.vector), model.input_dim())?;
    let scores = model.predict_proba(x.view())?;
    Ok(examples
        .iter()
        .zip(scores)
        .map(|(e, score)| ScoredPrediction {
            sentence_id: e.id.to_string(),
            score,
            label: e.label,
        })
        .collect())
}

/// Area under the ROC curve via the rank-sum statistic, with ties counted as one half.
pub fn auc_roc(predictions: &[ScoredPrediction]) -> Result<f64> {
    let scores: Vec<f64> = predictions.iter().map(|p| p.score).collect();
    let labels: Vec<Label> = predictions.iter().map(|p| p.label).collect();
    auc_from_scores(&scores, &labels)
}

pub fn auc_from_scores(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Evaluation(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Evaluation("NaN score".into()));
    }
    let positives = labels.iter().filter(|l| l.is_positive()).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Evaluation("AUC needs both classes".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // Sum of 1-based ranks of the positives, tied groups sharing their mean rank.
    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        let group_positives = order[start..end]
            .iter()
            .filter(|&&i| labels[i].is_positive())
            .count();
        positive_rank_sum += mean_rank * group_positives as f64;
        start = end;
    }

    let p = positives as f64;
    let u = positive_rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Uniform random scores, independent of the labels.
pub fn random_prediction_baseline(test: &[(&str, Label)], seed: u64) -> Vec<ScoredPrediction> {
    let mut rng = seed::rng(seed);
    test.iter()
        .map(|&(id, label)| ScoredPrediction {
            sentence_id: id.to_string(),
            score: rng.random::<f64>(),
            label,
        })
        .collect()
}
