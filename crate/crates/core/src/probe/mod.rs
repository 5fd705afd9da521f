//! Linear probe classifiers over frozen embeddings.
//!
//! A probe is a single linear layer followed by softmax, trained with
//! cross-entropy and Adam. Training keeps the parameter snapshot with the
//! best dev F1 and stops after `patience` epochs without improvement.

mod metrics;
mod sweep;

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use metrics::{class_scores, combine, f1_score, Averaging, ClassScore};
pub use sweep::{
    lid_sentence_id, lid_sweep, sentence_classification_sweep, split_80_10_10, ContainerRef,
    LayerSweepResult, Split, SweepRow, SweepSummary, SWEEP_CSV_HEADER,
};

use crate::optim::Adam;
use crate::{seeded_rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for ProbeTrainConfig {
    fn default() -> Self {
        ProbeTrainConfig {
            batch_size: 32,
            learning_rate: 1e-3,
            max_epochs: 50,
            patience: 5,
            seed: 0,
        }
    }
}

impl ProbeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be finite and non-negative".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ProbeTrainConfig {
            seed,
            ..self.clone()
        }
    }
}

/// Feature vectors with class indices into a label set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelledData {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<usize>,
}

impl LabelledData {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn push(&mut self, x: Vec<f64>, y: usize) {
        self.xs.push(x);
        self.ys.push(y);
    }
}

/// Maps label names to indices into `label_set`.
pub fn encode_labels<S: AsRef<str>>(labels: &[S], label_set: &[String]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            label_set
                .iter()
                .position(|c| c == l.as_ref())
                .ok_or_else(|| Error::UnknownLabel(l.as_ref().to_string()))
        })
        .collect()
}

/// Which F1 average picks the best dev snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMetric {
    Macro,
    Weighted,
}

impl SelectionMetric {
    fn averaging(self) -> Averaging<usize> {
        match self {
            SelectionMetric::Macro => Averaging::Macro,
            SelectionMetric::Weighted => Averaging::Weighted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    dim: usize,
    /// Row-major `n_classes x dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    label_set: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub index: usize,
    pub probabilities: Vec<f64>,
}

impl ProbeModel {
    pub fn zeros(dim: usize, label_set: Vec<String>) -> Result<Self> {
        check_label_set(&label_set)?;
        let k = label_set.len();
        Ok(ProbeModel {
            dim,
            weights: vec![0.0; k * dim],
            bias: vec![0.0; k],
            label_set,
        })
    }

    pub fn from_parts(dim: usize, weights: Vec<f64>, bias: Vec<f64>, label_set: Vec<String>) -> Result<Self> {
        check_label_set(&label_set)?;
        let k = label_set.len();
        if weights.len() != k * dim || bias.len() != k {
            return Err(Error::LengthMismatch(format!(
                "{k} classes and dim {dim} need {} weights and {k} biases, got {} and {}",
                k * dim,
                weights.len(),
                bias.len()
            )));
        }
        Ok(ProbeModel {
            dim,
            weights,
            bias,
            label_set,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.label_set.len()
    }

    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self.logits_unchecked(x))
    }

    fn logits_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.dim.max(1))
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let probabilities = softmax(&self.logits(x)?);
        Ok(Prediction {
            index: argmax(&probabilities),
            probabilities,
        })
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<&str> {
        Ok(&self.label_set[self.predict(x)?.index])
    }

    /// Mean cross-entropy over a dataset.
    pub fn mean_loss(&self, data: &LabelledData) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Empty("loss over an empty dataset".into()));
        }
        let mut total = 0.0;
        for (x, &y) in data.xs.iter().zip(&data.ys) {
            let logits = self.logits(x)?;
            total += log_sum_exp(&logits) - logits[y];
        }
        Ok(total / data.len() as f64)
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.extend_from_slice(&self.bias);
        p
    }

    fn set_params(&mut self, p: &[f64]) {
        let nw = self.weights.len();
        self.weights.copy_from_slice(&p[..nw]);
        self.bias.copy_from_slice(&p[nw..]);
    }
}

fn check_label_set(label_set: &[String]) -> Result<()> {
    if label_set.is_empty() {
        return Err(Error::Empty("label set".into()));
    }
    let mut sorted = label_set.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != label_set.len() {
        return Err(Error::Validation("label set contains duplicates".into()));
    }
    Ok(())
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ProbeModel,
    /// 1-based epoch of the returned snapshot; 0 when no epoch ran.
    pub best_epoch: usize,
    pub best_dev_f1: Option<f64>,
    pub epochs_run: usize,
    /// Mean training batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Trains a softmax probe. Deterministic for a fixed `cfg.seed`.
pub fn train_probe(
    train: &LabelledData,
    dev: &LabelledData,
    label_set: &[String],
    selection: SelectionMetric,
    cfg: &ProbeTrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let dim = train.xs[0].len();
    let n_classes = label_set.len();
    for (name, data) in [("train", train), ("dev", dev)] {
        if data.xs.len() != data.ys.len() {
            return Err(Error::LengthMismatch(format!("{name} has mismatched xs and ys")));
        }
        if let Some(x) = data.xs.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        if let Some(&y) = data.ys.iter().find(|&&y| y >= n_classes) {
            return Err(Error::UnknownLabel(format!("{name} label index {y}")));
        }
    }

    let mut model = ProbeModel::zeros(dim, label_set.to_vec())?;
    let mut warnings = Vec::new();

    let first = train.ys[0];
    if train.ys.iter().all(|&y| y == first) {
        let msg = format!(
            "training set contains only class '{}'; returning a constant predictor",
            label_set[first]
        );
        warn!("{msg}");
        warnings.push(msg);
        model.bias[first] = 1.0;
        return Ok(TrainOutcome {
            model,
            best_epoch: 0,
            best_dev_f1: None,
            epochs_run: 0,
            epoch_losses: Vec::new(),
            warnings,
        });
    }

    let mut rng = seeded_rng(cfg.seed);
    let mut params = model.params();
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let mut grads = vec![0.0; params.len()];
    let n_weights = n_classes * dim;
    let averaging = selection.averaging();

    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    let mut stale = 0;
    let mut epoch_losses = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs_run = 0;

    for epoch in 1..=cfg.max_epochs {
        epochs_run = epoch;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0;
        for batch in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                let x = &train.xs[i];
                let y = train.ys[i];
                let logits = model.logits_unchecked(x);
                batch_loss += log_sum_exp(&logits) - logits[y];
                let mut delta = softmax(&logits);
                delta[y] -= 1.0;
                for (c, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let row = &mut grads[c * dim..(c + 1) * dim];
                    for (g, xv) in row.iter_mut().zip(x) {
                        *g += d * xv;
                    }
                    grads[n_weights + c] += d;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut params, &grads);
            model.set_params(&params);
            loss_sum += batch_loss * scale;
            n_batches += 1;
        }
        epoch_losses.push(loss_sum / n_batches as f64);

        if dev.is_empty() {
            best = Some((f64::NAN, params.clone(), epoch));
            continue;
        }
        let preds: Vec<usize> = dev.xs.iter().map(|x| argmax(&model.logits_unchecked(x))).collect();
        let f1 = f1_score(&dev.ys, &preds, &averaging)?;
        match &best {
            Some((b, _, _)) if f1 <= *b => {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
            _ => {
                best = Some((f1, params.clone(), epoch));
                stale = 0;
            }
        }
    }

    let (best_dev_f1, best_epoch) = match best {
        Some((f1, p, epoch)) => {
            model.set_params(&p);
            ((!f1.is_nan()).then_some(f1), epoch)
        }
        None => (None, 0),
    };
    Ok(TrainOutcome {
        model,
        best_epoch,
        best_dev_f1,
        epochs_run,
        epoch_losses,
        warnings,
    })
}

/// Evaluates a model, returning `(macro F1, weighted F1)`.
pub fn evaluate(model: &ProbeModel, data: &LabelledData) -> Result<(f64, f64)> {
    let preds = data
        .xs
        .iter()
        .map(|x| model.predict(x).map(|p| p.index))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        f1_score(&data.ys, &preds, &Averaging::Macro)?,
        f1_score(&data.ys, &preds, &Averaging::Weighted)?,
    ))
}
