//! Mini-batch training with Adam, per-epoch evaluation and inference.

use serde::{Deserialize, Serialize};

use super::model::{Model, ModelConfig, StepKey};
use super::ops::{self, Mode};
use super::{adam_step, AdamState, ModelCheckpoint, NnError, Tensor};
use crate::dataset::Standardization;
use crate::rng::SplitMix64;

const SHUFFLE_STREAM: u64 = 0x5F1E;
const EVAL_CHUNK: usize = 256;

/// Raw (unstandardized) feature rows and class indices.
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    pub train_x: &'a [Vec<f64>],
    pub train_y: &'a [usize],
    pub test_x: &'a [Vec<f64>],
    pub test_y: &'a [usize],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
}

impl EpochStats {
    pub fn progress_line(&self) -> String {
        let mut line = format!(
            "epoch {}: train_loss {:.4} train_acc {:.4}",
            self.epoch, self.train_loss, self.train_accuracy
        );
        if let (Some(l), Some(a)) = (self.test_loss, self.test_accuracy) {
            line.push_str(&format!(" test_loss {l:.4} test_acc {a:.4}"));
        }
        line
    }
}

fn check_rows(xs: &[Vec<f64>], ys: &[usize], config: &ModelConfig) -> Result<(), NnError> {
    if xs.len() != ys.len() {
        return Err(NnError::ShapeMismatch(format!("{} rows but {} labels", xs.len(), ys.len())));
    }
    if let Some(r) = xs.iter().find(|r| r.len() != config.input_len) {
        return Err(NnError::ShapeMismatch(format!("row of {} values, model expects {}", r.len(), config.input_len)));
    }
    if let Some(y) = ys.iter().find(|&&y| y >= config.class_count) {
        return Err(NnError::InvalidConfig(format!("label {y} outside {} classes", config.class_count)));
    }
    Ok(())
}

fn batch_input(rows: &[&[f64]]) -> Tensor {
    let len = rows[0].len();
    let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
    Tensor::new(vec![rows.len(), len, 1], data).expect("rows share a length")
}

fn one_hot_batch(labels: &[usize], classes: usize) -> Tensor {
    let mut t = Tensor::zeros(&[labels.len(), 1, classes]);
    for (i, &y) in labels.iter().enumerate() {
        t.data_mut()[i * classes + y] = 1.0;
    }
    t
}

fn argmax(p: &[f64]) -> usize {
    p.iter().enumerate().fold(0, |best, (i, &v)| if v > p[best] { i } else { best })
}

/// Splits a shuffled order into mini-batches. A trailing batch of one row
/// joins the previous batch, and a one-row dataset is doubled, so batch
/// normalization always sees at least two samples.
fn batches(order: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    if order.len() == 1 {
        return vec![vec![order[0], order[0]]];
    }
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let tail = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").extend(tail);
    }
    out
}

/// Mean categorical cross-entropy and accuracy in inference mode.
pub fn evaluate(model: &mut Model, xs: &[Vec<f64>], ys: &[usize]) -> Result<(f64, f64), NnError> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(NnError::ShapeMismatch(format!("{} rows, {} labels", xs.len(), ys.len())));
    }
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for (cx, cy) in xs.chunks(EVAL_CHUNK).zip(ys.chunks(EVAL_CHUNK)) {
        let rows: Vec<&[f64]> = cx.iter().map(Vec::as_slice).collect();
        let probs = model.infer(&batch_input(&rows))?;
        let classes = probs.shape()[2];
        let (loss, _) = ops::cce_loss(&probs, &one_hot_batch(cy, classes))?;
        loss_sum += loss * cy.len() as f64;
        correct += probs.data().chunks(classes).zip(cy).filter(|(p, &y)| argmax(p) == y).count();
    }
    Ok((loss_sum / xs.len() as f64, correct as f64 / xs.len() as f64))
}

/// Trains a fresh model from `config`. Features are standardized with
/// statistics of the training rows, which the checkpoint keeps.
/// `on_epoch` sees each epoch's statistics and returns `false` to stop.
pub fn train(
    data: TrainingData<'_>,
    config: &ModelConfig,
    mut on_epoch: impl FnMut(&EpochStats) -> bool,
) -> Result<ModelCheckpoint, NnError> {
    config.validate()?;
    if data.train_x.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    check_rows(data.train_x, data.train_y, config)?;
    check_rows(data.test_x, data.test_y, config)?;

    let standardization = Standardization::fit(data.train_x).map_err(|e| NnError::ShapeMismatch(e.to_string()))?;
    let train_x: Vec<Vec<f64>> = data.train_x.iter().map(|r| standardization.apply(r)).collect();
    let test_x: Vec<Vec<f64>> = data.test_x.iter().map(|r| standardization.apply(r)).collect();

    let seed = config.rng_seed;
    let mut model = Model::build(config, seed)?;
    let mut adam = AdamState::for_params(&model.params());
    let mut history = Vec::with_capacity(config.epochs);
    let n = train_x.len();

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        SplitMix64::keyed(seed, &[SHUFFLE_STREAM, epoch as u64]).shuffle(&mut order);
        let (mut loss_sum, mut seen, mut correct) = (0.0, 0usize, 0usize);

        for (b, idx) in batches(&order, config.batch_size).iter().enumerate() {
            let non_finite = || NnError::NonFiniteLoss { epoch, batch: b };
            let rows: Vec<&[f64]> = idx.iter().map(|&i| train_x[i].as_slice()).collect();
            let labels: Vec<usize> = idx.iter().map(|&i| data.train_y[i]).collect();
            let key = StepKey { seed, epoch: epoch as u64, batch: b as u64 };
            let (probs, caches) = match model.forward(&batch_input(&rows), Mode::Train, Some(key)) {
                Err(NnError::NonFinite(_)) => return Err(non_finite()),
                other => other?,
            };
            let (loss, grad) = ops::cce_loss(&probs, &one_hot_batch(&labels, config.class_count))?;
            if !loss.is_finite() {
                return Err(non_finite());
            }
            let grads = model.backward(&caches, grad, true)?;
            if grads.iter().any(|g| !g.all_finite()) {
                return Err(non_finite());
            }
            adam_step(&mut model.params_mut(), &grads, &mut adam, &config.optimizer)?;

            loss_sum += loss * idx.len() as f64;
            seen += idx.len();
            correct += probs
                .data()
                .chunks(config.class_count)
                .zip(&labels)
                .filter(|(p, &y)| argmax(p) == y)
                .count();
        }

        let (test_loss, test_accuracy) = if test_x.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate(&mut model, &test_x, data.test_y)?;
            (Some(l), Some(a))
        };
        let stats = EpochStats {
            epoch: epoch + 1,
            train_loss: loss_sum / seen as f64,
            train_accuracy: correct as f64 / seen as f64,
            test_loss,
            test_accuracy,
        };
        let keep_going = on_epoch(&stats);
        history.push(stats);
        if !keep_going {
            break;
        }
    }
    Ok(ModelCheckpoint::from_model(&model, config, standardization, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    /// Index of the most probable class; the lowest index wins ties.
    pub label: usize,
}

/// A restored model plus the standardization it was trained with.
#[derive(Debug, Clone)]
pub struct Classifier {
    model: Model,
    standardization: Standardization,
    input_len: usize,
}

impl Classifier {
    pub fn from_checkpoint(ckpt: &ModelCheckpoint) -> Result<Self, NnError> {
        Ok(Self {
            model: ckpt.to_model()?,
            standardization: ckpt.standardization.clone(),
            input_len: ckpt.config.input_len,
        })
    }

    pub fn predict(&mut self, row: &[f64]) -> Result<Prediction, NnError> {
        Ok(self.predict_batch(&[row.to_vec()])?.remove(0))
    }

    pub fn predict_batch(&mut self, rows: &[Vec<f64>]) -> Result<Vec<Prediction>, NnError> {
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(EVAL_CHUNK) {
            if let Some(r) = chunk.iter().find(|r| r.len() != self.input_len) {
                return Err(NnError::ShapeMismatch(format!("row of {} values, model expects {}", r.len(), self.input_len)));
            }
            let std_rows: Vec<Vec<f64>> = chunk.iter().map(|r| self.standardization.apply(r)).collect();
            let refs: Vec<&[f64]> = std_rows.iter().map(Vec::as_slice).collect();
            let probs = self.model.infer(&batch_input(&refs))?;
            let classes = probs.shape()[2];
            out.extend(probs.data().chunks(classes).map(|p| Prediction { probabilities: p.to_vec(), label: argmax(p) }));
        }
        Ok(out)
    }
}
