use std::borrow::Cow;

use ndarray::Array2;

use super::backward::{loss_and_gradient, training_loss};
use super::forward::{forward_cached, Receptive};
use super::{GatConfig, GatModel, TrainingSet, CLAMP};
use crate::corpus::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::Neighborhoods;

/// Mean binary cross-entropy with predictions clamped to `[1e-12, 1 - 1e-12]`.
pub fn bce_loss(predictions: &[f64], labels: &[u8]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Empty("training subset"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(CLAMP, 1.0 - CLAMP);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / predictions.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: GatModel,
    /// Training loss before each update, followed by the loss after the last one.
    pub loss_history: Vec<f64>,
}

impl TrainedModel {
    pub fn initial_loss(&self) -> f64 {
        self.loss_history[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self
            .loss_history
            .last()
            .expect("history holds the initial loss")
    }
}

/// Full-batch gradient descent with a fixed step on a fixed graph.
pub fn train(
    config: GatConfig,
    graph: &dyn Neighborhoods,
    x: &EmbeddingMatrix,
    train: &TrainingSet,
) -> Result<TrainedModel> {
    let rec = Receptive::new(graph);
    fit(config, x.as_array(), train, |_| Cow::Borrowed(&rec))
}

/// Like [`train`], but epoch `e` (0-based) runs on `graph_for_epoch(e)`; the
/// closing loss is measured on the last epoch's graph.
pub fn train_resampled<G, F>(
    config: GatConfig,
    x: &EmbeddingMatrix,
    train: &TrainingSet,
    mut graph_for_epoch: F,
) -> Result<TrainedModel>
where
    G: Neighborhoods,
    F: FnMut(usize) -> G,
{
    fit(config, x.as_array(), train, |epoch| {
        Cow::Owned(Receptive::new(&graph_for_epoch(epoch)))
    })
}

fn fit<'a>(
    config: GatConfig,
    x: &Array2<f64>,
    train: &TrainingSet,
    mut receptive_for_epoch: impl FnMut(usize) -> Cow<'a, Receptive>,
) -> Result<TrainedModel> {
    if !train.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let mut model = GatModel::init(config, x.ncols())?;
    let mut loss_history = Vec::with_capacity(config.epochs + 1);
    let mut rec = None;
    for epoch in 0..config.epochs {
        let current = receptive_for_epoch(epoch);
        let step = loss_and_gradient(&model, &current, x, train).map_err(|e| match e {
            Error::NonFinite { .. } => Error::Diverged {
                epoch: epoch + 1,
                loss: f64::NAN,
            },
            other => other,
        })?;
        if !step.loss.is_finite() {
            return Err(Error::Diverged {
                epoch: epoch + 1,
                loss: step.loss,
            });
        }
        loss_history.push(step.loss);
        model
            .params
            .add_scaled(-config.learning_rate, &step.gradient);
        if !model.params.is_finite() {
            return Err(Error::Diverged {
                epoch: epoch + 1,
                loss: step.loss,
            });
        }
        rec = Some(current);
    }
    let rec = match rec {
        Some(rec) => rec,
        None => receptive_for_epoch(0),
    };
    let cache = forward_cached(&model, &rec, x).map_err(|_| Error::Diverged {
        epoch: config.epochs,
        loss: f64::NAN,
    })?;
    loss_history.push(training_loss(&cache, train)?);
    Ok(TrainedModel {
        model,
        loss_history,
    })
}
