use rand::seq::SliceRandom;

use super::mlp::{Gradients, MlpModel, Workspace};
use crate::error::{Error, Result};
use crate::numerics::{Dataset, SeededRng};

/// Plain mini-batch gradient descent settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Stop after the first epoch whose full training-set MSE falls below this.
    pub target_train_mse: Option<f64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            learning_rate: 0.01,
            max_epochs: 100,
            batch_size: 64,
            target_train_mse: None,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if let Some(t) = self.target_train_mse {
            if t.is_nan() || t < 0.0 {
                return Err(Error::invalid(format!("target_train_mse must be >= 0, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    /// Full training-set MSE dropped below the target.
    TargetReached,
    /// Ran all `max_epochs` epochs.
    EpochBudget,
    /// Parameters or loss became non-finite; the model is the last finite state.
    Diverged,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// Full training-set MSE after each completed epoch.
    pub history: Vec<f64>,
    pub stop: StopReason,
}

impl TrainOutcome {
    pub fn epochs(&self) -> usize {
        self.history.len()
    }

    pub fn final_mse(&self) -> f64 {
        self.history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Mini-batch gradient descent on squared error. Each epoch visits the data in a
/// fresh random order drawn from `rng`; the last batch of an epoch may be short.
pub fn train_erm(model: MlpModel, data: &Dataset, opts: &TrainOptions, rng: &mut SeededRng) -> Result<TrainOutcome> {
    opts.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    if data.d() != model.input_dim() || model.output_dim() != 1 {
        return Err(Error::invalid(format!(
            "dataset has {} features but model is {:?}",
            data.d(),
            model.layer_dims()
        )));
    }
    let mut model = model;
    let mut ws = Workspace::new(&model);
    let mut grads = Gradients::zeros_like(&model);
    let mut order: Vec<usize> = (0..data.n()).collect();
    let mut history = Vec::new();
    let labels = data.labels();

    for _ in 0..opts.max_epochs {
        let snapshot = model.clone();
        order.shuffle(rng);
        for batch in order.chunks(opts.batch_size) {
            grads.clear();
            let scale = 2.0 / batch.len() as f64;
            for &i in batch {
                let out = model.predict(data.row(i), &mut ws);
                model.backprop_ws(&mut ws, scale * (out - labels[i]), &mut grads);
            }
            model.step(&grads, opts.learning_rate);
        }
        let mse = model.mse(data);
        if !mse.is_finite() || !model.params_finite() {
            return Ok(TrainOutcome {
                model: snapshot,
                history,
                stop: StopReason::Diverged,
            });
        }
        history.push(mse);
        if opts.target_train_mse.is_some_and(|t| mse < t) {
            return Ok(TrainOutcome {
                model,
                history,
                stop: StopReason::TargetReached,
            });
        }
    }
    Ok(TrainOutcome {
        model,
        history,
        stop: StopReason::EpochBudget,
    })
}
