//! Mini-batch Adam training with validation-based early stopping.

use serde::{Deserialize, Serialize};

use crate::data::Window;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::metrics::{confusion, macro_f1, Averaging};
use crate::rng::{derive_seed_u64, SeededRng};

use super::adam::{Adam, AdamConfig};
use super::layers::LayerSpec;
use super::model::Model;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub early_stop_patience: usize,
    /// Validation score used for early stopping; set from the grid's `metric`.
    #[serde(skip)]
    pub metric: Averaging,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            learning_rate: 3e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            early_stop_patience: 4,
            metric: Averaging::Macro,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::invalid("epsilon must be >= 0"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned (1-based).
    pub best_epoch: usize,
    pub stopped_early: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best validation score; a score counts as an improvement only
/// if strictly greater than the best so far.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            since_best: 0,
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|b| b.0)
    }

    pub fn observe(&mut self, epoch: usize, score: f64) -> StopDecision {
        match self.best {
            Some((_, best)) if score <= best => {
                self.since_best += 1;
                if self.patience > 0 && self.since_best >= self.patience {
                    StopDecision::Stop
                } else {
                    StopDecision::Continue
                }
            }
            _ => {
                self.best = Some((epoch, score));
                self.since_best = 0;
                StopDecision::Improved
            }
        }
    }
}

/// Scores `model` on `windows` with the chosen F1 averaging.
pub fn evaluate_windows(model: &Model, windows: &[Window], averaging: Averaging, exec: Execution) -> Result<f64> {
    let inputs: Vec<Vec<f64>> = windows.iter().map(|w| w.values.clone()).collect();
    let pred = model.predict(&inputs, exec)?;
    let truth: Vec<usize> = windows.iter().map(|w| w.label.index).collect();
    let cm = confusion(&truth, &pred, model.num_classes)?;
    Ok(macro_f1(&cm)?.score(averaging))
}

/// Trains a fresh model on single-channel windows. Shuffling and weight
/// initialization are seeded from `config.seed`; the parameters from the
/// epoch with the best validation score are returned. With no validation
/// windows the last epoch is returned.
pub fn train(
    arch: &[LayerSpec],
    train_windows: &[Window],
    val_windows: &[Window],
    num_classes: usize,
    config: &TrainConfig,
    exec: Execution,
) -> Result<(Model, History)> {
    config.validate()?;
    let first = train_windows
        .first()
        .ok_or_else(|| Error::invalid("training set is empty"))?;
    let len = first.values.len();
    if let Some(w) = train_windows.iter().chain(val_windows).find(|w| w.values.len() != len) {
        return Err(Error::Shape(format!(
            "window from {} has length {}, expected {len}",
            w.source_id,
            w.values.len()
        )));
    }
    let mut model = Model::new(arch, 1, len, num_classes, derive_seed_u64(config.seed, &[0]))?;
    let mut adam = Adam::new(&model, config.adam());
    let mut shuffle_rng = SeededRng::new(derive_seed_u64(config.seed, &[1]));
    let mut order: Vec<usize> = (0..train_windows.len()).collect();
    let mut stopper = EarlyStopping::new(config.early_stop_patience);
    let mut best_model = model.clone();
    let mut history = History::default();

    for epoch in 1..=config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let inputs: Vec<&[f64]> = batch.iter().map(|&i| train_windows[i].values.as_slice()).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| train_windows[i].label.index).collect();
            let out = model.backward(&inputs, &labels, false)?;
            if !out.loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss_sum += out.loss * batch.len() as f64;
            adam.step(&mut model, &out.grads)?;
        }
        let train_loss = loss_sum / train_windows.len() as f64;
        let val_f1 = if val_windows.is_empty() {
            None
        } else {
            Some(evaluate_windows(&model, val_windows, config.metric, exec)?)
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_f1,
        });
        match val_f1 {
            None => {
                best_model = model.clone();
                history.best_epoch = epoch;
            }
            Some(score) => match stopper.observe(epoch, score) {
                StopDecision::Improved => {
                    best_model = model.clone();
                    history.best_epoch = epoch;
                }
                StopDecision::Continue => {}
                StopDecision::Stop => {
                    history.stopped_early = epoch < config.epochs;
                    break;
                }
            },
        }
    }
    Ok((best_model, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stop_contract() {
        // improves through epoch 2, strictly worse afterwards
        let scores = [0.5, 0.8, 0.7, 0.6, 0.5, 0.4];
        let mut s = EarlyStopping::new(2);
        let mut stopped_at = None;
        for (i, &v) in scores.iter().enumerate() {
            if s.observe(i + 1, v) == StopDecision::Stop {
                stopped_at = Some(i + 1);
                break;
            }
        }
        assert!(stopped_at.unwrap() <= 5);
        assert_eq!(s.best_epoch(), Some(2));
    }

    #[test]
    fn ties_are_not_improvements() {
        let mut s = EarlyStopping::new(1);
        assert_eq!(s.observe(1, 0.5), StopDecision::Improved);
        assert_eq!(s.observe(2, 0.5), StopDecision::Stop);
    }

    #[test]
    fn zero_patience_never_stops() {
        let mut s = EarlyStopping::new(0);
        s.observe(1, 1.0);
        for e in 2..50 {
            assert_eq!(s.observe(e, 0.0), StopDecision::Continue);
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { beta2: 1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn empty_training_set() {
        let arch = [LayerSpec::dense(None), LayerSpec::softmax()];
        assert!(train(&arch, &[], &[], 2, &TrainConfig::default(), Execution::Sequential).is_err());
    }
}
