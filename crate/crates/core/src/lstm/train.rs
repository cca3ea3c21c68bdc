use super::{LstmError, LstmModel, TrainingWindow};

/// Hyperparameters for fitting a model to one look-back window.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub min_epochs: usize,
    /// Consecutive non-improving epochs tolerated before stopping.
    pub patience: usize,
    /// Minimum relative drop in epoch loss that counts as an improvement.
    pub rel_improvement_tol: f64,
    /// Gradient L2 norm ceiling applied before every update.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.15,
            max_epochs: 50,
            min_epochs: 1,
            patience: 3,
            rel_improvement_tol: 1e-3,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LstmError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(LstmError::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.min_epochs < 1 || self.min_epochs > self.max_epochs {
            return Err(LstmError::InvalidConfig(format!(
                "need 1 <= min_epochs ({}) <= max_epochs ({})",
                self.min_epochs, self.max_epochs
            )));
        }
        if !(self.rel_improvement_tol >= 0.0) {
            return Err(LstmError::InvalidConfig(
                "rel_improvement_tol must be non-negative".into(),
            ));
        }
        if !(self.clip_norm > 0.0) {
            return Err(LstmError::InvalidConfig("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

/// Result of fitting a model to a window.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LstmModel,
    pub epochs_used: usize,
    /// Full-batch loss measured at the start of each epoch.
    pub losses: Vec<f64>,
}

/// One-step-ahead training pairs of a window: input `i` is the normalized
/// value at position `i`, target is the normalized value at `i + 1`.
pub fn training_pairs(window: &TrainingWindow) -> (Vec<f64>, Vec<f64>) {
    let norm = window.normalized();
    let inputs = norm[..norm.len() - 1].to_vec();
    let targets = norm[1..].to_vec();
    (inputs, targets)
}

/// Fits `model` to `window` with full-batch SGD and plateau early stopping.
pub fn train(
    mut model: LstmModel,
    window: &TrainingWindow,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, LstmError> {
    cfg.validate()?;
    let (inputs, targets) = training_pairs(window);
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    let mut losses = Vec::with_capacity(cfg.max_epochs);

    for epoch in 1..=cfg.max_epochs {
        let (loss, mut grad) = model.loss_and_gradient(&inputs, &targets);
        losses.push(loss);
        if loss < best * (1.0 - cfg.rel_improvement_tol) {
            best = loss;
            stale = 0;
        } else {
            stale += 1;
        }

        let norm = grad.l2_norm();
        if norm > cfg.clip_norm {
            let k = cfg.clip_norm / norm;
            grad.iter_mut().for_each(|g| *g *= k);
        }
        for (w, g) in model.params_mut().iter_mut().zip(grad.iter()) {
            *w -= cfg.learning_rate * g;
        }
        if !model.params().is_finite() {
            return Err(LstmError::NonFiniteParameters);
        }

        if epoch >= cfg.min_epochs && stale >= cfg.patience {
            return Ok(TrainOutcome {
                model,
                epochs_used: epoch,
                losses,
            });
        }
    }
    Ok(TrainOutcome {
        model,
        epochs_used: cfg.max_epochs,
        losses,
    })
}

/// Builds a fresh model from `seed` and trains it on `window`.
pub fn train_window(
    seed: u64,
    hidden_units: usize,
    window: &TrainingWindow,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, LstmError> {
    train(LstmModel::init(seed, hidden_units)?, window, cfg)
}

/// Predicts the value that follows `window`.
pub fn predict_next(model: &LstmModel, window: &TrainingWindow) -> f64 {
    let outputs = model.forward(&window.normalized());
    let y = outputs.last().copied().unwrap_or(0.0);
    window.denormalize(y)
}
