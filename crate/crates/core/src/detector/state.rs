use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{compute_aare, DetectorError, Moments, ReReConfig, ThresholdPolicy};
use crate::lstm::{predict_next, train_window, LstmModel, TrainingWindow};
use crate::seed::derive_seed;

/// Outcome of one detector at one post-probation time point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepVerdict {
    pub detector: u8,
    pub t: usize,
    pub value: f64,
    /// Prediction of `v_t` made at `t - 1`, before any retraining.
    pub initial_predicted: f64,
    /// AARE from the first check; this is the value the threshold saw.
    pub initial_aare: f64,
    /// Prediction of `v_t` in effect after the step.
    pub predicted: f64,
    /// AARE in effect after the step (recomputed when retrained).
    pub aare: f64,
    pub threshold: f64,
    pub is_abnormal: bool,
    pub retrained: bool,
    pub epochs_used: Option<usize>,
    /// Prediction of `v_{t+1}` made at the end of the step.
    pub next_predicted: f64,
}

/// State of a single detector: its current model, the predictions covering
/// the current AARE window, and the statistics behind its threshold.
#[derive(Debug, Clone)]
pub struct DetectorState {
    id: u8,
    policy: ThresholdPolicy,
    model: LstmModel,
    /// `(t, v̂_t)` for the last `b` time points plus the pending next one.
    predictions: VecDeque<(usize, f64)>,
    /// AAREs that feed the threshold under this detector's policy.
    history: Moments,
    aare_count: usize,
    retrain_count: usize,
}

impl DetectorState {
    pub(crate) fn from_probation(
        id: u8,
        policy: ThresholdPolicy,
        model: LstmModel,
        predictions: VecDeque<(usize, f64)>,
        history: Moments,
    ) -> Self {
        let aare_count = history.count() as usize;
        Self {
            id,
            policy,
            model,
            predictions,
            history,
            aare_count,
            retrain_count: 0,
        }
    }

    pub fn id(&self) -> u8 {
        self.id
    }

    pub fn policy(&self) -> ThresholdPolicy {
        self.policy
    }

    pub fn model(&self) -> &LstmModel {
        &self.model
    }

    pub fn retrain_count(&self) -> usize {
        self.retrain_count
    }

    /// Number of AARE values computed so far, probation included.
    pub fn aare_count(&self) -> usize {
        self.aare_count
    }

    /// Number of AARE values currently feeding the threshold.
    pub fn included_count(&self) -> usize {
        self.history.count() as usize
    }

    fn prediction_window(&self, t: usize, b: usize) -> Result<Vec<f64>, DetectorError> {
        let first = t + 1 - b;
        let preds: Vec<f64> = self
            .predictions
            .iter()
            .filter(|(y, _)| (first..=t).contains(y))
            .map(|&(_, p)| p)
            .collect();
        if preds.len() != b {
            return Err(DetectorError::InternalState(format!(
                "detector {} has {} of {} predictions for t={t}",
                self.id,
                preds.len(),
                b
            )));
        }
        Ok(preds)
    }

    fn set_prediction(&mut self, t: usize, value: f64) {
        if let Some(slot) = self.predictions.iter_mut().find(|(y, _)| *y == t) {
            slot.1 = value;
        }
    }

    /// Runs one post-probation step.
    ///
    /// `recent` holds `v_{t-b}, ..., v_t` (length `b + 1`).
    pub fn step(&mut self, t: usize, recent: &[f64], cfg: &ReReConfig) -> Result<StepVerdict, DetectorError> {
        let b = cfg.lookback;
        if recent.len() != b + 1 {
            return Err(DetectorError::InternalState(format!(
                "expected {} recent values, got {}",
                b + 1,
                recent.len()
            )));
        }
        if t < 2 * b + 1 {
            return Err(DetectorError::InternalState(format!(
                "detector step at t={t} is inside probation"
            )));
        }
        let observed = &recent[1..];
        let value = recent[b];
        let mut preds = self.prediction_window(t, b)?;
        let initial_predicted = preds[b - 1];
        let initial_aare = compute_aare(observed, &preds, cfg.epsilon)?;

        let threshold = match self.policy {
            ThresholdPolicy::All if cfg.include_current_aare => {
                self.history.with(initial_aare).threshold(cfg.sigma_multiplier)?
            }
            _ => self.history.threshold(cfg.sigma_multiplier)?,
        };

        let mut aare = initial_aare;
        let mut retrained = false;
        let mut epochs_used = None;
        let mut is_abnormal = false;
        if initial_aare > threshold {
            let window = TrainingWindow::new(&recent[..b])?;
            let seed = derive_seed(cfg.seed, u64::from(self.id), t as u64);
            let outcome = train_window(seed, cfg.hidden_units, &window, &cfg.train)?;
            retrained = true;
            epochs_used = Some(outcome.epochs_used);
            self.retrain_count += 1;

            let repredicted = predict_next(&outcome.model, &window);
            preds[b - 1] = repredicted;
            self.set_prediction(t, repredicted);
            aare = compute_aare(observed, &preds, cfg.epsilon)?;
            if aare <= threshold {
                self.model = outcome.model;
            } else {
                is_abnormal = true;
                if cfg.keep_retrained_on_abnormal {
                    self.model = outcome.model;
                }
            }
        }

        self.aare_count += 1;
        match self.policy {
            ThresholdPolicy::All => self.history.push(aare),
            ThresholdPolicy::NormalOnly if !is_abnormal => self.history.push(aare),
            ThresholdPolicy::NormalOnly => {}
        }

        let next_window = TrainingWindow::new(observed)?;
        let next_predicted = predict_next(&self.model, &next_window);
        self.predictions.push_back((t + 1, next_predicted));
        while self.predictions.len() > b {
            self.predictions.pop_front();
        }

        Ok(StepVerdict {
            detector: self.id,
            t,
            value,
            initial_predicted,
            initial_aare,
            predicted: preds[b - 1],
            aare,
            threshold,
            is_abnormal,
            retrained,
            epochs_used,
            next_predicted,
        })
    }
}
