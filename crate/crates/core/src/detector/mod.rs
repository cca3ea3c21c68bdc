//! Prediction-error based detection: AARE, self-adaptive three-sigma
//! thresholds, the two detector state machines and the orchestrating
//! engine with its probation period.

mod aare;
mod engine;
mod state;
mod threshold;

pub use aare::compute_aare;
pub use engine::{
    DetectionMode, FinalRecord, Phase, ProbationRecord, ReRe, RunError, StepOutcome, StepSink,
};
pub use state::{DetectorState, StepVerdict};
pub use threshold::{compute_threshold, Moments, ThresholdPolicy};

use thiserror::Error;

use crate::lstm::{LstmError, TrainConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("threshold history has no included entries")]
    EmptyHistory,
    #[error("internal state error: {0}")]
    InternalState(String),
    #[error("out-of-order time index: expected t={expected}, got t={got}")]
    Sequencing { expected: usize, got: usize },
    #[error(transparent)]
    Lstm(#[from] LstmError),
}

/// Engine configuration. Defaults: `b = 3`, three sigma, 10 hidden units,
/// learning rate 0.15, at most 50 epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReReConfig {
    /// Look-back length `b`.
    pub lookback: usize,
    pub sigma_multiplier: f64,
    /// Floor for AARE denominators.
    pub epsilon: f64,
    pub hidden_units: usize,
    pub train: TrainConfig,
    pub seed: u64,
    pub mode: DetectionMode,
    /// Whether detector 1 counts the current, not yet judged AARE in its
    /// own threshold. Detector 2 never does.
    pub include_current_aare: bool,
    /// Adopt the retrained model even when the point is still abnormal.
    pub keep_retrained_on_abnormal: bool,
    /// Run the two detectors of a step on separate threads.
    pub parallel: bool,
    /// Record wall-clock time per step; when off every `elapsed` is zero.
    pub measure_time: bool,
}

impl Default for ReReConfig {
    fn default() -> Self {
        Self {
            lookback: 3,
            sigma_multiplier: 3.0,
            epsilon: 1e-7,
            hidden_units: 10,
            train: TrainConfig::default(),
            seed: 1,
            mode: DetectionMode::Dual,
            include_current_aare: true,
            keep_retrained_on_abnormal: false,
            parallel: true,
            measure_time: true,
        }
    }
}

impl ReReConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        if self.lookback < 2 {
            return Err(DetectorError::InvalidConfig(format!(
                "lookback must be at least 2, got {}",
                self.lookback
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(DetectorError::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.sigma_multiplier >= 0.0 && self.sigma_multiplier.is_finite()) {
            return Err(DetectorError::InvalidConfig(format!(
                "sigma multiplier must be non-negative, got {}",
                self.sigma_multiplier
            )));
        }
        if self.hidden_units == 0 {
            return Err(DetectorError::InvalidConfig("hidden_units must be at least 1".into()));
        }
        self.train.validate()?;
        Ok(())
    }

    /// Number of leading points that never receive a verdict (`2b + 1`).
    pub fn probation_len(&self) -> usize {
        2 * self.lookback + 1
    }
}

/// The engine's anomaly rule: every running detector must flag the point.
pub fn combine_verdicts(first_abnormal: bool, second_abnormal: Option<bool>) -> bool {
    first_abnormal && second_abnormal.unwrap_or(true)
}
