use std::collections::VecDeque;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{combine_verdicts, compute_aare, DetectorError, DetectorState, Moments, ReReConfig, StepVerdict, ThresholdPolicy};
use crate::lstm::{predict_next, train_window, LstmModel, TrainingWindow};
use crate::seed::derive_seed;

/// Stream id used for seeds of the shared probation pipeline.
const PROBATION_STREAM: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Probation,
    Detecting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    /// Two detectors, anomaly only when both agree.
    Dual,
    /// Detector 1 alone.
    Single,
}

/// Output of a probation step. No verdict exists yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbationRecord {
    pub t: usize,
    pub value: f64,
    /// `v̂_t`, available from `t = b`.
    pub predicted: Option<f64>,
    /// `AARE_t`, available from `t = 2b - 1`.
    pub aare: Option<f64>,
    /// `v̂_{t+1}`, available from `t = b - 1`.
    pub next_predicted: Option<f64>,
    pub epochs_used: Option<usize>,
    pub elapsed: Duration,
}

/// Output of a post-probation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRecord {
    pub t: usize,
    pub value: f64,
    pub detector1: StepVerdict,
    pub detector2: Option<StepVerdict>,
    pub anomaly: bool,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepOutcome {
    Probation(ProbationRecord),
    Verdict(FinalRecord),
}

impl StepOutcome {
    pub fn t(&self) -> usize {
        match self {
            StepOutcome::Probation(p) => p.t,
            StepOutcome::Verdict(f) => f.t,
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            StepOutcome::Probation(p) => p.value,
            StepOutcome::Verdict(f) => f.value,
        }
    }

    pub fn phase(&self) -> Phase {
        match self {
            StepOutcome::Probation(_) => Phase::Probation,
            StepOutcome::Verdict(_) => Phase::Detecting,
        }
    }

    pub fn verdict(&self) -> Option<&FinalRecord> {
        match self {
            StepOutcome::Verdict(f) => Some(f),
            StepOutcome::Probation(_) => None,
        }
    }

    pub fn into_verdict(self) -> Option<FinalRecord> {
        match self {
            StepOutcome::Verdict(f) => Some(f),
            StepOutcome::Probation(_) => None,
        }
    }

    pub fn elapsed(&self) -> Duration {
        match self {
            StepOutcome::Probation(p) => p.elapsed,
            StepOutcome::Verdict(f) => f.elapsed,
        }
    }
}

/// Receives every step produced by [`ReRe::run`].
pub trait StepSink {
    type Error;

    fn accept(&mut self, step: StepOutcome) -> Result<(), Self::Error>;
}

impl StepSink for Vec<StepOutcome> {
    type Error = std::convert::Infallible;

    fn accept(&mut self, step: StepOutcome) -> Result<(), Self::Error> {
        self.push(step);
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError<E> {
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error("sink rejected step: {0}")]
    Sink(E),
}

#[derive(Debug, Clone)]
struct Bootstrap {
    model: Option<LstmModel>,
    predictions: VecDeque<(usize, f64)>,
    history: Moments,
}

#[derive(Debug, Clone)]
enum Stage {
    Probation(Bootstrap),
    Detecting {
        first: DetectorState,
        second: Option<DetectorState>,
    },
}

/// The streaming engine: a shared probation pipeline for the first
/// `2b + 1` points, then two independently adapting detectors whose
/// abnormal verdicts must coincide to raise an anomaly.
#[derive(Debug, Clone)]
pub struct ReRe {
    cfg: ReReConfig,
    next_t: usize,
    /// `v_{t-b}, ..., v_t` once enough points have arrived.
    recent: VecDeque<f64>,
    stage: Stage,
}

impl ReRe {
    pub fn new(cfg: ReReConfig) -> Result<Self, DetectorError> {
        cfg.validate()?;
        Ok(Self {
            recent: VecDeque::with_capacity(cfg.lookback + 2),
            cfg,
            next_t: 0,
            stage: Stage::Probation(Bootstrap {
                model: None,
                predictions: VecDeque::new(),
                history: Moments::default(),
            }),
        })
    }

    pub fn config(&self) -> &ReReConfig {
        &self.cfg
    }

    /// Time index the next call to [`ReRe::step`] must carry.
    pub fn next_t(&self) -> usize {
        self.next_t
    }

    pub fn phase(&self) -> Phase {
        match self.stage {
            Stage::Probation(_) => Phase::Probation,
            Stage::Detecting { .. } => Phase::Detecting,
        }
    }

    pub fn detector1(&self) -> Option<&DetectorState> {
        match &self.stage {
            Stage::Detecting { first, .. } => Some(first),
            Stage::Probation(_) => None,
        }
    }

    pub fn detector2(&self) -> Option<&DetectorState> {
        match &self.stage {
            Stage::Detecting { second, .. } => second.as_ref(),
            Stage::Probation(_) => None,
        }
    }

    /// Feeds the next observation, assigning it the next time index.
    pub fn push(&mut self, value: f64) -> Result<StepOutcome, DetectorError> {
        self.step(self.next_t, value)
    }

    pub fn step(&mut self, t: usize, value: f64) -> Result<StepOutcome, DetectorError> {
        if t != self.next_t {
            return Err(DetectorError::Sequencing {
                expected: self.next_t,
                got: t,
            });
        }
        if !value.is_finite() {
            return Err(DetectorError::InvalidInput(format!(
                "non-finite observation at t={t}"
            )));
        }
        let started = self.cfg.measure_time.then(Instant::now);
        self.recent.push_back(value);
        while self.recent.len() > self.cfg.lookback + 1 {
            self.recent.pop_front();
        }

        let outcome = if t <= 2 * self.cfg.lookback {
            StepOutcome::Probation(self.probation_step(t, value)?)
        } else {
            StepOutcome::Verdict(self.detection_step(t, value)?)
        };
        self.next_t += 1;

        let elapsed = started.map(|s| s.elapsed()).unwrap_or_default();
        Ok(match outcome {
            StepOutcome::Probation(p) => StepOutcome::Probation(ProbationRecord { elapsed, ..p }),
            StepOutcome::Verdict(f) => StepOutcome::Verdict(FinalRecord { elapsed, ..f }),
        })
    }

    /// Streams every value through the engine into `sink`.
    pub fn run<I, S>(&mut self, values: I, sink: &mut S) -> Result<(), RunError<S::Error>>
    where
        I: IntoIterator<Item = f64>,
        S: StepSink,
    {
        for v in values {
            let step = self.push(v)?;
            sink.accept(step).map_err(RunError::Sink)?;
        }
        Ok(())
    }

    fn probation_step(&mut self, t: usize, value: f64) -> Result<ProbationRecord, DetectorError> {
        let b = self.cfg.lookback;
        let Stage::Probation(boot) = &mut self.stage else {
            return Err(DetectorError::InternalState("probation step after split".into()));
        };
        let n = self.recent.len();

        let predicted = boot
            .predictions
            .iter()
            .find(|(y, _)| *y == t)
            .map(|&(_, p)| p);
        let mut aare = None;
        if t + 1 >= 2 * b {
            let preds: Vec<f64> = boot
                .predictions
                .iter()
                .filter(|(y, _)| *y + b > t && *y <= t)
                .map(|&(_, p)| p)
                .collect();
            if preds.len() != b {
                return Err(DetectorError::InternalState(format!(
                    "probation has {} of {b} predictions at t={t}",
                    preds.len()
                )));
            }
            let observed: Vec<f64> = self.recent.iter().skip(n - b).copied().collect();
            let a = compute_aare(&observed, &preds, self.cfg.epsilon)?;
            boot.history.push(a);
            aare = Some(a);
        }

        let mut next_predicted = None;
        let mut epochs_used = None;
        if t + 1 >= b {
            let last_b: Vec<f64> = self.recent.iter().skip(n - b).copied().collect();
            let window = TrainingWindow::new(&last_b)?;
            let seed = derive_seed(self.cfg.seed, PROBATION_STREAM, t as u64);
            let outcome = train_window(seed, self.cfg.hidden_units, &window, &self.cfg.train)?;
            let next = predict_next(&outcome.model, &window);
            boot.model = Some(outcome.model);
            boot.predictions.push_back((t + 1, next));
            while boot.predictions.len() > b {
                boot.predictions.pop_front();
            }
            next_predicted = Some(next);
            epochs_used = Some(outcome.epochs_used);
        }

        if t == 2 * b {
            let model = boot
                .model
                .take()
                .ok_or_else(|| DetectorError::InternalState("no probation model".into()))?;
            let predictions = std::mem::take(&mut boot.predictions);
            let history = boot.history;
            let second = match self.cfg.mode {
                DetectionMode::Dual => Some(DetectorState::from_probation(
                    2,
                    ThresholdPolicy::NormalOnly,
                    model.clone(),
                    predictions.clone(),
                    history,
                )),
                DetectionMode::Single => None,
            };
            let first = DetectorState::from_probation(1, ThresholdPolicy::All, model, predictions, history);
            self.stage = Stage::Detecting { first, second };
        }

        Ok(ProbationRecord {
            t,
            value,
            predicted,
            aare,
            next_predicted,
            epochs_used,
            elapsed: Duration::ZERO,
        })
    }

    fn detection_step(&mut self, t: usize, value: f64) -> Result<FinalRecord, DetectorError> {
        let Stage::Detecting { first, second } = &mut self.stage else {
            return Err(DetectorError::InternalState("detection step during probation".into()));
        };
        let recent: Vec<f64> = self.recent.iter().copied().collect();
        let cfg = &self.cfg;
        let (v1, v2) = match second {
            Some(second) if cfg.parallel => {
                let (a, b) = rayon::join(|| first.step(t, &recent, cfg), || second.step(t, &recent, cfg));
                (a?, Some(b?))
            }
            Some(second) => (first.step(t, &recent, cfg)?, Some(second.step(t, &recent, cfg)?)),
            None => (first.step(t, &recent, cfg)?, None),
        };
        let anomaly = combine_verdicts(v1.is_abnormal, v2.as_ref().map(|v| v.is_abnormal));
        Ok(FinalRecord {
            t,
            value,
            detector1: v1,
            detector2: v2,
            anomaly,
            elapsed: Duration::ZERO,
        })
    }
}
