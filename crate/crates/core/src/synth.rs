//! Deterministic synthetic streams for tests and benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synth parameter: {0}")]
    InvalidParam(String),
}

/// Sine baseline shared by the sine and spike kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sine {
    pub offset: f64,
    pub amplitude: f64,
    pub period: f64,
}

impl Default for Sine {
    fn default() -> Self {
        Self {
            offset: 10.0,
            amplitude: 1.0,
            period: 50.0,
        }
    }
}

impl Sine {
    pub fn at(&self, i: usize) -> f64 {
        self.offset + self.amplitude * (std::f64::consts::TAU * i as f64 / self.period).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SynthKind {
    Constant { value: f64 },
    Sine(Sine),
    /// Mean moves from `from` to `to` at index `at`, linearly over `ramp`
    /// steps (0 for an abrupt step).
    LevelShift { from: f64, to: f64, at: usize, ramp: usize },
    /// Sine baseline with the point at `at` multiplied by `magnitude`.
    Spike { base: Sine, at: usize, magnitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    /// Standard deviation of additive Gaussian noise; 0 disables it.
    pub noise: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// `lookback` sets the minimum length, `2b + 2`, so at least one verdict exists.
    pub fn validate(&self, lookback: usize) -> Result<(), SynthError> {
        let min = 2 * lookback + 2;
        if self.n < min {
            return Err(SynthError::InvalidParam(format!("n must be at least {min}, got {}", self.n)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(SynthError::InvalidParam(format!("noise must be non-negative, got {}", self.noise)));
        }
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(SynthError::InvalidParam(format!("{name} must be finite")))
            }
        };
        let sine = |s: &Sine| {
            finite("offset", s.offset)?;
            finite("amplitude", s.amplitude)?;
            if !(s.period > 0.0 && s.period.is_finite()) {
                return Err(SynthError::InvalidParam(format!("period must be positive, got {}", s.period)));
            }
            Ok(())
        };
        let index = |at: usize| {
            if at < self.n {
                Ok(())
            } else {
                Err(SynthError::InvalidParam(format!("index {at} outside 0..{}", self.n)))
            }
        };
        match &self.kind {
            SynthKind::Constant { value } => finite("value", *value),
            SynthKind::Sine(s) => sine(s),
            SynthKind::LevelShift { from, to, at, .. } => {
                finite("from", *from)?;
                finite("to", *to)?;
                index(*at)
            }
            SynthKind::Spike { base, at, magnitude } => {
                sine(base)?;
                finite("magnitude", *magnitude)?;
                index(*at)
            }
        }
    }
}

fn clean(kind: &SynthKind, i: usize) -> f64 {
    match kind {
        SynthKind::Constant { value } => *value,
        SynthKind::Sine(s) => s.at(i),
        SynthKind::LevelShift { from, to, at, ramp } => {
            if i < *at {
                *from
            } else if *ramp == 0 || i >= at + ramp {
                *to
            } else {
                from + (to - from) * (i - at + 1) as f64 / *ramp as f64
            }
        }
        SynthKind::Spike { base, at, magnitude } => {
            let v = base.at(i);
            if i == *at {
                v * magnitude
            } else {
                v
            }
        }
    }
}

/// Generates the series; identical specs give identical output.
pub fn generate(spec: &SynthSpec, lookback: usize) -> Result<Vec<f64>, SynthError> {
    spec.validate(lookback)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = (spec.noise > 0.0)
        .then(|| Normal::new(0.0, spec.noise))
        .transpose()
        .map_err(|e| SynthError::InvalidParam(e.to_string()))?;
    Ok((0..spec.n)
        .map(|i| {
            let v = clean(&spec.kind, i);
            match &noise {
                // the spike point itself stays exact
                Some(d) if !matches!(spec.kind, SynthKind::Spike { at, .. } if at == i) => v + d.sample(&mut rng),
                _ => v,
            }
        })
        .collect())
}

/// A CPU-utilisation-like stream: daily cycle at five-minute sampling,
/// Gaussian jitter and two short bursts at 40% and 75% of the length.
pub fn benchmark_stream(n: usize, seed: u64) -> Vec<f64> {
    let daily = Sine {
        offset: 40.0,
        amplitude: 5.0,
        period: 288.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 0.5).expect("valid deviation");
    let bursts = [n * 2 / 5, n * 3 / 4];
    (0..n)
        .map(|i| {
            let burst = if bursts.iter().any(|&b| (b..b + 3).contains(&i)) { 35.0 } else { 0.0 };
            daily.at(i) + jitter.sample(&mut rng) + burst
        })
        .collect()
}
