use serde::{Deserialize, Serialize};

use super::DetectorError;

/// Which AARE history entries feed a detector's threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Every AARE computed so far.
    All,
    /// Only AAREs of points this detector judged normal.
    NormalOnly,
}

/// `mean + sigma_multiplier * population_std` over the included entries.
///
/// Two-pass evaluation over the whole history.
pub fn compute_threshold(
    history: &[f64],
    include: &[bool],
    sigma_multiplier: f64,
) -> Result<f64, DetectorError> {
    if history.len() != include.len() {
        return Err(DetectorError::InvalidInput(format!(
            "history has {} entries but {} inclusion flags",
            history.len(),
            include.len()
        )));
    }
    let included = || history.iter().zip(include).filter(|(_, &f)| f).map(|(v, _)| *v);
    let count = included().count();
    if count == 0 {
        return Err(DetectorError::EmptyHistory);
    }
    let n = count as f64;
    let mean = included().sum::<f64>() / n;
    let var = included().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(mean + sigma_multiplier * var.sqrt())
}

/// Running count, mean and sum of squared deviations (Welford), used by
/// the streaming detectors so each threshold costs O(1).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// A copy with `x` added, leaving `self` untouched.
    pub fn with(mut self, x: f64) -> Self {
        self.push(x);
        self
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    pub fn population_std(&self) -> Option<f64> {
        (self.count > 0).then(|| (self.m2.max(0.0) / self.count as f64).sqrt())
    }

    pub fn threshold(&self, sigma_multiplier: f64) -> Result<f64, DetectorError> {
        match (self.mean(), self.population_std()) {
            (Some(mu), Some(sd)) => Ok(mu + sigma_multiplier * sd),
            _ => Err(DetectorError::EmptyHistory),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_variance_history() {
        let t = compute_threshold(&[0.1, 0.1, 0.1], &[true; 3], 3.0).unwrap();
        assert!((t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn brute_force_example() {
        // mean 0.2, population variance 0.02
        let t = compute_threshold(&[0.1, 0.1, 0.4], &[true; 3], 3.0).unwrap();
        assert!((t - (0.2 + 3.0 * 0.02f64.sqrt())).abs() < 1e-12);
        assert!((t - 0.624264).abs() < 1e-6);
    }

    #[test]
    fn normal_only_filter_skips_flagged_entries() {
        let t = compute_threshold(&[0.1, 0.9, 0.1], &[true, false, true], 3.0).unwrap();
        assert!((t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn empty_inclusion_is_an_error() {
        assert_eq!(
            compute_threshold(&[0.1, 0.2], &[false, false], 3.0),
            Err(DetectorError::EmptyHistory)
        );
        assert_eq!(Moments::default().threshold(3.0), Err(DetectorError::EmptyHistory));
    }

    proptest! {
        #[test]
        fn running_moments_agree_with_two_pass(
            xs in prop::collection::vec(0.0f64..2.0, 1..300),
            k in 0.0f64..5.0,
        ) {
            let mut m = Moments::default();
            xs.iter().for_each(|&x| m.push(x));
            let two_pass = compute_threshold(&xs, &vec![true; xs.len()], k).unwrap();
            prop_assert!((m.threshold(k).unwrap() - two_pass).abs() <= 1e-12);
        }
    }
}
