use super::LstmError;

/// A look-back window of `b` consecutive observations together with its
/// min-max scaling parameters.
///
/// Values are mapped into `[0, 1]` with the window's own minimum and
/// maximum. A flat window (`max == min`) maps every value to `0` and
/// de-normalizes with unit scale, so predictions land at `min + y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingWindow {
    values: Vec<f64>,
    norm_min: f64,
    norm_max: f64,
}

impl TrainingWindow {
    pub fn new(values: &[f64]) -> Result<Self, LstmError> {
        if values.len() < 2 {
            return Err(LstmError::WindowTooShort(values.len()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(LstmError::NonFiniteInput(pos));
        }
        let norm_min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let norm_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            values: values.to_vec(),
            norm_min,
            norm_max,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm_min(&self) -> f64 {
        self.norm_min
    }

    pub fn norm_max(&self) -> f64 {
        self.norm_max
    }

    pub fn is_degenerate(&self) -> bool {
        self.norm_max <= self.norm_min
    }

    fn scale(&self) -> f64 {
        if self.is_degenerate() {
            1.0
        } else {
            self.norm_max - self.norm_min
        }
    }

    pub fn normalize(&self, v: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            (v - self.norm_min) / self.scale()
        }
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        self.norm_min + y * self.scale()
    }

    pub fn normalized(&self) -> Vec<f64> {
        self.values.iter().map(|&v| self.normalize(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_short_and_non_finite() {
        assert!(matches!(
            TrainingWindow::new(&[1.0]),
            Err(LstmError::WindowTooShort(1))
        ));
        assert!(matches!(
            TrainingWindow::new(&[1.0, f64::NAN, 2.0]),
            Err(LstmError::NonFiniteInput(1))
        ));
        assert!(TrainingWindow::new(&[1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn degenerate_window_maps_to_zero() {
        let w = TrainingWindow::new(&[7.0, 7.0, 7.0]).unwrap();
        assert!(w.is_degenerate());
        assert_eq!(w.normalized(), vec![0.0, 0.0, 0.0]);
        assert_eq!(w.denormalize(0.25), 7.25);
    }

    #[test]
    fn scales_into_unit_interval() {
        let w = TrainingWindow::new(&[2.0, 4.0, 3.0]).unwrap();
        assert_eq!(w.normalized(), vec![0.0, 1.0, 0.5]);
        assert_eq!(w.norm_min(), 2.0);
        assert_eq!(w.norm_max(), 4.0);
    }

    proptest! {
        #[test]
        fn normalization_round_trip(values in prop::collection::vec(-100f64..100.0, 2..12)) {
            let w = TrainingWindow::new(&values).unwrap();
            prop_assume!(!w.is_degenerate());
            for &v in w.values() {
                let back = w.denormalize(w.normalize(v));
                prop_assert!((back - v).abs() <= 1e-12, "{v} -> {back}");
            }
        }
    }
}
