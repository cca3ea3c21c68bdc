use super::DetectorError;

/// Average absolute relative error of `predicted` against `observed`.
///
/// Denominators smaller than `epsilon` in magnitude are clamped to
/// `epsilon`, so zero-valued observations stay finite.
pub fn compute_aare(observed: &[f64], predicted: &[f64], epsilon: f64) -> Result<f64, DetectorError> {
    if observed.len() != predicted.len() || observed.is_empty() {
        return Err(DetectorError::InvalidInput(format!(
            "AARE needs two equal non-empty windows, got {} and {}",
            observed.len(),
            predicted.len()
        )));
    }
    if !(epsilon > 0.0) {
        return Err(DetectorError::InvalidInput(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if observed.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(DetectorError::InvalidInput(
            "non-finite value in AARE window".into(),
        ));
    }
    let total: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(v, p)| (v - p).abs() / v.abs().max(epsilon))
        .sum();
    Ok(total / observed.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn perfect_prediction_is_zero() {
        assert_eq!(compute_aare(&[10.0; 3], &[10.0; 3], 1e-7).unwrap(), 0.0);
    }

    #[test]
    fn hand_evaluated_examples() {
        let a = compute_aare(&[10.0, 10.0, 10.0], &[9.0, 11.0, 10.0], 1e-7).unwrap();
        assert!(close(a, 0.2 / 3.0, 1e-15), "{a}");
        let b = compute_aare(&[100.0, 50.0, 25.0], &[110.0, 45.0, 30.0], 1e-7).unwrap();
        assert!(close(b, 0.4 / 3.0, 1e-15), "{b}");
    }

    #[test]
    fn zero_observation_uses_epsilon() {
        let a = compute_aare(&[0.0, 10.0, 10.0], &[1.0, 10.0, 10.0], 1e-7).unwrap();
        assert!(close(a, 1e7 / 3.0, 1e-3), "{a}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(compute_aare(&[1.0, 2.0], &[1.0], 1e-7).is_err());
        assert!(compute_aare(&[], &[], 1e-7).is_err());
        assert!(compute_aare(&[1.0], &[f64::NAN], 1e-7).is_err());
        assert!(compute_aare(&[1.0], &[1.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn non_negative_and_zero_only_when_exact(
            pairs in prop::collection::vec((1.0f64..100.0, 1.0f64..100.0), 1..8)
        ) {
            let (obs, pred): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let a = compute_aare(&obs, &pred, 1e-7).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert_eq!(a == 0.0, obs == pred);
        }
    }
}
