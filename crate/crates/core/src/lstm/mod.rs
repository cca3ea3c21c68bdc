//! Minimal single-hidden-layer LSTM used as a one-step-ahead forecaster.
//!
//! Each model sees a short look-back window, min-max scaled into `[0, 1]`,
//! and learns the one-step-ahead pairs inside it with full-batch SGD.
//! Training always starts from a freshly seeded model.

mod model;
mod train;
mod window;

pub use model::{Gate, GateParams, LstmModel, LstmParams, GATES};
pub use train::{predict_next, train, train_window, training_pairs, TrainConfig, TrainOutcome};
pub use window::TrainingWindow;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LstmError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("training window needs at least 2 values, got {0}")]
    WindowTooShort(usize),
    #[error("non-finite value at window position {0}")]
    NonFiniteInput(usize),
    #[error("model parameters became non-finite")]
    NonFiniteParameters,
}

#[cfg(test)]
mod gradient_check {
    //! Central finite differences as an independent check on backprop.

    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mse(model: &LstmModel, inputs: &[f64], targets: &[f64]) -> f64 {
        let out = model.forward(inputs);
        out.iter()
            .zip(targets)
            .map(|(y, t)| (y - t) * (y - t))
            .sum::<f64>()
            / inputs.len() as f64
    }

    pub(crate) fn numeric_gradient(model: &LstmModel, inputs: &[f64], targets: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        let base = model.params().clone();
        (0..base.len())
            .map(|idx| {
                let mut plus = base.clone();
                *plus.iter_mut().nth(idx).unwrap() += h;
                let mut minus = base.clone();
                *minus.iter_mut().nth(idx).unwrap() -= h;
                let lp = mse(&LstmModel::from_params(plus, 0).unwrap(), inputs, targets);
                let lm = mse(&LstmModel::from_params(minus, 0).unwrap(), inputs, targets);
                (lp - lm) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn analytic_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..20 {
            let hidden = 2 + case % 2;
            let mut model = LstmModel::init(rng.gen(), hidden).unwrap();
            // non-zero biases so every gate path carries signal
            for g in model.params_mut().gates.iter_mut() {
                g.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
            }
            model.params_mut().b_out = rng.gen_range(-0.5..0.5);
            let len = rng.gen_range(2..7);
            let values: Vec<f64> = (0..len).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let window = TrainingWindow::new(&values).unwrap();
            let (inputs, targets) = training_pairs(&window);

            let (loss, grad) = model.loss_and_gradient(&inputs, &targets);
            assert!((loss - mse(&model, &inputs, &targets)).abs() < 1e-14);
            let numeric = numeric_gradient(&model, &inputs, &targets);
            for (idx, (a, n)) in grad.iter().zip(&numeric).enumerate() {
                let scale = a.abs().max(n.abs());
                if scale < 1e-4 {
                    assert!((a - n).abs() <= 1e-7, "case {case} param {idx}: {a} vs {n}");
                } else {
                    assert!((a - n).abs() / scale <= 1e-4, "case {case} param {idx}: {a} vs {n}");
                }
            }
        }
    }
}
