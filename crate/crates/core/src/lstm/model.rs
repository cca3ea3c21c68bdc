use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LstmError;

/// Gate order used for every per-gate array in this module.
pub const GATES: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Cell];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input,
    Forget,
    Output,
    /// Cell candidate (tanh activated).
    Cell,
}

/// Parameters of one gate for a scalar-input LSTM layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    /// Input weights, one per hidden unit.
    pub w_in: Vec<f64>,
    /// Recurrent weights, `hidden × hidden`, row-major (row = receiving unit).
    pub w_rec: Vec<f64>,
    pub bias: Vec<f64>,
}

impl GateParams {
    fn zeros(hidden: usize) -> Self {
        Self {
            w_in: vec![0.0; hidden],
            w_rec: vec![0.0; hidden * hidden],
            bias: vec![0.0; hidden],
        }
    }
}

/// The full parameter set of a single-hidden-layer LSTM with a linear
/// scalar readout. The same shape doubles as a gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    hidden: usize,
    pub gates: [GateParams; 4],
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl LstmParams {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            hidden,
            gates: std::array::from_fn(|_| GateParams::zeros(hidden)),
            w_out: vec![0.0; hidden],
            b_out: 0.0,
        }
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden
    }

    pub fn gate(&self, gate: Gate) -> &GateParams {
        &self.gates[gate as usize]
    }

    pub fn len(&self) -> usize {
        4 * (2 * self.hidden + self.hidden * self.hidden) + self.hidden + 1
    }

    pub fn is_empty(&self) -> bool {
        self.hidden == 0
    }

    /// Every scalar parameter in a fixed order: per gate (input weights,
    /// recurrent weights, biases), then readout weights, then readout bias.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.gates
            .iter()
            .flat_map(|g| g.w_in.iter().chain(&g.w_rec).chain(&g.bias))
            .chain(&self.w_out)
            .chain(std::iter::once(&self.b_out))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.gates
            .iter_mut()
            .flat_map(|g| {
                g.w_in
                    .iter_mut()
                    .chain(g.w_rec.iter_mut())
                    .chain(g.bias.iter_mut())
            })
            .chain(self.w_out.iter_mut())
            .chain(std::iter::once(&mut self.b_out))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Per-step activations kept for backpropagation through time.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    x: f64,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation gate values in [`GATES`] order.
    acts: [Vec<f64>; 4],
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

/// A single-layer LSTM predictor with scalar input and output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    params: LstmParams,
    init_seed: u64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LstmModel {
    /// Draws every weight uniformly from `[-1/sqrt(H), 1/sqrt(H)]`; biases start at zero.
    pub fn init(seed: u64, hidden_units: usize) -> Result<Self, LstmError> {
        if hidden_units == 0 {
            return Err(LstmError::InvalidConfig(
                "hidden_units must be at least 1".into(),
            ));
        }
        let bound = 1.0 / (hidden_units as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = LstmParams::zeros(hidden_units);
        for g in params.gates.iter_mut() {
            for w in g.w_in.iter_mut().chain(g.w_rec.iter_mut()) {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        for w in params.w_out.iter_mut() {
            *w = rng.gen_range(-bound..=bound);
        }
        Ok(Self {
            params,
            init_seed: seed,
        })
    }

    pub fn from_params(params: LstmParams, init_seed: u64) -> Result<Self, LstmError> {
        if params.hidden_units() == 0 {
            return Err(LstmError::InvalidConfig(
                "hidden_units must be at least 1".into(),
            ));
        }
        if !params.is_finite() {
            return Err(LstmError::NonFiniteParameters);
        }
        Ok(Self { params, init_seed })
    }

    pub fn hidden_units(&self) -> usize {
        self.params.hidden_units()
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn params(&self) -> &LstmParams {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut LstmParams {
        &mut self.params
    }

    /// Runs the sequence from a zero hidden/cell state and returns the
    /// readout after every step.
    pub fn forward(&self, inputs: &[f64]) -> Vec<f64> {
        self.forward_cached(inputs).0
    }

    pub(crate) fn forward_cached(&self, inputs: &[f64]) -> (Vec<f64>, Vec<StepCache>) {
        let n = self.hidden_units();
        let p = &self.params;
        let mut h = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut outputs = Vec::with_capacity(inputs.len());
        let mut caches = Vec::with_capacity(inputs.len());

        for &x in inputs {
            let acts: [Vec<f64>; 4] = std::array::from_fn(|k| {
                let g = &p.gates[k];
                (0..n)
                    .map(|j| {
                        let row = &g.w_rec[j * n..(j + 1) * n];
                        let z = g.w_in[j] * x
                            + row.iter().zip(&h).map(|(w, hv)| w * hv).sum::<f64>()
                            + g.bias[j];
                        if GATES[k] == Gate::Cell {
                            z.tanh()
                        } else {
                            sigmoid(z)
                        }
                    })
                    .collect()
            });
            let [i, f, o, g] = &acts;
            let c_next: Vec<f64> = (0..n).map(|j| f[j] * c[j] + i[j] * g[j]).collect();
            let tanh_c: Vec<f64> = c_next.iter().map(|v| v.tanh()).collect();
            let h_next: Vec<f64> = (0..n).map(|j| o[j] * tanh_c[j]).collect();
            let y = p.w_out.iter().zip(&h_next).map(|(w, hv)| w * hv).sum::<f64>() + p.b_out;
            outputs.push(y);
            caches.push(StepCache {
                x,
                h_prev: std::mem::replace(&mut h, h_next.clone()),
                c_prev: std::mem::replace(&mut c, c_next),
                acts,
                tanh_c,
                h: h_next,
            });
        }
        (outputs, caches)
    }

    /// Mean squared error of the per-step readouts against `targets`, with
    /// its gradient with respect to every parameter (backpropagation
    /// through time).
    pub fn loss_and_gradient(&self, inputs: &[f64], targets: &[f64]) -> (f64, LstmParams) {
        assert_eq!(inputs.len(), targets.len(), "inputs/targets length mismatch");
        let n = self.hidden_units();
        let p = &self.params;
        let steps = inputs.len();
        let mut grad = LstmParams::zeros(n);
        if steps == 0 {
            return (0.0, grad);
        }
        let (outputs, caches) = self.forward_cached(inputs);
        let scale = 1.0 / steps as f64;
        let loss = outputs
            .iter()
            .zip(targets)
            .map(|(y, t)| (y - t).powi(2))
            .sum::<f64>()
            * scale;

        let mut dh_next = vec![0.0; n];
        let mut dc_next = vec![0.0; n];
        let mut dz: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);

        for s in (0..steps).rev() {
            let cache = &caches[s];
            let dy = 2.0 * (outputs[s] - targets[s]) * scale;
            grad.b_out += dy;
            for j in 0..n {
                grad.w_out[j] += dy * cache.h[j];
            }
            let [i, f, o, g] = &cache.acts;
            for j in 0..n {
                let dh = dy * p.w_out[j] + dh_next[j];
                let dc = dh * o[j] * (1.0 - cache.tanh_c[j] * cache.tanh_c[j]) + dc_next[j];
                let d_o = dh * cache.tanh_c[j];
                let d_i = dc * g[j];
                let d_g = dc * i[j];
                let d_f = dc * cache.c_prev[j];
                dc_next[j] = dc * f[j];
                dz[0][j] = d_i * i[j] * (1.0 - i[j]);
                dz[1][j] = d_f * f[j] * (1.0 - f[j]);
                dz[2][j] = d_o * o[j] * (1.0 - o[j]);
                dz[3][j] = d_g * (1.0 - g[j] * g[j]);
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            for (k, dzk) in dz.iter().enumerate() {
                let gp = &p.gates[k];
                let gg = &mut grad.gates[k];
                for j in 0..n {
                    gg.w_in[j] += dzk[j] * cache.x;
                    gg.bias[j] += dzk[j];
                    let row = j * n;
                    for m in 0..n {
                        gg.w_rec[row + m] += dzk[j] * cache.h_prev[m];
                        dh_next[m] += gp.w_rec[row + m] * dzk[j];
                    }
                }
            }
        }
        (loss, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let a = LstmModel::init(42, 10).unwrap();
        let b = LstmModel::init(42, 10).unwrap();
        assert_eq!(a, b);
        let c = LstmModel::init(43, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_respects_bounds_and_zero_biases() {
        let m = LstmModel::init(42, 10).unwrap();
        let bound = 1.0 / 10f64.sqrt();
        let p = m.params();
        for g in &p.gates {
            assert!(g.w_in.iter().chain(&g.w_rec).all(|w| w.abs() <= bound));
            assert!(g.bias.iter().all(|&b| b == 0.0));
        }
        assert!(p.w_out.iter().all(|w| w.abs() <= bound));
        assert_eq!(p.b_out, 0.0);
        assert_eq!(p.iter().count(), p.len());
        assert_eq!(p.len(), 4 * (10 + 100 + 10) + 11);
    }

    #[test]
    fn zero_hidden_units_is_rejected() {
        assert!(matches!(
            LstmModel::init(42, 0),
            Err(LstmError::InvalidConfig(_))
        ));
    }

    #[test]
    fn zero_model_reads_out_zero() {
        let m = LstmModel::from_params(LstmParams::zeros(4), 0).unwrap();
        let out = m.forward(&[0.3, 0.9, 0.1]);
        assert_eq!(out, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_inputs_with_zero_biases_keep_state_at_rest() {
        // cell candidate is tanh(0) = 0, so c and h never leave zero
        let m = LstmModel::init(7, 10).unwrap();
        assert_eq!(m.forward(&[0.0; 5]), vec![0.0; 5]);
    }
}
