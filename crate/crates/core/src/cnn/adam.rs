//! Adaptive moment estimation with bias correction.

use super::model::{Gradients, Group, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for a list of parameter slices.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        Self {
            step: 0,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_model(params: &ModelParams) -> Self {
        let sizes: Vec<usize> = Group::ALL.iter().map(|&g| params.group_len(g)).collect();
        Self::new(&sizes)
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Applies one update to every slice. `params[i]` and `grads[i]` must
    /// match the size given for slot `i` at construction.
    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], cfg: &AdamConfig) {
        assert_eq!(params.len(), self.first.len(), "parameter slot count");
        assert_eq!(grads.len(), self.first.len(), "gradient slot count");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for slot in 0..params.len() {
            let p = &mut *params[slot];
            let g = grads[slot];
            let m = &mut self.first[slot];
            let v = &mut self.second[slot];
            assert_eq!(p.len(), m.len(), "parameter slot {slot} size");
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
    }
}

/// One optimizer step over every learnable group of the model.
pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut AdamState, cfg: &AdamConfig) {
    let mut owned: Vec<Vec<f64>> = Group::ALL.iter().map(|&g| params.group(g).to_vec()).collect();
    {
        let mut slices: Vec<&mut [f64]> = owned.iter_mut().map(|v| v.as_mut_slice()).collect();
        let g: Vec<&[f64]> = Group::ALL.iter().map(|&gr| grads.group(gr)).collect();
        state.update(&mut slices, &g, cfg);
    }
    for (g, v) in Group::ALL.iter().zip(owned) {
        params.group_mut(*g).copy_from_slice(&v);
    }
}
