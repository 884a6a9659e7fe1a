use super::model::{Gradients, ModelState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamParams {
    /// One bias-corrected Adam update of `params` at 1-based step `t`.
    pub fn update(&self, params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], t: u64, lr: f64) {
        debug_assert!(t >= 1);
        let c1 = 1.0 - self.beta1.powf(t as f64);
        let c2 = 1.0 - self.beta2.powf(t as f64);
        for i in 0..params.len() {
            let g = grads[i];
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }

    /// Applies one optimizer step to every layer and advances the model's step counter.
    pub fn step(&self, model: &mut ModelState, grads: &Gradients, lr: f64) {
        model.step += 1;
        let t = model.step;
        for (i, layer) in model.layers.iter_mut().enumerate() {
            self.update(&mut layer.weights, &grads.weights[i], &mut layer.m_weights, &mut layer.v_weights, t, lr);
            self.update(&mut layer.bias, &grads.bias[i], &mut layer.m_bias, &mut layer.v_bias, t, lr);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_on_scalar() {
        let adam = AdamParams::default();
        let (mut p, mut m, mut v) = ([0.0], [0.0], [0.0]);
        adam.update(&mut p, &[1.0], &mut m, &mut v, 1, 1e-4);
        // m_hat = v_hat = 1, so the step is lr / (1 + eps)
        assert!((p[0] - (-1e-4 / (1.0 + 1e-8))).abs() < 1e-18);
        assert!((p[0] + 9.999_999_9e-5).abs() < 1e-12);
    }
}
