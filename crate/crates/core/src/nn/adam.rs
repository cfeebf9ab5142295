use crate::error::{Error, Result};

use super::model::{Gradients, Model};

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

/// Bias-corrected Adam with one moment pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Vec<Vec<f64>>>,
    second: Vec<Vec<Vec<f64>>>,
}

impl Adam {
    pub fn new(model: &Model, config: AdamConfig) -> Self {
        let zeros = Gradients::zeros_like(model).layers;
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    /// Applies one update. A non-finite gradient aborts before any parameter
    /// changes.
    pub fn step(&mut self, model: &mut Model, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != model.layers.len() {
            return Err(Error::Shape("gradient layout does not match model".into()));
        }
        for (i, (layer, g)) in model.layers.iter().zip(&grads.layers).enumerate() {
            if g.len() != layer.params.len() || g.iter().zip(&layer.params).any(|(a, b)| a.len() != b.len()) {
                return Err(Error::Shape(format!("gradient shape mismatch in layer {i}")));
            }
            if g.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    layer: i,
                    kind: layer.spec.kind.as_str(),
                });
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (l, layer) in model.layers.iter_mut().enumerate() {
            for (p, tensor) in layer.params.iter_mut().enumerate() {
                let m = &mut self.first[l][p];
                let v = &mut self.second[l][p];
                for (((w, g), mi), vi) in tensor.iter_mut().zip(&grads.layers[l][p]).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *mi = beta1 * *mi + (1.0 - beta1) * g;
                    *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                    let m_hat = *mi / c1;
                    let v_hat = *vi / c2;
                    *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::LayerSpec;

    fn scalar_model(x: f64) -> Model {
        // dense 1 -> 1 with the bias as the single free parameter of interest
        let arch = [LayerSpec::dense(Some(1)), LayerSpec::softmax()];
        let mut m = Model::new(&arch, 1, 1, 1, 0).unwrap();
        m.layers[0].params[0][0] = 0.0;
        m.layers[0].params[1][0] = x;
        m
    }

    fn grads_for(m: &Model, g: f64) -> Gradients {
        let mut grads = Gradients::zeros_like(m);
        grads.layers[0][1][0] = g;
        grads
    }

    #[test]
    fn zero_grads_leave_params() {
        let mut m = scalar_model(1.5);
        let before = m.clone();
        let mut adam = Adam::new(&m, AdamConfig::default());
        adam.step(&mut m, &Gradients::zeros_like(&before)).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn zero_learning_rate_leaves_params() {
        let mut m = scalar_model(1.5);
        let before = m.clone();
        let mut adam = Adam::new(&m, AdamConfig { learning_rate: 0.0, ..Default::default() });
        adam.step(&mut m, &grads_for(&before, 3.0)).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn first_step_is_learning_rate() {
        let mut m = scalar_model(0.0);
        let cfg = AdamConfig { learning_rate: 0.1, ..Default::default() };
        let mut adam = Adam::new(&m, cfg);
        let g = grads_for(&m, 1.0);
        adam.step(&mut m, &g).unwrap();
        let moved = m.layers[0].params[1][0];
        assert!((moved + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let mut m = scalar_model(0.0);
        let mut adam = Adam::new(&m, AdamConfig::default());
        let g = grads_for(&m, f64::NAN);
        let err = adam.step(&mut m, &g).unwrap_err();
        assert!(err.to_string().contains("layer 0 (dense)"), "{err}");
        assert_eq!(adam.step, 0);
    }
}
