use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::Layer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let betas_ok = (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2);
        if !(self.learning_rate > 0.0 && self.epsilon > 0.0 && betas_ok) {
            return Err(Error::invalid(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    t: i32,
    m: Vec<Vec<Array2<f64>>>,
    v: Vec<Vec<Array2<f64>>>,
}

impl Adam {
    pub fn new(config: AdamConfig, layers: &[Layer]) -> Self {
        let zeros: Vec<Vec<Array2<f64>>> = layers
            .iter()
            .map(|l| l.params().iter().map(|p| Array2::zeros(p.raw_dim())).collect())
            .collect();
        Adam {
            config,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, layers: &mut [Layer], grads: &[Vec<Array2<f64>>]) {
        self.t += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for (li, layer) in layers.iter_mut().enumerate() {
            for (pi, p) in layer.params_mut().into_iter().enumerate() {
                Zip::from(p)
                    .and(&grads[li][pi])
                    .and(&mut self.m[li][pi])
                    .and(&mut self.v[li][pi])
                    .for_each(|w, &g, m, v| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *w -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + epsilon);
                    });
            }
        }
    }
}
