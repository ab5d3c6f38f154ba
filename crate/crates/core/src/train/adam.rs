use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Gradients, NetworkParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("optimizer settings out of range: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Adam moment buffers, created lazily per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub config: AdamConfig,
    pub step: u64,
    moments: Vec<Option<Moments>>,
}

impl OptimState {
    pub fn new(config: AdamConfig, n_layers: usize) -> Self {
        Self {
            config,
            step: 0,
            moments: vec![None; n_layers],
        }
    }
}

/// One bias-corrected Adam update of every trainable layer. Frozen layers
/// are left untouched.
pub fn adam_step(net: &mut NetworkParams, grads: &Gradients, state: &mut OptimState) -> Result<()> {
    let n = net.layers().len();
    if grads.layers.len() != n || state.moments.len() != n {
        return Err(Error::ShapeMismatch("gradient/optimizer layer count differs from network".into()));
    }
    for (i, layer) in net.layers().iter().enumerate() {
        if layer.trainable && grads.layers[i].is_none() {
            return Err(Error::MissingGradient(layer.name.clone()));
        }
    }
    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    for (i, layer) in net.layers_mut().iter_mut().enumerate() {
        if !layer.trainable {
            continue;
        }
        let g = grads.layers[i].as_ref().expect("checked above");
        let size = layer.param_count();
        let mom = state.moments[i].get_or_insert_with(|| Moments {
            m: vec![0.0; size],
            v: vec![0.0; size],
        });
        let params = layer.weight.iter_mut().chain(layer.bias.iter_mut());
        let gs = g.weight.iter().chain(&g.bias);
        for (k, (p, &gk)) in params.zip(gs).enumerate() {
            mom.m[k] = c.beta1 * mom.m[k] + (1.0 - c.beta1) * gk;
            mom.v[k] = c.beta2 * mom.v[k] + (1.0 - c.beta2) * gk * gk;
            let mhat = mom.m[k] / bc1;
            let vhat = mom.v[k] / bc2;
            *p -= c.lr * mhat / (vhat.sqrt() + c.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerGrad, NetConfig};

    fn net() -> NetworkParams {
        NetworkParams::build(NetConfig::new(16, 2, 2, 1).unwrap()).unwrap()
    }

    fn const_grads(net: &NetworkParams, g: f64) -> Gradients {
        Gradients {
            layers: net
                .layers()
                .iter()
                .map(|l| {
                    l.trainable.then(|| LayerGrad {
                        weight: vec![g; l.weight.len()],
                        bias: vec![g; l.bias.len()],
                    })
                })
                .collect(),
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut n = net();
        let before = n.clone();
        let mut st = OptimState::new(AdamConfig::default(), n.layers().len());
        adam_step(&mut n, &const_grads(&before, 0.0), &mut st).unwrap();
        assert_eq!(n, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr_against_the_sign() {
        let mut n = net();
        let before = n.clone();
        let cfg = AdamConfig::default();
        let mut st = OptimState::new(cfg, n.layers().len());
        adam_step(&mut n, &const_grads(&before, 0.37), &mut st).unwrap();
        for (a, b) in n.layers().iter().zip(before.layers()) {
            for (x, y) in a.weight.iter().zip(&b.weight) {
                assert!((x - y + cfg.lr).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn frozen_layers_are_untouched_and_missing_grads_rejected() {
        let mut n = net();
        n.set_trainable(|i, _| i % 2 == 0);
        let before = n.clone();
        let mut st = OptimState::new(AdamConfig::default(), n.layers().len());
        adam_step(&mut n, &const_grads(&before, 1.0), &mut st).unwrap();
        for (i, (a, b)) in n.layers().iter().zip(before.layers()).enumerate() {
            assert_eq!(i % 2 == 1, a == b);
        }
        let mut g = const_grads(&n, 1.0);
        g.layers[0] = None;
        assert!(matches!(adam_step(&mut n, &g, &mut st), Err(Error::MissingGradient(_))));
    }

    #[test]
    fn decreases_a_quadratic() {
        // f(x) = (x - 3)^2 on the first weight only.
        let mut n = net();
        n.set_trainable(|i, _| i == 0);
        let mut st = OptimState::new(AdamConfig { lr: 0.1, ..Default::default() }, n.layers().len());
        let f = |n: &NetworkParams| (n.layers()[0].weight[0] - 3.0).powi(2);
        for _ in 0..20 {
            let before = f(&n);
            let mut g = Gradients::empty(n.layers().len());
            let l = &n.layers()[0];
            let mut weight = vec![0.0; l.weight.len()];
            weight[0] = 2.0 * (l.weight[0] - 3.0);
            g.layers[0] = Some(LayerGrad {
                weight,
                bias: vec![0.0; l.bias.len()],
            });
            adam_step(&mut n, &g, &mut st).unwrap();
            assert!(f(&n) < before);
        }
    }
}
