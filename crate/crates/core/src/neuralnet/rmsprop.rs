use serde::{Deserialize, Serialize};

use super::{NetError, Parameterized, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmsPropConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
}

fn default_lr() -> f64 {
    1e-4
}
fn default_decay() -> f64 {
    0.99
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            learning_rate: default_lr(),
            decay: default_decay(),
            epsilon: default_eps(),
        }
    }
}

/// RMSProp shared across every trainable parameter of a model:
///
/// ```text
/// acc ← decay·acc + (1 − decay)·g²
/// p   ← p − lr·g / (√acc + eps)
/// ```
#[derive(Clone, Debug)]
pub struct RmsPropState {
    pub config: RmsPropConfig,
    slots: Vec<(String, Tensor)>,
}

impl RmsPropState {
    pub fn new(config: RmsPropConfig) -> Self {
        RmsPropState {
            config,
            slots: Vec::new(),
        }
    }

    /// Squared-gradient accumulator for `name`, if initialized.
    pub fn accumulator(&self, name: &str) -> Option<&Tensor> {
        self.slots.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Applies one update from the gradients currently stored in `model`.
    pub fn step<P: Parameterized + ?Sized>(&mut self, model: &mut P) -> Result<(), NetError> {
        if self.slots.is_empty() {
            model.visit_params("", &mut |name, p| {
                if p.trainable {
                    self.slots.push((name.to_string(), Tensor::zeros(p.value.shape())));
                }
            });
        }
        let mut mismatch = None;
        let mut idx = 0;
        model.visit_params("", &mut |name, p| {
            if !p.trainable || mismatch.is_some() {
                return;
            }
            match self.slots.get(idx) {
                Some((n, acc)) if n == name && acc.shape() == p.value.shape() && p.grad.shape() == p.value.shape() => {}
                Some((_, acc)) => mismatch = Some((acc.shape().to_vec(), p.value.shape().to_vec())),
                None => mismatch = Some((vec![], p.value.shape().to_vec())),
            }
            idx += 1;
        });
        if idx != self.slots.len() && mismatch.is_none() {
            mismatch = Some((vec![self.slots.len()], vec![idx]));
        }
        if let Some((expected, found)) = mismatch {
            return Err(NetError::ShapeMismatch {
                op: "rmsprop_step",
                expected,
                found,
            });
        }

        let RmsPropConfig {
            learning_rate: lr,
            decay,
            epsilon: eps,
        } = self.config;
        let mut slots = self.slots.iter_mut();
        model.visit_params_mut("", &mut |_, p| {
            if !p.trainable {
                return;
            }
            let (_, acc) = slots.next().expect("slot count checked");
            let grads = p.grad.data();
            for ((v, a), &g) in p.value.data_mut().iter_mut().zip(acc.data_mut()).zip(grads) {
                *a = decay * *a + (1.0 - decay) * g * g;
                *v -= lr * g / (a.sqrt() + eps);
            }
        });
        Ok(())
    }

    /// Extends the accumulator for `name` to `shape`, keeping existing entries as a prefix.
    pub fn grow_param(&mut self, name: &str, shape: &[usize]) {
        if let Some((_, acc)) = self.slots.iter_mut().find(|(n, _)| n == name) {
            let mut data = acc.data().to_vec();
            data.resize(shape.iter().product(), 0.0);
            *acc = Tensor::from_vec(shape, data).expect("resized to shape");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::{DenseLayer, Param, Parameterized};

    struct One(Param);

    impl Parameterized for One {
        fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
            f(prefix, &self.0)
        }
        fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
            f(prefix, &mut self.0)
        }
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_accumulator() {
        let mut p = One(Param::new(Tensor::vector(vec![1.0, -2.0])));
        let mut opt = RmsPropState::new(RmsPropConfig::default());
        p.0.grad = Tensor::vector(vec![1.0, 1.0]);
        opt.step(&mut p).unwrap();
        let after_first = p.0.value.clone();
        let acc1 = opt.accumulator("").unwrap().data()[0];
        p.0.grad.fill(0.0);
        opt.step(&mut p).unwrap();
        assert_eq!(p.0.value, after_first);
        let acc2 = opt.accumulator("").unwrap().data()[0];
        assert!(acc2 < acc1 && acc2 >= 0.0);
        assert!((acc2 - 0.99 * acc1).abs() < 1e-18);
    }

    #[test]
    fn first_step_matches_closed_form() {
        let g = 0.37;
        let cfg = RmsPropConfig::default();
        let mut p = One(Param::new(Tensor::vector(vec![0.0])));
        p.0.grad = Tensor::vector(vec![g]);
        let mut opt = RmsPropState::new(cfg);
        opt.step(&mut p).unwrap();
        let expect = -cfg.learning_rate * g / (((1.0 - cfg.decay) * g * g).sqrt() + cfg.epsilon);
        assert!((p.0.value.data()[0] - expect).abs() < 1e-18);
    }

    #[test]
    fn defaults_follow_pinned_values() {
        let cfg = RmsPropConfig::default();
        assert_eq!(cfg.learning_rate, 1e-4);
        assert_eq!(cfg.decay, 0.99);
        assert_eq!(cfg.epsilon, 1e-8);
        let text = toml::to_string(&cfg).unwrap();
        let back: RmsPropConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: RmsPropConfig = toml::from_str("decay = 0.9").unwrap();
        assert_eq!(partial.learning_rate, 1e-4);
    }

    #[test]
    fn shape_change_without_grow_is_rejected() {
        let mut rng = crate::neuralnet::seeded_rng(0);
        let mut layer = DenseLayer::new(2, 2, &mut rng);
        let mut opt = RmsPropState::new(RmsPropConfig::default());
        opt.step(&mut layer).unwrap();
        layer.grow_outputs(3, &mut rng).unwrap();
        assert!(matches!(opt.step(&mut layer), Err(NetError::ShapeMismatch { .. })));
        opt.grow_param("weight", &[3, 2]);
        opt.grow_param("bias", &[3]);
        opt.step(&mut layer).unwrap();
    }
}
