use std::collections::BTreeMap;

use super::Tensor;

/// A parameter tensor with its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    pub trainable: bool,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param {
            value,
            grad,
            trainable: true,
        }
    }

    pub fn frozen(value: Tensor) -> Self {
        Param {
            grad: Tensor::zeros(&[0]),
            value,
            trainable: false,
        }
    }

    pub fn zero_grad(&mut self) {
        if self.trainable {
            self.grad.fill(0.0);
        }
    }
}

/// Anything holding named parameters in a stable visiting order.
pub trait Parameterized {
    fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param));
    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param));

    fn zero_grads(&mut self) {
        self.visit_params_mut("", &mut |_, p| p.zero_grad());
    }

    /// FNV digest over every parameter (frozen ones included) in visiting order.
    fn param_checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        self.visit_params("", &mut |name, p| {
            for b in name.bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            h ^= p.value.checksum();
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        });
        h
    }

    fn all_finite(&self) -> Result<(), String> {
        let mut bad = None;
        self.visit_params("", &mut |name, p| {
            if bad.is_none() && !p.value.is_finite() {
                bad = Some(name.to_string());
            }
        });
        match bad {
            Some(name) => Err(name),
            None => Ok(()),
        }
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Snapshot of gradients for every trainable parameter, keyed by name.
pub fn gradients<P: Parameterized + ?Sized>(model: &P) -> BTreeMap<String, Tensor> {
    let mut out = BTreeMap::new();
    model.visit_params("", &mut |name, p| {
        if p.trainable {
            out.insert(name.to_string(), p.grad.clone());
        }
    });
    out
}
