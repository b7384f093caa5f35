use rand::Rng;

use super::param::join;
use super::{gemm, glorot_uniform, NetError, Param, Parameterized, Tensor, Trans};

/// Affine layer `y = W x + b` with `W: out × in`.
#[derive(Clone, Debug)]
pub struct DenseLayer {
    pub weight: Param,
    pub bias: Param,
    tape: Option<Tensor>,
}

impl DenseLayer {
    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Self::from_parts(glorot_uniform(output, input, rng), Tensor::zeros(&[output]))
            .expect("fresh shapes agree")
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self, NetError> {
        if weight.shape().len() != 2 || bias.len() != weight.rows() {
            return Err(NetError::ShapeMismatch {
                op: "dense_from_parts",
                expected: vec![bias.len()],
                found: weight.shape().to_vec(),
            });
        }
        let bias = bias.reshape(&[weight.rows()])?;
        Ok(DenseLayer {
            weight: Param::new(weight),
            bias: Param::new(bias),
            tape: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.rows()
    }

    /// Batched forward: `x` is `batch × in` (or a single `in` vector).
    pub fn forward(&self, x: &Tensor) -> Result<Tensor, NetError> {
        if x.cols() != self.input_dim() {
            return Err(NetError::ShapeMismatch {
                op: "dense_forward",
                expected: vec![self.input_dim()],
                found: x.shape().to_vec(),
            });
        }
        let batch = x.rows();
        let out = self.output_dim();
        let mut y = Tensor::zeros(&[batch, out]);
        for r in 0..batch {
            y.row_mut(r).copy_from_slice(self.bias.value.data());
        }
        gemm(1.0, x, Trans::No, &self.weight.value, Trans::Yes, 1.0, &mut y)?;
        Ok(y)
    }

    /// Forward pass that records `x` for [`DenseLayer::backward`].
    pub fn forward_train(&mut self, x: &Tensor) -> Result<Tensor, NetError> {
        let y = self.forward(x)?;
        self.tape = Some(x.clone().reshape(&[x.rows(), x.cols()])?);
        Ok(y)
    }

    /// Accumulates parameter gradients from `dy` and returns `∂loss/∂x`.
    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor, NetError> {
        let x = self.tape.take().ok_or(NetError::NoRecordedForward)?;
        if dy.rows() != x.rows() || dy.cols() != self.output_dim() {
            return Err(NetError::ShapeMismatch {
                op: "dense_backward",
                expected: vec![x.rows(), self.output_dim()],
                found: dy.shape().to_vec(),
            });
        }
        gemm(1.0, dy, Trans::Yes, &x, Trans::No, 1.0, &mut self.weight.grad)?;
        let db = self.bias.grad.data_mut();
        for r in 0..dy.rows() {
            for (g, d) in db.iter_mut().zip(dy.row(r)) {
                *g += d;
            }
        }
        let mut dx = Tensor::zeros(&[x.rows(), x.cols()]);
        gemm(1.0, dy, Trans::No, &self.weight.value, Trans::No, 0.0, &mut dx)?;
        Ok(dx)
    }

    pub fn clear_tape(&mut self) {
        self.tape = None;
    }

    /// Appends freshly initialized output rows; existing rows are copied verbatim.
    pub fn grow_outputs<R: Rng + ?Sized>(&mut self, new_out: usize, rng: &mut R) -> Result<(), NetError> {
        let out = self.output_dim();
        if new_out < out {
            return Err(NetError::ShrinkNotAllowed { from: out, to: new_out });
        }
        if new_out == out {
            return Ok(());
        }
        let input = self.input_dim();
        let extra = glorot_uniform(new_out - out, input, rng);
        let mut w = self.weight.value.data().to_vec();
        w.extend_from_slice(extra.data());
        let mut b = self.bias.value.data().to_vec();
        b.resize(new_out, 0.0);
        *self = DenseLayer::from_parts(Tensor::from_vec(&[new_out, input], w)?, Tensor::vector(b))?;
        Ok(())
    }
}

impl Parameterized for DenseLayer {
    fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

/// Elementwise `max(0, x)`.
pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    y
}

/// Gradient of [`relu`] given its forward input; the slope at exactly 0 is 0.
pub fn relu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    let mut dx = dy.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        if v <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::seeded_rng;

    #[test]
    fn identity_layer_passes_input_through() {
        let w = Tensor::from_vec(&[2, 2], vec![1., 0., 0., 1.]).unwrap();
        let layer = DenseLayer::from_parts(w, Tensor::zeros(&[2])).unwrap();
        let y = layer.forward(&Tensor::vector(vec![3.0, -1.0])).unwrap();
        assert_eq!(y.data(), &[3.0, -1.0]);
    }

    #[test]
    fn zero_weights_return_bias() {
        let layer = DenseLayer::from_parts(Tensor::zeros(&[1, 3]), Tensor::vector(vec![5.0])).unwrap();
        let y = layer.forward(&Tensor::vector(vec![9.0, -2.0, 0.1])).unwrap();
        assert_eq!(y.data(), &[5.0]);
    }

    #[test]
    fn seeded_layer_matches_brute_force_dot_products() {
        let mut rng = seeded_rng(11);
        let mut layer = DenseLayer::new(3, 4, &mut rng);
        layer.bias.value = Tensor::vector(vec![0.1, -0.2, 0.3, -0.4]);
        let x = [0.5, -1.5, 2.0];
        let y = layer.forward(&Tensor::vector(x.to_vec())).unwrap();
        for o in 0..4 {
            let mut acc = layer.bias.value.data()[o];
            for i in 0..3 {
                acc += layer.weight.value.data()[o * 3 + i] * x[i];
            }
            assert!((y.data()[o] - acc).abs() < 1e-14);
        }
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let layer = DenseLayer::new(3, 2, &mut seeded_rng(0));
        let err = layer.forward(&Tensor::vector(vec![1.0, 2.0])).unwrap_err();
        assert!(matches!(err, NetError::ShapeMismatch { .. }));
    }

    #[test]
    fn sum_loss_gives_unit_bias_gradient() {
        let w = Tensor::from_vec(&[2, 2], vec![1., 0., 0., 1.]).unwrap();
        let mut layer = DenseLayer::from_parts(w, Tensor::zeros(&[2])).unwrap();
        let x = Tensor::from_vec(&[1, 2], vec![0.3, 0.7]).unwrap();
        let y = layer.forward_train(&x).unwrap();
        let ones = Tensor::from_vec(y.shape(), vec![1.0; y.len()]).unwrap();
        layer.backward(&ones).unwrap();
        assert_eq!(layer.bias.grad.data(), &[1.0, 1.0]);
        assert_eq!(layer.weight.grad.data(), &[0.3, 0.7, 0.3, 0.7]);
    }

    #[test]
    fn backward_without_forward_fails() {
        let mut layer = DenseLayer::new(2, 2, &mut seeded_rng(0));
        let err = layer.backward(&Tensor::zeros(&[1, 2])).unwrap_err();
        assert_eq!(err, NetError::NoRecordedForward);
    }

    #[test]
    fn relu_clamps_and_masks() {
        let x = Tensor::vector(vec![-1.0, 0.0, 2.0]);
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        assert!(relu(&Tensor::vector(vec![-3.0, -0.5])).data().iter().all(|&v| v == 0.0));
        let g = relu_backward(&x, &Tensor::vector(vec![1.0, 1.0, 1.0]));
        assert_eq!(g.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn growing_outputs_keeps_existing_rows() {
        let mut rng = seeded_rng(3);
        let mut layer = DenseLayer::new(4, 3, &mut rng);
        let before = layer.weight.value.data().to_vec();
        layer.grow_outputs(5, &mut rng).unwrap();
        assert_eq!(layer.output_dim(), 5);
        assert_eq!(&layer.weight.value.data()[..12], before.as_slice());
        assert!(matches!(
            layer.grow_outputs(2, &mut rng),
            Err(NetError::ShrinkNotAllowed { from: 5, to: 2 })
        ));
    }
}
