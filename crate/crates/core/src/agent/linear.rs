use rand_chacha::ChaCha8Rng;

use super::{AgentError, QFunction};
use crate::neuralnet::{DenseLayer, Param, Parameterized, Tensor};

/// `Q(x) = W x + b`. With one-hot `x` this is a lookup table trained by the same
/// machinery as the deep model.
#[derive(Clone, Debug)]
pub struct LinearQ {
    layer: DenseLayer,
}

impl LinearQ {
    pub fn zeros(input_dim: usize, action_count: usize) -> Self {
        LinearQ {
            layer: DenseLayer::from_parts(
                Tensor::zeros(&[action_count, input_dim]),
                Tensor::zeros(&[action_count]),
            )
            .expect("consistent shapes"),
        }
    }

    pub fn layer(&self) -> &DenseLayer {
        &self.layer
    }

    fn stack(&self, inputs: &[&Vec<f64>]) -> Result<Tensor, AgentError> {
        Ok(Tensor::stack_rows(inputs.iter().map(|v| v.as_slice()), self.layer.input_dim())?)
    }
}

impl Parameterized for LinearQ {
    fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        self.layer.visit_params(&crate::neuralnet::param::join(prefix, "head"), f);
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.layer.visit_params_mut(&crate::neuralnet::param::join(prefix, "head"), f);
    }
}

impl QFunction for LinearQ {
    type Input = Vec<f64>;

    fn action_count(&self) -> usize {
        self.layer.output_dim()
    }

    fn q_values_batch(&self, inputs: &[&Vec<f64>]) -> Result<Tensor, AgentError> {
        Ok(self.layer.forward(&self.stack(inputs)?)?)
    }

    fn forward_train(&mut self, inputs: &[&Vec<f64>]) -> Result<Tensor, AgentError> {
        let x = self.stack(inputs)?;
        Ok(self.layer.forward_train(&x)?)
    }

    fn backward(&mut self, dq: &Tensor) -> Result<(), AgentError> {
        self.layer.backward(dq)?;
        Ok(())
    }

    fn grow_head(&mut self, new_action_count: usize, rng: &mut ChaCha8Rng) -> Result<(), AgentError> {
        self.layer.grow_outputs(new_action_count, rng)?;
        Ok(())
    }

    fn head_param_names(&self) -> Vec<String> {
        vec!["head.weight".into(), "head.bias".into()]
    }
}
