use super::param::join;
use super::{gemm, glorot_uniform, seeded_rng, NetError, Param, Parameterized, Tensor, Trans};

/// Fixed random linear map from observation space to the visual embedding.
/// Never receives gradients and is skipped by the optimizer.
#[derive(Clone, Debug)]
pub struct FrozenProjector {
    matrix: Param,
}

impl FrozenProjector {
    pub fn new(input_dim: usize, output_dim: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        FrozenProjector {
            matrix: Param::frozen(glorot_uniform(output_dim, input_dim, &mut rng)),
        }
    }

    pub fn from_matrix(matrix: Tensor) -> Result<Self, NetError> {
        if matrix.shape().len() != 2 {
            return Err(NetError::ShapeMismatch {
                op: "projector_from_matrix",
                expected: vec![2],
                found: matrix.shape().to_vec(),
            });
        }
        Ok(FrozenProjector {
            matrix: Param::frozen(matrix),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.matrix.value.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.matrix.value.rows()
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix.value
    }

    /// Projects a `batch × input_dim` matrix.
    pub fn project(&self, x: &Tensor) -> Result<Tensor, NetError> {
        if x.cols() != self.input_dim() {
            return Err(NetError::ShapeMismatch {
                op: "project",
                expected: vec![self.input_dim()],
                found: x.shape().to_vec(),
            });
        }
        let mut y = Tensor::zeros(&[x.rows(), self.output_dim()]);
        gemm(1.0, x, Trans::No, &self.matrix.value, Trans::Yes, 0.0, &mut y)?;
        Ok(y)
    }
}

impl Parameterized for FrozenProjector {
    fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        f(&join(prefix, "projection"), &self.matrix);
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        f(&join(prefix, "projection"), &mut self.matrix);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_seeds_give_identical_matrices() {
        let a = FrozenProjector::new(10, 8, 77);
        let b = FrozenProjector::new(10, 8, 77);
        let c = FrozenProjector::new(10, 8, 78);
        assert_eq!(a.matrix(), b.matrix());
        assert_ne!(a.matrix(), c.matrix());
        assert!(!a.matrix.trainable);
    }
}
