use std::sync::Arc;

use super::max_fd_error;
use icl_nav::agent::{MdqnInput, MdqnModel, ModelConfig, QFunction};
use icl_nav::gridworld::Observation;
use icl_nav::instruction::{EmbeddingTable, EncodedInstruction};
use icl_nav::neuralnet::{relu, relu_backward, seeded_rng, DenseLayer, Param, Parameterized, RecurrentEncoder, Tensor};
use rand::Rng;

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

fn random_tensor<R: Rng>(rng: &mut R, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

#[derive(Clone)]
struct TwoLayer(DenseLayer, DenseLayer);

impl Parameterized for TwoLayer {
    fn visit_params(&self, p: &str, f: &mut dyn FnMut(&str, &Param)) {
        self.0.visit_params(&format!("{p}a"), f);
        self.1.visit_params(&format!("{p}b"), f);
    }
    fn visit_params_mut(&mut self, p: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.0.visit_params_mut(&format!("{p}a"), f);
        self.1.visit_params_mut(&format!("{p}b"), f);
    }
}

pub fn dense_worst(seed: u64) -> (f64, String) {
    let mut rng = seeded_rng(seed);
    let (i, hdim, o, b) = (rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..5), rng.random_range(1..4));
    let mut m = TwoLayer(DenseLayer::new(i, hdim, &mut rng), DenseLayer::new(hdim, o, &mut rng));
    m.visit_params_mut("", &mut |_, p| {
        for v in p.value.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    });
    let x = random_tensor(&mut rng, &[b, i]);
    let c = random_tensor(&mut rng, &[b, o]);
    let loss = |m: &TwoLayer| dot(&m.1.forward(&relu(&m.0.forward(&x).unwrap())).unwrap(), &c);
    m.zero_grads();
    let pre = m.0.forward_train(&x).unwrap();
    m.1.forward_train(&relu(&pre)).unwrap();
    let g = m.1.backward(&c).unwrap();
    m.0.backward(&relu_backward(&pre, &g)).unwrap();
    max_fd_error(&mut m, H, loss)
}

pub fn recurrent_worst(seed: u64) -> (f64, String) {
    let mut rng = seeded_rng(seed);
    let (i, hdim) = (rng.random_range(1..5), rng.random_range(1..6));
    let mut enc = RecurrentEncoder::new(i, hdim, &mut rng);
    let seqs: Vec<Vec<Vec<f64>>> = (0..rng.random_range(1..4))
        .map(|_| {
            (0..rng.random_range(1..6))
                .map(|_| (0..i).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect()
        })
        .collect();
    let c = random_tensor(&mut rng, &[seqs.len(), hdim]);
    let loss = |e: &RecurrentEncoder| {
        seqs.iter()
            .enumerate()
            .map(|(r, s)| e.forward(s).unwrap().iter().zip(c.row(r)).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    };
    enc.zero_grads();
    for s in &seqs {
        enc.forward_train(s).unwrap();
    }
    enc.backward(&c).unwrap();
    max_fd_error(&mut enc, H, loss)
}

pub fn mdqn_worst(seed: u64) -> (f64, String) {
    let mut rng = seeded_rng(seed);
    let vocab_rows = 4;
    let emb_dim = rng.random_range(1..4);
    let table = EmbeddingTable::from_matrix(random_tensor(&mut rng, &[vocab_rows, emb_dim]));
    let obs_dim = rng.random_range(2..7);
    let cfg = ModelConfig {
        visual_dim: rng.random_range(1..5),
        text_hidden: rng.random_range(1..4),
        trunk: (0..rng.random_range(1..4)).map(|_| rng.random_range(2..6)).collect(),
        value_head: false,
    };
    let actions = rng.random_range(1..6);
    let mut m = MdqnModel::new(&cfg, obs_dim, table, actions, rng.random()).unwrap();
    // keep biases off zero so ReLU kinks are not sitting on the evaluation point
    m.visit_params_mut("", &mut |name, p| {
        if p.trainable && name.ends_with("bias") {
            for v in p.value.data_mut() {
                *v = rng.random_range(-0.3..0.3);
            }
        }
    });
    let instructions: Vec<Arc<EncodedInstruction>> = (0..2)
        .map(|_| {
            Arc::new(EncodedInstruction {
                token_indices: (0..rng.random_range(1..4)).map(|_| rng.random_range(0..vocab_rows)).collect(),
                source_stage: None,
            })
        })
        .collect();
    let batch = rng.random_range(1..6);
    let inputs: Vec<MdqnInput> = (0..batch)
        .map(|_| MdqnInput {
            observation: Arc::new(Observation {
                visual: (0..obs_dim).map(|_| rng.random_range(0..2) as f64).collect(),
            }),
            instruction: Arc::clone(&instructions[rng.random_range(0..2)]),
        })
        .collect();
    let refs: Vec<&MdqnInput> = inputs.iter().collect();
    let taken: Vec<usize> = (0..batch).map(|_| rng.random_range(0..actions)).collect();
    let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-2.0..2.0)).collect();
    let loss = |m: &MdqnModel| {
        let q = m.q_values_batch(&refs).unwrap();
        (0..batch).map(|i| (q.row(i)[taken[i]] - targets[i]).powi(2)).sum::<f64>() / batch as f64
    };
    m.zero_grads();
    let q = m.forward_train(&refs).unwrap();
    let mut dq = Tensor::zeros(q.shape());
    for i in 0..batch {
        dq.row_mut(i)[taken[i]] = 2.0 * (q.row(i)[taken[i]] - targets[i]) / batch as f64;
    }
    m.backward(&dq).unwrap();
    max_fd_error(&mut m, H, loss)
}
