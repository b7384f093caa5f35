use rand::Rng;

use super::param::join;
use super::{glorot_uniform, NetError, Param, Parameterized, Tensor};

pub const DEFAULT_HIDDEN_DIM: usize = 64;

/// Gated recurrent sequence summarizer (GRU cell, Cho et al. form):
///
/// ```text
/// z  = σ(Wz x + Uz h + bz)
/// r  = σ(Wr x + Ur h + br)
/// n  = tanh(Wn x + Un (r ⊙ h) + bn)
/// h' = (1 - z) ⊙ n + z ⊙ h
/// ```
///
/// The fold starts from the zero state and the final state is the encoding.
#[derive(Clone, Debug)]
pub struct RecurrentEncoder {
    input_dim: usize,
    hidden_dim: usize,
    // order: z, r, n
    w: [Param; 3],
    u: [Param; 3],
    b: [Param; 3],
    tape: Vec<GruTrace>,
}

/// Per-sequence record of the forward fold needed for backpropagation through time.
#[derive(Clone, Debug, Default)]
pub struct GruTrace {
    xs: Vec<Vec<f64>>,
    hs: Vec<Vec<f64>>,
    zs: Vec<Vec<f64>>,
    rs: Vec<Vec<f64>>,
    ns: Vec<Vec<f64>>,
}

const GATES: [&str; 3] = ["z", "r", "n"];

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn matvec_acc(m: &Tensor, v: &[f64], out: &mut [f64]) {
    let cols = m.cols();
    for (o, row) in out.iter_mut().zip(m.data().chunks_exact(cols)) {
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += mᵀ v`
fn matvec_t_acc(m: &Tensor, v: &[f64], out: &mut [f64]) {
    let cols = m.cols();
    for (row, &s) in m.data().chunks_exact(cols).zip(v) {
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * s;
        }
    }
}

/// `g += v uᵀ`
fn outer_acc(g: &mut Tensor, v: &[f64], u: &[f64]) {
    let cols = g.cols();
    for (row, &s) in g.data_mut().chunks_exact_mut(cols).zip(v) {
        for (o, a) in row.iter_mut().zip(u) {
            *o += s * a;
        }
    }
}

impl RecurrentEncoder {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let w = std::array::from_fn(|_| Param::new(glorot_uniform(hidden_dim, input_dim, rng)));
        let u = std::array::from_fn(|_| Param::new(glorot_uniform(hidden_dim, hidden_dim, rng)));
        let b = std::array::from_fn(|_| Param::new(Tensor::zeros(&[hidden_dim])));
        RecurrentEncoder {
            input_dim,
            hidden_dim,
            w,
            u,
            b,
            tape: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// One recurrence application; returns `(h', z, r, n)`.
    fn cell(&self, x: &[f64], h: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let hd = self.hidden_dim;
        let gate = |g: usize, hin: &[f64]| {
            let mut a = self.b[g].value.data().to_vec();
            matvec_acc(&self.w[g].value, x, &mut a);
            matvec_acc(&self.u[g].value, hin, &mut a);
            a
        };
        let z: Vec<f64> = gate(0, h).into_iter().map(sigmoid).collect();
        let r: Vec<f64> = gate(1, h).into_iter().map(sigmoid).collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        let n: Vec<f64> = gate(2, &rh).into_iter().map(f64::tanh).collect();
        let mut hn = vec![0.0; hd];
        for i in 0..hd {
            hn[i] = (1.0 - z[i]) * n[i] + z[i] * h[i];
        }
        (hn, z, r, n)
    }

    fn check_sequence(&self, seq: &[Vec<f64>]) -> Result<(), NetError> {
        if seq.is_empty() {
            return Err(NetError::EmptySequence);
        }
        if let Some(bad) = seq.iter().find(|x| x.len() != self.input_dim) {
            return Err(NetError::ShapeMismatch {
                op: "recurrent_forward",
                expected: vec![self.input_dim],
                found: vec![bad.len()],
            });
        }
        Ok(())
    }

    /// Folds the sequence left to right from the zero state.
    pub fn forward(&self, seq: &[Vec<f64>]) -> Result<Vec<f64>, NetError> {
        self.check_sequence(seq)?;
        let mut h = vec![0.0; self.hidden_dim];
        for x in seq {
            h = self.cell(x, &h).0;
        }
        Ok(h)
    }

    /// Like [`RecurrentEncoder::forward`] but records the fold for backward.
    pub fn forward_train(&mut self, seq: &[Vec<f64>]) -> Result<Vec<f64>, NetError> {
        self.check_sequence(seq)?;
        let mut trace = GruTrace::default();
        let mut h = vec![0.0; self.hidden_dim];
        trace.hs.push(h.clone());
        for x in seq {
            let (hn, z, r, n) = self.cell(x, &h);
            trace.xs.push(x.clone());
            trace.zs.push(z);
            trace.rs.push(r);
            trace.ns.push(n);
            trace.hs.push(hn.clone());
            h = hn;
        }
        self.tape.push(trace);
        Ok(h)
    }

    /// Backpropagates `dh` (one row per recorded sequence, in recording order).
    pub fn backward(&mut self, dh: &Tensor) -> Result<(), NetError> {
        if self.tape.is_empty() {
            return Err(NetError::NoRecordedForward);
        }
        if dh.rows() != self.tape.len() || dh.cols() != self.hidden_dim {
            return Err(NetError::ShapeMismatch {
                op: "recurrent_backward",
                expected: vec![self.tape.len(), self.hidden_dim],
                found: dh.shape().to_vec(),
            });
        }
        let tape = std::mem::take(&mut self.tape);
        for (i, trace) in tape.iter().enumerate() {
            self.backward_one(trace, dh.row(i));
        }
        Ok(())
    }

    fn backward_one(&mut self, t: &GruTrace, dh_final: &[f64]) {
        let hd = self.hidden_dim;
        let mut dh = dh_final.to_vec();
        for step in (0..t.xs.len()).rev() {
            let (x, h) = (&t.xs[step], &t.hs[step]);
            let (z, r, n) = (&t.zs[step], &t.rs[step], &t.ns[step]);
            let mut dh_prev = vec![0.0; hd];
            let mut da_z = vec![0.0; hd];
            let mut da_n = vec![0.0; hd];
            for i in 0..hd {
                let dn = dh[i] * (1.0 - z[i]);
                let dz = dh[i] * (h[i] - n[i]);
                dh_prev[i] = dh[i] * z[i];
                da_n[i] = dn * (1.0 - n[i] * n[i]);
                da_z[i] = dz * z[i] * (1.0 - z[i]);
            }
            let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
            let mut d_rh = vec![0.0; hd];
            matvec_t_acc(&self.u[2].value, &da_n, &mut d_rh);
            let mut da_r = vec![0.0; hd];
            for i in 0..hd {
                dh_prev[i] += d_rh[i] * r[i];
                da_r[i] = d_rh[i] * h[i] * r[i] * (1.0 - r[i]);
            }
            matvec_t_acc(&self.u[0].value, &da_z, &mut dh_prev);
            matvec_t_acc(&self.u[1].value, &da_r, &mut dh_prev);

            for (g, da, hin) in [(0, &da_z, h), (1, &da_r, h), (2, &da_n, &rh)] {
                outer_acc(&mut self.w[g].grad, da, x);
                outer_acc(&mut self.u[g].grad, da, hin);
                for (gb, d) in self.b[g].grad.data_mut().iter_mut().zip(da.iter()) {
                    *gb += d;
                }
            }
            dh = dh_prev;
        }
    }

    pub fn clear_tape(&mut self) {
        self.tape.clear();
    }

    /// Rebuilds an encoder from named gate tensors (`w_z`, `u_z`, `b_z`, ...).
    pub fn from_parts(w: [Tensor; 3], u: [Tensor; 3], b: [Tensor; 3]) -> Result<Self, NetError> {
        let hidden = b[0].len();
        let input = w[0].cols();
        for g in 0..3 {
            let ok = w[g].shape() == [hidden, input]
                && u[g].shape() == [hidden, hidden]
                && b[g].len() == hidden;
            if !ok {
                return Err(NetError::ShapeMismatch {
                    op: "recurrent_from_parts",
                    expected: vec![hidden, input],
                    found: w[g].shape().to_vec(),
                });
            }
        }
        let [w0, w1, w2] = w;
        let [u0, u1, u2] = u;
        let [b0, b1, b2] = b;
        Ok(RecurrentEncoder {
            input_dim: input,
            hidden_dim: hidden,
            w: [Param::new(w0), Param::new(w1), Param::new(w2)],
            u: [Param::new(u0), Param::new(u1), Param::new(u2)],
            b: [
                Param::new(b0.reshape(&[hidden])?),
                Param::new(b1.reshape(&[hidden])?),
                Param::new(b2.reshape(&[hidden])?),
            ],
            tape: Vec::new(),
        })
    }
}

impl Parameterized for RecurrentEncoder {
    fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        for (g, gate) in GATES.iter().enumerate() {
            f(&join(prefix, &format!("w_{gate}")), &self.w[g]);
            f(&join(prefix, &format!("u_{gate}")), &self.u[g]);
            f(&join(prefix, &format!("b_{gate}")), &self.b[g]);
        }
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        for (g, gate) in GATES.iter().enumerate() {
            f(&join(prefix, &format!("w_{gate}")), &mut self.w[g]);
            f(&join(prefix, &format!("u_{gate}")), &mut self.u[g]);
            f(&join(prefix, &format!("b_{gate}")), &mut self.b[g]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::seeded_rng;

    /// Independent scalar-by-scalar unroll of the same recurrence.
    fn unrolled(enc: &RecurrentEncoder, seq: &[Vec<f64>]) -> Vec<f64> {
        let hd = enc.hidden_dim;
        let id = enc.input_dim;
        let at = |p: &Param, i: usize, j: usize, cols: usize| p.value.data()[i * cols + j];
        let mut h = vec![0.0; hd];
        for x in seq {
            let mut z = vec![0.0; hd];
            let mut r = vec![0.0; hd];
            for i in 0..hd {
                let mut az = enc.b[0].value.data()[i];
                let mut ar = enc.b[1].value.data()[i];
                for j in 0..id {
                    az += at(&enc.w[0], i, j, id) * x[j];
                    ar += at(&enc.w[1], i, j, id) * x[j];
                }
                for j in 0..hd {
                    az += at(&enc.u[0], i, j, hd) * h[j];
                    ar += at(&enc.u[1], i, j, hd) * h[j];
                }
                z[i] = 1.0 / (1.0 + (-az).exp());
                r[i] = 1.0 / (1.0 + (-ar).exp());
            }
            let mut next = vec![0.0; hd];
            for i in 0..hd {
                let mut an = enc.b[2].value.data()[i];
                for j in 0..id {
                    an += at(&enc.w[2], i, j, id) * x[j];
                }
                for j in 0..hd {
                    an += at(&enc.u[2], i, j, hd) * r[j] * h[j];
                }
                let n = an.tanh();
                next[i] = (1.0 - z[i]) * n + z[i] * h[i];
            }
            h = next;
        }
        h
    }

    #[test]
    fn default_hidden_is_64() {
        let enc = RecurrentEncoder::new(50, DEFAULT_HIDDEN_DIM, &mut seeded_rng(1));
        let h = enc.forward(&[vec![0.1; 50]]).unwrap();
        assert_eq!(h.len(), 64);
    }

    #[test]
    fn single_step_from_zero_state() {
        let enc = RecurrentEncoder::new(2, 2, &mut seeded_rng(4));
        let seq = vec![vec![0.3, -0.8]];
        let h = enc.forward(&seq).unwrap();
        assert_eq!(h, unrolled(&enc, &seq));
    }

    #[test]
    fn three_steps_match_manual_unroll() {
        let enc = RecurrentEncoder::new(2, 2, &mut seeded_rng(9));
        let seq = vec![vec![1.0, 0.0], vec![-0.5, 0.25], vec![0.7, 0.9]];
        let h = enc.forward(&seq).unwrap();
        let expect = unrolled(&enc, &seq);
        for (a, b) in h.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
        assert_eq!(h, enc.forward(&seq).unwrap());
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let enc = RecurrentEncoder::new(2, 2, &mut seeded_rng(0));
        assert_eq!(enc.forward(&[]).unwrap_err(), NetError::EmptySequence);
    }

    #[test]
    fn backward_needs_a_tape() {
        let mut enc = RecurrentEncoder::new(2, 2, &mut seeded_rng(0));
        assert_eq!(
            enc.backward(&Tensor::zeros(&[1, 2])).unwrap_err(),
            NetError::NoRecordedForward
        );
    }
}
