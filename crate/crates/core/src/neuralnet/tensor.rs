use std::fmt;

use super::NetError;

/// Dense row-major `f64` tensor.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("len", &self.data.len())
            .finish()
    }
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NetError> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(NetError::ShapeMismatch {
                op: "from_vec",
                expected: shape.to_vec(),
                found: vec![data.len()],
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// A 1-d tensor holding `data`.
    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Rows of a 2-d tensor (1 for vectors).
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[0],
            _ => 1,
        }
    }

    /// Columns of a 2-d tensor (the length for vectors).
    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap_or(&0)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self, NetError> {
        let len: usize = shape.iter().product();
        if len != self.data.len() {
            return Err(NetError::ShapeMismatch {
                op: "reshape",
                expected: shape.to_vec(),
                found: self.shape,
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Stacks equal-length rows into a `rows × cols` matrix.
    pub fn stack_rows<'a, I>(rows: I, cols: usize) -> Result<Self, NetError>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut data = Vec::new();
        let mut n = 0;
        for row in rows {
            if row.len() != cols {
                return Err(NetError::ShapeMismatch {
                    op: "stack_rows",
                    expected: vec![cols],
                    found: vec![row.len()],
                });
            }
            data.extend_from_slice(row);
            n += 1;
        }
        Ok(Tensor {
            shape: vec![n, cols],
            data,
        })
    }

    /// Row-wise concatenation of two matrices with equal row counts; `a` takes the low columns.
    pub fn concat_cols(a: &Tensor, b: &Tensor) -> Result<Tensor, NetError> {
        if a.rows() != b.rows() {
            return Err(NetError::ShapeMismatch {
                op: "concat_cols",
                expected: vec![a.rows()],
                found: vec![b.rows()],
            });
        }
        let rows = a.rows();
        let cols = a.cols() + b.cols();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            data.extend_from_slice(a.row(r));
            data.extend_from_slice(b.row(r));
        }
        Ok(Tensor {
            shape: vec![rows, cols],
            data,
        })
    }

    /// Splits columns at `at`, returning (left, right).
    pub fn split_cols(&self, at: usize) -> (Tensor, Tensor) {
        let rows = self.rows();
        let cols = self.cols();
        let mut left = Vec::with_capacity(rows * at);
        let mut right = Vec::with_capacity(rows * (cols - at));
        for r in 0..rows {
            let row = self.row(r);
            left.extend_from_slice(&row[..at]);
            right.extend_from_slice(&row[at..]);
        }
        (
            Tensor {
                shape: vec![rows, at],
                data: left,
            },
            Tensor {
                shape: vec![rows, cols - at],
                data: right,
            },
        )
    }

    /// Order-sensitive FNV-1a digest over shape and raw bits.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for d in &self.shape {
            eat(&(*d as u64).to_le_bytes());
        }
        for x in &self.data {
            eat(&x.to_bits().to_le_bytes());
        }
        h
    }
}

/// Concatenates two vectors; `a` occupies the low indices.
pub fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out
}

/// Transpose flag for [`gemm`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trans {
    No,
    Yes,
}

/// `c = alpha * op(a) * op(b) + beta * c` over 2-d tensors.
pub fn gemm(
    alpha: f64,
    a: &Tensor,
    ta: Trans,
    b: &Tensor,
    tb: Trans,
    beta: f64,
    c: &mut Tensor,
) -> Result<(), NetError> {
    let (ar, ac) = (a.rows(), a.cols());
    let (br, bc) = (b.rows(), b.cols());
    let (m, k) = match ta {
        Trans::No => (ar, ac),
        Trans::Yes => (ac, ar),
    };
    let (k2, n) = match tb {
        Trans::No => (br, bc),
        Trans::Yes => (bc, br),
    };
    if k != k2 || c.rows() != m || c.cols() != n || c.len() != m * n {
        return Err(NetError::ShapeMismatch {
            op: "gemm",
            expected: vec![m, k, n],
            found: vec![k2, c.rows(), c.cols()],
        });
    }
    if m == 0 || n == 0 {
        return Ok(());
    }
    if k == 0 {
        c.data.iter_mut().for_each(|x| *x *= beta);
        return Ok(());
    }
    let (rsa, csa) = match ta {
        Trans::No => (ac as isize, 1),
        Trans::Yes => (1, ac as isize),
    };
    let (rsb, csb) = match tb {
        Trans::No => (bc as isize, 1),
        Trans::Yes => (1, bc as isize),
    };
    // SAFETY: dimensions and strides were checked against the buffers above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn gemm_matches_naive_with_transposes() {
        let a = Tensor::from_vec(&[2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Tensor::from_vec(&[3, 2], vec![7., 8., 9., 10., 11., 12.]).unwrap();
        let mut c = Tensor::zeros(&[2, 2]);
        gemm(1.0, &a, Trans::No, &b, Trans::No, 0.0, &mut c).unwrap();
        assert_eq!(c.data(), naive(a.data(), b.data(), 2, 3, 2).as_slice());

        // same product through transposed storage
        let bt = Tensor::from_vec(&[2, 3], vec![7., 9., 11., 8., 10., 12.]).unwrap();
        let mut c2 = Tensor::zeros(&[2, 2]);
        gemm(1.0, &a, Trans::No, &bt, Trans::Yes, 0.0, &mut c2).unwrap();
        assert_eq!(c2.data(), c.data());

        let at = Tensor::from_vec(&[3, 2], vec![1., 4., 2., 5., 3., 6.]).unwrap();
        let mut c3 = Tensor::zeros(&[2, 2]);
        gemm(1.0, &at, Trans::Yes, &b, Trans::No, 0.0, &mut c3).unwrap();
        assert_eq!(c3.data(), c.data());
    }

    #[test]
    fn gemm_rejects_bad_shapes() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 2]);
        let mut c = Tensor::zeros(&[2, 2]);
        assert!(gemm(1.0, &a, Trans::No, &b, Trans::No, 0.0, &mut c).is_err());
    }

    #[test]
    fn concat_places_first_operand_low() {
        assert_eq!(concat(&[1.0, 2.0], &[3.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(concat(&[], &[4.0, 5.0]), vec![4.0, 5.0]);
        let v = concat(&vec![0.5; 512], &vec![1.5; 64]);
        assert_eq!(v.len(), 576);
        assert_eq!(v[511], 0.5);
        assert_eq!(v[512], 1.5);
    }

    #[test]
    fn split_inverts_concat_cols() {
        let a = Tensor::from_vec(&[2, 2], vec![1., 2., 3., 4.]).unwrap();
        let b = Tensor::from_vec(&[2, 1], vec![5., 6.]).unwrap();
        let c = Tensor::concat_cols(&a, &b).unwrap();
        assert_eq!(c.data(), &[1., 2., 5., 3., 4., 6.]);
        let (l, r) = c.split_cols(2);
        assert_eq!(l, a);
        assert_eq!(r, b);
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::from_vec(&[2, 2], vec![1.0; 3]).is_err());
    }
}
