use crate::error::{bail, Result};

/// Dense row-major tensor of 64-bit reals.
///
/// Every extent is positive and every element is finite; constructors enforce both.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            bail!(Dimension, "tensor shape must have at least one extent");
        }
        if let Some(axis) = shape.iter().position(|&d| d == 0) {
            bail!(Dimension, "extent {axis} of shape {shape:?} is zero");
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            bail!(
                Dimension,
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            );
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            bail!(Numeric, "non-finite value {} at flat index {i}", data[i]);
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape.to_vec(), vec![0.0; n])
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(vec![1], vec![value])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::matrix(n, n, data)
    }

    /// Internal constructor for results of already-validated arithmetic.
    /// Callers must guarantee the shape invariant; finiteness is checked by the graph.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
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

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// (rows, cols) of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            other => bail!(Dimension, "expected a matrix, got shape {other:?}"),
        }
    }

    pub fn get2(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.shape[1] + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let cols = self.shape[1];
        &self.data[row * cols..(row + 1) * cols]
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data.clone())
    }

    /// Correctly rounded sum of all elements; independent of element order.
    pub fn sum(&self) -> f64 {
        super::sum::exact_sum(&self.data)
    }

    /// Little-endian byte image of the data, used for content hashing.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// `a (m×k) · b (k×n)` with a fixed accumulation order per output element.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2()?;
    let (k2, n) = b.dims2()?;
    if k != k2 {
        bail!(Dimension, "matmul inner extents differ: {m}x{k} · {k2}x{n}");
    }
    let mut out = vec![0.0; m * n];
    crate::numerics::par::for_each_row(&mut out, n, |i, row| {
        let arow = &a.data[i * k..(i + 1) * k];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    });
    Ok(Tensor::from_parts(vec![m, n], out))
}

pub fn transpose(a: &Tensor) -> Result<Tensor> {
    let (r, c) = a.dims2()?;
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a.data[i * c + j];
        }
    }
    Ok(Tensor::from_parts(vec![c, r], out))
}

/// Matrix-vector product `m (rows×cols) · v`.
pub fn matvec(m: &Tensor, v: &[f64]) -> Result<Vec<f64>> {
    let (rows, cols) = m.dims2()?;
    if v.len() != cols {
        bail!(
            Dimension,
            "matvec: matrix is {rows}x{cols} but vector has length {}",
            v.len()
        );
    }
    Ok((0..rows)
        .map(|i| {
            m.row(i)
                .iter()
                .zip(v)
                .fold(0.0, |acc, (a, b)| acc + a * b)
        })
        .collect())
}
