use crate::error::{Error, Result};

/// Dense row-major tensor of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "tensor shape {shape:?} has a zero dimension"
            )));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::dim("tensor", numel, data.len()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::filled(shape, 1.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// Builds a matrix from nested rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Self::matrix(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
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

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Rows and columns of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::dim("dims2", "rank 2", format!("{:?}", self.shape))),
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let cols = *self.shape.last().unwrap_or(&1);
        &self.data[r * cols..(r + 1) * cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let cols = *self.shape.last().unwrap_or(&1);
        &mut self.data[r * cols..(r + 1) * cols]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != self.data.len() {
            return Err(Error::dim("reshape", numel, self.data.len()));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }
}

// Dense kernels shared by the tape and the direct evaluation helpers.

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `x · wᵀ` for `x: n×k`, `w: m×k`, giving `n×m`.
pub(crate) fn matmul_nt(x: &[f64], n: usize, w: &[f64], m: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for (xr, or) in x.chunks_exact(k).zip(out.chunks_exact_mut(m)) {
        for (o, wr) in or.iter_mut().zip(w.chunks_exact(k)) {
            *o = dot(xr, wr);
        }
    }
    out
}

/// Returns `W·x + b` for `W: m×n`.
pub fn affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, n) = w.dims2()?;
    if x.numel() != n {
        return Err(Error::dim("affine input", n, x.numel()));
    }
    if b.numel() != m {
        return Err(Error::dim("affine bias", m, b.numel()));
    }
    let mut out = matmul_nt(x.data(), 1, w.data(), m, n);
    for (o, bi) in out.iter_mut().zip(b.data()) {
        *o += bi;
    }
    Ok(Tensor::vector(out))
}

pub fn tanh_map(x: &Tensor) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        data: x.data.iter().map(|v| v.tanh()).collect(),
    }
}

/// Max-shifted softmax over all entries.
pub fn softmax(z: &Tensor) -> Result<Tensor> {
    if z.numel() < 2 {
        return Err(Error::InvalidArgument(
            "softmax needs at least 2 entries".into(),
        ));
    }
    Ok(Tensor::vector(softmax_slice(z.data())))
}

pub(crate) fn softmax_slice(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn cross_entropy(p: &Tensor, label: usize) -> Result<f64> {
    if label >= p.numel() {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {} classes",
            p.numel()
        )));
    }
    Ok(-p.data()[label].max(PROB_FLOOR).ln())
}
