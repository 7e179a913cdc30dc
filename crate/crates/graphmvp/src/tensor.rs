//! Dense row-major f64 tensors.
//!
//! [`Tensor`] is a plain value type; gradient tracking lives on the
//! [`crate::tape::Tape`]. Everything is 64-bit: the gradient checks that gate
//! this crate run at 1e-4..1e-6 tolerances, which f32 cannot reach.

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} implies {} elements, got {}",
                shape,
                numel,
                data.len()
            )));
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
        })
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![v],
            requires_grad: false,
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
            requires_grad: false,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
            requires_grad: false,
        }
    }

    pub fn full(shape: &[usize], v: f64) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![v; numel],
            requires_grad: false,
        }
    }

    /// Entries drawn uniformly from (-bound, +bound).
    pub fn uniform(shape: &[usize], bound: f64, rng: &mut Rng) -> Self {
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| rng.uniform_in(-bound, bound)).collect();
        Tensor {
            shape: shape.to_vec(),
            data,
            requires_grad: false,
        }
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
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

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single element of a scalar tensor.
    pub fn item(&self) -> f64 {
        assert!(self.is_scalar(), "item() on shape {:?}", self.shape);
        self.data[0]
    }

    /// Row `r` of a rank-2 tensor.
    pub fn row(&self, r: usize) -> &[f64] {
        assert_eq!(self.shape.len(), 2, "row() on shape {:?}", self.shape);
        let cols = self.shape[1];
        &self.data[r * cols..(r + 1) * cols]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// NumPy-style broadcast shape: align trailing axes; each pair of dims must
/// match or one of them be 1.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0usize; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() {
            1
        } else {
            a[i - (rank - a.len())]
        };
        let db = if i < rank - b.len() {
            1
        } else {
            b[i - (rank - b.len())]
        };
        if da != db && da != 1 && db != 1 {
            return Err(Error::Shape(format!("cannot broadcast {a:?} with {b:?}")));
        }
        out[i] = da.max(db);
    }
    Ok(out)
}

fn pad_left(shape: &[usize], rank: usize) -> Vec<usize> {
    let mut padded = vec![1usize; rank];
    padded[rank - shape.len()..].copy_from_slice(shape);
    padded
}

/// Expand `data`/`shape` to `out_shape` by repeating broadcast axes.
pub fn expand_to(data: &[f64], shape: &[usize], out_shape: &[usize]) -> Vec<f64> {
    if shape == out_shape {
        return data.to_vec();
    }
    let rank = out_shape.len();
    let padded = pad_left(shape, rank);
    let numel: usize = out_shape.iter().product();
    let mut out = vec![0.0; numel];
    let mut coords = vec![0usize; rank];
    for (flat, slot) in out.iter_mut().enumerate() {
        let mut rem = flat;
        for d in (0..rank).rev() {
            coords[d] = rem % out_shape[d];
            rem /= out_shape[d];
        }
        let mut src = 0usize;
        let mut stride = 1usize;
        for d in (0..rank).rev() {
            let c = if padded[d] == 1 { 0 } else { coords[d] };
            src += c * stride;
            stride *= padded[d];
        }
        *slot = data[src];
    }
    out
}

/// Sum a gradient of `from_shape` back down to `to_shape`, undoing broadcast.
pub fn reduce_to_shape(grad: &[f64], from_shape: &[usize], to_shape: &[usize]) -> Vec<f64> {
    if from_shape == to_shape {
        return grad.to_vec();
    }
    let rank = from_shape.len();
    let padded = pad_left(to_shape, rank);
    let to_numel: usize = to_shape.iter().product();
    let mut out = vec![0.0; to_numel];
    let mut coords = vec![0usize; rank];
    for (flat, &g) in grad.iter().enumerate() {
        let mut rem = flat;
        for d in (0..rank).rev() {
            coords[d] = rem % from_shape[d];
            rem /= from_shape[d];
        }
        let mut dst = 0usize;
        let mut stride = 1usize;
        for d in (0..rank).rev() {
            let c = if padded[d] == 1 { 0 } else { coords[d] };
            dst += c * stride;
            stride *= padded[d];
        }
        out[dst] += g;
    }
    out
}

/// Plain triple-loop matrix product of row-major buffers.
pub fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let crow = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
    c
}

pub fn transpose_raw(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_mismatch_rejected() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn broadcast_shapes() {
        assert_eq!(broadcast_shape(&[4, 3], &[3]).unwrap(), vec![4, 3]);
        assert_eq!(broadcast_shape(&[4, 3], &[4, 1]).unwrap(), vec![4, 3]);
        assert_eq!(broadcast_shape(&[4, 3], &[]).unwrap(), vec![4, 3]);
        assert!(broadcast_shape(&[4, 3], &[2]).is_err());
    }

    #[test]
    fn expand_and_reduce_are_adjoint() {
        // sum(expand(x) * g) == sum(x * reduce(g)) for all x, g
        let mut rng = Rng::from_seed(1);
        let x: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let g: Vec<f64> = (0..12).map(|_| rng.normal()).collect();
        let expanded = expand_to(&x, &[3], &[4, 3]);
        let reduced = reduce_to_shape(&g, &[4, 3], &[3]);
        let lhs: f64 = expanded.iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&reduced).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn matmul_identity() {
        let eye = vec![1.0, 0.0, 0.0, 1.0];
        let a = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(matmul_raw(&eye, &a, 2, 2, 2), a);
    }

    #[test]
    fn matmul_known_product() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![5.0, 6.0, 7.0, 8.0];
        assert_eq!(matmul_raw(&a, &b, 2, 2, 2), vec![19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn transpose_roundtrip() {
        let a: Vec<f64> = (0..6).map(|v| v as f64).collect();
        let t = transpose_raw(&a, 2, 3);
        assert_eq!(transpose_raw(&t, 3, 2), a);
    }
}
