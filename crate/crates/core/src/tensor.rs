//! Dense row-major `f32` tensors of rank 1 to 4.

use thiserror::Error;

pub const MAX_RANK: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShapeError {
    #[error("tensor rank {0} is outside 1..={MAX_RANK}")]
    Rank(usize),
    #[error("tensor shape {shape:?} has a zero extent")]
    ZeroExtent { shape: Vec<usize> },
    #[error("shape {shape:?} needs {expected} elements, got {actual}")]
    Length {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("expected shape {expected:?}, got {actual:?}")]
    Mismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
}

/// Owned tensor. `shape.iter().product() == data.len()` always holds and
/// every element is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

fn check_shape(shape: &[usize]) -> Result<usize, ShapeError> {
    if shape.is_empty() || shape.len() > MAX_RANK {
        return Err(ShapeError::Rank(shape.len()));
    }
    if shape.contains(&0) {
        return Err(ShapeError::ZeroExtent {
            shape: shape.to_vec(),
        });
    }
    Ok(shape.iter().product())
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, ShapeError> {
        let expected = check_shape(&shape)?;
        if expected != data.len() {
            return Err(ShapeError::Length {
                shape,
                expected,
                actual: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(ShapeError::NonFinite(i));
        }
        Ok(Self { shape, data })
    }

    /// Panics on an invalid shape; for internally computed shapes.
    pub fn zeros(shape: &[usize]) -> Self {
        let n = check_shape(shape).expect("valid tensor shape");
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: &[usize], value: f32) -> Self {
        let mut t = Self::zeros(shape);
        t.data.fill(value);
        t
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f32) -> Self {
        let mut t = Self::zeros(shape);
        for (i, v) in t.data.iter_mut().enumerate() {
            *v = f(i);
        }
        t
    }

    /// Internal constructor for values produced by finite arithmetic.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f32>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Mutable element access. Callers must keep values finite.
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self, ShapeError> {
        let n = check_shape(shape)?;
        if n != self.data.len() {
            return Err(ShapeError::Length {
                shape: shape.to_vec(),
                expected: n,
                actual: self.data.len(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn expect_shape(&self, shape: &[usize]) -> Result<(), ShapeError> {
        if self.shape != shape {
            return Err(ShapeError::Mismatch {
                expected: shape.to_vec(),
                actual: self.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    /// Largest elementwise |a - b|; shapes must agree.
    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f32, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn bitwise_eq(&self, other: &Tensor) -> bool {
        self.shape == other.shape
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            Tensor::new(vec![], vec![]),
            Err(ShapeError::Rank(0))
        ));
        assert!(matches!(
            Tensor::new(vec![1, 1, 1, 1, 1], vec![0.0]),
            Err(ShapeError::Rank(5))
        ));
        assert!(matches!(
            Tensor::new(vec![2, 0], vec![]),
            Err(ShapeError::ZeroExtent { .. })
        ));
        assert!(matches!(
            Tensor::new(vec![2, 2], vec![0.0; 3]),
            Err(ShapeError::Length { expected: 4, .. })
        ));
        assert!(matches!(
            Tensor::new(vec![2], vec![0.0, f32::NAN]),
            Err(ShapeError::NonFinite(1))
        ));
    }

    #[test]
    fn reshape_keeps_data() {
        let t = Tensor::from_fn(&[2, 3], |i| i as f32);
        let r = t.clone().reshape(&[6]).unwrap();
        assert_eq!(r.shape(), &[6]);
        assert_eq!(r.data(), t.data());
        assert!(t.reshape(&[4]).is_err());
    }
}
