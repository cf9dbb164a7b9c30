use super::VerifyError;
use crate::tensor::{ShapeError, Tensor};
use crate::train::ball_box;

/// Elementwise bounds `lower <= upper` over one tensor shape.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTensor {
    lower: Tensor,
    upper: Tensor,
}

impl IntervalTensor {
    pub fn new(lower: Tensor, upper: Tensor) -> Result<Self, VerifyError> {
        if lower.shape() != upper.shape() {
            return Err(ShapeError::Mismatch {
                expected: lower.shape().to_vec(),
                actual: upper.shape().to_vec(),
            }
            .into());
        }
        if let Some(i) = (0..lower.len()).find(|&i| lower.data()[i] > upper.data()[i]) {
            return Err(VerifyError::Inverted {
                index: i,
                lower: lower.data()[i],
                upper: upper.data()[i],
            });
        }
        Ok(Self { lower, upper })
    }

    pub(crate) fn from_parts(lower: Tensor, upper: Tensor) -> Self {
        debug_assert!(lower.shape() == upper.shape());
        debug_assert!(lower.data().iter().zip(upper.data()).all(|(l, u)| l <= u));
        Self { lower, upper }
    }

    /// The degenerate interval `[x, x]`.
    pub fn point(x: &Tensor) -> Self {
        Self::from_parts(x.clone(), x.clone())
    }

    /// `B(center, eps) ∩ [0, 1]`, rounded inward to f32.
    pub fn ball(center: &Tensor, eps: f64) -> Self {
        let (lo, hi) = ball_box(center, eps);
        let shape = center.shape().to_vec();
        Self::from_parts(
            Tensor::from_parts(shape.clone(), lo),
            Tensor::from_parts(shape, hi),
        )
    }

    pub fn lower(&self) -> &Tensor {
        &self.lower
    }

    pub fn upper(&self) -> &Tensor {
        &self.upper
    }

    pub fn shape(&self) -> &[usize] {
        self.lower.shape()
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn width(&self, i: usize) -> f32 {
        self.upper.data()[i] - self.lower.data()[i]
    }

    pub fn contains(&self, x: &Tensor) -> bool {
        x.shape() == self.shape()
            && x.data()
                .iter()
                .enumerate()
                .all(|(i, v)| self.lower.data()[i] <= *v && *v <= self.upper.data()[i])
    }

    /// `other ⊆ self`.
    pub fn encloses(&self, other: &IntervalTensor) -> bool {
        other.shape() == self.shape()
            && (0..self.len()).all(|i| {
                self.lower.data()[i] <= other.lower.data()[i]
                    && other.upper.data()[i] <= self.upper.data()[i]
            })
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &IntervalTensor) -> IntervalTensor {
        assert_eq!(self.shape(), other.shape());
        let lo = self
            .lower
            .data()
            .iter()
            .zip(other.lower.data())
            .map(|(a, b)| a.min(*b))
            .collect();
        let hi = self
            .upper
            .data()
            .iter()
            .zip(other.upper.data())
            .map(|(a, b)| a.max(*b))
            .collect();
        Self::from_parts(
            Tensor::from_parts(self.shape().to_vec(), lo),
            Tensor::from_parts(self.shape().to_vec(), hi),
        )
    }
}
