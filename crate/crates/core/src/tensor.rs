//! Dense row-major n-dimensional array with an optional gradient buffer.

use crate::scalar::Scalar;

/// Dense tensor: a shape, a row-major value buffer, and an optional
/// same-shape gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    values: Vec<T>,
    grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: vec![T::zero(); len],
            grad: None,
        }
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: vec![value; len],
            grad: None,
        }
    }

    /// Builds a tensor from a prepared buffer.
    ///
    /// Panics if the buffer length does not match the shape product; that
    /// is always a programming error, not an input error.
    pub fn from_values(shape: &[usize], values: Vec<T>) -> Self {
        let expect: usize = shape.iter().product();
        assert_eq!(
            values.len(),
            expect,
            "tensor shape {:?} needs {} values, got {}",
            shape,
            expect,
            values.len()
        );
        Tensor {
            shape: shape.to_vec(),
            values,
            grad: None,
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: (0..len).map(&mut f).collect(),
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    /// Stores a gradient buffer. Panics on a shape mismatch.
    pub fn set_grad(&mut self, grad: Vec<T>) {
        assert_eq!(
            grad.len(),
            self.values.len(),
            "gradient length {} does not match tensor of {} values",
            grad.len(),
            self.values.len()
        );
        self.grad = Some(grad);
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Reinterprets the buffer under a new shape with the same element count.
    pub fn reshaped(mut self, shape: &[usize]) -> Self {
        let expect: usize = shape.iter().product();
        assert_eq!(self.values.len(), expect, "reshape to {shape:?} changes element count");
        self.shape = shape.to_vec();
        // A gradient laid out for the old shape stays valid: row-major
        // buffers are position-compatible across reshapes.
        self
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.values.iter()
    }

    /// Row-major offset for a rank-2 index.
    #[inline]
    pub fn offset2(&self, i: usize, j: usize) -> usize {
        debug_assert_eq!(self.rank(), 2);
        i * self.shape[1] + j
    }

    /// Row-major offset for a rank-3 index.
    #[inline]
    pub fn offset3(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert_eq!(self.rank(), 3);
        (i * self.shape[1] + j) * self.shape[2] + k
    }

    #[inline]
    pub fn at2(&self, i: usize, j: usize) -> T {
        self.values[self.offset2(i, j)]
    }

    #[inline]
    pub fn at3(&self, i: usize, j: usize, k: usize) -> T {
        self.values[self.offset3(i, j, k)]
    }

    /// Contiguous row `(i, j, ..)` of a rank-3 tensor.
    #[inline]
    pub fn row3(&self, i: usize, j: usize) -> &[T] {
        let start = self.offset3(i, j, 0);
        &self.values[start..start + self.shape[2]]
    }

    #[inline]
    pub fn row3_mut(&mut self, i: usize, j: usize) -> &mut [T] {
        let start = self.offset3(i, j, 0);
        let width = self.shape[2];
        &mut self.values[start..start + width]
    }

    /// Contiguous row `i` of a rank-2 tensor.
    #[inline]
    pub fn row2(&self, i: usize) -> &[T] {
        let start = self.offset2(i, 0);
        &self.values[start..start + self.shape[1]]
    }

    #[inline]
    pub fn row2_mut(&mut self, i: usize) -> &mut [T] {
        let start = self.offset2(i, 0);
        let width = self.shape[1];
        &mut self.values[start..start + width]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            grad: None,
        }
    }

    /// Casts every element through `f64`, preserving shape. Gradients are
    /// not carried over.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
            grad: None,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
