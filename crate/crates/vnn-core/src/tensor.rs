//! Dense multi-dimensional `f64` tensor.
//!
//! The carrier for clips, feature maps, and kernels. Storage is row-major
//! with the last axis fastest, so element `(i_0, ..., i_{r-1})` lives at flat
//! index `Σ i_k · stride_k` with `stride_{r-1} = 1`. There is no broadcasting
//! and no aliasing: `window` copies, and shape mismatches are hard errors.

use crate::error::{Result, VnnError};

/// Dense tensor: a shape plus a flat row-major `f64` buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// All-zero tensor. Every extent must be at least 1.
    pub fn zeros(shape: &[usize]) -> Result<Self> {
        validate_shape(shape)?;
        let len = shape.iter().product();
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        })
    }

    /// Wrap an existing row-major buffer.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        validate_shape(shape)?;
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(VnnError::Shape(format!(
                "shape {:?} needs {} elements, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Row-major strides, last axis fastest.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.shape.len()];
        for axis in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * self.shape[axis + 1];
        }
        strides
    }

    /// Flat offset of a multi-index, checking every axis.
    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() {
            return Err(VnnError::Shape(format!(
                "index rank {} does not match tensor rank {}",
                index.len(),
                self.shape.len()
            )));
        }
        let mut flat = 0;
        let mut stride = 1;
        for axis in (0..self.shape.len()).rev() {
            if index[axis] >= self.shape[axis] {
                return Err(VnnError::Bounds(format!(
                    "index {} out of range on axis {} (extent {})",
                    index[axis], axis, self.shape[axis]
                )));
            }
            flat += index[axis] * stride;
            stride *= self.shape[axis];
        }
        Ok(flat)
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.offset(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let flat = self.offset(index)?;
        self.data[flat] = value;
        Ok(())
    }

    /// Copy of the sub-block at `origin` with the given extents.
    ///
    /// No implicit padding: the window must lie fully inside the tensor.
    pub fn window(&self, origin: &[usize], extents: &[usize]) -> Result<Tensor> {
        if origin.len() != self.rank() || extents.len() != self.rank() {
            return Err(VnnError::Shape(format!(
                "window rank {}/{} does not match tensor rank {}",
                origin.len(),
                extents.len(),
                self.rank()
            )));
        }
        validate_shape(extents)?;
        for axis in 0..self.rank() {
            if origin[axis] + extents[axis] > self.shape[axis] {
                return Err(VnnError::Bounds(format!(
                    "window [{}, {}) exceeds extent {} on axis {}",
                    origin[axis],
                    origin[axis] + extents[axis],
                    self.shape[axis],
                    axis
                )));
            }
        }
        let mut out = Tensor::zeros(extents)?;
        let mut index = vec![0usize; self.rank()];
        let mut src = vec![0usize; self.rank()];
        for flat in 0..out.len() {
            // unravel flat into the window's multi-index
            let mut rem = flat;
            for axis in (0..self.rank()).rev() {
                index[axis] = rem % extents[axis];
                rem /= extents[axis];
            }
            for axis in 0..self.rank() {
                src[axis] = origin[axis] + index[axis];
            }
            out.data[flat] = self.data[self.offset(&src)?];
        }
        Ok(out)
    }

    /// Sum of absolute values.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).sum()
    }

    /// Largest absolute value (0 only for all-zero tensors).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }
}

fn validate_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(VnnError::Shape("shape must have at least one axis".into()));
    }
    if let Some(axis) = shape.iter().position(|&e| e == 0) {
        return Err(VnnError::Shape(format!("zero extent on axis {axis}")));
    }
    Ok(())
}
