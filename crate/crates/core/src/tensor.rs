//! Dense row-major f64 tensor. This is the only value container the learned
//! components use; everything is 64-bit to leave headroom for the
//! finite-difference gradient checks.

use crate::{CoreError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    /// Build a tensor, checking that `values.len()` matches the shape product
    /// and that every value is finite.
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(CoreError::Dimension(format!(
                "shape {:?} expects {} values, got {}",
                shape,
                expected,
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(CoreError::Numeric("non-finite value in tensor".into()));
        }
        Ok(Self { shape, values })
    }

    /// Like `new` but without the finiteness scan; used on hot paths where the
    /// caller guarantees the invariant.
    pub(crate) fn from_parts_unchecked(shape: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Self { shape, values }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self { shape, values: vec![0.0; n] }
    }

    pub fn vector(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(vec![n], values)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Bytes this tensor keeps alive (payload only).
    pub fn retained_bytes(&self) -> u64 {
        (self.values.len() * std::mem::size_of::<f64>()) as u64
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.values.iter()
    }
}

/// FNV-1a over the raw bit patterns; used for provenance fingerprints.
pub fn fingerprint(values: &[f64]) -> u64 {
    let mut acc = 0xcbf2_9ce4_8422_2325_u64;
    for v in values {
        for byte in v.to_le_bytes() {
            acc ^= byte as u64;
            acc = acc.wrapping_mul(0x100_0000_01b3);
        }
    }
    acc
}

impl std::ops::Index<usize> for Tensor {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl std::ops::IndexMut<usize> for Tensor {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_must_match_shape() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Tensor::new(vec![2], vec![1.0, f64::NAN]).is_err());
        assert!(Tensor::new(vec![2], vec![1.0, f64::INFINITY]).is_err());
    }
}
