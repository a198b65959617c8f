//! The flat, shaped real vector that carries every image and measurement.

use crate::error::{invalid, Result, SgpsError};

/// Row-major real tensor of rank 1 or 2.
///
/// Every constructor rejects non-finite entries, so a `Signal` in hand is
/// always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    data: Vec<f64>,
    shape: Vec<usize>,
}

impl Signal {
    pub fn new(data: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 2 {
            return invalid(format!("signal rank must be 1 or 2, got {}", shape.len()));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return invalid(format!(
                "shape {:?} holds {} entries but data has {}",
                shape,
                expected,
                data.len()
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SgpsError::NonFinite("Signal::new".into()));
        }
        Ok(Self { data, shape })
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::new(data, vec![n])
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            data: vec![0.0; n],
            shape: shape.to_vec(),
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            data: vec![value; n],
            shape: shape.to_vec(),
        }
    }

    /// Builds a signal with the same shape as `self` from new data, validating finiteness.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(data, self.shape.clone())
    }

    pub(crate) fn from_parts_unchecked(data: Vec<f64>, shape: Vec<usize>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { data, shape }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    /// (rows, cols) for a 2D signal; a 1D signal is treated as a single row.
    pub fn dims2(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [n] => (1, *n),
            [h, w] => (*h, *w),
            _ => unreachable!("rank checked at construction"),
        }
    }

    pub fn ensure_shape(&self, shape: &[usize]) -> Result<()> {
        if self.shape != shape {
            return Err(SgpsError::ShapeMismatch {
                expected: shape.to_vec(),
                found: self.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn ensure_same_shape(&self, other: &Signal) -> Result<()> {
        other.ensure_shape(&self.shape)
    }

    pub fn dot(&self, other: &Signal) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// `self + scale * other`
    pub fn add_scaled(&self, other: &Signal, scale: f64) -> Result<Signal> {
        self.ensure_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + scale * b)
            .collect();
        self.checked(data, "add_scaled")
    }

    pub fn sub(&self, other: &Signal) -> Result<Signal> {
        self.add_scaled(other, -1.0)
    }

    pub fn scale(&self, factor: f64) -> Result<Signal> {
        let data = self.data.iter().map(|v| v * factor).collect();
        self.checked(data, "scale")
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Signal> {
        let data = self.data.iter().map(|&v| f(v)).collect();
        self.checked(data, "map")
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Signal> {
        Signal::new(self.data, shape)
    }

    fn checked(&self, data: Vec<f64>, what: &str) -> Result<Signal> {
        if data.iter().any(|v: &f64| !v.is_finite()) {
            return Err(SgpsError::NonFinite(what.into()));
        }
        Ok(Signal {
            data,
            shape: self.shape.clone(),
        })
    }
}

impl std::ops::Index<usize> for Signal {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn mse(a: &Signal, b: &Signal) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let s: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(s / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_nan() {
        assert!(Signal::new(vec![1.0, 2.0], vec![3]).is_err());
        assert!(Signal::new(vec![1.0; 8], vec![2, 2, 2]).is_err());
        assert!(Signal::new(vec![f64::NAN], vec![1]).is_err());
        assert!(Signal::new(vec![1.0; 6], vec![2, 3]).is_ok());
    }

    #[test]
    fn arithmetic_preserves_shape() {
        let a = Signal::new(vec![1.0, 2.0, 3.0, 4.0], vec![2, 2]).unwrap();
        let b = a.scale(2.0).unwrap();
        let c = b.sub(&a).unwrap();
        assert_eq!(c, a);
        assert_eq!(c.dims2(), (2, 2));
        let d = Signal::from_vec(vec![1.0; 4]).unwrap();
        assert!(a.sub(&d).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let a = Signal::from_vec(vec![f64::MAX]).unwrap();
        assert!(matches!(a.scale(10.0), Err(SgpsError::NonFinite(_))));
    }
}
