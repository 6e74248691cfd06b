use crate::error::{shape, Result};
use crate::scalar::Scalar;

/// Dense row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    /// Panics when `data.len()` is not the product of `shape`.
    pub fn new(data: Vec<T>, shape: Vec<usize>) -> Self {
        Self::try_new(data, shape).expect("tensor shape")
    }

    pub fn try_new(data: Vec<T>, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(crate::error::shape(format!("shape {shape:?} needs {n} values, got {}", data.len())));
        }
        let t = Self { shape, data };
        debug_assert!(t.is_finite(), "non-finite tensor");
        Ok(t)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![T::zero(); n] }
    }

    /// Stack equal-length rows into a `(rows, len)` tensor.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let len = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * len);
        for r in rows {
            if r.as_ref().len() != len {
                return Err(shape("ragged rows"));
            }
            data.extend_from_slice(r.as_ref());
        }
        Self::try_new(data, vec![rows.len(), len])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        let n = self.shape.last().copied().unwrap_or(1);
        &self.data[i * n..(i + 1) * n]
    }

    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [a, b] => Ok((a, b)),
            _ => Err(shape(format!("expected a 2-D tensor, got shape {:?}", self.shape))),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|v| U::lit(v.to_f64().unwrap_or(f64::NAN))).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_length() {
        assert!(Tensor::<f64>::try_new(vec![0.0; 5], vec![2, 3]).is_err());
        let t = Tensor::<f64>::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(t.dims2().unwrap(), (2, 2));
        assert_eq!(t.row(1), &[3.0, 4.0]);
        assert!(Tensor::<f64>::from_rows(&[vec![1.0], vec![3.0, 4.0]]).is_err());
    }
}
