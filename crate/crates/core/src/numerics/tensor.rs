use crate::error::{Error, Result};

use super::Scalar;

/// Dense row-major tensor, conventionally `batch x channels x height x width`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    /// Builds a tensor, rejecting length mismatches and non-finite values.
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let t = Self::from_vec_unchecked(shape, data)?;
        t.check_finite("tensor data")?;
        Ok(t)
    }

    pub(crate) fn from_vec_unchecked(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::dim(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![value; len] }
    }

    pub fn scalar(value: T) -> Self {
        Self { shape: vec![1], data: vec![value] }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: (0..len).map(&mut f).collect() }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The single element of a one-element tensor.
    pub fn item(&self) -> Result<T> {
        match self.data.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::dim(format!("expected a scalar, got shape {:?}", self.shape))),
        }
    }

    /// Splits a 4-d shape into `(n, c, h, w)`.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape.as_slice() {
            &[n, c, h, w] => Ok((n, c, h, w)),
            s => Err(Error::dim(format!("expected a 4-d tensor, got shape {s:?}"))),
        }
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(context.to_string()))
        }
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::dim(format!("cannot reshape {:?} into {shape:?}", self.shape)));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    /// Inner product of two equally shaped tensors, accumulated in `f64`.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::dim(format!(
                "dot of {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a.as_f64() * b.as_f64()).sum())
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }

    /// Sample `index` of the leading (batch) axis as a flat slice.
    pub(crate) fn batch_slice(&self, index: usize) -> &[T] {
        let per = self.data.len() / self.shape[0];
        &self.data[index * per..(index + 1) * per]
    }
}

/// A tensor with a stable name, as held by models and optimizers.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        Self { name: name.into(), value }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_length_and_non_finite() {
        assert!(matches!(
            Tensor::<f32>::new(vec![2, 2], vec![0.0; 3]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            Tensor::<f32>::new(vec![2], vec![0.0, f32::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(Tensor::<f32>::new(vec![1, 0, 2, 2], vec![]).is_ok());
    }

    #[test]
    fn item_requires_single_element() {
        assert_eq!(Tensor::scalar(3.0f64).item().unwrap(), 3.0);
        assert!(Tensor::<f64>::zeros(&[2]).item().is_err());
    }
}
