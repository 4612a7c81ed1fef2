use crate::error::{Error, Result};

use super::{Matrix, Vector};

/// P graph signals on N vertices stored column-wise, with an optional
/// exogenous input matrix of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSet {
    data: Matrix,
    inputs: Option<Matrix>,
}

impl SignalSet {
    pub fn new(data: Matrix) -> Result<Self> {
        if data.nrows() < 2 {
            return Err(Error::BadDimension { expected: 2, got: data.nrows() });
        }
        if data.ncols() < 1 {
            return Err(Error::TooFewSamples { need: 1, got: 0 });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadInput("non-finite entry in signal set".into()));
        }
        Ok(Self { data, inputs: None })
    }

    /// Attaches exogenous inputs; `u` must match the signal dimensions.
    pub fn with_inputs(mut self, u: Matrix) -> Result<Self> {
        if u.shape() != self.data.shape() {
            return Err(Error::BadDimension { expected: self.data.ncols(), got: u.ncols() });
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadInput("non-finite entry in inputs".into()));
        }
        self.inputs = Some(u);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn into_data(self) -> Matrix {
        self.data
    }

    pub fn inputs(&self) -> Option<&Matrix> {
        self.inputs.as_ref()
    }

    pub fn column(&self, k: usize) -> Vector {
        self.data.column(k).into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(SignalSet::new(Matrix::zeros(1, 3)).is_err());
        assert!(SignalSet::new(Matrix::zeros(3, 0)).is_err());
        assert!(SignalSet::new(Matrix::from_element(2, 2, f64::NAN)).is_err());
        let x = SignalSet::new(Matrix::zeros(3, 4)).unwrap();
        assert!(x.clone().with_inputs(Matrix::zeros(3, 3)).is_err());
        assert_eq!(x.with_inputs(Matrix::zeros(3, 4)).unwrap().inputs().unwrap().ncols(), 4);
    }
}
