use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    Real64,
    Complex128,
}

impl DType {
    /// Code used by the tensor archive.
    pub fn code(self) -> u8 {
        match self {
            DType::Real64 => 0,
            DType::Complex128 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::Real64),
            1 => Some(DType::Complex128),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Data {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

/// Dense row-major tensor of `f64` or `Complex<f64>`.
///
/// Shapes for feature maps are `(channels, elevation, azimuth)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Data,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn real(shape: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        if numel(&shape) != data.len() {
            return Err(Error::Shape(format!(
                "{} values for shape {shape:?}",
                data.len()
            )));
        }
        Ok(Self {
            shape,
            data: Data::Real(data),
        })
    }

    pub fn complex(shape: impl Into<Vec<usize>>, data: Vec<C64>) -> Result<Self> {
        let shape = shape.into();
        if numel(&shape) != data.len() {
            return Err(Error::Shape(format!(
                "{} values for shape {shape:?}",
                data.len()
            )));
        }
        Ok(Self {
            shape,
            data: Data::Complex(data),
        })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>, dtype: DType) -> Self {
        let shape = shape.into();
        let n = numel(&shape);
        let data = match dtype {
            DType::Real64 => Data::Real(vec![0.0; n]),
            DType::Complex128 => Data::Complex(vec![C64::new(0.0, 0.0); n]),
        };
        Self { shape, data }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![],
            data: Data::Real(vec![v]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.shape.clone(), self.dtype())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dtype(&self) -> DType {
        match self.data {
            Data::Real(_) => DType::Real64,
            Data::Complex(_) => DType::Complex128,
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            Data::Real(v) => v.len(),
            Data::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn data(&self) -> &Data {
        &self.data
    }

    pub fn real_data(&self) -> Result<&[f64]> {
        match &self.data {
            Data::Real(v) => Ok(v),
            Data::Complex(_) => Err(Error::Shape("expected a real tensor".into())),
        }
    }

    pub fn complex_data(&self) -> Result<&[C64]> {
        match &self.data {
            Data::Complex(v) => Ok(v),
            Data::Real(_) => Err(Error::Shape("expected a complex tensor".into())),
        }
    }

    pub fn real_data_mut(&mut self) -> Result<&mut [f64]> {
        match &mut self.data {
            Data::Real(v) => Ok(v),
            Data::Complex(_) => Err(Error::Shape("expected a real tensor".into())),
        }
    }

    pub fn complex_data_mut(&mut self) -> Result<&mut [C64]> {
        match &mut self.data {
            Data::Complex(v) => Ok(v),
            Data::Real(_) => Err(Error::Shape("expected a complex tensor".into())),
        }
    }

    pub fn into_real(self) -> Result<Vec<f64>> {
        match self.data {
            Data::Real(v) => Ok(v),
            Data::Complex(_) => Err(Error::Shape("expected a real tensor".into())),
        }
    }

    pub fn into_complex(self) -> Result<Vec<C64>> {
        match self.data {
            Data::Complex(v) => Ok(v),
            Data::Real(_) => Err(Error::Shape("expected a complex tensor".into())),
        }
    }

    /// Single value of a one-element real tensor.
    pub fn item(&self) -> Result<f64> {
        match &self.data {
            Data::Real(v) if v.len() == 1 => Ok(v[0]),
            _ => Err(Error::Shape(format!(
                "expected a real scalar, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn is_finite(&self) -> bool {
        match &self.data {
            Data::Real(v) => v.iter().all(|x| x.is_finite()),
            Data::Complex(v) => v.iter().all(|x| x.re.is_finite() && x.im.is_finite()),
        }
    }

    pub fn reshape(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if numel(&shape) != self.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} to {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Number of real scalars (complex entries count twice).
    pub fn real_dof(&self) -> usize {
        match self.dtype() {
            DType::Real64 => self.len(),
            DType::Complex128 => 2 * self.len(),
        }
    }

    /// `self += other`; both tensors must have identical shape and dtype.
    pub(crate) fn accumulate(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "cannot accumulate {:?} into {:?}",
                other.shape, self.shape
            )));
        }
        match (&mut self.data, &other.data) {
            (Data::Real(a), Data::Real(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            (Data::Complex(a), Data::Complex(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            _ => return Err(Error::Shape("dtype mismatch in accumulation".into())),
        }
        Ok(())
    }
}
