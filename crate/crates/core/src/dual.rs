//! Forward-mode dual numbers carrying a full gradient vector.

use std::ops::{Add, Mul, Neg, Sub};

/// Scalar arithmetic shared by plain `f64` evaluation and [`DualVector`]
/// differentiation, so both go through the same model code.
pub trait Real:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    /// A constant with zero derivative in a space of `dim` parameters.
    fn constant(value: f64, dim: usize) -> Self;
    fn value(&self) -> f64;
    fn ln(self) -> Self;
}

impl Real for f64 {
    fn constant(value: f64, _dim: usize) -> Self {
        value
    }

    fn value(&self) -> f64 {
        *self
    }

    fn ln(self) -> Self {
        f64::ln(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    pub value: f64,
    pub partials: Vec<f64>,
}

impl DualVector {
    /// The `index`-th coordinate of a `dim`-dimensional input: unit partial.
    pub fn variable(value: f64, index: usize, dim: usize) -> Self {
        let mut partials = vec![0.0; dim];
        partials[index] = 1.0;
        Self { value, partials }
    }

    /// Seeds every coordinate of `x` as an independent variable.
    pub fn seed(x: &[f64]) -> Vec<Self> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| Self::variable(v, i, x.len()))
            .collect()
    }
}

impl Real for DualVector {
    fn constant(value: f64, dim: usize) -> Self {
        Self { value, partials: vec![0.0; dim] }
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn ln(mut self) -> Self {
        let inv = 1.0 / self.value;
        self.partials.iter_mut().for_each(|d| *d *= inv);
        self.value = self.value.ln();
        self
    }
}

impl Add for DualVector {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self.value += rhs.value;
        self.partials.iter_mut().zip(&rhs.partials).for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for DualVector {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self.value -= rhs.value;
        self.partials.iter_mut().zip(&rhs.partials).for_each(|(a, b)| *a -= b);
        self
    }
}

impl Mul for DualVector {
    type Output = Self;
    fn mul(mut self, rhs: Self) -> Self {
        let (u, v) = (self.value, rhs.value);
        self.partials
            .iter_mut()
            .zip(&rhs.partials)
            .for_each(|(a, b)| *a = *a * v + u * b);
        self.value = u * v;
        self
    }
}

impl Neg for DualVector {
    type Output = Self;
    fn neg(mut self) -> Self {
        self.value = -self.value;
        self.partials.iter_mut().for_each(|d| *d = -*d);
        self
    }
}

impl Add<f64> for DualVector {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.value += rhs;
        self
    }
}

impl Mul<f64> for DualVector {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        self.value *= rhs;
        self.partials.iter_mut().for_each(|d| *d *= rhs);
        self
    }
}
