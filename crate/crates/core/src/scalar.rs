//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use ndarray::NdFloat;
use num_traits::FromPrimitive;

/// Real scalar type used for activations, weights, normalization
/// coefficients and probabilities: `f32` or `f64`.
pub trait Scalar: NdFloat + FromPrimitive + FromStr + Sum + Default + Debug + Display {
    /// Lossless-enough conversion from `f64` literals and statistics.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every Scalar")
    }

    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize converts to every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    /// Tag stored in binary artifacts so a checkpoint written as `f32`
    /// is not silently reinterpreted as `f64`.
    const WIDTH: u8;
}

impl Scalar for f32 {
    const WIDTH: u8 = 4;
}

impl Scalar for f64 {
    const WIDTH: u8 = 8;
}
