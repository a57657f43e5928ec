//! Scalar abstraction for the numeric core.
//!
//! All value tables, payoffs and probabilities are generic over a floating
//! point scalar so the same solvers run in `f32` or `f64`. Concrete `f64`
//! aliases live at the crate root; `f64` is what the CLI and harness use.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar used for rewards, values and probabilities.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, for constants and config values.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Real")
    }

    /// Lossy conversion to `f64`, for output formatting and sampling.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for converting an `f64` literal into the working scalar.
pub fn real<R: Real>(x: f64) -> R {
    R::from_f64_lossy(x)
}
