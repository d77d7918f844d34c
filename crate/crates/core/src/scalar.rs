//! Numeric bound for the embedding and scoring code.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::Float;

/// Floating point type usable for embeddings, coherence weights and decoder
/// scores. Implemented for `f32` and `f64`.
pub trait Scalar: Float + FromStr + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Lossy conversion from an `f64` (priors are always stored as `f64`).
    fn from_f64(value: f64) -> Self {
        <Self as num_traits::NumCast>::from(value).unwrap_or_else(Self::nan)
    }

    fn to_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
