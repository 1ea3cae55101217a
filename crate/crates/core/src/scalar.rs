//! Numeric abstraction shared by every solver in the crate.
//!
//! Distances, tour lengths, QUBO coefficients and annealing energies are all
//! expressed in one cost type. Integer-valued TSPLIB instances are exact in
//! both `f32` (up to 2^24) and `f64` (up to 2^53).

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point cost type: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for constants and parsed input.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    /// Widening conversion used for statistics and reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Relative closeness check, `|a - b| <= rel * max(1, |a|, |b|)`.
pub fn approx_eq<T: Scalar>(a: T, b: T, rel: f64) -> bool {
    let scale = T::one().max(a.abs()).max(b.abs());
    (a - b).abs() <= T::of(rel) * scale
}
