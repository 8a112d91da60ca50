//! Numeric traits the learners are written against.
//!
//! Tree fitting only needs field arithmetic and a total-enough ordering, so it
//! is generic over [`Scalar`]; that admits `f32`, `f64` and exact rationals such
//! as `num_rational::Ratio<i128>`. Metrics need a square root and are generic
//! over [`Real`].

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Arithmetic needed by split search, leaf estimates and ensemble sums.
pub trait Scalar:
    Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// Converts a row count into the scalar domain.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("row count representable in scalar type")
    }

    /// Two halves of `(a + b)`.
    fn midpoint(a: Self, b: Self) -> Self {
        (a + b) / (Self::one() + Self::one())
    }

    /// `false` for NaN or infinities; exact types are always finite.
    fn is_finite_value(&self) -> bool {
        self.to_f64().is_some_and(f64::is_finite)
    }
}

impl<T> Scalar for T where
    T: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
}

/// Floating-point scalars.
pub trait Real: Scalar + Float {}

impl<T: Scalar + Float> Real for T {}
