//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `max(requested, k * epsilon)`: tolerances below the type's resolution are unattainable.
    #[inline]
    fn tol_floor(requested: Self, k: f64) -> Self {
        requested.max(Self::epsilon() * Self::lit(k))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Pairwise summation over a slice with a fixed tree shape.
///
/// Results depend only on the slice contents and order, never on thread scheduling.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const LEAF: usize = 8;
    if xs.len() <= LEAF {
        return xs.iter().fold(T::zero(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
