use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar the whole crate is generic over.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Panics only if the literal is not representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("integer representable in scalar type")
    }

    /// Relative tolerance appropriate for the type's precision.
    fn rel_eps() -> Self;
}

impl Real for f32 {
    fn rel_eps() -> Self {
        1e-5
    }
}

impl Real for f64 {
    fn rel_eps() -> Self {
        1e-12
    }
}

/// Largest of a sequence, `-inf` when empty.
pub fn max_of<T: Real, I: IntoIterator<Item = T>>(it: I) -> T {
    it.into_iter().fold(T::neg_infinity(), T::max)
}

/// Smallest of a sequence, `+inf` when empty.
pub fn min_of<T: Real, I: IntoIterator<Item = T>>(it: I) -> T {
    it.into_iter().fold(T::infinity(), T::min)
}
