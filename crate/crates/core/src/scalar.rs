//! Scalar traits shared by the analytic code.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Field-like scalar for the combinatorial formulas: `f32`, `f64` or an exact
/// rational. Only ring operations, division and integer powers are needed.
pub trait Probability: Clone + Debug + PartialOrd + Num + FromPrimitive {}

impl<T> Probability for T where T: Clone + Debug + PartialOrd + Num + FromPrimitive {}

/// Floating-point scalar for formulas with real exponents (f32 or f64).
pub trait Scalar: Probability + Float + ToPrimitive + Copy + Send + Sync + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn from_u64<T: Probability>(v: u64) -> T {
    T::from_u64(v).expect("integer representable in scalar type")
}

pub(crate) fn from_f64<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("f64 representable in scalar type")
}
