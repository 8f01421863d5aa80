//! Floating point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the rate, power and solver code is written against.
///
/// Implemented for `f32` and `f64`. Random draws are always produced in `f64`
/// and narrowed with [`Scalar::lit`], so a seed yields the same realization
/// regardless of the working precision.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` constant into the working type.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable in scalar type")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Absolute feasibility slack for the per-user power budget, widened to a few
/// ulps of the budget itself when the working type is too coarse for 1e-9 W.
pub(crate) fn budget_tolerance<T: Scalar>(budget: T) -> T {
    let abs = T::lit(1e-9);
    let ulps = budget.abs() * T::epsilon() * T::lit(16.0);
    abs.max(ulps)
}
