//! Scalar abstractions shared by the numeric code.
//!
//! [`Scalar`] is the minimal field-like bound: anything with exact or
//! floating arithmetic, an ordering and a way to build literals. Markov-chain
//! algebra (kernel products, stationary solves) only needs this, so it also
//! runs on rationals. [`Real`] adds `num_traits::Float` for the iterative
//! solvers, which need `max`, `powi` and tolerances.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::Neg;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

pub trait Scalar:
    Num
    + Neg<Output = Self>
    + Copy
    + PartialOrd
    + Debug
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Send
    + Sync
    + 'static
{
    fn abs_val(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }

    /// Exact ratio `num / den`.
    fn frac(num: i64, den: i64) -> Self {
        Self::from_i64(num).expect("integer literal")
            / Self::from_i64(den).expect("integer literal")
    }

    /// Literal from an `f64`; rationals get the nearest small-denominator approximation.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("representable literal")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Num
        + Neg<Output = T>
        + Copy
        + PartialOrd
        + Debug
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Send
        + Sync
        + 'static
{
}

/// Floating-point scalar: `f32` or `f64`.
pub trait Real: Scalar + Float {}

impl<T: Scalar + Float> Real for T {}

/// Maximum absolute entrywise difference of two equally sized slices.
pub fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |m, (&x, &y)| {
        let d = (x - y).abs_val();
        if d > m {
            d
        } else {
            m
        }
    })
}

/// `Σ |a_i - b_i|`.
pub fn l1_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs_val()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    #[test]
    fn literals_are_exact_for_rationals() {
        let q = Ratio::<i64>::frac(7, 18);
        assert_eq!(q, Ratio::new(7, 18));
        assert_eq!(Ratio::<i64>::frac(-1, 2).abs_val(), Ratio::new(1, 2));
    }

    #[test]
    fn distances() {
        let a = [0.5, 0.25, 0.25];
        let b = [0.25, 0.25, 0.5];
        assert_eq!(l1_distance(&a, &b), 0.5);
        assert_eq!(max_abs_diff(&a, &b), 0.25);
    }
}
